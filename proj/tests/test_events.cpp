#include "subt_beacon/events.hpp"

#include "oracles.hpp"
#include "subt_beacon/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <thread>

using namespace subt_beacon;

namespace {

events::EventPipelineConfig cfg_default() { return {}; }

events::Event ev(std::int64_t t, int x, int y, int p = 1) {
  return {t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
          static_cast<std::int8_t>(p)};
}

}  // namespace

TEST_CASE("two positive events 100 ms apart give 10 Hz") {
  events::FrequencyMap map(64, 64);
  const auto cfg = cfg_default();
  map.update(ev(0, 5, 5), cfg);
  auto passing = map.band_filter(8, 12, 0);
  CHECK(passing.empty());  // first-ever event assigns no frequency
  map.update(ev(100000, 5, 5), cfg);
  passing = map.band_filter(8, 12, 100000);
  REQUIRE(passing.size() == 1);
  CHECK(passing[0].freq_hz == doctest::Approx(10.0));
}

TEST_CASE("only the latest interval counts") {
  events::FrequencyMap map(64, 64);
  const auto cfg = cfg_default();
  map.update(ev(0, 3, 3), cfg);
  map.update(ev(100000, 3, 3), cfg);
  map.update(ev(150000, 3, 3), cfg);
  const auto passing = map.band_filter(15, 25, 150000);
  REQUIRE(passing.size() == 1);
  CHECK(passing[0].freq_hz == doctest::Approx(20.0));
}

TEST_CASE("negative polarity does not enter the frequency estimate") {
  events::FrequencyMap map(64, 64);
  const auto cfg = cfg_default();
  map.update(ev(0, 2, 2, 1), cfg);
  map.update(ev(50000, 2, 2, -1), cfg);  // would halve the interval if counted
  map.update(ev(100000, 2, 2, 1), cfg);
  const auto passing = map.band_filter(8, 12, 100000);
  REQUIRE(passing.size() == 1);
  CHECK(passing[0].freq_hz == doctest::Approx(10.0));
}

TEST_CASE("duplicate timestamp at a pixel is discarded") {
  events::FrequencyMap map(64, 64);
  const auto cfg = cfg_default();
  map.update(ev(0, 1, 1), cfg);
  map.update(ev(100000, 1, 1), cfg);
  map.update(ev(100000, 1, 1), cfg);  // same pixel, same time
  const auto passing = map.band_filter(8, 12, 100000);
  REQUIRE(passing.size() == 1);
  CHECK(passing[0].freq_hz == doctest::Approx(10.0));
}

TEST_CASE("non-monotone stream is rejected") {
  events::FrequencyMap map(64, 64);
  const auto cfg = cfg_default();
  map.update(ev(1000, 1, 1), cfg);
  CHECK_THROWS_AS(map.update(ev(999, 1, 1), cfg), std::invalid_argument);
  CHECK_THROWS_AS(map.update(ev(0, 70, 1), cfg), std::invalid_argument);
}

TEST_CASE("band filter excludes out-of-band and stale pixels") {
  events::FrequencyMap map(64, 64);
  const auto cfg = cfg_default();
  // 10 Hz pixel and a 100 Hz pixel.
  map.update(ev(0, 1, 1), cfg);
  map.update(ev(0, 2, 1), cfg);
  map.update(ev(10000, 2, 1), cfg);
  map.update(ev(100000, 1, 1), cfg);
  auto passing = map.band_filter(8, 12, 100000);
  REQUIRE(passing.size() == 1);
  CHECK(passing[0].x == 1);
  // Past the staleness deadline the 10 Hz pixel disappears too.
  const std::int64_t later = 100000 + cfg.staleness_window_us() + 1;
  CHECK(map.band_filter(8, 12, later).empty());
}

TEST_CASE("ema smoothing is available but off by default") {
  events::EventPipelineConfig cfg;
  cfg.freq_ema_alpha = 0.5;
  events::FrequencyMap map(64, 64);
  map.update(ev(0, 1, 1), cfg);
  map.update(ev(100000, 1, 1), cfg);   // 10 Hz
  map.update(ev(150000, 1, 1), cfg);   // raw 20 Hz -> ema 15 Hz
  const auto passing = map.band_filter(1, 100, 150000);
  REQUIRE(passing.size() == 1);
  CHECK(passing[0].freq_hz == doctest::Approx(15.0));
}

TEST_CASE("vertex-sharing pixels join a cluster, gaps split them") {
  std::vector<events::PixelFreq> passing{{0, 0, 10.0}, {1, 1, 10.0}};
  auto clusters = events::cluster_pixels(passing, 2.0, 1);
  CHECK(clusters.size() == 1);

  passing = {{0, 0, 10.0}, {2, 0, 10.0}};
  clusters = events::cluster_pixels(passing, 2.0, 1);
  CHECK(clusters.size() == 2);
}

TEST_CASE("frequency gap larger than eps_f splits adjacent pixels") {
  const std::vector<events::PixelFreq> passing{{0, 0, 10.0}, {1, 0, 13.0}};
  auto clusters = events::cluster_pixels(passing, 2.0, 1);
  CHECK(clusters.size() == 2);
  clusters = events::cluster_pixels(passing, 3.5, 1);
  CHECK(clusters.size() == 1);
}

TEST_CASE("clusters below min_cluster_px are dropped") {
  const std::vector<events::PixelFreq> passing{
      {0, 0, 10}, {1, 0, 10}, {2, 0, 10}, {10, 10, 10}};
  const auto clusters = events::cluster_pixels(passing, 2.0, 3);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].pixels.size() == 3);
}

TEST_CASE("clustering matches the flood-fill oracle on random masks") {
  rng::Stream rnd(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<events::PixelFreq> passing;
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        if (rnd.uniform() < 0.3) {
          passing.push_back({static_cast<std::uint16_t>(x),
                             static_cast<std::uint16_t>(y), 10.0});
        }
      }
    }
    const auto clusters = events::cluster_pixels(passing, 2.0, 1);
    auto expected = oracles::flood_fill_components(passing);
    std::vector<std::vector<std::array<std::uint16_t, 2>>> got;
    for (const auto& c : clusters) got.push_back(c.pixels);
    std::sort(got.begin(), got.end());
    CHECK(got == expected);
  }
}

TEST_CASE("cluster output is a partition of the input") {
  rng::Stream rnd(13);
  std::vector<events::PixelFreq> passing;
  for (int i = 0; i < 400; ++i) {
    passing.push_back({static_cast<std::uint16_t>(rnd.integer(48)),
                       static_cast<std::uint16_t>(rnd.integer(48)),
                       rnd.uniform(5, 25)});
  }
  const auto clusters = events::cluster_pixels(passing, 2.0, 1);
  std::set<std::pair<int, int>> seen;
  std::size_t total = 0;
  for (const auto& c : clusters) {
    for (const auto& p : c.pixels) {
      CHECK(seen.insert({p[0], p[1]}).second);  // disjoint
      ++total;
    }
  }
  std::set<std::pair<int, int>> input;
  for (const auto& p : passing) input.insert({p.x, p.y});
  CHECK(total == input.size());  // union covers everything
}

TEST_CASE("cluster output is independent of input order") {
  rng::Stream rnd(17);
  std::set<std::pair<int, int>> used;
  std::vector<events::PixelFreq> passing;
  while (passing.size() < 300) {
    const auto x = static_cast<std::uint16_t>(rnd.integer(32));
    const auto y = static_cast<std::uint16_t>(rnd.integer(32));
    if (!used.insert({x, y}).second) continue;
    passing.push_back({x, y, rnd.uniform(8, 12)});
  }
  const auto a = events::cluster_pixels(passing, 1.0, 2);
  // Shuffle deterministically.
  for (std::size_t i = passing.size(); i > 1; --i) {
    std::swap(passing[i - 1], passing[rnd.integer(i)]);
  }
  const auto b = events::cluster_pixels(passing, 1.0, 2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pixels == b[i].pixels);
    CHECK(a[i].centroid == b[i].centroid);
  }
}

TEST_CASE("centroids are the pixel means and stay inside the bounding box") {
  // Centroid arithmetic on given pixel sets.
  events::EventCluster single{{{0, 0}}, {0, 0}, 10};
  events::EventCluster corners{{{0, 0}, {2, 0}, {0, 2}, {2, 2}}, {0, 0}, 10};
  events::EventCluster skew{{{1, 1}, {2, 1}, {3, 4}}, {0, 0}, 10};
  const auto centroids = events::cluster_centroids({single, corners, skew});
  REQUIRE(centroids.size() == 3);
  CHECK(centroids[0] == Eigen::Vector2d(0, 0));
  CHECK(centroids[1] == Eigen::Vector2d(1, 1));
  CHECK(centroids[2] == Eigen::Vector2d(2, 2));
  CHECK_THROWS_AS(events::cluster_centroids({events::EventCluster{}}),
                  std::invalid_argument);

  rng::Stream rnd(29);
  std::vector<events::PixelFreq> passing;
  for (int i = 0; i < 200; ++i) {
    passing.push_back({static_cast<std::uint16_t>(rnd.integer(30)),
                       static_cast<std::uint16_t>(rnd.integer(30)),
                       rnd.uniform(8, 12)});
  }
  for (const auto& c : events::cluster_pixels(passing, 5.0, 1)) {
    int min_x = 1 << 16, max_x = -1, min_y = 1 << 16, max_y = -1;
    for (const auto& p : c.pixels) {
      min_x = std::min<int>(min_x, p[0]);
      max_x = std::max<int>(max_x, p[0]);
      min_y = std::min<int>(min_y, p[1]);
      max_y = std::max<int>(max_y, p[1]);
    }
    CHECK(c.centroid.x() >= min_x);
    CHECK(c.centroid.x() <= max_x);
    CHECK(c.centroid.y() >= min_y);
    CHECK(c.centroid.y() <= max_y);
  }
}

TEST_CASE("cluster of one pixel sits on that pixel") {
  const std::vector<events::PixelFreq> passing{{7, 9, 10}};
  const auto clusters = events::cluster_pixels(passing, 2.0, 1);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].centroid.x() == 7.0);
  CHECK(clusters[0].centroid.y() == 9.0);
}

TEST_CASE("two interleaved blink populations separate into disjoint bands") {
  // 10 Hz and 20 Hz pixel populations, interleaved checkerboard-style.
  events::FrequencyMap map(32, 32);
  const auto cfg = cfg_default();
  std::vector<std::pair<int, int>> pop10, pop20;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      ((x + y) % 2 == 0 ? pop10 : pop20).push_back({x, y});
    }
  }
  for (std::int64_t t = 0; t <= 400000; t += 50000) {
    for (auto [x, y] : pop20) map.update(ev(t, x, y), cfg);
    if (t % 100000 == 0) {
      for (auto [x, y] : pop10) map.update(ev(t, x, y), cfg);
    }
  }
  const auto band10 = map.band_filter(8, 12, 400000);
  const auto band20 = map.band_filter(16, 24, 400000);
  CHECK(band10.size() == pop10.size());
  CHECK(band20.size() == pop20.size());
  for (const auto& p : band10) {
    CHECK(((p.x + p.y) % 2) == 0);
    CHECK(p.freq_hz == doctest::Approx(10.0));
  }
  for (const auto& p : band20) {
    CHECK(((p.x + p.y) % 2) == 1);
    CHECK(p.freq_hz == doctest::Approx(20.0));
  }
}

TEST_CASE("snapshot reads are consistent while a writer ingests") {
  events::FrequencyMap map(64, 64);
  const auto cfg = cfg_default();
  std::thread writer([&] {
    for (int i = 0; i < 20000; ++i) {
      map.update(ev(i * 10, i % 64, (i / 64) % 64), cfg);
    }
  });
  std::size_t last = 0;
  for (int i = 0; i < 50; ++i) {
    const auto snap = map.snapshot();
    const auto passing = snap.band_filter(1, 10000, 0);
    CHECK(passing.size() >= last);  // writer only ever adds state here
    last = passing.size();
  }
  writer.join();
  CHECK(map.last_time_us() == 10 * 19999);
}
