#include "subt_beacon/events.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace subt_beacon::events {

void EventPipelineConfig::validate() const {
  if (!(band_lo_hz > 0) || !(band_lo_hz < band_hi_hz)) {
    throw std::invalid_argument("event config: need 0 < band_lo < band_hi");
  }
  if (eps_f_hz < 0) throw std::invalid_argument("event config: eps_f < 0");
  if (staleness_factor <= 0) {
    throw std::invalid_argument("event config: staleness_factor <= 0");
  }
  if (min_cluster_px < 1) {
    throw std::invalid_argument("event config: min_cluster_px < 1");
  }
  if (freq_ema_alpha < 0 || freq_ema_alpha > 1) {
    throw std::invalid_argument("event config: ema alpha outside [0, 1]");
  }
}

FrequencyMap::FrequencyMap(int width, int height)
    : width_(width),
      height_(height),
      last_t_us_(static_cast<std::size_t>(width) * height, -1),
      freq_hz_(static_cast<std::size_t>(width) * height, 0.0),
      deadline_us_(static_cast<std::size_t>(width) * height, -1) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("frequency map: non-positive dimensions");
  }
}

FrequencyMap::FrequencyMap(FrequencyMap&& other) noexcept
    : width_(other.width_), height_(other.height_) {
  std::lock_guard<std::mutex> lock(other.mu_);
  last_t_us_ = std::move(other.last_t_us_);
  freq_hz_ = std::move(other.freq_hz_);
  deadline_us_ = std::move(other.deadline_us_);
  last_global_t_us_ = other.last_global_t_us_;
}

void FrequencyMap::update(const Event& e, const EventPipelineConfig& cfg) {
  std::lock_guard<std::mutex> lock(mu_);
  if (e.x >= width_ || e.y >= height_) {
    throw std::invalid_argument("event pixel outside sensor bounds");
  }
  if (e.t_us < last_global_t_us_) {
    throw std::invalid_argument("non-monotone event timestamps");
  }
  last_global_t_us_ = e.t_us;
  if (e.polarity <= 0) return;  // rising edges only

  const std::size_t idx = static_cast<std::size_t>(e.y) * width_ + e.x;
  const std::int64_t prev = last_t_us_[idx];
  if (prev >= 0) {
    const std::int64_t dt = e.t_us - prev;
    if (dt == 0) return;  // duplicate timestamp, discard
    const double f = 1e6 / static_cast<double>(dt);
    if (cfg.freq_ema_alpha > 0 && freq_hz_[idx] > 0) {
      freq_hz_[idx] =
          cfg.freq_ema_alpha * f + (1.0 - cfg.freq_ema_alpha) * freq_hz_[idx];
    } else {
      freq_hz_[idx] = f;
    }
  }
  last_t_us_[idx] = e.t_us;
  deadline_us_[idx] = e.t_us + cfg.staleness_window_us();
}

std::vector<PixelFreq> FrequencyMap::band_filter(double f_lo, double f_hi,
                                                 std::int64_t now_us) const {
  if (!(f_lo > 0) || !(f_lo < f_hi)) {
    throw std::invalid_argument("band_filter: need 0 < f_lo < f_hi");
  }
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<PixelFreq> out;
  std::size_t idx = 0;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x, ++idx) {
      const double f = freq_hz_[idx];
      if (f <= 0 || deadline_us_[idx] < now_us) continue;
      if (f < f_lo || f > f_hi) continue;
      out.push_back({static_cast<std::uint16_t>(x),
                     static_cast<std::uint16_t>(y), f});
    }
  }
  return out;
}

FrequencyMap FrequencyMap::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  FrequencyMap copy(width_, height_);
  copy.last_t_us_ = last_t_us_;
  copy.freq_hz_ = freq_hz_;
  copy.deadline_us_ = deadline_us_;
  copy.last_global_t_us_ = last_global_t_us_;
  return copy;
}

std::int64_t FrequencyMap::last_time_us() const {
  std::lock_guard<std::mutex> lock(mu_);
  return last_global_t_us_;
}

namespace {

std::uint64_t pixel_key(std::uint16_t x, std::uint16_t y) {
  return (static_cast<std::uint64_t>(y) << 16) | x;
}

}  // namespace

std::vector<EventCluster> cluster_pixels(const std::vector<PixelFreq>& passing,
                                         double eps_f_hz, int min_cluster_px) {
  // Index the pixels; first occurrence wins if a pixel repeats.
  std::unordered_map<std::uint64_t, std::size_t> index;
  index.reserve(passing.size() * 2);
  std::vector<std::size_t> order;  // unique pixels in input order
  order.reserve(passing.size());
  for (std::size_t i = 0; i < passing.size(); ++i) {
    if (index.emplace(pixel_key(passing[i].x, passing[i].y), i).second) {
      order.push_back(i);
    }
  }
  // Deterministic traversal: seed flood fills in (y, x) order.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = passing[a];
    const auto& pb = passing[b];
    return pa.y != pb.y ? pa.y < pb.y : pa.x < pb.x;
  });

  std::vector<char> visited(passing.size(), 0);
  std::vector<EventCluster> clusters;
  std::vector<std::size_t> stack;
  for (std::size_t seed : order) {
    if (visited[seed]) continue;
    visited[seed] = 1;
    stack.assign(1, seed);
    EventCluster cluster;
    double sum_x = 0, sum_y = 0, sum_f = 0;
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const PixelFreq& p = passing[cur];
      cluster.pixels.push_back({p.x, p.y});
      sum_x += p.x;
      sum_y += p.y;
      sum_f += p.freq_hz;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = p.x + dx;
          const int ny = p.y + dy;
          if (nx < 0 || ny < 0 || nx > 0xffff || ny > 0xffff) continue;
          const auto it = index.find(pixel_key(
              static_cast<std::uint16_t>(nx), static_cast<std::uint16_t>(ny)));
          if (it == index.end() || visited[it->second]) continue;
          const PixelFreq& q = passing[it->second];
          if (std::abs(p.freq_hz - q.freq_hz) <= eps_f_hz) {
            visited[it->second] = 1;
            stack.push_back(it->second);
          }
        }
      }
    }
    if (static_cast<int>(cluster.pixels.size()) < min_cluster_px) continue;
    std::sort(cluster.pixels.begin(), cluster.pixels.end(),
              [](const auto& a, const auto& b) {
                return a[1] != b[1] ? a[1] < b[1] : a[0] < b[0];
              });
    const double n = static_cast<double>(cluster.pixels.size());
    cluster.centroid = Eigen::Vector2d(sum_x / n, sum_y / n);
    cluster.mean_frequency_hz = sum_f / n;
    clusters.push_back(std::move(cluster));
  }
  auto sort_key = [](const EventCluster& c) {
    std::uint16_t min_x = 0xffff;
    for (const auto& p : c.pixels) min_x = std::min(min_x, p[0]);
    return std::make_pair(c.pixels.front()[1], min_x);  // pixels sorted by y
  };
  std::stable_sort(clusters.begin(), clusters.end(),
                   [&](const EventCluster& a, const EventCluster& b) {
                     return sort_key(a) < sort_key(b);
                   });
  return clusters;
}

std::vector<Eigen::Vector2d> cluster_centroids(
    const std::vector<EventCluster>& clusters) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) {
    if (c.pixels.empty()) {
      throw std::invalid_argument("cluster_centroids: empty cluster");
    }
    double sum_x = 0, sum_y = 0;
    for (const auto& p : c.pixels) {
      sum_x += p[0];
      sum_y += p[1];
    }
    const double n = static_cast<double>(c.pixels.size());
    out.emplace_back(sum_x / n, sum_y / n);
  }
  return out;
}

}  // namespace subt_beacon::events
