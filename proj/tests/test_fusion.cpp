#include "subt_beacon/fusion.hpp"

#include "oracles.hpp"
#include "subt_beacon/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace subt_beacon;

namespace {

core::CameraIntrinsics test_intrinsics() {
  core::CameraIntrinsics intr;
  intr.fx = intr.fy = 320;
  intr.cx = 320;
  intr.cy = 240;
  intr.width = 640;
  intr.height = 480;
  return intr;
}

/// Pixel column whose bearing is theta under the test intrinsics.
double u_for_theta(double theta, const core::CameraIntrinsics& intr) {
  return intr.cx - intr.fx * std::tan(theta);
}

}  // namespace

TEST_CASE("solve_assignment trivial cases") {
  Eigen::MatrixXd one(1, 1);
  one << 0.7;
  auto a = fusion::solve_assignment(one);
  CHECK(a.col_of_row == std::vector<int>{0});
  CHECK(a.total_cost == doctest::Approx(0.7));

  Eigen::MatrixXd two(2, 2);
  two << 0, 1, 1, 0;
  a = fusion::solve_assignment(two);
  CHECK(a.col_of_row == std::vector<int>{0, 1});
  CHECK(a.total_cost == doctest::Approx(0.0));
}

TEST_CASE("solve_assignment rejects impossible and malformed inputs") {
  Eigen::MatrixXd tall(3, 2);
  tall.setZero();
  CHECK_THROWS_AS(fusion::solve_assignment(tall), std::invalid_argument);
  Eigen::MatrixXd neg(1, 2);
  neg << -1, 0;
  CHECK_THROWS_AS(fusion::solve_assignment(neg), std::invalid_argument);
  Eigen::MatrixXd inf(1, 2);
  inf << std::numeric_limits<double>::infinity(), 0;
  CHECK_THROWS_AS(fusion::solve_assignment(inf), std::invalid_argument);
}

TEST_CASE("solve_assignment matches brute force on random rectangles") {
  rng::Stream rnd(101);
  for (int trial = 0; trial < 400; ++trial) {
    const int rows = 1 + static_cast<int>(rnd.integer(6));
    const int cols = rows + 1;
    Eigen::MatrixXd cost(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) cost(i, j) = rnd.uniform(0, core::kPi);
    }
    const auto got = fusion::solve_assignment(cost);
    const auto want = oracles::brute_force_assignment(cost);
    CHECK(got.total_cost == doctest::Approx(want.best_cost).epsilon(1e-12));
    if (want.second_cost - want.best_cost >= 1e-9) {
      CHECK(got.col_of_row == want.best_cols);
    }
  }
}

TEST_CASE("solve_assignment handles square and very rectangular shapes") {
  rng::Stream rnd(103);
  for (int trial = 0; trial < 100; ++trial) {
    const int rows = 1 + static_cast<int>(rnd.integer(4));
    const int cols = rows + static_cast<int>(rnd.integer(4));
    Eigen::MatrixXd cost(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) cost(i, j) = rnd.uniform(0, 2);
    }
    const auto got = fusion::solve_assignment(cost);
    const auto want = oracles::brute_force_assignment(cost);
    CHECK(got.total_cost == doctest::Approx(want.best_cost).epsilon(1e-12));
  }
}

TEST_CASE("pair_by_bearing picks the nearest compatible centroid") {
  const auto pairing =
      fusion::pair_by_bearing({0.10}, {0.12, 0.50}, 0.15);
  CHECK(pairing.m_of_n == std::vector<int>{0});
  CHECK(pairing.total_cost == doctest::Approx(0.02));
}

TEST_CASE("identical bearing sets pair with zero cost, identity mapping") {
  const std::vector<double> thetas{-0.4, 0.0, 0.3};
  const auto pairing = fusion::pair_by_bearing(thetas, thetas, 0.15);
  CHECK(pairing.m_of_n == std::vector<int>{0, 1, 2});
  CHECK(pairing.total_cost == doctest::Approx(0.0));
}

TEST_CASE("the gate rejects pairings across the angle threshold") {
  const auto pairing = fusion::pair_by_bearing({0.0}, {0.3}, 0.15);
  CHECK(pairing.m_of_n == std::vector<int>{-1});
}

TEST_CASE("wrapped differences pair across the +/- pi seam") {
  const auto pairing = fusion::pair_by_bearing({core::kPi - 0.01},
                                               {-core::kPi + 0.01}, 0.15);
  CHECK(pairing.m_of_n == std::vector<int>{0});
  CHECK(pairing.total_cost == doctest::Approx(0.02));
}

TEST_CASE("more camera clusters than LiDAR clusters still pairs the best ones") {
  const auto pairing = fusion::pair_by_bearing({0.0, 0.5, -0.5}, {0.02}, 0.15);
  CHECK(pairing.m_of_n == std::vector<int>{0, -1, -1});
}

TEST_CASE("a far spurious LiDAR centroid never changes existing pairs") {
  rng::Stream rnd(107);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rnd.integer(4));
    std::vector<double> theta_n, theta_m;
    for (int i = 0; i < n; ++i) {
      const double base = rnd.uniform(-1.0, 1.0);
      theta_n.push_back(base);
      theta_m.push_back(base + rnd.uniform(-0.01, 0.01));
    }
    const auto before = fusion::pair_by_bearing(theta_n, theta_m, 0.15);
    theta_m.push_back(2.8);  // far behind, outside every gate
    const auto after = fusion::pair_by_bearing(theta_n, theta_m, 0.15);
    CHECK(before.m_of_n == after.m_of_n);
    CHECK(before.total_cost == doctest::Approx(after.total_cost));
  }
}

TEST_CASE("permuting inputs permutes but does not change the pairing set") {
  rng::Stream rnd(109);
  const int n = 5;
  std::vector<double> theta_n, theta_m;
  for (int i = 0; i < n; ++i) {
    theta_n.push_back(rnd.uniform(-1, 1));
    theta_m.push_back(theta_n.back() + rnd.uniform(-0.05, 0.05));
  }
  theta_m.push_back(rnd.uniform(-1, 1));
  const auto base = fusion::pair_by_bearing(theta_n, theta_m, 0.15);
  std::set<std::pair<int, int>> base_pairs;
  for (int i = 0; i < n; ++i) {
    if (base.m_of_n[i] >= 0) base_pairs.insert({i, base.m_of_n[i]});
  }

  const std::vector<int> perm{3, 1, 4, 0, 2};
  std::vector<double> shuffled(n);
  for (int i = 0; i < n; ++i) shuffled[i] = theta_n[perm[i]];
  const auto permuted = fusion::pair_by_bearing(shuffled, theta_m, 0.15);
  std::set<std::pair<int, int>> permuted_pairs;
  for (int i = 0; i < n; ++i) {
    if (permuted.m_of_n[i] >= 0) permuted_pairs.insert({perm[i], permuted.m_of_n[i]});
  }
  CHECK(base_pairs == permuted_pairs);
  CHECK(base.total_cost == doctest::Approx(permuted.total_cost));
}

TEST_CASE("pair_clusters partitions every centroid into pairs or unpaired") {
  const auto intr = test_intrinsics();
  const std::vector<Eigen::Vector2d> n_centroids{
      {u_for_theta(0.10, intr), 200.0}, {u_for_theta(-0.25, intr), 220.0}};
  const std::vector<Eigen::Vector3d> m_centroids{
      {2 * std::cos(0.11), 2 * std::sin(0.11), 1.0},
      {3 * std::cos(-0.26), 3 * std::sin(-0.26), 1.1},
      {4 * std::cos(2.0), 4 * std::sin(2.0), 0.9}};
  const auto frame =
      fusion::pair_clusters(n_centroids, intr, m_centroids, 0.15, 12345);
  CHECK(frame.t_us == 12345);
  REQUIRE(frame.pairs.size() == 2);
  CHECK(frame.unpaired_event_centroids.empty());
  REQUIRE(frame.unpaired_lidar_centroids.size() == 1);
  CHECK(frame.unpaired_lidar_centroids[0].z() == doctest::Approx(0.9));
  for (const auto& pair : frame.pairs) {
    CHECK(pair.pair_cost <= 0.15);
    CHECK(pair.pair_cost ==
          doctest::Approx(std::abs(core::wrap_angle(pair.theta_n - pair.theta_m))));
  }
  CHECK(frame.pairs.size() + frame.unpaired_event_centroids.size() ==
        n_centroids.size());
  CHECK(frame.pairs.size() + frame.unpaired_lidar_centroids.size() ==
        m_centroids.size());
}

TEST_CASE("pair_clusters with empty inputs yields empty frames") {
  const auto intr = test_intrinsics();
  auto frame = fusion::pair_clusters({}, intr, {}, 0.15, 0);
  CHECK(frame.pairs.empty());
  CHECK(frame.unpaired_event_centroids.empty());
  CHECK(frame.unpaired_lidar_centroids.empty());

  frame = fusion::pair_clusters({}, intr, {{1, 0, 0}}, 0.15, 0);
  CHECK(frame.pairs.empty());
  CHECK(frame.unpaired_lidar_centroids.size() == 1);
}

TEST_CASE("more event clusters than LiDAR clusters still yields a partition") {
  const auto intr = test_intrinsics();
  const std::vector<Eigen::Vector2d> n_centroids{
      {u_for_theta(0.0, intr), 200.0},
      {u_for_theta(0.3, intr), 210.0},
      {u_for_theta(-0.3, intr), 220.0}};
  const std::vector<Eigen::Vector3d> m_centroids{
      {2 * std::cos(0.29), 2 * std::sin(0.29), 1.0}};
  const auto frame =
      fusion::pair_clusters(n_centroids, intr, m_centroids, 0.15, 0);
  REQUIRE(frame.pairs.size() == 1);
  CHECK(frame.pairs[0].theta_n == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(frame.unpaired_event_centroids.size() == 2);
  CHECK(frame.unpaired_lidar_centroids.empty());
}

TEST_CASE("an on-axis LiDAR centroid goes straight to unpaired") {
  const auto intr = test_intrinsics();
  const auto frame = fusion::pair_clusters({{320.0, 240.0}}, intr,
                                           {{0, 0, 1.2}}, 0.15, 0);
  CHECK(frame.pairs.empty());
  CHECK(frame.unpaired_event_centroids.size() == 1);
  CHECK(frame.unpaired_lidar_centroids.size() == 1);
}

TEST_CASE("selector keeps the detection nearest the previous bearing") {
  const auto intr = test_intrinsics();
  fusion::SingleTargetSelector selector;

  fusion::DetectionFrame frame;
  fusion::PairedDetection near;
  near.lidar_point = {2 * std::cos(0.1), 2 * std::sin(0.1), 1};
  near.theta_m = 0.1;
  fusion::PairedDetection far;
  far.lidar_point = {5 * std::cos(1.2), 5 * std::sin(1.2), 1};
  far.theta_m = 1.2;
  frame.pairs = {far, near};

  // Bootstrap: smallest range wins.
  auto focus = selector.select(frame, intr);
  REQUIRE(focus.pair.has_value());
  CHECK(focus.pair->theta_m == doctest::Approx(0.1));

  // Now the far pair drifts close to the tracked bearing and the near one
  // jumps away; association follows the bearing, not the range.
  frame.pairs[0].theta_m = 0.15;
  frame.pairs[1].theta_m = -1.0;
  focus = selector.select(frame, intr);
  REQUIRE(focus.pair.has_value());
  CHECK(focus.pair->theta_m == doctest::Approx(0.15));
}

TEST_CASE("selector falls back to bearings when only one stream detects") {
  const auto intr = test_intrinsics();
  fusion::SingleTargetSelector selector;

  fusion::DetectionFrame camera_only;
  camera_only.unpaired_event_centroids = {{u_for_theta(0.2, intr), 100.0},
                                          {u_for_theta(-0.7, intr), 100.0}};
  auto focus = selector.select(camera_only, intr);
  REQUIRE(focus.event_bearing.has_value());
  CHECK(*focus.event_bearing == doctest::Approx(0.2).epsilon(1e-9));

  fusion::DetectionFrame lidar_only;
  lidar_only.unpaired_lidar_centroids = {
      {3 * std::cos(0.25), 3 * std::sin(0.25), 1.0},
      {2 * std::cos(-2.0), 2 * std::sin(-2.0), 1.0}};
  focus = selector.select(lidar_only, intr);
  REQUIRE(focus.lidar_centroid.has_value());
  // Nearest the tracked bearing (0.2), not the nearer-in-range one.
  CHECK(core::lidar_bearing(focus.lidar_centroid->x(), focus.lidar_centroid->y())
            .theta == doctest::Approx(0.25));

  fusion::DetectionFrame empty;
  focus = selector.select(empty, intr);
  CHECK_FALSE(focus.pair.has_value());
  CHECK_FALSE(focus.event_bearing.has_value());
  CHECK_FALSE(focus.lidar_centroid.has_value());
}
