#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <mutex>
#include <vector>

namespace subt_beacon::events {

/// One asynchronous brightness-change record.
struct Event {
  std::int64_t t_us = 0;
  std::uint16_t x = 0, y = 0;
  std::int8_t polarity = 1;  // +1 brightness increase, -1 decrease
};

struct EventPipelineConfig {
  double band_lo_hz = 8.0;
  double band_hi_hz = 12.0;
  double eps_f_hz = 2.0;          // max frequency gap between joined pixels
  double staleness_factor = 2.5;  // window = factor / band_lo
  int min_cluster_px = 3;
  double freq_ema_alpha = 0.0;    // 0 = last interval only

  std::int64_t staleness_window_us() const {
    return static_cast<std::int64_t>(staleness_factor / band_lo_hz * 1e6);
  }
  void validate() const;
};

struct PixelFreq {
  std::uint16_t x = 0, y = 0;
  double freq_hz = 0;
};

/// Connected group of band-passing pixels with its image centroid.
struct EventCluster {
  std::vector<std::array<std::uint16_t, 2>> pixels;  // (x, y), sorted by (y, x)
  Eigen::Vector2d centroid{0, 0};
  double mean_frequency_hz = 0;
};

/// Per-pixel inter-event frequency state. Frequencies are measured between
/// consecutive positive events only; entries expire after the staleness
/// window. Single writer; snapshot() hands a consistent copy to a reader
/// on another thread.
class FrequencyMap {
 public:
  FrequencyMap(int width, int height);
  FrequencyMap(FrequencyMap&& other) noexcept;
  FrequencyMap& operator=(FrequencyMap&&) = delete;

  /// Ingests one event. The stream must be nondecreasing in time (ties
  /// allowed); a repeated timestamp at the same pixel is discarded.
  void update(const Event& e, const EventPipelineConfig& cfg);

  /// Non-stale pixels with f_lo <= f <= f_hi, in (y, x) raster order.
  std::vector<PixelFreq> band_filter(double f_lo, double f_hi,
                                     std::int64_t now_us) const;

  FrequencyMap snapshot() const;

  int width() const { return width_; }
  int height() const { return height_; }
  std::int64_t last_time_us() const;

 private:
  int width_, height_;
  std::vector<std::int64_t> last_t_us_;    // -1 = no positive event yet
  std::vector<double> freq_hz_;            // 0 = fewer than two events
  std::vector<std::int64_t> deadline_us_;
  std::int64_t last_global_t_us_ = -1;
  mutable std::mutex mu_;
};

/// Partitions the passing pixels into maximal components where adjacency
/// means 8-neighborhood and a frequency gap within eps_f between the two
/// joining pixels. Components smaller than min_cluster_px are dropped.
/// Output order is (min-y, min-x) of each cluster, independent of input
/// order.
std::vector<EventCluster> cluster_pixels(const std::vector<PixelFreq>& passing,
                                         double eps_f_hz, int min_cluster_px);

std::vector<Eigen::Vector2d> cluster_centroids(
    const std::vector<EventCluster>& clusters);

}  // namespace subt_beacon::events
