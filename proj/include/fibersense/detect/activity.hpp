#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fibersense/detect/background.hpp"

namespace fibersense::detect {

struct Hysteresis {
  double k_on = 5.0;
  double k_off = 3.0;
};

struct ActivityMap {
  std::vector<double> z;
  /// e - mean, kept for centroid weighting.
  std::vector<double> excess;
  std::vector<std::uint8_t> active;
};

/// z = (e - mean) / max(sqrt(var), sigma_floor). A bin turns on at z >= k_on
/// and stays on while z >= k_off. `previously_active` may be empty (all off).
/// Throws WarmupError while the background is still warming up.
ActivityMap activity_scores(const BackgroundModel& bg, std::span<const double> energy,
                            std::span<const std::uint8_t> previously_active = {},
                            const Hysteresis& thresholds = {});

struct SpatialCluster {
  std::size_t x_start_bin = 0;
  std::size_t x_end_bin = 0;  // inclusive
  double x_start_m = 0.0;
  double x_end_m = 0.0;
  double centroid_m = 0.0;
  double peak_z = 0.0;
  double total_excess_energy = 0.0;

  std::size_t width_bins() const { return x_end_bin - x_start_bin + 1; }
};

struct ClusterParams {
  std::size_t gap_bins = 3;
  std::size_t min_width_bins = 2;
};

/// Groups active bins whose distance is <= gap_bins; drops clusters narrower
/// than min_width_bins. The centroid weights bin centers by positive excess.
std::vector<SpatialCluster> segment_active_bins(const ActivityMap& activity, double bin_size_m,
                                                const ClusterParams& params = {});

/// Marks every bin within `radius` of a set bin.
std::vector<std::uint8_t> dilate(std::span<const std::uint8_t> mask, std::size_t radius);

}  // namespace fibersense::detect
