#include "fibersense/detect/activity.hpp"

#include <algorithm>

#include "fibersense/errors.hpp"

namespace fibersense::detect {

ActivityMap activity_scores(const BackgroundModel& bg, std::span<const double> energy,
                            std::span<const std::uint8_t> previously_active,
                            const Hysteresis& thresholds) {
  if (bg.warming_up()) throw WarmupError("background model is still warming up");
  const std::size_t n = bg.size();
  if (energy.size() != n || (!previously_active.empty() && previously_active.size() != n)) {
    throw ArgumentError("activity_scores: dimension mismatch");
  }
  ActivityMap map;
  map.z.resize(n);
  map.excess.resize(n);
  map.active.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    map.excess[x] = energy[x] - bg.mean[x];
    map.z[x] = map.excess[x] / bg.sigma(x);
    const bool was_on = !previously_active.empty() && previously_active[x] != 0;
    map.active[x] = (map.z[x] >= thresholds.k_on || (was_on && map.z[x] >= thresholds.k_off)) ? 1 : 0;
  }
  return map;
}

std::vector<SpatialCluster> segment_active_bins(const ActivityMap& activity, double bin_size_m,
                                                const ClusterParams& params) {
  std::vector<SpatialCluster> clusters;
  const std::size_t n = activity.active.size();

  auto finish = [&](std::size_t first, std::size_t last) {
    if (last - first + 1 < params.min_width_bins) return;
    SpatialCluster c;
    c.x_start_bin = first;
    c.x_end_bin = last;
    c.x_start_m = static_cast<double>(first) * bin_size_m;
    c.x_end_m = static_cast<double>(last + 1) * bin_size_m;
    double weighted = 0.0;
    c.peak_z = activity.z[first];
    for (std::size_t x = first; x <= last; ++x) {
      c.peak_z = std::max(c.peak_z, activity.z[x]);
      const double w = std::max(activity.excess[x], 0.0);
      c.total_excess_energy += w;
      weighted += w * (static_cast<double>(x) + 0.5) * bin_size_m;
    }
    c.centroid_m = c.total_excess_energy > 0.0 ? weighted / c.total_excess_energy
                                               : 0.5 * (c.x_start_m + c.x_end_m);
    clusters.push_back(c);
  };

  bool open = false;
  std::size_t first = 0;
  std::size_t last = 0;
  for (std::size_t x = 0; x < n; ++x) {
    if (activity.active[x] == 0) continue;
    if (open && x - last <= params.gap_bins) {
      last = x;
      continue;
    }
    if (open) finish(first, last);
    open = true;
    first = last = x;
  }
  if (open) finish(first, last);
  return clusters;
}

std::vector<std::uint8_t> dilate(std::span<const std::uint8_t> mask, std::size_t radius) {
  const std::size_t n = mask.size();
  std::vector<std::uint8_t> out(n, 0);
  // Sweep forward and backward carrying the distance to the nearest set bin.
  std::size_t since = radius + 1;
  for (std::size_t x = 0; x < n; ++x) {
    since = mask[x] != 0 ? 0 : since + 1;
    if (since <= radius) out[x] = 1;
  }
  since = radius + 1;
  for (std::size_t x = n; x-- > 0;) {
    since = mask[x] != 0 ? 0 : since + 1;
    if (since <= radius) out[x] = 1;
  }
  return out;
}

}  // namespace fibersense::detect
