#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fibersense/sim/waterfall.hpp"

namespace fibersense::detect {

/// Per-bin mean-square over the block's traces.
std::vector<double> block_energy(const sim::WaterfallBlock& block);

/// Per-bin exponential moving mean and variance of block energy.
///
/// With `warm_start` set, bin x uses the weight max(alpha, 1/(n+1)) where n is
/// the number of updates it has already absorbed, and its first update seeds
/// mean = e, var = 0. This makes the early estimate a plain running average
/// instead of a slow climb from zero. Without it every update uses `alpha`.
struct BackgroundModel {
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<std::uint32_t> updates;
  double alpha = 0.01;
  std::size_t warmup_blocks_remaining = 0;
  double sigma_floor = 1e-6;
  bool warm_start = false;

  static BackgroundModel zeros(std::size_t n_bins, double alpha = 0.01,
                               std::size_t warmup_blocks = 0, double sigma_floor = 1e-6,
                               bool warm_start = false);

  std::size_t size() const { return mean.size(); }
  double sigma(std::size_t bin) const { return std::max(std::sqrt(var[bin]), sigma_floor); }
  bool warming_up() const { return warmup_blocks_remaining > 0; }
  /// Weight the next update of `bin` will use.
  double weight(std::size_t bin) const;
};

/// mean' = (1-a) mean + a e;  var' = (1-a) var + a (e - mean)^2 with the
/// pre-update mean. Frozen bins (freeze[x] != 0) are left untouched; an empty
/// freeze span freezes nothing. Decrements the warmup counter once per call.
void update_background(BackgroundModel& bg, std::span<const double> energy,
                       std::span<const std::uint8_t> freeze = {});

}  // namespace fibersense::detect
