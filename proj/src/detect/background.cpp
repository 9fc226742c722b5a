#include "fibersense/detect/background.hpp"

#include <string>

#include "fibersense/errors.hpp"

namespace fibersense::detect {

std::vector<double> block_energy(const sim::WaterfallBlock& block) {
  std::vector<double> e(block.n_bins, 0.0);
  if (block.n_traces == 0) return e;
  for (std::size_t t = 0; t < block.n_traces; ++t) {
    const auto row = block.row(t);
    for (std::size_t x = 0; x < block.n_bins; ++x) e[x] += row[x] * row[x];
  }
  const double inv = 1.0 / static_cast<double>(block.n_traces);
  for (double& v : e) v *= inv;
  return e;
}

BackgroundModel BackgroundModel::zeros(std::size_t n_bins, double alpha, std::size_t warmup_blocks,
                                       double sigma_floor, bool warm_start) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must lie in (0, 1]");
  if (!(sigma_floor > 0.0)) throw ArgumentError("sigma_floor must be positive");
  BackgroundModel bg;
  bg.mean.assign(n_bins, 0.0);
  bg.var.assign(n_bins, 0.0);
  bg.updates.assign(n_bins, 0);
  bg.alpha = alpha;
  bg.warmup_blocks_remaining = warmup_blocks;
  bg.sigma_floor = sigma_floor;
  bg.warm_start = warm_start;
  return bg;
}

double BackgroundModel::weight(std::size_t bin) const {
  if (!warm_start) return alpha;
  return std::max(alpha, 1.0 / (static_cast<double>(updates[bin]) + 1.0));
}

void update_background(BackgroundModel& bg, std::span<const double> energy,
                       std::span<const std::uint8_t> freeze) {
  const std::size_t n = bg.size();
  if (energy.size() != n || (!freeze.empty() && freeze.size() != n)) {
    throw ArgumentError("background update: dimension mismatch (" + std::to_string(n) + " bins vs " +
                        std::to_string(energy.size()) + ")");
  }
  for (std::size_t x = 0; x < n; ++x) {
    if (!freeze.empty() && freeze[x] != 0) continue;
    if (bg.warm_start && bg.updates[x] == 0) {
      bg.mean[x] = energy[x];
      bg.var[x] = 0.0;
    } else {
      const double a = bg.weight(x);
      const double d = energy[x] - bg.mean[x];
      bg.mean[x] = (1.0 - a) * bg.mean[x] + a * energy[x];
      bg.var[x] = (1.0 - a) * bg.var[x] + a * d * d;
    }
    if (bg.updates[x] != UINT32_MAX) ++bg.updates[x];
  }
  if (bg.warmup_blocks_remaining > 0) --bg.warmup_blocks_remaining;
}

}  // namespace fibersense::detect
