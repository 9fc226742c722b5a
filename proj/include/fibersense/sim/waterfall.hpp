#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fibersense::sim {

/// A contiguous batch of differential-phase traces, row-major (trace, bin).
struct WaterfallBlock {
  double t0_s = 0.0;
  std::size_t n_traces = 0;
  std::size_t n_bins = 0;
  std::vector<double> samples;

  double at(std::size_t trace, std::size_t bin) const { return samples[trace * n_bins + bin]; }
  std::span<const double> row(std::size_t trace) const {
    return {samples.data() + trace * n_bins, n_bins};
  }
  std::span<double> row(std::size_t trace) { return {samples.data() + trace * n_bins, n_bins}; }

  /// Throws StreamError if dimensions disagree or a sample is non-finite.
  void check() const;
};

/// Rounds every sample to the nearest f32, the precision recordings carry.
void quantize_to_f32(WaterfallBlock& block);

}  // namespace fibersense::sim
