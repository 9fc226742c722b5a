#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fibersense/sim/layout.hpp"
#include "fibersense/sim/sources.hpp"
#include "fibersense/sim/waterfall.hpp"

namespace fibersense::sim {

struct SimConfig {
  LayoutConfig layout;
  SourceState sources;
  std::uint64_t seed = 0;
  double noise_sigma_rad = 0.01;
  /// Forces the per-bin sensitivity to 1 (used for superposition checks).
  bool unit_sensitivity = false;
};

constexpr double kSensitivityLow = 0.3;
constexpr double kSensitivityHigh = 1.0;

/// Reflects `x` into [lo, hi] as a ball bouncing between two walls.
double reflect(double x, double lo, double hi);

/// Single-writer simulation state.
///
/// Evaluation order per trace, which fixes the bit pattern of the output:
///   1. the car position is evaluated from its driving anchor,
///   2. signatures are drawn (rumble, fan, gust, car substreams),
///   3. for each bin in increasing order:
///        sample = s[x] * contribution[x] + noise_sigma * N(0,1)
///      with the normal variate taken from the measurement-noise substream.
class Simulator {
 public:
  explicit Simulator(const SimConfig& config);

  /// Throws ArgumentError when n_traces == 0.
  WaterfallBlock synthesize_block(std::size_t n_traces);

  /// Takes effect from the next synthesized trace. On ValidationError the
  /// state is unchanged.
  void apply_control(const ControlCommand& cmd);

  const FiberLayout& layout() const { return layout_; }
  const SourceState& sources() const { return sources_; }
  const SimConfig& config() const { return config_; }
  std::span<const double> sensitivity() const { return sensitivity_; }
  std::uint64_t trace_index() const { return trace_index_; }
  /// Time of the next trace to be synthesized.
  double time_s() const { return static_cast<double>(trace_index_) / layout_.pulse_rate_hz(); }
  /// Car position at the next trace.
  double car_position_m() const { return car_position_at(trace_index_); }

 private:
  double car_position_at(std::uint64_t trace) const;

  SimConfig config_;
  FiberLayout layout_;
  SourceState sources_;
  std::vector<double> bin_centers_;
  std::vector<double> sensitivity_;
  SignatureBank signatures_;
  Engine noise_rng_;
  boost::random::normal_distribution<double> noise_{0.0, 1.0};
  std::uint64_t trace_index_ = 0;
  double car_anchor_m_;
  std::uint64_t car_anchor_trace_ = 0;
  std::vector<double> contribution_;
};

}  // namespace fibersense::sim
