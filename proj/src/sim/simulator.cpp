#include "fibersense/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/random/uniform_real_distribution.hpp>

#include "fibersense/errors.hpp"

namespace fibersense::sim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::uint64_t seed_after_validation(const SimConfig& config, const FiberLayout& layout) {
  validate(config.sources, layout);
  return config.seed;
}

}  // namespace

void WaterfallBlock::check() const {
  if (n_traces == 0) throw StreamError("block has no traces");
  if (samples.size() != n_traces * n_bins) {
    throw StreamError("block holds " + std::to_string(samples.size()) + " samples, expected " +
                      std::to_string(n_traces * n_bins));
  }
  for (double v : samples) {
    if (!std::isfinite(v)) throw StreamError("block contains a non-finite sample");
  }
}

void quantize_to_f32(WaterfallBlock& block) {
  for (double& v : block.samples) v = static_cast<double>(static_cast<float>(v));
}

double reflect(double x, double lo, double hi) {
  const double width = hi - lo;
  if (!(width > 0.0)) return lo;
  double u = std::fmod(x - lo, 2.0 * width);
  if (u < 0.0) u += 2.0 * width;
  if (u > width) u = 2.0 * width - u;
  return lo + u;
}

Simulator::Simulator(const SimConfig& config)
    : config_(config),
      layout_(build_layout(config.layout)),
      sources_(config.sources),
      bin_centers_(layout_.bin_centers()),
      sensitivity_(layout_.n_bins(), 1.0),
      signatures_(seed_after_validation(config, layout_), layout_.pulse_rate_hz(), config.sources),
      noise_rng_(make_engine(config.seed, Substream::measurement_noise)),
      contribution_(layout_.n_bins(), 0.0) {
  if (!(config.noise_sigma_rad >= 0.0) || !std::isfinite(config.noise_sigma_rad)) {
    throw ValidationError("noise_sigma_rad must be finite and >= 0");
  }
  const auto& road = layout_.zone(SegmentKind::road_zone);
  sources_.car.position_m = std::clamp(sources_.car.position_m, road.start_m, road.end_m);
  car_anchor_m_ = sources_.car.position_m;

  if (!config.unit_sensitivity) {
    Engine rng = make_engine(config.seed, Substream::sensitivity);
    boost::random::uniform_real_distribution<double> gain(kSensitivityLow, kSensitivityHigh);
    for (double& s : sensitivity_) s = gain(rng);
  }
}

double Simulator::car_position_at(std::uint64_t trace) const {
  if (!sources_.car.driving) return car_anchor_m_;
  const auto& road = layout_.zone(SegmentKind::road_zone);
  const double elapsed =
      static_cast<double>(trace - car_anchor_trace_) / layout_.pulse_rate_hz();
  return reflect(car_anchor_m_ + sources_.car.speed_mps * elapsed, road.start_m, road.end_m);
}

WaterfallBlock Simulator::synthesize_block(std::size_t n_traces) {
  if (n_traces == 0) throw ArgumentError("synthesize_block needs n_traces > 0");
  const std::size_t n_bins = layout_.n_bins();
  WaterfallBlock block;
  block.t0_s = time_s();
  block.n_traces = n_traces;
  block.n_bins = n_bins;
  block.samples.resize(n_traces * n_bins);

  const double sigma = config_.noise_sigma_rad;
  for (std::size_t t = 0; t < n_traces; ++t) {
    sources_.car.position_m = car_position_at(trace_index_);
    const Signatures sig = signatures_.next(sources_, trace_index_);
    std::fill(contribution_.begin(), contribution_.end(), 0.0);
    add_source_contribution(sources_, layout_, sig, bin_centers_, contribution_);

    auto row = block.row(t);
    for (std::size_t x = 0; x < n_bins; ++x) {
      row[x] = sensitivity_[x] * contribution_[x] + sigma * noise_(noise_rng_);
    }
    ++trace_index_;
  }
  sources_.car.position_m = car_position_at(trace_index_);
  return block;
}

void Simulator::apply_control(const ControlCommand& cmd) {
  validate(cmd);
  std::visit(Overloaded{
                 [&](const SetFan& c) { sources_.fan.on = c.on; },
                 [&](const SetAudio& c) {
                   sources_.speaker.signal = c.signal;
                   sources_.speaker.on = c.on;
                 },
                 [&](const CarControl& c) {
                   // Re-anchor at the current position so the trajectory is
                   // continuous across speed changes and stops.
                   car_anchor_m_ = car_position_at(trace_index_);
                   car_anchor_trace_ = trace_index_;
                   if (c.action == CarControl::Action::start) {
                     sources_.car.driving = true;
                     sources_.car.speed_mps = c.speed_mps;
                   } else {
                     sources_.car.driving = false;
                   }
                   sources_.car.position_m = car_anchor_m_;
                 },
             },
             cmd);
}

}  // namespace fibersense::sim
