#include "fibersense/sim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "fibersense/errors.hpp"
#include "fibersense/labels.hpp"
#include "fibersense/sim/simulator.hpp"

namespace fibersense::sim {

namespace {

std::uint64_t trace_at(double t_s, double rate_hz) {
  return static_cast<std::uint64_t>(std::ceil(t_s * rate_hz - 1e-9));
}

struct OpenSpan {
  std::optional<double> since;
  std::string_view label;
  const Segment* zone;
};

}  // namespace

void validate(const ScenarioScript& script) {
  if (!(script.duration_s > 0.0) || !std::isfinite(script.duration_s)) {
    throw ScriptError("duration_s must be positive");
  }
  if (script.sources.speaker.on || script.sources.fan.on || script.sources.car.driving) {
    throw ScriptError("sources must start off; switch them on from the timeline");
  }
  double previous = 0.0;
  for (const auto& entry : script.timeline) {
    if (!std::isfinite(entry.t_s) || entry.t_s < 0.0) {
      throw ScriptError("timeline times must be finite and >= 0");
    }
    if (entry.t_s < previous) throw ScriptError("timeline is not sorted by time");
    previous = entry.t_s;
    validate(entry.command);
  }
}

std::vector<LabelSpan> derive_labels(const ScenarioScript& script, const FiberLayout& layout) {
  OpenSpan speaker{std::nullopt, kAcoustic, &layout.zone(SegmentKind::acoustic_zone)};
  OpenSpan fan{std::nullopt, kWind, &layout.zone(SegmentKind::aerial_zone)};
  OpenSpan car{std::nullopt, kVehicle, &layout.zone(SegmentKind::road_zone)};

  std::vector<LabelSpan> spans;
  auto close = [&](OpenSpan& s, double t) {
    if (s.since && t > *s.since) {
      spans.push_back({*s.since, t, s.zone->start_m, s.zone->end_m, std::string(s.label)});
    }
    s.since.reset();
  };
  auto toggle = [&](OpenSpan& s, bool on, double t) {
    if (on && !s.since) s.since = t;
    if (!on) close(s, t);
  };

  for (const auto& entry : script.timeline) {
    if (entry.t_s >= script.duration_s) break;
    const double t = entry.t_s;
    if (const auto* c = std::get_if<SetFan>(&entry.command)) toggle(fan, c->on, t);
    if (const auto* c = std::get_if<SetAudio>(&entry.command)) toggle(speaker, c->on, t);
    if (const auto* c = std::get_if<CarControl>(&entry.command)) {
      toggle(car, c->action == CarControl::Action::start, t);
    }
  }
  for (auto* s : {&speaker, &fan, &car}) close(*s, script.duration_s);

  std::stable_sort(spans.begin(), spans.end(), [](const LabelSpan& a, const LabelSpan& b) {
    return a.t_start_s < b.t_start_s;
  });
  return spans;
}

ScenarioSource::ScenarioSource(const SimConfig& config, std::vector<TimedCommand> timeline,
                               std::uint64_t total_traces, std::size_t block_size)
    : sim_(config), timeline_(std::move(timeline)), total_(total_traces), block_size_(block_size) {
  if (block_size == 0) throw ArgumentError("block_size must be positive");
}

void ScenarioSource::apply_due() {
  const double rate = sim_.layout().pulse_rate_hz();
  while (next_cmd_ < timeline_.size() &&
         trace_at(timeline_[next_cmd_].t_s, rate) <= sim_.trace_index()) {
    sim_.apply_control(timeline_[next_cmd_].command);
    ++next_cmd_;
  }
}

double ScenarioSource::apply_now(const ControlCommand& cmd) {
  sim_.apply_control(cmd);
  return sim_.time_s();
}

std::optional<WaterfallBlock> ScenarioSource::next_block() {
  if (total_ != 0 && sim_.trace_index() >= total_) return std::nullopt;
  const double rate = sim_.layout().pulse_rate_hz();
  std::uint64_t block_end = sim_.trace_index() + block_size_;
  if (total_ != 0) block_end = std::min(block_end, total_);

  WaterfallBlock block;
  block.t0_s = sim_.time_s();
  block.n_bins = sim_.layout().n_bins();
  while (sim_.trace_index() < block_end) {
    apply_due();
    std::uint64_t chunk_end = block_end;
    if (next_cmd_ < timeline_.size()) {
      chunk_end = std::min(chunk_end, std::max(trace_at(timeline_[next_cmd_].t_s, rate),
                                               sim_.trace_index() + 1));
    }
    WaterfallBlock part = sim_.synthesize_block(chunk_end - sim_.trace_index());
    if (block.n_traces == 0) {
      block.samples = std::move(part.samples);
    } else {
      block.samples.insert(block.samples.end(), part.samples.begin(), part.samples.end());
    }
    block.n_traces += part.n_traces;
  }
  return block;
}

SimConfig sim_config_for(const ScenarioScript& script) {
  SimConfig config;
  config.layout = script.layout;
  config.sources = script.sources;
  config.seed = script.seed;
  config.noise_sigma_rad = script.noise_sigma_rad;
  return config;
}

std::uint64_t scenario_traces(const ScenarioScript& script) {
  return static_cast<std::uint64_t>(std::llround(script.duration_s * script.layout.pulse_rate_hz));
}

ScenarioRun run_scenario(const ScenarioScript& script, const BlockSink& sink,
                         std::size_t block_size) {
  validate(script);
  ScenarioSource source(sim_config_for(script), script.timeline, scenario_traces(script),
                        block_size);
  ScenarioRun run;
  run.labels = derive_labels(script, source.simulator().layout());
  while (auto block = source.next_block()) sink(*block);
  run.n_traces = scenario_traces(script);
  return run;
}

}  // namespace fibersense::sim
