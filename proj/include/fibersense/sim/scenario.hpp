#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fibersense/sim/layout.hpp"
#include "fibersense/sim/simulator.hpp"
#include "fibersense/sim/sources.hpp"
#include "fibersense/sim/waterfall.hpp"

namespace fibersense::sim {

struct TimedCommand {
  double t_s = 0.0;
  ControlCommand command;
};

/// Ground-truth annotation: a source was on over [t_start, t_end] x [x_start, x_end).
struct LabelSpan {
  double t_start_s = 0.0;
  double t_end_s = 0.0;
  double x_start_m = 0.0;
  double x_end_m = 0.0;
  std::string label;

  bool operator==(const LabelSpan&) const = default;
};

struct ScenarioScript {
  double duration_s = 10.0;
  std::uint64_t seed = 0;
  std::vector<TimedCommand> timeline;
  /// Geometry and source parameters; the on/driving flags must start cleared
  /// so that labels follow from the timeline alone.
  LayoutConfig layout;
  SourceState sources;
  double noise_sigma_rad = 0.01;
};

/// Throws ScriptError (unsorted timeline, bad duration, sources initially on)
/// or ValidationError (invalid command).
void validate(const ScenarioScript& script);

/// One span per contiguous on-interval of each source, covering that source's zone.
std::vector<LabelSpan> derive_labels(const ScenarioScript& script, const FiberLayout& layout);

using BlockSink = std::function<void(const WaterfallBlock&)>;

struct ScenarioRun {
  std::vector<LabelSpan> labels;
  std::uint64_t n_traces = 0;
};

/// Pull-based block generator: a simulator driven by a timed command list,
/// optionally unbounded. A scripted command at time t is applied before trace
/// ceil(t * pulse_rate); blocks are split internally so this holds mid-block.
class ScenarioSource {
 public:
  /// total_traces == 0 runs forever.
  ScenarioSource(const SimConfig& config, std::vector<TimedCommand> timeline,
                 std::uint64_t total_traces = 0, std::size_t block_size = 100);

  /// nullopt once total_traces have been produced.
  std::optional<WaterfallBlock> next_block();

  /// Applies an out-of-script command before the next trace and returns the
  /// time at which it takes effect. ValidationError leaves the state unchanged.
  double apply_now(const ControlCommand& cmd);

  const Simulator& simulator() const { return sim_; }
  double time_s() const { return sim_.time_s(); }

 private:
  void apply_due();

  Simulator sim_;
  std::vector<TimedCommand> timeline_;
  std::uint64_t total_;
  std::size_t block_size_;
  std::size_t next_cmd_ = 0;
};

SimConfig sim_config_for(const ScenarioScript& script);
std::uint64_t scenario_traces(const ScenarioScript& script);

/// Runs the script against a fresh simulator and hands every block to `sink`.
/// A command at time t is applied before trace ceil(t * pulse_rate).
ScenarioRun run_scenario(const ScenarioScript& script, const BlockSink& sink,
                         std::size_t block_size = 100);

}  // namespace fibersense::sim
