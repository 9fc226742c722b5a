#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "fibersense/sim/filters.hpp"
#include "fibersense/sim/layout.hpp"

namespace fibersense::sim {

enum class AudioSignal { tone, chirp, rumble };

std::string_view to_string(AudioSignal signal);
AudioSignal audio_signal_from_string(std::string_view name);

struct SpeakerState {
  bool on = false;
  AudioSignal signal = AudioSignal::tone;
  double center_m = 470.0;
  double spatial_sigma_m = 3.0;
  double amplitude_rad = 0.1;
};

struct FanState {
  bool on = false;
  double band_low_hz = 5.0;
  double band_high_hz = 40.0;
  double gust_time_constant_s = 2.0;
  double amplitude_rad = 0.2;
};

struct CarState {
  bool driving = false;
  double position_m = 720.0;
  double speed_mps = 2.0;
  double spatial_sigma_m = 5.0;
  double amplitude_rad = 0.15;
};

struct SourceState {
  SpeakerState speaker;
  FanState fan;
  CarState car;
};

constexpr double kMaxCarSpeedMps = 10.0;

/// Throws ValidationError when a parameter breaks a source invariant.
/// The car position is not checked here; the simulator clamps it.
void validate(const SourceState& state, const FiberLayout& layout);

struct SetFan {
  bool on = false;
};

struct SetAudio {
  AudioSignal signal = AudioSignal::tone;
  bool on = false;
};

struct CarControl {
  enum class Action { start, stop };
  Action action = Action::stop;
  double speed_mps = 0.0;
};

using ControlCommand = std::variant<SetFan, SetAudio, CarControl>;

/// Throws ValidationError for out-of-bound speeds or non-finite values.
void validate(const ControlCommand& cmd);

/// Independent random substreams derived from one root seed.
enum class Substream : std::uint32_t {
  sensitivity = 1,
  measurement_noise = 2,
  rumble = 3,
  fan_noise = 4,
  gust = 5,
  car_noise = 6,
};

using Engine = boost::random::mt19937_64;

Engine make_engine(std::uint64_t root_seed, Substream stream);

/// Temporal signatures (unit amplitude) of every source for one trace.
struct Signatures {
  double speaker = 0.0;
  double fan = 0.0;
  double car = 0.0;
};

double tone_signature(double t_s);
double chirp_signature(double t_s);

/// Spatial kernels; all return a weight in [0, 1].
double gaussian_kernel(double x_m, double center_m, double sigma_m);
double fan_kernel(double x_m, const Segment& aerial_zone);

constexpr double kFanTaperM = 5.0;
constexpr double kGustDepth = 0.3;

/// Owns the stochastic signature processes. Every process is advanced on every
/// trace whether or not its source is on, so switching one source never shifts
/// another source's random sequence.
class SignatureBank {
 public:
  SignatureBank(std::uint64_t seed, double pulse_rate_hz, const SourceState& initial);

  /// Signatures for trace `trace_index`; calls must use consecutive indices.
  Signatures next(const SourceState& state, std::uint64_t trace_index);

 private:
  double pulse_rate_hz_;
  Engine rumble_rng_;
  Engine fan_rng_;
  Engine gust_rng_;
  Engine car_rng_;
  boost::random::normal_distribution<double> unit_normal_{0.0, 1.0};
  BandPass rumble_filter_;
  BandPass fan_filter_;
  BandPass car_filter_;
  double fan_low_hz_;
  double fan_high_hz_;
  double gust_ = 0.0;
};

/// Sum over active sources of amplitude * spatial kernel * signature, added into `out`.
void add_source_contribution(const SourceState& state, const FiberLayout& layout,
                             const Signatures& signatures, std::span<const double> bin_centers,
                             std::span<double> out);

/// Stateful evaluator of the source field: one SignatureBank plus the kernels.
class SourceField {
 public:
  SourceField(const FiberLayout& layout, std::uint64_t seed, const SourceState& initial = {});

  /// Phase contribution per bin for the trace at time `t_s`. Stochastic
  /// signatures advance one step per call.
  std::vector<double> contribution(const SourceState& state, double t_s,
                                   std::span<const double> bin_centers);

 private:
  const FiberLayout* layout_;
  SignatureBank bank_;
  std::uint64_t next_trace_ = 0;
};

}  // namespace fibersense::sim
