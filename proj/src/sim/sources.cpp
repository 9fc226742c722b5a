#include "fibersense/sim/sources.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "fibersense/errors.hpp"

namespace fibersense::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double kToneHz = 120.0;
constexpr double kToneHarmonicHz = 240.0;
constexpr double kChirpStartHz = 50.0;
constexpr double kChirpEndHz = 300.0;
constexpr double kChirpPeriodS = 5.0;
constexpr double kRumbleLowHz = 30.0;
constexpr double kRumbleHighHz = 80.0;
constexpr double kCarLowHz = 10.0;
constexpr double kCarHighHz = 80.0;

// Filter state is run this many samples before the first trace so the first
// seconds of a recording are already stationary.
constexpr int kBurnInSamples = 4096;

// Gaussian kernels are evaluated within this many sigmas; beyond it the weight
// is below 1e-21.
constexpr double kKernelReachSigmas = 10.0;

constexpr std::array<std::pair<AudioSignal, std::string_view>, 3> kSignalNames{{
    {AudioSignal::tone, "tone"},
    {AudioSignal::chirp, "chirp"},
    {AudioSignal::rumble, "rumble"},
}};

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

std::string_view to_string(AudioSignal signal) {
  for (const auto& [s, name] : kSignalNames) {
    if (s == signal) return name;
  }
  return "unknown";
}

AudioSignal audio_signal_from_string(std::string_view name) {
  for (const auto& [s, n] : kSignalNames) {
    if (n == name) return s;
  }
  throw ValidationError("unknown audio signal '" + std::string(name) +
                        "' (expected tone, chirp or rumble)");
}

void validate(const SourceState& state, const FiberLayout& layout) {
  const auto& acoustic = layout.zone(SegmentKind::acoustic_zone);
  const auto& sp = state.speaker;
  if (!std::isfinite(sp.center_m) || !acoustic.contains(sp.center_m)) {
    throw ValidationError("speaker center_m must lie inside the acoustic zone");
  }
  if (!positive_finite(sp.spatial_sigma_m) || !positive_finite(sp.amplitude_rad)) {
    throw ValidationError("speaker sigma and amplitude must be positive");
  }
  const auto& fan = state.fan;
  if (!positive_finite(fan.band_low_hz) || !(fan.band_high_hz > fan.band_low_hz) ||
      !(fan.band_high_hz < layout.pulse_rate_hz() / 2.0)) {
    throw ValidationError("fan band must satisfy 0 < low < high < pulse_rate/2");
  }
  if (!positive_finite(fan.gust_time_constant_s) || !positive_finite(fan.amplitude_rad)) {
    throw ValidationError("fan gust time constant and amplitude must be positive");
  }
  const auto& car = state.car;
  if (!positive_finite(car.spatial_sigma_m) || !positive_finite(car.amplitude_rad)) {
    throw ValidationError("car sigma and amplitude must be positive");
  }
  if (!std::isfinite(car.position_m)) throw ValidationError("car position must be finite");
  if (!std::isfinite(car.speed_mps) || std::abs(car.speed_mps) > kMaxCarSpeedMps) {
    throw ValidationError("car speed magnitude must be <= 10 m/s");
  }
}

void validate(const ControlCommand& cmd) {
  if (const auto* car = std::get_if<CarControl>(&cmd)) {
    if (!std::isfinite(car->speed_mps) || std::abs(car->speed_mps) > kMaxCarSpeedMps) {
      throw ValidationError("car speed magnitude must be <= 10 m/s (got " +
                            std::to_string(car->speed_mps) + ")");
    }
  }
}

Engine make_engine(std::uint64_t root_seed, Substream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(root_seed & 0xffffffffU),
                    static_cast<std::uint32_t>(root_seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Engine(seq);
}

double tone_signature(double t_s) {
  return std::sin(kTwoPi * kToneHz * t_s) + 0.5 * std::sin(kTwoPi * kToneHarmonicHz * t_s);
}

double chirp_signature(double t_s) {
  // Linear sweep; instantaneous frequency f0 + (f1 - f0) * tau / T.
  const double tau = std::fmod(t_s, kChirpPeriodS);
  const double sweep_rate = (kChirpEndHz - kChirpStartHz) / kChirpPeriodS;
  return std::sin(kTwoPi * (kChirpStartHz * tau + 0.5 * sweep_rate * tau * tau));
}

double gaussian_kernel(double x_m, double center_m, double sigma_m) {
  const double d = (x_m - center_m) / sigma_m;
  return std::exp(-0.5 * d * d);
}

double fan_kernel(double x_m, const Segment& aerial_zone) {
  if (!aerial_zone.contains(x_m)) return 0.0;
  const double edge = std::min(x_m - aerial_zone.start_m, aerial_zone.end_m - x_m);
  if (edge >= kFanTaperM) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * edge / kFanTaperM));
}

SignatureBank::SignatureBank(std::uint64_t seed, double pulse_rate_hz, const SourceState& initial)
    : pulse_rate_hz_(pulse_rate_hz),
      rumble_rng_(make_engine(seed, Substream::rumble)),
      fan_rng_(make_engine(seed, Substream::fan_noise)),
      gust_rng_(make_engine(seed, Substream::gust)),
      car_rng_(make_engine(seed, Substream::car_noise)),
      rumble_filter_(kRumbleLowHz, kRumbleHighHz, pulse_rate_hz),
      fan_filter_(initial.fan.band_low_hz, initial.fan.band_high_hz, pulse_rate_hz),
      car_filter_(kCarLowHz, kCarHighHz, pulse_rate_hz),
      fan_low_hz_(initial.fan.band_low_hz),
      fan_high_hz_(initial.fan.band_high_hz) {
  for (int i = 0; i < kBurnInSamples; ++i) {
    rumble_filter_.step(unit_normal_(rumble_rng_));
    fan_filter_.step(unit_normal_(fan_rng_));
    car_filter_.step(unit_normal_(car_rng_));
  }
  gust_ = unit_normal_(gust_rng_);
}

Signatures SignatureBank::next(const SourceState& state, std::uint64_t trace_index) {
  const double t = static_cast<double>(trace_index) / pulse_rate_hz_;

  if (state.fan.band_low_hz != fan_low_hz_ || state.fan.band_high_hz != fan_high_hz_) {
    fan_filter_ = BandPass(state.fan.band_low_hz, state.fan.band_high_hz, pulse_rate_hz_);
    fan_low_hz_ = state.fan.band_low_hz;
    fan_high_hz_ = state.fan.band_high_hz;
  }

  // Fixed draw order per trace: rumble, fan, gust, car.
  const double rumble = rumble_filter_.step(unit_normal_(rumble_rng_));
  const double fan_noise = fan_filter_.step(unit_normal_(fan_rng_));
  const double rho = std::exp(-1.0 / (pulse_rate_hz_ * state.fan.gust_time_constant_s));
  gust_ = rho * gust_ + std::sqrt(1.0 - rho * rho) * unit_normal_(gust_rng_);
  const double car = car_filter_.step(unit_normal_(car_rng_));

  Signatures sig;
  switch (state.speaker.signal) {
    case AudioSignal::tone:
      sig.speaker = tone_signature(t);
      break;
    case AudioSignal::chirp:
      sig.speaker = chirp_signature(t);
      break;
    case AudioSignal::rumble:
      sig.speaker = rumble;
      break;
  }
  sig.fan = fan_noise * std::exp(kGustDepth * gust_);
  sig.car = car;
  return sig;
}

void add_source_contribution(const SourceState& state, const FiberLayout& layout,
                             const Signatures& signatures, std::span<const double> bin_centers,
                             std::span<double> out) {
  auto add_gaussian = [&](double center, double sigma, double scale) {
    const double reach = kKernelReachSigmas * sigma;
    for (std::size_t i = 0; i < bin_centers.size(); ++i) {
      const double x = bin_centers[i];
      if (std::abs(x - center) <= reach) out[i] += scale * gaussian_kernel(x, center, sigma);
    }
  };

  if (state.speaker.on) {
    add_gaussian(state.speaker.center_m, state.speaker.spatial_sigma_m,
                 state.speaker.amplitude_rad * signatures.speaker);
  }
  if (state.fan.on) {
    const auto& aerial = layout.zone(SegmentKind::aerial_zone);
    const double scale = state.fan.amplitude_rad * signatures.fan;
    for (std::size_t i = 0; i < bin_centers.size(); ++i) {
      const double w = fan_kernel(bin_centers[i], aerial);
      if (w > 0.0) out[i] += scale * w;
    }
  }
  if (state.car.driving) {
    add_gaussian(state.car.position_m, state.car.spatial_sigma_m,
                 state.car.amplitude_rad * signatures.car);
  }
}

SourceField::SourceField(const FiberLayout& layout, std::uint64_t seed, const SourceState& initial)
    : layout_(&layout), bank_(seed, layout.pulse_rate_hz(), initial) {}

std::vector<double> SourceField::contribution(const SourceState& state, double t_s,
                                              std::span<const double> bin_centers) {
  if (!(t_s >= 0.0)) throw ArgumentError("source contribution needs t_s >= 0");
  // Deterministic signatures use t_s directly; stochastic ones advance by one trace.
  const auto trace = static_cast<std::uint64_t>(std::llround(t_s * layout_->pulse_rate_hz()));
  Signatures sig = bank_.next(state, next_trace_ > trace ? next_trace_ : trace);
  next_trace_ = trace + 1;
  if (state.speaker.signal == AudioSignal::tone) sig.speaker = tone_signature(t_s);
  if (state.speaker.signal == AudioSignal::chirp) sig.speaker = chirp_signature(t_s);

  std::vector<double> out(bin_centers.size(), 0.0);
  add_source_contribution(state, *layout_, sig, bin_centers, out);
  return out;
}

}  // namespace fibersense::sim
