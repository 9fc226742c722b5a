#include "fibersense/features/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>

#include <fftw3.h>

#include "fibersense/errors.hpp"

namespace fibersense::features {

namespace {

constexpr double kLowBandHz = 1.0;
constexpr double kMidBandHz = 20.0;
constexpr double kHighBandHz = 100.0;

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are made unaligned so any vector storage can be used.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [n, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    std::vector<double> in(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(n, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<int, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

std::uint64_t feature_order_hash() {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  bool first = true;
  for (auto name : kFeatureNames) {
    if (!first) {
      h ^= static_cast<unsigned char>(',');
      h *= 0x100000001b3ULL;
    }
    first = false;
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string feature_order_hash_hex() {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(feature_order_hash()));
  return buf;
}

TimeStats time_stats(std::span<const double> signal, double rate_hz) {
  if (signal.size() < 2) throw InsufficientData("time_stats needs at least 2 samples");
  const auto n = static_cast<double>(signal.size());
  double peak = 0.0;
  for (double v : signal) peak = std::max(peak, std::abs(v));
  TimeStats out;
  if (peak == 0.0) return out;

  // Moments are taken on the signal scaled by a power of two near 1/peak, which
  // is exact and keeps the fourth powers clear of overflow and underflow.
  const int exponent = std::ilogb(peak);
  double mean = 0.0;
  double sum_sq = 0.0;
  for (double v : signal) {
    const double u = std::ldexp(v, -exponent);
    mean += u;
    sum_sq += u * u;
  }
  mean /= n;
  const double rms = std::sqrt(sum_sq / n);
  out.rms = std::ldexp(rms, exponent);
  out.crest = std::ldexp(peak, -exponent) / rms;

  double m2 = 0.0;
  double m4 = 0.0;
  std::size_t crossings = 0;
  bool prev_negative = false;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    const double d = std::ldexp(signal[i], -exponent) - mean;
    m2 += d * d;
    m4 += d * d * d * d;
    const bool negative = d < 0.0;
    if (i > 0 && negative != prev_negative) ++crossings;
    prev_negative = negative;
  }
  m2 /= n;
  m4 /= n;
  // Residual rounding of a constant signal can leave tiny deviations.
  if (m2 > 1e-24 * rms * rms) {
    out.kurtosis = m4 / (m2 * m2) - 3.0;
    out.zcr_hz = static_cast<double>(crossings) * rate_hz / n;
  }
  return out;
}

double PowerSpectrum::total() const {
  double sum = 0.0;
  for (double p : power) sum += p;
  return sum;
}

PowerSpectrum power_spectrum(std::span<const double> signal, double rate_hz) {
  const std::size_t n = signal.size();
  if (n < 2) throw InsufficientData("power spectrum needs at least 2 samples");
  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= static_cast<double>(n);

  std::vector<double> in(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = signal[i] - mean;
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_execute_dft_r2c(plan_cache().get(static_cast<int>(n)), in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));

  PowerSpectrum ps;
  const std::size_t bins = n / 2;
  ps.freq_hz.resize(bins);
  ps.power.resize(bins);
  for (std::size_t k = 1; k <= bins; ++k) {
    ps.freq_hz[k - 1] = static_cast<double>(k) * rate_hz / static_cast<double>(n);
    ps.power[k - 1] = std::norm(out[k]);
  }
  return ps;
}

SpectralStats spectral_stats(const PowerSpectrum& spectrum) {
  SpectralStats s;
  const double total = spectrum.total();
  if (!(total > 0.0)) {
    s.zero_signal = true;
    return s;
  }
  double weighted = 0.0;
  double log_sum = 0.0;
  std::size_t argmax = 0;
  for (std::size_t k = 0; k < spectrum.power.size(); ++k) {
    weighted += spectrum.freq_hz[k] * spectrum.power[k];
    log_sum += std::log(spectrum.power[k] + kFlatnessEpsilon);
    if (spectrum.power[k] > spectrum.power[argmax]) argmax = k;
  }
  s.centroid_hz = weighted / total;
  double spread = 0.0;
  for (std::size_t k = 0; k < spectrum.power.size(); ++k) {
    const double d = spectrum.freq_hz[k] - s.centroid_hz;
    spread += d * d * spectrum.power[k];
  }
  s.bandwidth_hz = std::sqrt(spread / total);
  const auto m = static_cast<double>(spectrum.power.size());
  s.flatness = std::clamp(std::exp(log_sum / m) / (total / m), 0.0, 1.0);
  s.dominant_hz = spectrum.freq_hz[argmax];
  return s;
}

SpectralStats spectral_stats(std::span<const double> signal, double rate_hz) {
  if (signal.size() < kMinSpectralSamples) {
    throw InsufficientData("spectral_stats needs at least 256 samples");
  }
  return spectral_stats(power_spectrum(signal, rate_hz));
}

BandRatios band_ratios(const PowerSpectrum& spectrum) {
  BandRatios r;
  const double total = spectrum.total();
  if (!(total > 0.0)) return r;
  for (std::size_t k = 0; k < spectrum.power.size(); ++k) {
    const double f = spectrum.freq_hz[k];
    if (f >= kHighBandHz) {
      r.high += spectrum.power[k];
    } else if (f >= kMidBandHz) {
      r.mid += spectrum.power[k];
    } else if (f >= kLowBandHz) {
      r.low += spectrum.power[k];
    }
  }
  r.low /= total;
  r.mid /= total;
  r.high /= total;
  return r;
}

EventPatch make_patch(const detect::EventTrack& track, double pulse_rate_hz) {
  EventPatch patch;
  patch.agg_signal = track.patch.snapshot();
  patch.pulse_rate_hz = pulse_rate_hz;
  patch.duration_s = static_cast<double>(patch.agg_signal.size()) / pulse_rate_hz;
  patch.t0_s = track.last_seen_t_s - patch.duration_s;
  if (!track.span_history.empty()) {
    patch.x_start_m = track.span_history.back().x_start_m;
    patch.x_end_m = track.span_history.back().x_end_m;
  }
  return patch;
}

FeatureVector extract_features(const EventPatch& patch, const detect::EventTrack& track,
                               const FeatureOptions& options) {
  const auto window = static_cast<std::size_t>(std::llround(options.window_s * patch.pulse_rate_hz));
  if (patch.agg_signal.size() < window || window < kMinSpectralSamples) {
    throw InsufficientData("patch holds " + std::to_string(patch.agg_signal.size()) +
                           " samples, feature window needs " + std::to_string(window));
  }
  const std::span<const double> recent(patch.agg_signal.data() + patch.agg_signal.size() - window,
                                       window);

  const TimeStats ts = time_stats(recent, patch.pulse_rate_hz);
  const PowerSpectrum ps = power_spectrum(recent, patch.pulse_rate_hz);
  const SpectralStats ss = spectral_stats(ps);
  const BandRatios br = band_ratios(ps);

  const double patch_end = patch.t0_s + patch.duration_s;
  double extent = 0.0;
  for (const auto& span : track.span_history) {
    if (span.t_s >= patch_end - options.window_s - 1e-9) {
      extent = std::max(extent, span.x_end_m - span.x_start_m);
    }
  }

  FeatureVector v;
  v[Feature::rms] = ts.rms;
  v[Feature::crest_factor] = ts.crest;
  v[Feature::kurtosis] = ts.kurtosis;
  v[Feature::zero_crossing_rate] = ts.zcr_hz;
  v[Feature::spectral_centroid_hz] = ss.centroid_hz;
  v[Feature::spectral_bandwidth_hz] = ss.bandwidth_hz;
  v[Feature::spectral_flatness] = ss.flatness;
  v[Feature::dominant_freq_hz] = ss.dominant_hz;
  v[Feature::band_ratio_low] = br.low;
  v[Feature::band_ratio_mid] = br.mid;
  v[Feature::band_ratio_high] = br.high;
  v[Feature::spatial_extent_m] = extent;
  v[Feature::abs_velocity_mps] = options.use_velocity ? std::abs(track.velocity_mps) : 0.0;
  return v;
}

}  // namespace fibersense::features
