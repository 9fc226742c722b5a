#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fibersense/detect/tracker.hpp"

namespace fibersense::features {

inline constexpr std::size_t kFeatureCount = 13;

/// Serialized order of FeatureVector entries. Never reorder: trained models
/// are bound to this order through feature_order_hash().
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "rms",
    "crest_factor",
    "kurtosis",
    "zero_crossing_rate",
    "spectral_centroid_hz",
    "spectral_bandwidth_hz",
    "spectral_flatness",
    "dominant_freq_hz",
    "band_ratio_low",
    "band_ratio_mid",
    "band_ratio_high",
    "spatial_extent_m",
    "abs_velocity_mps",
};

enum class Feature : std::size_t {
  rms,
  crest_factor,
  kurtosis,
  zero_crossing_rate,
  spectral_centroid_hz,
  spectral_bandwidth_hz,
  spectral_flatness,
  dominant_freq_hz,
  band_ratio_low,
  band_ratio_mid,
  band_ratio_high,
  spatial_extent_m,
  abs_velocity_mps,
};

/// 64-bit FNV-1a over the comma-joined feature names.
std::uint64_t feature_order_hash();
/// feature_order_hash() as 16 lowercase hex digits.
std::string feature_order_hash_hex();

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double& operator[](Feature f) { return values[static_cast<std::size_t>(f)]; }
  double operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }
  bool operator==(const FeatureVector&) const = default;
};

struct TimeStats {
  double rms = 0.0;
  double crest = 0.0;
  double kurtosis = 0.0;
  double zcr_hz = 0.0;
};

/// rms and crest use the raw signal; kurtosis (excess) and zero crossings use
/// the mean-removed one. Constant signals give crest 1 and zcr 0; an all-zero
/// signal gives all zeros. Throws InsufficientData below 2 samples.
TimeStats time_stats(std::span<const double> signal, double rate_hz);

/// Periodogram |X_k|^2 of the mean-removed signal for k = 1..N/2.
struct PowerSpectrum {
  std::vector<double> freq_hz;
  std::vector<double> power;

  double total() const;
};

PowerSpectrum power_spectrum(std::span<const double> signal, double rate_hz);

struct SpectralStats {
  double centroid_hz = 0.0;
  double bandwidth_hz = 0.0;
  double flatness = 1.0;
  double dominant_hz = 0.0;
  bool zero_signal = false;
};

inline constexpr std::size_t kMinSpectralSamples = 256;
inline constexpr double kFlatnessEpsilon = 1e-20;

/// Throws InsufficientData below kMinSpectralSamples. A signal with no power
/// after mean removal yields (0, 0, 1, 0) with zero_signal set.
SpectralStats spectral_stats(std::span<const double> signal, double rate_hz);
SpectralStats spectral_stats(const PowerSpectrum& spectrum);

struct BandRatios {
  double low = 0.0;   // [1, 20) Hz
  double mid = 0.0;   // [20, 100) Hz
  double high = 0.0;  // [100, Nyquist] Hz
};

/// Fractions of the total spectrum power; zero for a zero spectrum.
BandRatios band_ratios(const PowerSpectrum& spectrum);

/// An event's spatio-temporal patch reduced to one series: per trace, the mean
/// of the samples across the event's bins.
struct EventPatch {
  double t0_s = 0.0;
  double duration_s = 0.0;
  double x_start_m = 0.0;
  double x_end_m = 0.0;
  std::vector<double> agg_signal;
  double pulse_rate_hz = 1000.0;
};

struct FeatureOptions {
  double window_s = 1.0;
  /// When false, abs_velocity_mps is written as 0 (motion ablation).
  bool use_velocity = true;
};

/// Builds a patch from the track's buffered aggregate, ending at its last sighting.
EventPatch make_patch(const detect::EventTrack& track, double pulse_rate_hz);

/// Features over the most recent `window_s` of the patch. Throws
/// InsufficientData when the patch is shorter than the window.
FeatureVector extract_features(const EventPatch& patch, const detect::EventTrack& track,
                               const FeatureOptions& options = {});

}  // namespace fibersense::features
