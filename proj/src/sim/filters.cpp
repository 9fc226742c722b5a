#include "fibersense/sim/filters.hpp"

#include <cmath>
#include <numbers>

#include "fibersense/errors.hpp"

namespace fibersense::sim {

namespace {

constexpr double kButterworthQ = std::numbers::sqrt2 / 2.0;

struct Prewarped {
  double cos_w0;
  double alpha;
};

Prewarped prewarp(double cutoff_hz, double rate_hz) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / rate_hz;
  return {std::cos(w0), std::sin(w0) / (2.0 * kButterworthQ)};
}

}  // namespace

Biquad Biquad::butterworth_lowpass(double cutoff_hz, double rate_hz) {
  const auto [c, alpha] = prewarp(cutoff_hz, rate_hz);
  const double a0 = 1.0 + alpha;
  Biquad q;
  q.b0 = (1.0 - c) / 2.0 / a0;
  q.b1 = (1.0 - c) / a0;
  q.b2 = (1.0 - c) / 2.0 / a0;
  q.a1 = -2.0 * c / a0;
  q.a2 = (1.0 - alpha) / a0;
  return q;
}

Biquad Biquad::butterworth_highpass(double cutoff_hz, double rate_hz) {
  const auto [c, alpha] = prewarp(cutoff_hz, rate_hz);
  const double a0 = 1.0 + alpha;
  Biquad q;
  q.b0 = (1.0 + c) / 2.0 / a0;
  q.b1 = -(1.0 + c) / a0;
  q.b2 = (1.0 + c) / 2.0 / a0;
  q.a1 = -2.0 * c / a0;
  q.a2 = (1.0 - alpha) / a0;
  return q;
}

BandPass::BandPass(double low_hz, double high_hz, double rate_hz)
    : low_hz_(low_hz), high_hz_(high_hz) {
  if (!(low_hz > 0.0) || !(high_hz > low_hz) || !(high_hz < rate_hz / 2.0)) {
    throw ValidationError("band-pass needs 0 < low < high < rate/2");
  }
  highpass_ = Biquad::butterworth_highpass(low_hz, rate_hz);
  lowpass_ = Biquad::butterworth_lowpass(high_hz, rate_hz);

  // Impulse-response energy; the slowest pole decays well within the cap for
  // any band that passes validation at practical rates.
  double energy = 0.0;
  int quiet = 0;
  for (int n = 0; n < 2'000'000 && quiet < 2000; ++n) {
    const double h = lowpass_.step(highpass_.step(n == 0 ? 1.0 : 0.0));
    energy += h * h;
    quiet = std::abs(h) < 1e-14 ? quiet + 1 : 0;
  }
  gain_ = 1.0 / std::sqrt(energy);
  reset();
}

void BandPass::reset() {
  highpass_.reset();
  lowpass_.reset();
}

}  // namespace fibersense::sim
