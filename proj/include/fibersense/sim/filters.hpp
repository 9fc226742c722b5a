#pragma once

namespace fibersense::sim {

/// Second-order section in transposed direct form II, a0 normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
  double z1 = 0.0, z2 = 0.0;

  double step(double x) {
    const double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
  }
  void reset() { z1 = z2 = 0.0; }

  // Butterworth (Q = 1/sqrt(2)) sections from the bilinear transform with
  // frequency prewarping:
  //   w0 = 2*pi*f/fs, alpha = sin(w0)/(2Q)
  //   low-pass:  b = {(1-cos w0)/2, 1-cos w0, (1-cos w0)/2}
  //   high-pass: b = {(1+cos w0)/2, -(1+cos w0), (1+cos w0)/2}
  //   a = {1+alpha, -2 cos w0, 1-alpha}, all divided by a0 = 1+alpha
  static Biquad butterworth_lowpass(double cutoff_hz, double rate_hz);
  static Biquad butterworth_highpass(double cutoff_hz, double rate_hz);
};

/// Fourth-order band-pass: high-pass at `low_hz` cascaded with low-pass at
/// `high_hz`. The output is scaled so unit-variance white input yields unit
/// variance output (gain from the impulse-response energy).
class BandPass {
 public:
  BandPass(double low_hz, double high_hz, double rate_hz);

  double step(double x) { return gain_ * lowpass_.step(highpass_.step(x)); }
  void reset();

  double low_hz() const { return low_hz_; }
  double high_hz() const { return high_hz_; }
  double gain() const { return gain_; }

 private:
  double low_hz_;
  double high_hz_;
  Biquad highpass_;
  Biquad lowpass_;
  double gain_ = 1.0;
};

}  // namespace fibersense::sim
