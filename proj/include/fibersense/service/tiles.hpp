#pragma once

#include <cstddef>
#include <vector>

#include "json.hpp"

#include "fibersense/sim/waterfall.hpp"

namespace fibersense::service {

inline constexpr double kTileFloorDb = -40.0;
inline constexpr double kTileCeilDb = 40.0;
/// dB reference: 1 mrad^2.
inline constexpr double kTileReferenceRad2 = 1e-6;

/// Downsampled waterfall energy for display. Cell (r, c) covers traces
/// [r*time_factor, (r+1)*time_factor) and bins [c*space_factor, ...), the last
/// column possibly narrower.
struct TilePacket {
  double t0_s = 0.0;
  double dt_s = 0.0;
  double x0_m = 0.0;
  double dx_m = 0.0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;  // row-major, dB clamped to [-40, 40], 0.1 dB steps
};

/// Throws ArgumentError when a factor is zero.
TilePacket make_tile(const sim::WaterfallBlock& block, double pulse_rate_hz, double bin_size_m,
                     std::size_t time_factor, std::size_t space_factor);

/// {"type":"tile", t0_s, dt_s, x0_m, dx_m, rows, cols, values}
nlohmann::json to_json(const TilePacket& tile);

}  // namespace fibersense::service
