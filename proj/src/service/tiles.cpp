#include "fibersense/service/tiles.hpp"

#include <algorithm>
#include <cmath>

#include "fibersense/errors.hpp"

namespace fibersense::service {

TilePacket make_tile(const sim::WaterfallBlock& block, double pulse_rate_hz, double bin_size_m,
                     std::size_t time_factor, std::size_t space_factor) {
  if (time_factor == 0 || space_factor == 0) throw ArgumentError("downsample factors must be >= 1");
  TilePacket tile;
  tile.t0_s = block.t0_s;
  tile.dt_s = static_cast<double>(time_factor) / pulse_rate_hz;
  tile.x0_m = 0.0;
  tile.dx_m = static_cast<double>(space_factor) * bin_size_m;
  tile.rows = (block.n_traces + time_factor - 1) / time_factor;
  tile.cols = (block.n_bins + space_factor - 1) / space_factor;
  tile.values.assign(tile.rows * tile.cols, 0.0F);

  std::vector<double> acc(tile.cols);
  std::vector<std::size_t> count(tile.cols);
  for (std::size_t r = 0; r < tile.rows; ++r) {
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    const std::size_t t_end = std::min(block.n_traces, (r + 1) * time_factor);
    for (std::size_t t = r * time_factor; t < t_end; ++t) {
      const auto row = block.row(t);
      for (std::size_t x = 0; x < block.n_bins; ++x) {
        acc[x / space_factor] += row[x] * row[x];
        ++count[x / space_factor];
      }
    }
    for (std::size_t c = 0; c < tile.cols; ++c) {
      const double mean = acc[c] / static_cast<double>(count[c]);
      const double db = mean > 0.0 ? 10.0 * std::log10(mean / kTileReferenceRad2) : kTileFloorDb;
      // 0.1 dB steps keep the JSON text short.
      const double clamped = std::clamp(db, kTileFloorDb, kTileCeilDb);
      tile.values[r * tile.cols + c] = static_cast<float>(std::round(clamped * 10.0) / 10.0);
    }
  }
  return tile;
}

nlohmann::json to_json(const TilePacket& tile) {
  return {{"type", "tile"},  {"t0_s", tile.t0_s}, {"dt_s", tile.dt_s},
          {"x0_m", tile.x0_m}, {"dx_m", tile.dx_m}, {"rows", tile.rows},
          {"cols", tile.cols}, {"values", tile.values}};
}

}  // namespace fibersense::service
