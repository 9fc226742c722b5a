#include "fibersense/sim/layout.hpp"

#include <array>
#include <cmath>

#include "fibersense/errors.hpp"

namespace fibersense::sim {

namespace {

constexpr double kCoverageTolerance = 1e-9;

constexpr std::array<std::pair<SegmentKind, std::string_view>, 5> kKindNames{{
    {SegmentKind::lead_in, "lead_in"},
    {SegmentKind::acoustic_zone, "acoustic_zone"},
    {SegmentKind::aerial_zone, "aerial_zone"},
    {SegmentKind::road_zone, "road_zone"},
    {SegmentKind::tail, "tail"},
}};

std::string describe(const Segment& s) {
  return std::string(to_string(s.kind)) + " [" + std::to_string(s.start_m) + ", " +
         std::to_string(s.end_m) + ")";
}

}  // namespace

std::string_view to_string(SegmentKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

SegmentKind segment_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw LayoutError("unknown segment kind '" + std::string(name) + "'");
}

std::vector<Segment> LayoutConfig::default_segments() {
  return {
      {0.0, 400.0, SegmentKind::lead_in},
      {400.0, 550.0, SegmentKind::acoustic_zone},
      {550.0, 700.0, SegmentKind::aerial_zone},
      {700.0, 850.0, SegmentKind::road_zone},
      {850.0, 1000.0, SegmentKind::tail},
  };
}

const Segment& FiberLayout::zone(SegmentKind kind) const {
  for (const auto& s : segments_) {
    if (s.kind == kind) return s;
  }
  throw LayoutError("layout has no " + std::string(to_string(kind)));
}

std::vector<double> FiberLayout::bin_centers() const {
  std::vector<double> centers(n_bins_);
  for (std::size_t i = 0; i < n_bins_; ++i) centers[i] = bin_center(i);
  return centers;
}

LayoutConfig FiberLayout::config() const {
  return LayoutConfig{n_bins_, bin_size_m_, pulse_rate_hz_, segments_};
}

FiberLayout build_layout(const LayoutConfig& config) {
  if (config.n_bins == 0) throw LayoutError("n_bins must be positive");
  if (!(config.bin_size_m > 0.0) || !std::isfinite(config.bin_size_m)) {
    throw LayoutError("bin_size_m must be positive");
  }
  if (!(config.pulse_rate_hz > 0.0) || !std::isfinite(config.pulse_rate_hz)) {
    throw LayoutError("pulse_rate_hz must be positive");
  }
  if (config.segments.empty()) throw LayoutError("layout has no segments");

  const double length = static_cast<double>(config.n_bins) * config.bin_size_m;
  double cursor = 0.0;
  for (const auto& s : config.segments) {
    if (!(s.end_m > s.start_m)) throw LayoutError("empty or inverted segment " + describe(s));
    if (s.start_m < cursor - kCoverageTolerance) {
      throw LayoutError("segment " + describe(s) + " overlaps its predecessor");
    }
    if (s.start_m > cursor + kCoverageTolerance) {
      throw LayoutError("gap before segment " + describe(s));
    }
    cursor = s.end_m;
  }
  if (std::abs(cursor - length) > kCoverageTolerance) {
    throw LayoutError("segments cover [0, " + std::to_string(cursor) + ") but the fiber is " +
                      std::to_string(length) + " m long");
  }

  for (auto kind : {SegmentKind::acoustic_zone, SegmentKind::aerial_zone, SegmentKind::road_zone}) {
    int count = 0;
    for (const auto& s : config.segments) count += s.kind == kind ? 1 : 0;
    if (count != 1) {
      throw LayoutError(std::string(to_string(kind)) + " must appear exactly once (found " +
                        std::to_string(count) + ")");
    }
  }

  FiberLayout layout;
  layout.n_bins_ = config.n_bins;
  layout.bin_size_m_ = config.bin_size_m;
  layout.pulse_rate_hz_ = config.pulse_rate_hz;
  layout.segments_ = config.segments;
  return layout;
}

}  // namespace fibersense::sim
