#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace fibersense::sim {

enum class SegmentKind { lead_in, acoustic_zone, aerial_zone, road_zone, tail };

std::string_view to_string(SegmentKind kind);
SegmentKind segment_kind_from_string(std::string_view name);

struct Segment {
  double start_m = 0.0;
  double end_m = 0.0;
  SegmentKind kind = SegmentKind::lead_in;

  double length_m() const { return end_m - start_m; }
  bool contains(double x_m) const { return x_m >= start_m && x_m < end_m; }
};

struct LayoutConfig {
  std::size_t n_bins = 1000;
  double bin_size_m = 1.0;
  double pulse_rate_hz = 1000.0;
  std::vector<Segment> segments = default_segments();

  static std::vector<Segment> default_segments();
};

/// Validated fiber geometry. Bin i covers [i*bin_size, (i+1)*bin_size) and is
/// represented by its center.
class FiberLayout {
 public:
  std::size_t n_bins() const { return n_bins_; }
  double bin_size_m() const { return bin_size_m_; }
  double pulse_rate_hz() const { return pulse_rate_hz_; }
  double length_m() const { return static_cast<double>(n_bins_) * bin_size_m_; }
  const std::vector<Segment>& segments() const { return segments_; }

  const Segment& zone(SegmentKind kind) const;
  double bin_center(std::size_t bin) const { return (static_cast<double>(bin) + 0.5) * bin_size_m_; }
  std::vector<double> bin_centers() const;

  LayoutConfig config() const;

 private:
  friend FiberLayout build_layout(const LayoutConfig& config);
  FiberLayout() = default;

  std::size_t n_bins_ = 0;
  double bin_size_m_ = 0.0;
  double pulse_rate_hz_ = 0.0;
  std::vector<Segment> segments_;
};

/// Throws LayoutError on gaps, overlaps, bad coverage or missing zones.
FiberLayout build_layout(const LayoutConfig& config = {});

}  // namespace fibersense::sim
