#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fibersense/detect/activity.hpp"

namespace fibersense::detect {

enum class TrackState { tentative, confirmed, ended };
enum class Motion { stationary, moving };

std::string_view to_string(TrackState state);
std::string_view to_string(Motion motion);

struct CentroidSample {
  double t_s = 0.0;
  double x_m = 0.0;
};

struct SpanSample {
  double t_s = 0.0;
  double x_start_m = 0.0;
  double x_end_m = 0.0;
};

struct ClassSample {
  double t_s = 0.0;
  std::string label;
  double confidence = 0.0;
};

/// Fixed-capacity ring of the most recent per-trace aggregated samples.
class PatchBuffer {
 public:
  explicit PatchBuffer(std::size_t capacity = 0) : data_(capacity) {}

  void push(double v);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return data_.size(); }
  bool full() const { return size_ == data_.size(); }
  /// Oldest-first copy of the buffered samples.
  std::vector<double> snapshot() const;

 private:
  std::vector<double> data_;
  std::size_t head_ = 0;  // next write position
  std::size_t size_ = 0;
};

struct EventTrack {
  std::uint64_t id = 0;
  double born_t_s = 0.0;
  double last_seen_t_s = 0.0;
  TrackState state = TrackState::tentative;
  /// Stays set after the track ends.
  bool was_confirmed = false;
  std::vector<CentroidSample> centroid_history;
  std::vector<SpanSample> span_history;
  Motion motion = Motion::stationary;
  double velocity_mps = 0.0;
  PatchBuffer patch;
  std::vector<ClassSample> class_history;

  // Association bookkeeping.
  std::size_t span_start_bin = 0;
  std::size_t span_end_bin = 0;
  std::size_t consecutive_hits = 0;
  std::size_t missed_blocks = 0;
  std::size_t fast_streak = 0;
  std::size_t slow_streak = 0;
  std::vector<double> velocity_history;

  double centroid_m() const { return centroid_history.empty() ? 0.0 : centroid_history.back().x_m; }
  bool live() const { return state != TrackState::ended; }
};

struct TrackerParams {
  double assoc_max_m = 10.0;
  std::size_t timeout_blocks = 10;
  std::size_t confirm_blocks = 3;
  double v_min_mps = 0.5;
  std::size_t vel_window = 10;
  std::size_t motion_confirm = 2;
};

struct Association {
  std::size_t cluster = 0;
  std::size_t track = 0;  // index into the tracks vector
  double distance_m = 0.0;
};

struct AssociationResult {
  std::vector<Association> matches;
  std::vector<std::size_t> spawned;    // track indices
  std::vector<std::size_t> confirmed;  // tentative -> confirmed this block
  std::vector<std::size_t> ended;      // live -> ended this block
};

/// Greedy nearest-centroid assignment. A pair is eligible when the centroid
/// distance is <= assoc_max_m and the spans overlap or touch. Pairs are taken
/// in order of (distance, track id, cluster index), each side at most once.
/// Unmatched clusters spawn tentative tracks (ids from `next_id`); live tracks
/// missing for timeout_blocks consecutive blocks become ended.
AssociationResult associate(std::vector<EventTrack>& tracks,
                            std::span<const SpatialCluster> clusters, double t_s,
                            const TrackerParams& params, std::uint64_t& next_id,
                            std::size_t patch_capacity = 0);

/// Least-squares slope of x over t for the last `window` samples.
std::optional<double> fit_velocity(std::span<const CentroidSample> history, std::size_t window);

/// Refreshes velocity and motion from the centroid history. Motion flips to
/// moving after motion_confirm consecutive |v| >= v_min estimates and back to
/// stationary after as many below it. Returns nullopt (motion untouched) with
/// fewer than vel_window samples.
std::optional<double> estimate_velocity(EventTrack& track, const TrackerParams& params);

}  // namespace fibersense::detect
