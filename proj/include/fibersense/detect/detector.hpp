#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <string_view>
#include <vector>

#include "fibersense/detect/activity.hpp"
#include "fibersense/detect/background.hpp"
#include "fibersense/detect/tracker.hpp"
#include "fibersense/sim/waterfall.hpp"

namespace fibersense::detect {

struct DetectorParams {
  double alpha = 0.01;
  std::size_t warmup_blocks = 50;
  double sigma_floor = 1e-6;
  bool warm_start = true;
  Hysteresis hysteresis;
  ClusterParams clusters;
  TrackerParams tracker;
  /// Length of the per-track aggregated signal kept for feature extraction.
  double patch_window_s = 1.0;
  /// Confirmed tracks kept after they end, for inspection.
  std::size_t ended_history = 1024;
};

enum class Notice { created, updated, ended };

std::string_view to_string(Notice notice);

struct TrackNotification {
  Notice kind = Notice::updated;
  std::uint64_t id = 0;
  double t_s = 0.0;
  double x_start_m = 0.0;
  double x_end_m = 0.0;
  double centroid_m = 0.0;
  Motion motion = Motion::stationary;
  double velocity_mps = 0.0;
};

/// Streaming detector. Each block runs energy -> activity -> clusters ->
/// association -> velocity, then updates the background with active bins
/// (dilated by gap_bins) frozen. Notifications are only emitted for confirmed
/// tracks: `created` on confirmation, `updated` on each later association,
/// `ended` on timeout. Time stamps are block end times.
class Detector {
 public:
  Detector(std::size_t n_bins, double bin_size_m, double pulse_rate_hz,
           const DetectorParams& params = {});

  /// Throws StreamError when the block does not match the configured bins.
  std::vector<TrackNotification> process_block(const sim::WaterfallBlock& block);

  /// Ends every live confirmed track at the last processed time.
  std::vector<TrackNotification> finish();

  const DetectorParams& params() const { return params_; }
  const BackgroundModel& background() const { return background_; }
  const ActivityMap& activity() const { return activity_; }
  const std::vector<double>& energy() const { return energy_; }
  const std::vector<EventTrack>& tracks() const { return tracks_; }
  const std::deque<EventTrack>& ended_tracks() const { return ended_; }
  EventTrack* find_track(std::uint64_t id);
  std::uint64_t blocks_processed() const { return blocks_; }
  double last_t_s() const { return last_t_s_; }
  double pulse_rate_hz() const { return pulse_rate_hz_; }
  double bin_size_m() const { return bin_size_m_; }
  std::size_t n_bins() const { return n_bins_; }

 private:
  TrackNotification notify(Notice kind, const EventTrack& track, double t_s) const;
  void append_patch(EventTrack& track, const sim::WaterfallBlock& block) const;
  void retire_ended();

  std::size_t n_bins_;
  double bin_size_m_;
  double pulse_rate_hz_;
  DetectorParams params_;
  std::size_t patch_capacity_;
  BackgroundModel background_;
  ActivityMap activity_;
  std::vector<double> energy_;
  std::vector<EventTrack> tracks_;
  std::deque<EventTrack> ended_;
  std::uint64_t next_id_ = 1;
  std::uint64_t blocks_ = 0;
  double last_t_s_ = 0.0;
};

}  // namespace fibersense::detect
