#include "fibersense/detect/detector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fibersense/errors.hpp"

namespace fibersense::detect {

std::string_view to_string(Notice notice) {
  switch (notice) {
    case Notice::created:
      return "created";
    case Notice::updated:
      return "updated";
    case Notice::ended:
      return "ended";
  }
  return "unknown";
}

Detector::Detector(std::size_t n_bins, double bin_size_m, double pulse_rate_hz,
                   const DetectorParams& params)
    : n_bins_(n_bins),
      bin_size_m_(bin_size_m),
      pulse_rate_hz_(pulse_rate_hz),
      params_(params),
      patch_capacity_(static_cast<std::size_t>(std::ceil(params.patch_window_s * pulse_rate_hz))),
      background_(BackgroundModel::zeros(n_bins, params.alpha, params.warmup_blocks,
                                         params.sigma_floor, params.warm_start)) {
  if (n_bins == 0 || !(bin_size_m > 0.0) || !(pulse_rate_hz > 0.0)) {
    throw ArgumentError("detector needs positive bins, bin size and pulse rate");
  }
  if (!(params.hysteresis.k_off <= params.hysteresis.k_on)) {
    throw ArgumentError("hysteresis needs k_off <= k_on");
  }
}

EventTrack* Detector::find_track(std::uint64_t id) {
  for (auto& t : tracks_) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

TrackNotification Detector::notify(Notice kind, const EventTrack& track, double t_s) const {
  TrackNotification n;
  n.kind = kind;
  n.id = track.id;
  n.t_s = t_s;
  if (!track.span_history.empty()) {
    n.x_start_m = track.span_history.back().x_start_m;
    n.x_end_m = track.span_history.back().x_end_m;
  }
  n.centroid_m = track.centroid_m();
  n.motion = track.motion;
  n.velocity_mps = track.velocity_mps;
  return n;
}

void Detector::append_patch(EventTrack& track, const sim::WaterfallBlock& block) const {
  const std::size_t first = track.span_start_bin;
  const std::size_t last = std::min(track.span_end_bin, n_bins_ - 1);
  const double inv = 1.0 / static_cast<double>(last - first + 1);
  for (std::size_t t = 0; t < block.n_traces; ++t) {
    const auto row = block.row(t);
    double sum = 0.0;
    for (std::size_t x = first; x <= last; ++x) sum += row[x];
    track.patch.push(sum * inv);
  }
}

std::vector<TrackNotification> Detector::process_block(const sim::WaterfallBlock& block) {
  if (block.n_bins != n_bins_) {
    throw StreamError("block has " + std::to_string(block.n_bins) + " bins, detector expects " +
                      std::to_string(n_bins_));
  }
  block.check();
  const double t_s = block.t0_s + static_cast<double>(block.n_traces) / pulse_rate_hz_;
  if (blocks_ > 0 && !(t_s > last_t_s_)) throw StreamError("block timestamps must increase");
  ++blocks_;
  last_t_s_ = t_s;
  energy_ = block_energy(block);

  std::vector<TrackNotification> out;
  if (background_.warming_up()) {
    update_background(background_, energy_);
    return out;
  }

  activity_ = activity_scores(background_, energy_, activity_.active, params_.hysteresis);
  const auto clusters = segment_active_bins(activity_, bin_size_m_, params_.clusters);
  const auto result =
      associate(tracks_, clusters, t_s, params_.tracker, next_id_, patch_capacity_);

  for (const auto& m : result.matches) {
    auto& track = tracks_[m.track];
    append_patch(track, block);
    estimate_velocity(track, params_.tracker);
  }

  std::vector<char> newly_confirmed(tracks_.size(), 0);
  for (auto i : result.confirmed) newly_confirmed[i] = 1;
  std::vector<char> matched(tracks_.size(), 0);
  for (const auto& m : result.matches) matched[m.track] = 1;

  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    const auto& track = tracks_[i];
    if (newly_confirmed[i]) {
      out.push_back(notify(Notice::created, track, t_s));
    } else if (track.state == TrackState::confirmed && matched[i]) {
      out.push_back(notify(Notice::updated, track, t_s));
    } else if (track.state == TrackState::ended && track.was_confirmed) {
      out.push_back(notify(Notice::ended, track, t_s));
    }
  }

  update_background(background_, energy_, dilate(activity_.active, params_.clusters.gap_bins));
  retire_ended();
  return out;
}

void Detector::retire_ended() {
  auto keep = tracks_.begin();
  for (auto it = tracks_.begin(); it != tracks_.end(); ++it) {
    if (it->live()) {
      if (keep != it) *keep = std::move(*it);
      ++keep;
    } else if (it->was_confirmed && params_.ended_history > 0) {
      if (ended_.size() == params_.ended_history) ended_.pop_front();
      ended_.push_back(std::move(*it));
    }
  }
  tracks_.erase(keep, tracks_.end());
}

std::vector<TrackNotification> Detector::finish() {
  std::vector<TrackNotification> out;
  for (auto& track : tracks_) {
    if (!track.live()) continue;
    track.state = TrackState::ended;
    if (track.was_confirmed) out.push_back(notify(Notice::ended, track, last_t_s_));
  }
  retire_ended();
  return out;
}

}  // namespace fibersense::detect
