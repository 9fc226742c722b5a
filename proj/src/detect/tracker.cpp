#include "fibersense/detect/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace fibersense::detect {

std::string_view to_string(TrackState state) {
  switch (state) {
    case TrackState::tentative:
      return "tentative";
    case TrackState::confirmed:
      return "confirmed";
    case TrackState::ended:
      return "ended";
  }
  return "unknown";
}

std::string_view to_string(Motion motion) {
  return motion == Motion::moving ? "moving" : "stationary";
}

void PatchBuffer::push(double v) {
  if (data_.empty()) return;
  data_[head_] = v;
  head_ = (head_ + 1) % data_.size();
  size_ = std::min(size_ + 1, data_.size());
}

std::vector<double> PatchBuffer::snapshot() const {
  std::vector<double> out;
  out.reserve(size_);
  const std::size_t start = (head_ + data_.size() - size_) % std::max<std::size_t>(data_.size(), 1);
  for (std::size_t i = 0; i < size_; ++i) out.push_back(data_[(start + i) % data_.size()]);
  return out;
}

namespace {

bool spans_touch(const EventTrack& track, const SpatialCluster& c) {
  return c.x_start_bin <= track.span_end_bin + 1 && track.span_start_bin <= c.x_end_bin + 1;
}

void absorb(EventTrack& track, const SpatialCluster& c, double t_s) {
  track.centroid_history.push_back({t_s, c.centroid_m});
  track.span_history.push_back({t_s, c.x_start_m, c.x_end_m});
  track.span_start_bin = c.x_start_bin;
  track.span_end_bin = c.x_end_bin;
  track.last_seen_t_s = t_s;
  track.missed_blocks = 0;
  ++track.consecutive_hits;
}

}  // namespace

AssociationResult associate(std::vector<EventTrack>& tracks,
                            std::span<const SpatialCluster> clusters, double t_s,
                            const TrackerParams& params, std::uint64_t& next_id,
                            std::size_t patch_capacity) {
  AssociationResult result;

  std::vector<Association> candidates;
  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    const auto& track = tracks[ti];
    if (!track.live()) continue;
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
      const double d = std::abs(clusters[ci].centroid_m - track.centroid_m());
      if (d <= params.assoc_max_m && spans_touch(track, clusters[ci])) {
        candidates.push_back({ci, ti, d});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Association& a, const Association& b) {
    return std::tuple(a.distance_m, tracks[a.track].id, a.cluster) <
           std::tuple(b.distance_m, tracks[b.track].id, b.cluster);
  });

  std::vector<char> cluster_used(clusters.size(), 0);
  std::vector<char> track_used(tracks.size(), 0);
  for (const auto& cand : candidates) {
    if (cluster_used[cand.cluster] || track_used[cand.track]) continue;
    cluster_used[cand.cluster] = track_used[cand.track] = 1;
    result.matches.push_back(cand);
  }

  for (const auto& m : result.matches) {
    auto& track = tracks[m.track];
    absorb(track, clusters[m.cluster], t_s);
    if (track.state == TrackState::tentative && track.consecutive_hits >= params.confirm_blocks) {
      track.state = TrackState::confirmed;
      track.was_confirmed = true;
      result.confirmed.push_back(m.track);
    }
  }

  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    auto& track = tracks[ti];
    if (!track.live() || track_used[ti]) continue;
    track.consecutive_hits = 0;
    if (++track.missed_blocks >= params.timeout_blocks) {
      track.state = TrackState::ended;
      result.ended.push_back(ti);
    }
  }

  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    if (cluster_used[ci]) continue;
    EventTrack track;
    track.id = next_id++;
    track.born_t_s = t_s;
    track.patch = PatchBuffer(patch_capacity);
    absorb(track, clusters[ci], t_s);
    tracks.push_back(std::move(track));
    const std::size_t index = tracks.size() - 1;
    result.matches.push_back({ci, index, 0.0});
    result.spawned.push_back(index);
    if (params.confirm_blocks <= 1) {
      tracks[index].state = TrackState::confirmed;
      tracks[index].was_confirmed = true;
      result.confirmed.push_back(index);
    }
  }
  return result;
}

std::optional<double> fit_velocity(std::span<const CentroidSample> history, std::size_t window) {
  if (window < 2 || history.size() < window) return std::nullopt;
  const auto recent = history.subspan(history.size() - window);
  double t_mean = 0.0;
  double x_mean = 0.0;
  for (const auto& s : recent) {
    t_mean += s.t_s;
    x_mean += s.x_m;
  }
  t_mean /= static_cast<double>(window);
  x_mean /= static_cast<double>(window);
  double sxy = 0.0;
  double sxx = 0.0;
  for (const auto& s : recent) {
    sxy += (s.t_s - t_mean) * (s.x_m - x_mean);
    sxx += (s.t_s - t_mean) * (s.t_s - t_mean);
  }
  if (!(sxx > 0.0)) return 0.0;
  return sxy / sxx;
}

std::optional<double> estimate_velocity(EventTrack& track, const TrackerParams& params) {
  const auto v = fit_velocity(track.centroid_history, params.vel_window);
  if (!v) return std::nullopt;
  track.velocity_mps = *v;
  track.velocity_history.push_back(*v);
  if (std::abs(*v) >= params.v_min_mps) {
    ++track.fast_streak;
    track.slow_streak = 0;
  } else {
    ++track.slow_streak;
    track.fast_streak = 0;
  }
  if (track.motion == Motion::stationary && track.fast_streak >= params.motion_confirm) {
    track.motion = Motion::moving;
  } else if (track.motion == Motion::moving && track.slow_streak >= params.motion_confirm) {
    track.motion = Motion::stationary;
  }
  return v;
}

}  // namespace fibersense::detect
