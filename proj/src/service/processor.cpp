#include "fibersense/service/processor.hpp"

#include <algorithm>

#include "fibersense/errors.hpp"

namespace fibersense::service {

ProcessorSettings ProcessorSettings::from(const PipelineConfig& config) {
  ProcessorSettings s;
  s.detector = config.detector;
  s.features = config.features;
  s.classifier = config.classifier;
  s.update_every_blocks = config.update_every_blocks;
  return s;
}

EventProcessor::EventProcessor(std::size_t n_bins, double bin_size_m, double pulse_rate_hz,
                               const ProcessorSettings& settings,
                               std::shared_ptr<const classify::TreeModel> model)
    : settings_(settings),
      model_(std::move(model)),
      detector_(n_bins, bin_size_m, pulse_rate_hz, settings.detector) {
  if (model_ && model_->feature_order_hash != features::feature_order_hash_hex()) {
    throw ModelError("model feature order hash " + model_->feature_order_hash +
                     " does not match this build (" + features::feature_order_hash_hex() + ")");
  }
}

bool EventProcessor::maybe_classify(detect::EventTrack& track, double t_s) {
  auto& state = classes_[track.id];
  const std::size_t window = static_cast<std::size_t>(
      std::llround(settings_.features.window_s * detector_.pulse_rate_hz()));
  if (track.patch.size() < window) return false;
  if (t_s - state.last_classified_t_s < settings_.classifier.interval_s - 1e-9) return false;
  state.last_classified_t_s = t_s;

  const auto patch = features::make_patch(track, detector_.pulse_rate_hz());
  const auto fv = features::extract_features(patch, track, settings_.features);
  if (observer_) observer_(track, fv, t_s);
  if (!model_) return false;

  const auto p = classify::predict(*model_, fv);
  track.class_history.push_back({t_s, p.label, p.confidence});
  state.labels.push_back(p.label);
  state.confidence = p.confidence;
  const auto smoothed = classify::smooth_labels(state.labels, settings_.classifier.smooth_window);
  const bool changed = smoothed != state.smoothed;
  state.smoothed = smoothed;
  return changed;
}

EventRecord EventProcessor::make_record(const detect::TrackNotification& n) const {
  EventRecord r;
  r.kind = event_kind_from(n.kind);
  r.id = n.id;
  r.t_s = n.t_s;
  r.x_start_m = n.x_start_m;
  r.x_end_m = n.x_end_m;
  r.centroid_m = n.centroid_m;
  r.motion = n.motion;
  r.velocity_mps = n.velocity_mps;
  if (auto it = classes_.find(n.id); it != classes_.end() && !it->second.smoothed.empty()) {
    r.label = it->second.smoothed;
    r.confidence = it->second.confidence;
    r.uncertain = r.confidence < settings_.classifier.confidence_threshold;
  }
  return r;
}

std::vector<EventRecord> EventProcessor::process_block(const sim::WaterfallBlock& block) {
  auto notes = detector_.process_block(block);
  std::sort(notes.begin(), notes.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });

  std::vector<EventRecord> out;
  for (const auto& n : notes) {
    bool label_changed = false;
    if (n.kind != detect::Notice::ended) {
      if (auto* track = detector_.find_track(n.id)) label_changed = maybe_classify(*track, n.t_s);
    }
    auto& state = classes_[n.id];
    bool emit = true;
    if (n.kind == detect::Notice::updated) {
      ++state.blocks_since_record;
      emit = label_changed || state.blocks_since_record >= settings_.update_every_blocks;
    }
    if (!emit) continue;
    state.blocks_since_record = 0;
    auto record = make_record(n);
    if (label_changed && record.kind == EventKind::updated) record.kind = EventKind::classified;
    if (n.kind == detect::Notice::ended) {
      live_.erase(n.id);
      classes_.erase(n.id);
    } else {
      live_[n.id] = record;
    }
    out.push_back(std::move(record));
  }
  return out;
}

std::vector<EventRecord> EventProcessor::finish() {
  auto notes = detector_.finish();
  std::sort(notes.begin(), notes.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<EventRecord> out;
  for (const auto& n : notes) {
    out.push_back(make_record(n));
    live_.erase(n.id);
    classes_.erase(n.id);
  }
  return out;
}

std::vector<EventRecord> EventProcessor::live_events() const {
  std::vector<EventRecord> out;
  out.reserve(live_.size());
  for (const auto& [id, r] : live_) out.push_back(r);
  return out;
}

}  // namespace fibersense::service
