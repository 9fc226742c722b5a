#include "fibersense/service/labeling.hpp"

#include <algorithm>

namespace fibersense::service {

double overlap_fraction(double track_x0, double track_x1, double span_x0, double span_x1) {
  const double extent = track_x1 - track_x0;
  if (!(extent > 0.0)) return 0.0;
  const double inter = std::min(track_x1, span_x1) - std::max(track_x0, span_x0);
  return std::max(0.0, inter) / extent;
}

const sim::LabelSpan* match_label(std::span<const sim::LabelSpan> labels, double t_s,
                                  double window_s, double x_start_m, double x_end_m) {
  const sim::LabelSpan* best = nullptr;
  double best_overlap = 0.0;
  for (const auto& span : labels) {
    if (t_s - window_s < span.t_start_s - 1e-9 || t_s > span.t_end_s + 1e-9) continue;
    const double f = overlap_fraction(x_start_m, x_end_m, span.x_start_m, span.x_end_m);
    if (f >= kMinLabelOverlap && f > best_overlap) {
      best = &span;
      best_overlap = f;
    }
  }
  return best;
}

features::LabeledDataset extract_labeled_features(EventProcessor& processor,
                                                  const BlockSource& source,
                                                  std::span<const sim::LabelSpan> labels) {
  features::LabeledDataset data;
  const double window_s = processor.settings().features.window_s;
  processor.set_feature_observer([&](const detect::EventTrack& track,
                                     const features::FeatureVector& fv, double t_s) {
    if (track.span_history.empty()) return;
    const auto& span = track.span_history.back();
    const auto* label = match_label(labels, t_s, window_s, span.x_start_m, span.x_end_m);
    if (!label) return;
    features::FeatureRow row;
    row.features = fv;
    row.label = label->label;
    row.source_event_id = track.id;
    row.t_s = t_s;
    data.rows.push_back(std::move(row));
  });
  while (auto block = source()) processor.process_block(*block);
  processor.finish();
  processor.set_feature_observer(nullptr);
  return data;
}

}  // namespace fibersense::service
