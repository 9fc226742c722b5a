#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fibersense/features/dataset.hpp"
#include "fibersense/service/processor.hpp"
#include "fibersense/sim/scenario.hpp"

namespace fibersense::service {

inline constexpr double kMinLabelOverlap = 0.5;

/// |track ∩ span| / |track|, 0 for an empty track extent.
double overlap_fraction(double track_x0, double track_x1, double span_x0, double span_x1);

/// The ground-truth span covering a feature window ending at t_s over the
/// given extent: the window must lie inside the span's on-interval and at
/// least kMinLabelOverlap of the extent inside its zone. Best overlap wins.
const sim::LabelSpan* match_label(std::span<const sim::LabelSpan> labels, double t_s,
                                  double window_s, double x_start_m, double x_end_m);

using BlockSource = std::function<std::optional<sim::WaterfallBlock>()>;

/// Runs the processor over the source and keeps one row per feature
/// extraction that matches a label span. Unmatched windows are dropped.
features::LabeledDataset extract_labeled_features(EventProcessor& processor,
                                                  const BlockSource& source,
                                                  std::span<const sim::LabelSpan> labels);

}  // namespace fibersense::service
