#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fibersense/classify/tree.hpp"
#include "fibersense/detect/detector.hpp"
#include "fibersense/features/features.hpp"
#include "fibersense/service/config.hpp"
#include "fibersense/service/events.hpp"

namespace fibersense::service {

struct ProcessorSettings {
  detect::DetectorParams detector;
  features::FeatureOptions features;
  ClassifierSettings classifier;
  std::size_t update_every_blocks = 10;

  static ProcessorSettings from(const PipelineConfig& config);
};

/// Called for every feature extraction, with or without a model loaded.
using FeatureObserver =
    std::function<void(const detect::EventTrack&, const features::FeatureVector&, double t_s)>;

/// Per-block event logic shared by the live service and the offline tools:
/// detect, extract features for confirmed tracks every classifier interval,
/// predict, smooth, and turn notifications into EventRecords.
class EventProcessor {
 public:
  /// `model` may be null (detection only). Throws ModelError when the model's
  /// feature-order hash does not match this build.
  EventProcessor(std::size_t n_bins, double bin_size_m, double pulse_rate_hz,
                 const ProcessorSettings& settings,
                 std::shared_ptr<const classify::TreeModel> model = nullptr);

  /// Records are ordered by track id within the block.
  std::vector<EventRecord> process_block(const sim::WaterfallBlock& block);
  /// Ends all live tracks.
  std::vector<EventRecord> finish();

  /// Latest record of every live confirmed track, by id.
  std::vector<EventRecord> live_events() const;

  void set_feature_observer(FeatureObserver observer) { observer_ = std::move(observer); }
  const detect::Detector& detector() const { return detector_; }
  const ProcessorSettings& settings() const { return settings_; }
  bool classifying() const { return model_ != nullptr; }

 private:
  struct ClassState {
    double last_classified_t_s = -1e300;
    std::vector<std::string> labels;
    std::string smoothed;
    double confidence = 0.0;
    std::size_t blocks_since_record = 0;
  };

  /// Returns true when the smoothed label changed.
  bool maybe_classify(detect::EventTrack& track, double t_s);
  EventRecord make_record(const detect::TrackNotification& n) const;

  ProcessorSettings settings_;
  std::shared_ptr<const classify::TreeModel> model_;
  detect::Detector detector_;
  std::map<std::uint64_t, ClassState> classes_;
  std::map<std::uint64_t, EventRecord> live_;
  FeatureObserver observer_;
};

}  // namespace fibersense::service
