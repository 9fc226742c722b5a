#pragma once

// Scripted scenarios and run harnesses shared by the end-to-end tests and the
// acceptance suite.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fibersense/classify/tree.hpp"
#include "fibersense/detect/detector.hpp"
#include "fibersense/features/dataset.hpp"
#include "fibersense/service/events.hpp"
#include "fibersense/service/processor.hpp"
#include "fibersense/sim/scenario.hpp"

namespace scenarios {

using fibersense::sim::ScenarioScript;

ScenarioScript quiescent(std::uint64_t seed, double duration_s);
/// Speaker tone switched on at `on_s` and left on.
ScenarioScript speaker_tone(std::uint64_t seed, double on_s, double duration_s);
/// Car starts at its default position at `on_s` with `speed_mps`.
ScenarioScript car_drive(std::uint64_t seed, double speed_mps, double on_s, double duration_s);
/// Speaker (tone), fan and car all switched on at `on_s`.
ScenarioScript three_sources(std::uint64_t seed, double on_s, double duration_s);

/// Warmup, then `episodes` rounds each switching on a random nonempty subset of
/// the sources for 8-12 s (random speaker signal, car speed 1-4 m/s), with 4 s
/// of quiet between rounds.
ScenarioScript episodes(std::uint64_t seed, int episodes);

/// What a confirmed track looked like over its lifetime.
struct TrackSummary {
  std::uint64_t id = 0;
  double confirmed_t_s = 0.0;
  double ended_t_s = 0.0;
  std::vector<double> centroids_m;
  std::vector<double> x_start_m;
  std::vector<double> x_end_m;
  std::vector<double> velocity_history;
  bool ever_moving = false;
  std::string final_label;

  double median_centroid() const;
  double median_x_start() const;
  double median_x_end() const;
  double median_velocity() const;
};

double median(std::vector<double> v);

/// Runs the detector over the script (blocks of 100 traces) and summarizes
/// every confirmed track.
std::vector<TrackSummary> detect_tracks(const ScenarioScript& script,
                                        const fibersense::detect::DetectorParams& params = {});

/// Runs the full event processor and returns every record plus per-id summaries.
struct ProcessedRun {
  std::vector<fibersense::service::EventRecord> records;
  std::map<std::uint64_t, TrackSummary> tracks;
};
ProcessedRun process(const ScenarioScript& script,
                     const fibersense::service::ProcessorSettings& settings,
                     std::shared_ptr<const fibersense::classify::TreeModel> model = nullptr);

/// Labeled feature rows from the script's ground truth, at most `per_class`
/// distinct events per class, accumulated over consecutive seeds of
/// episodes(seed, n_episodes) starting at `first_seed`.
fibersense::features::LabeledDataset training_set(std::uint64_t first_seed, std::size_t per_class,
                                                  int n_episodes,
                                                  const fibersense::service::ProcessorSettings& settings);

/// Tree trained on training_set(1000, 30, 10, defaults): the small-data model
/// the end-to-end checks classify with. Trained once per process.
std::shared_ptr<const fibersense::classify::TreeModel> reference_model();

}  // namespace scenarios
