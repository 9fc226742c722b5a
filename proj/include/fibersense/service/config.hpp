#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "fibersense/detect/detector.hpp"
#include "fibersense/features/features.hpp"
#include "fibersense/sim/layout.hpp"
#include "fibersense/sim/sources.hpp"

namespace fibersense::service {

enum class SourceMode { live, replay };

struct ClassifierSettings {
  /// Empty runs detection only.
  std::string model_path;
  double interval_s = 0.5;
  std::size_t smooth_window = 5;
  /// Predictions below this confidence are flagged uncertain in the log.
  double confidence_threshold = 0.5;
};

struct DownsampleSettings {
  std::size_t time_factor = 10;
  std::size_t space_factor = 2;
};

struct PipelineConfig {
  sim::LayoutConfig layout;
  sim::SourceState sources;
  double noise_sigma_rad = 0.01;
  std::uint64_t seed = 0;

  detect::DetectorParams detector;
  features::FeatureOptions features;
  ClassifierSettings classifier;

  std::size_t block_size_traces = 100;
  DownsampleSettings stream_downsample;
  /// Confirmed tracks log an `updated` record at least this often (in
  /// matched blocks), and whenever their smoothed label changes.
  std::size_t update_every_blocks = 10;

  std::string listen_address = "127.0.0.1";
  std::uint16_t listen_port = 8080;
  std::string static_dir;

  SourceMode mode = SourceMode::live;
  /// Live mode: optional scripted timeline (scenario JSON) run against the simulator.
  std::string scenario_path;
  /// Replay mode: POTD file to read.
  std::string replay_path;
  /// Pacing relative to real time; 0 runs as fast as possible.
  double speed = 1.0;
  /// Live mode: stop after this many simulated seconds (0 = until stopped).
  double duration_s = 0.0;

  std::string record_path;
  std::string events_path;

  std::size_t block_queue_capacity = 16;
  std::size_t control_queue_capacity = 32;
  std::size_t subscriber_buffer = 64;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

std::string_view to_string(SourceMode mode);

/// Every field is emitted, so the result is the effective configuration.
nlohmann::json to_json(const PipelineConfig& config);
/// Missing fields keep their defaults. Throws ConfigError on wrong types,
/// unknown enum values or a config that fails validate().
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace fibersense::service
