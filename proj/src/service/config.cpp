#include "fibersense/service/config.hpp"

#include <cmath>
#include <fstream>

#include "fibersense/errors.hpp"
#include "fibersense/sim/json_io.hpp"

namespace fibersense::service {

using nlohmann::json;

namespace {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return empty;
  if (!it->is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return *it;
}

}  // namespace

std::string_view to_string(SourceMode mode) { return mode == SourceMode::live ? "live" : "replay"; }

void PipelineConfig::validate() const {
  if (block_size_traces == 0) throw ConfigError("block_size_traces must be positive");
  if (stream_downsample.time_factor < 1 || stream_downsample.space_factor < 1) {
    throw ConfigError("stream_downsample factors must be >= 1");
  }
  if (block_size_traces % stream_downsample.time_factor != 0) {
    throw ConfigError("block_size_traces must be a multiple of stream_downsample.time_factor");
  }
  if (!(speed >= 0.0) || !std::isfinite(speed)) throw ConfigError("speed must be >= 0");
  if (!(duration_s >= 0.0)) throw ConfigError("duration_s must be >= 0");
  if (!(noise_sigma_rad >= 0.0)) throw ConfigError("noise_sigma_rad must be >= 0");
  if (!(features.window_s > 0.0)) throw ConfigError("features.window_s must be positive");
  if (!(classifier.interval_s > 0.0)) throw ConfigError("classifier.interval_s must be positive");
  if (classifier.smooth_window == 0) throw ConfigError("classifier.smooth_window must be positive");
  if (!(detector.alpha > 0.0 && detector.alpha <= 1.0)) {
    throw ConfigError("detector.alpha must be in (0, 1]");
  }
  if (!(detector.hysteresis.k_off <= detector.hysteresis.k_on)) {
    throw ConfigError("detector.k_off must not exceed detector.k_on");
  }
  if (!(detector.patch_window_s >= features.window_s)) {
    throw ConfigError("detector.patch_window_s must cover features.window_s");
  }
  if (block_queue_capacity == 0 || control_queue_capacity == 0 || subscriber_buffer == 0) {
    throw ConfigError("queue capacities must be positive");
  }
  if (mode == SourceMode::replay && replay_path.empty()) {
    throw ConfigError("replay mode needs replay_path");
  }
  if (update_every_blocks == 0) throw ConfigError("update_every_blocks must be positive");
}

json to_json(const PipelineConfig& c) {
  const auto& d = c.detector;
  return {
      {"layout", c.layout},
      {"sources", c.sources},
      {"noise_sigma_rad", c.noise_sigma_rad},
      {"seed", c.seed},
      {"detector",
       {{"alpha", d.alpha},
        {"warmup_blocks", d.warmup_blocks},
        {"sigma_floor", d.sigma_floor},
        {"warm_start", d.warm_start},
        {"k_on", d.hysteresis.k_on},
        {"k_off", d.hysteresis.k_off},
        {"gap_bins", d.clusters.gap_bins},
        {"min_width_bins", d.clusters.min_width_bins},
        {"assoc_max_m", d.tracker.assoc_max_m},
        {"timeout_blocks", d.tracker.timeout_blocks},
        {"confirm_blocks", d.tracker.confirm_blocks},
        {"v_min_mps", d.tracker.v_min_mps},
        {"vel_window", d.tracker.vel_window},
        {"motion_confirm", d.tracker.motion_confirm},
        {"patch_window_s", d.patch_window_s},
        {"ended_history", d.ended_history}}},
      {"features", {{"window_s", c.features.window_s}, {"use_velocity", c.features.use_velocity}}},
      {"classifier",
       {{"model_path", c.classifier.model_path},
        {"interval_s", c.classifier.interval_s},
        {"smooth_window", c.classifier.smooth_window},
        {"confidence_threshold", c.classifier.confidence_threshold}}},
      {"block_size_traces", c.block_size_traces},
      {"stream_downsample",
       {{"time_factor", c.stream_downsample.time_factor},
        {"space_factor", c.stream_downsample.space_factor}}},
      {"update_every_blocks", c.update_every_blocks},
      {"listen", {{"address", c.listen_address}, {"port", c.listen_port}}},
      {"static_dir", c.static_dir},
      {"source",
       {{"mode", to_string(c.mode)},
        {"scenario_path", c.scenario_path},
        {"replay_path", c.replay_path},
        {"speed", c.speed},
        {"duration_s", c.duration_s}}},
      {"record_path", c.record_path},
      {"events_path", c.events_path},
      {"queues",
       {{"block_capacity", c.block_queue_capacity},
        {"control_capacity", c.control_queue_capacity},
        {"subscriber_buffer", c.subscriber_buffer}}},
  };
}

PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  try {
    if (j.contains("layout")) c.layout = j.at("layout").get<sim::LayoutConfig>();
    if (j.contains("sources")) c.sources = j.at("sources").get<sim::SourceState>();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  read_opt(j, "noise_sigma_rad", c.noise_sigma_rad);
  read_opt(j, "seed", c.seed);

  const auto& d = section(j, "detector");
  read_opt(d, "alpha", c.detector.alpha);
  read_opt(d, "warmup_blocks", c.detector.warmup_blocks);
  read_opt(d, "sigma_floor", c.detector.sigma_floor);
  read_opt(d, "warm_start", c.detector.warm_start);
  read_opt(d, "k_on", c.detector.hysteresis.k_on);
  read_opt(d, "k_off", c.detector.hysteresis.k_off);
  read_opt(d, "gap_bins", c.detector.clusters.gap_bins);
  read_opt(d, "min_width_bins", c.detector.clusters.min_width_bins);
  read_opt(d, "assoc_max_m", c.detector.tracker.assoc_max_m);
  read_opt(d, "timeout_blocks", c.detector.tracker.timeout_blocks);
  read_opt(d, "confirm_blocks", c.detector.tracker.confirm_blocks);
  read_opt(d, "v_min_mps", c.detector.tracker.v_min_mps);
  read_opt(d, "vel_window", c.detector.tracker.vel_window);
  read_opt(d, "motion_confirm", c.detector.tracker.motion_confirm);
  read_opt(d, "patch_window_s", c.detector.patch_window_s);
  read_opt(d, "ended_history", c.detector.ended_history);

  const auto& f = section(j, "features");
  read_opt(f, "window_s", c.features.window_s);
  read_opt(f, "use_velocity", c.features.use_velocity);

  const auto& cl = section(j, "classifier");
  read_opt(cl, "model_path", c.classifier.model_path);
  read_opt(cl, "interval_s", c.classifier.interval_s);
  read_opt(cl, "smooth_window", c.classifier.smooth_window);
  read_opt(cl, "confidence_threshold", c.classifier.confidence_threshold);

  read_opt(j, "block_size_traces", c.block_size_traces);
  const auto& ds = section(j, "stream_downsample");
  read_opt(ds, "time_factor", c.stream_downsample.time_factor);
  read_opt(ds, "space_factor", c.stream_downsample.space_factor);
  read_opt(j, "update_every_blocks", c.update_every_blocks);

  const auto& listen = section(j, "listen");
  read_opt(listen, "address", c.listen_address);
  read_opt(listen, "port", c.listen_port);
  read_opt(j, "static_dir", c.static_dir);

  const auto& src = section(j, "source");
  std::string mode = std::string(to_string(c.mode));
  read_opt(src, "mode", mode);
  if (mode == "live") {
    c.mode = SourceMode::live;
  } else if (mode == "replay") {
    c.mode = SourceMode::replay;
  } else {
    throw ConfigError("source.mode must be 'live' or 'replay', got '" + mode + "'");
  }
  read_opt(src, "scenario_path", c.scenario_path);
  read_opt(src, "replay_path", c.replay_path);
  read_opt(src, "speed", c.speed);
  read_opt(src, "duration_s", c.duration_s);

  read_opt(j, "record_path", c.record_path);
  read_opt(j, "events_path", c.events_path);

  const auto& q = section(j, "queues");
  read_opt(q, "block_capacity", c.block_queue_capacity);
  read_opt(q, "control_capacity", c.control_queue_capacity);
  read_opt(q, "subscriber_buffer", c.subscriber_buffer);

  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace fibersense::service
