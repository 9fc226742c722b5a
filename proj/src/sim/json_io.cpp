#include "fibersense/sim/json_io.hpp"

#include <fstream>
#include <string>

#include "fibersense/errors.hpp"

namespace fibersense::sim {

using nlohmann::json;

namespace {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.is_object()) throw ValidationError("expected a JSON object");
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T read_required(const json& j, const char* key) {
  if (!j.is_object()) throw ValidationError("expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

void to_json(json& j, const Segment& s) {
  j = json{{"start_m", s.start_m}, {"end_m", s.end_m}, {"kind", to_string(s.kind)}};
}

void from_json(const json& j, Segment& s) {
  s.start_m = read_required<double>(j, "start_m");
  s.end_m = read_required<double>(j, "end_m");
  s.kind = segment_kind_from_string(read_required<std::string>(j, "kind"));
}

void to_json(json& j, const LayoutConfig& c) {
  j = json{{"n_bins", c.n_bins},
           {"bin_size_m", c.bin_size_m},
           {"pulse_rate_hz", c.pulse_rate_hz},
           {"segments", c.segments}};
}

void from_json(const json& j, LayoutConfig& c) {
  read_opt(j, "n_bins", c.n_bins);
  read_opt(j, "bin_size_m", c.bin_size_m);
  read_opt(j, "pulse_rate_hz", c.pulse_rate_hz);
  if (j.contains("segments")) {
    c.segments.clear();
    for (const auto& s : j.at("segments")) c.segments.push_back(s.get<Segment>());
  }
}

void to_json(json& j, const SourceState& s) {
  j = json{
      {"speaker",
       {{"on", s.speaker.on},
        {"signal_kind", to_string(s.speaker.signal)},
        {"center_m", s.speaker.center_m},
        {"spatial_sigma_m", s.speaker.spatial_sigma_m},
        {"amplitude_rad", s.speaker.amplitude_rad}}},
      {"fan",
       {{"on", s.fan.on},
        {"band_low_hz", s.fan.band_low_hz},
        {"band_high_hz", s.fan.band_high_hz},
        {"gust_time_constant_s", s.fan.gust_time_constant_s},
        {"amplitude_rad", s.fan.amplitude_rad}}},
      {"car",
       {{"driving", s.car.driving},
        {"position_m", s.car.position_m},
        {"speed_mps", s.car.speed_mps},
        {"spatial_sigma_m", s.car.spatial_sigma_m},
        {"amplitude_rad", s.car.amplitude_rad}}},
  };
}

void from_json(const json& j, SourceState& s) {
  if (j.contains("speaker")) {
    const auto& sp = j.at("speaker");
    read_opt(sp, "on", s.speaker.on);
    if (sp.contains("signal_kind")) {
      s.speaker.signal = audio_signal_from_string(read_required<std::string>(sp, "signal_kind"));
    }
    read_opt(sp, "center_m", s.speaker.center_m);
    read_opt(sp, "spatial_sigma_m", s.speaker.spatial_sigma_m);
    read_opt(sp, "amplitude_rad", s.speaker.amplitude_rad);
  }
  if (j.contains("fan")) {
    const auto& f = j.at("fan");
    read_opt(f, "on", s.fan.on);
    read_opt(f, "band_low_hz", s.fan.band_low_hz);
    read_opt(f, "band_high_hz", s.fan.band_high_hz);
    read_opt(f, "gust_time_constant_s", s.fan.gust_time_constant_s);
    read_opt(f, "amplitude_rad", s.fan.amplitude_rad);
  }
  if (j.contains("car")) {
    const auto& c = j.at("car");
    read_opt(c, "driving", s.car.driving);
    read_opt(c, "position_m", s.car.position_m);
    read_opt(c, "speed_mps", s.car.speed_mps);
    read_opt(c, "spatial_sigma_m", s.car.spatial_sigma_m);
    read_opt(c, "amplitude_rad", s.car.amplitude_rad);
  }
}

void to_json(json& j, const LabelSpan& s) {
  j = json{{"t_start_s", s.t_start_s}, {"t_end_s", s.t_end_s}, {"x_start_m", s.x_start_m},
           {"x_end_m", s.x_end_m},     {"class", s.label}};
}

void from_json(const json& j, LabelSpan& s) {
  s.t_start_s = read_required<double>(j, "t_start_s");
  s.t_end_s = read_required<double>(j, "t_end_s");
  s.x_start_m = read_required<double>(j, "x_start_m");
  s.x_end_m = read_required<double>(j, "x_end_m");
  s.label = read_required<std::string>(j, "class");
}

json command_to_json(const ControlCommand& cmd) {
  if (const auto* c = std::get_if<SetFan>(&cmd)) return {{"type", "fan"}, {"on", c->on}};
  if (const auto* c = std::get_if<SetAudio>(&cmd)) {
    return {{"type", "audio"}, {"signal", to_string(c->signal)}, {"on", c->on}};
  }
  const auto& c = std::get<CarControl>(cmd);
  return {{"type", "car"},
          {"command", c.action == CarControl::Action::start ? "start" : "stop"},
          {"speed_mps", c.speed_mps}};
}

SetFan fan_command_from_json(const json& body) {
  return SetFan{read_required<bool>(body, "on")};
}

SetAudio audio_command_from_json(const json& body) {
  SetAudio cmd;
  cmd.signal = audio_signal_from_string(read_required<std::string>(body, "signal"));
  cmd.on = read_required<bool>(body, "on");
  return cmd;
}

CarControl car_command_from_json(const json& body) {
  CarControl cmd;
  const auto action = read_required<std::string>(body, "command");
  if (action == "start") {
    cmd.action = CarControl::Action::start;
    cmd.speed_mps = read_required<double>(body, "speed_mps");
  } else if (action == "stop") {
    cmd.action = CarControl::Action::stop;
    read_opt(body, "speed_mps", cmd.speed_mps);
  } else {
    throw ValidationError("car command must be 'start' or 'stop'");
  }
  validate(ControlCommand{cmd});
  return cmd;
}

ControlCommand command_from_json(const json& j) {
  const auto type = read_required<std::string>(j, "type");
  if (type == "fan") return fan_command_from_json(j);
  if (type == "audio") return audio_command_from_json(j);
  if (type == "car") return car_command_from_json(j);
  throw ValidationError("unknown command type '" + type + "'");
}

void to_json(json& j, const ScenarioScript& s) {
  json timeline = json::array();
  for (const auto& entry : s.timeline) {
    timeline.push_back({{"t_s", entry.t_s}, {"command", command_to_json(entry.command)}});
  }
  j = json{{"duration_s", s.duration_s},           {"seed", s.seed},       {"timeline", timeline},
           {"layout", s.layout},                   {"sources", s.sources},
           {"noise_sigma_rad", s.noise_sigma_rad}};
}

void from_json(const json& j, ScenarioScript& s) {
  if (!j.is_object()) throw ScriptError("scenario must be a JSON object");
  try {
    read_opt(j, "duration_s", s.duration_s);
    read_opt(j, "seed", s.seed);
    read_opt(j, "noise_sigma_rad", s.noise_sigma_rad);
    if (j.contains("layout")) s.layout = j.at("layout").get<LayoutConfig>();
    if (j.contains("sources")) s.sources = j.at("sources").get<SourceState>();
    s.timeline.clear();
    if (j.contains("timeline")) {
      for (const auto& entry : j.at("timeline")) {
        s.timeline.push_back(
            {read_required<double>(entry, "t_s"), command_from_json(entry.at("command"))});
      }
    }
  } catch (const json::exception& e) {
    throw ScriptError(std::string("malformed scenario: ") + e.what());
  }
}

ScenarioScript load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScriptError("cannot open scenario '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ScriptError("scenario '" + path.string() + "' is not valid JSON: " + e.what());
  }
  auto script = j.get<ScenarioScript>();
  validate(script);
  return script;
}

void write_labels(const std::filesystem::path& path, const std::vector<LabelSpan>& labels) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw StreamError("cannot open '" + path.string() + "' for writing");
  for (const auto& span : labels) out << json(span).dump() << '\n';
}

std::vector<LabelSpan> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StreamError("cannot open labels '" + path.string() + "'");
  std::vector<LabelSpan> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      labels.push_back(json::parse(line).get<LabelSpan>());
    } catch (const json::exception& e) {
      throw ValidationError("malformed label line: " + std::string(e.what()));
    }
  }
  return labels;
}

}  // namespace fibersense::sim
