#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"

#include "fibersense/sim/layout.hpp"
#include "fibersense/sim/scenario.hpp"
#include "fibersense/sim/sources.hpp"

namespace fibersense::sim {

// Missing fields keep their defaults; unknown fields are ignored. Malformed
// values raise ValidationError / ScriptError rather than json exceptions.

void to_json(nlohmann::json& j, const Segment& s);
void from_json(const nlohmann::json& j, Segment& s);
void to_json(nlohmann::json& j, const LayoutConfig& c);
void from_json(const nlohmann::json& j, LayoutConfig& c);
void to_json(nlohmann::json& j, const SourceState& s);
void from_json(const nlohmann::json& j, SourceState& s);
void to_json(nlohmann::json& j, const LabelSpan& s);
void from_json(const nlohmann::json& j, LabelSpan& s);
void to_json(nlohmann::json& j, const ScenarioScript& s);
void from_json(const nlohmann::json& j, ScenarioScript& s);

/// Control bodies as accepted by the HTTP control endpoints, with a "type"
/// discriminator added: {"type":"fan","on":true},
/// {"type":"audio","signal":"tone","on":true},
/// {"type":"car","command":"start","speed_mps":2.0}.
nlohmann::json command_to_json(const ControlCommand& cmd);
ControlCommand command_from_json(const nlohmann::json& j);

/// Parses one endpoint body where the type is implied by the route.
SetFan fan_command_from_json(const nlohmann::json& body);
SetAudio audio_command_from_json(const nlohmann::json& body);
CarControl car_command_from_json(const nlohmann::json& body);

ScenarioScript load_scenario(const std::filesystem::path& path);

/// One JSON object per line.
void write_labels(const std::filesystem::path& path, const std::vector<LabelSpan>& labels);
std::vector<LabelSpan> read_labels(const std::filesystem::path& path);

}  // namespace fibersense::sim
