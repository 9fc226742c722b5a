#include "fibersense/service/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "fibersense/errors.hpp"

namespace fibersense::service {

using nlohmann::json;

namespace {

EventKind event_kind_from_string(const std::string& s) {
  if (s == "created") return EventKind::created;
  if (s == "updated") return EventKind::updated;
  if (s == "classified") return EventKind::classified;
  if (s == "ended") return EventKind::ended;
  throw ValidationError("unknown event kind '" + s + "'");
}

template <class T>
std::optional<T> parse_number(const std::optional<std::string>& text, const char* name) {
  if (!text) return std::nullopt;
  T value{};
  const char* first = text->data();
  const char* last = first + text->size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text->empty() || ec != std::errc() || ptr != last) {
    throw ValidationError(std::string("query parameter '") + name + "' is not a valid number: '" +
                          *text + "'");
  }
  return value;
}

}  // namespace

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::created:
      return "created";
    case EventKind::updated:
      return "updated";
    case EventKind::classified:
      return "classified";
    case EventKind::ended:
      return "ended";
  }
  return "unknown";
}

EventKind event_kind_from(detect::Notice notice) {
  switch (notice) {
    case detect::Notice::created:
      return EventKind::created;
    case detect::Notice::updated:
      return EventKind::updated;
    case detect::Notice::ended:
      return EventKind::ended;
  }
  return EventKind::updated;
}

json to_json(const EventRecord& r) {
  json j{
      {"event", to_string(r.kind)},
      {"id", r.id},
      {"t_s", r.t_s},
      {"x_start_m", r.x_start_m},
      {"x_end_m", r.x_end_m},
      {"centroid_m", r.centroid_m},
      {"motion", detect::to_string(r.motion)},
      {"velocity_mps", r.velocity_mps},
      {"sequence", r.sequence},
  };
  if (!r.label.empty()) {
    j["class"] = r.label;
    j["confidence"] = r.confidence;
    j["uncertain"] = r.uncertain;
  }
  return j;
}

EventRecord event_record_from_json(const json& j) {
  EventRecord r;
  try {
    r.kind = event_kind_from_string(j.at("event").get<std::string>());
    r.id = j.at("id").get<std::uint64_t>();
    r.t_s = j.at("t_s").get<double>();
    r.x_start_m = j.value("x_start_m", 0.0);
    r.x_end_m = j.value("x_end_m", 0.0);
    r.centroid_m = j.value("centroid_m", 0.0);
    r.motion = j.value("motion", std::string("stationary")) == "moving" ? detect::Motion::moving
                                                                        : detect::Motion::stationary;
    r.velocity_mps = j.value("velocity_mps", 0.0);
    if (j.contains("class") && j.at("class").is_string()) r.label = j.at("class").get<std::string>();
    r.confidence = j.value("confidence", 0.0);
    r.uncertain = j.value("uncertain", false);
    r.sequence = j.value("sequence", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed event record: ") + e.what());
  }
  return r;
}

bool same_event(const EventRecord& a, const EventRecord& b) {
  EventRecord x = a;
  x.sequence = b.sequence;
  return x == b;
}

EventQuery parse_event_query(const std::optional<std::string>& since,
                             const std::optional<std::string>& id,
                             const std::optional<std::string>& after,
                             const std::optional<std::string>& limit) {
  EventQuery q;
  q.since_t_s = parse_number<double>(since, "since");
  if (q.since_t_s && !std::isfinite(*q.since_t_s)) {
    throw ValidationError("query parameter 'since' must be finite");
  }
  q.id = parse_number<std::uint64_t>(id, "id");
  q.after = parse_number<std::uint64_t>(after, "after");
  q.limit = parse_number<std::size_t>(limit, "limit").value_or(0);
  return q;
}

EventStore::EventStore(const std::filesystem::path& path) : file_(path, std::ios::app) {
  if (!file_) throw ConfigError("cannot open event log " + path.string());
}

std::uint64_t EventStore::append(EventRecord record) {
  std::lock_guard lock(mutex_);
  if (!records_.empty() && record.t_s < records_.back().t_s) {
    throw ArgumentError("event records must be appended in time order");
  }
  record.sequence = records_.size() + 1;
  if (file_.is_open()) {
    file_ << to_json(record).dump() << '\n';
    file_.flush();
  }
  records_.push_back(std::move(record));
  return records_.back().sequence;
}

std::vector<EventRecord> EventStore::query(const EventQuery& q) const {
  std::lock_guard lock(mutex_);
  std::vector<EventRecord> out;
  for (const auto& r : records_) {
    if (q.since_t_s && r.t_s < *q.since_t_s) continue;
    if (q.id && r.id != *q.id) continue;
    if (q.after && r.sequence <= *q.after) continue;
    out.push_back(r);
    if (q.limit != 0 && out.size() == q.limit) break;
  }
  return out;
}

std::size_t EventStore::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::vector<EventRecord> read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open event log " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  const bool torn_tail = !lines.empty() && in.eof() && !lines.back().empty() &&
                         [&] {
                           in.clear();
                           in.seekg(-1, std::ios::end);
                           return in.get() != '\n';
                         }();

  std::vector<EventRecord> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      out.push_back(event_record_from_json(json::parse(lines[i])));
    } catch (const std::exception& e) {
      if (torn_tail && i + 1 == lines.size()) break;
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

void write_event_log(const std::filesystem::path& path, const std::vector<EventRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

}  // namespace fibersense::service
