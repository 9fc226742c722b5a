#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fibersense/detect/detector.hpp"

namespace fibersense::service {

enum class EventKind { created, updated, classified, ended };

std::string_view to_string(EventKind kind);
EventKind event_kind_from(detect::Notice notice);

/// A detector notification plus the event's classification at that time.
/// `classified` records mark a change of the smoothed label.
struct EventRecord {
  EventKind kind = EventKind::updated;
  std::uint64_t id = 0;
  double t_s = 0.0;
  double x_start_m = 0.0;
  double x_end_m = 0.0;
  double centroid_m = 0.0;
  detect::Motion motion = detect::Motion::stationary;
  double velocity_mps = 0.0;
  /// Smoothed label; empty until the first classification.
  std::string label;
  /// Confidence of the most recent raw prediction.
  double confidence = 0.0;
  bool uncertain = false;
  /// Position in the store, assigned on append.
  std::uint64_t sequence = 0;

  bool operator==(const EventRecord&) const = default;
};

/// {"event", id, t_s, x_start_m, x_end_m, centroid_m, motion, velocity_mps,
///  "class"?, confidence?, uncertain?, sequence}; classification fields only
/// once the event has a label.
nlohmann::json to_json(const EventRecord& r);
/// Throws ValidationError on malformed records.
EventRecord event_record_from_json(const nlohmann::json& j);

/// Equality ignoring the store sequence, for comparing logs across runs.
bool same_event(const EventRecord& a, const EventRecord& b);

struct EventQuery {
  std::optional<double> since_t_s;
  std::optional<std::uint64_t> id;
  /// Only records with sequence > after (pagination cursor).
  std::optional<std::uint64_t> after;
  std::size_t limit = 0;  // 0 = unlimited
};

/// Parses since/id/after/limit query values. Throws ValidationError.
EventQuery parse_event_query(const std::optional<std::string>& since,
                             const std::optional<std::string>& id,
                             const std::optional<std::string>& after,
                             const std::optional<std::string>& limit);

/// Append-only event log, in memory and optionally mirrored to a JSON-lines
/// file (flushed per append, so every prefix of the file parses). Records are
/// kept in (t_s, id, sequence) order because appends arrive in block order.
class EventStore {
 public:
  EventStore() = default;
  explicit EventStore(const std::filesystem::path& path);

  /// Assigns and returns the sequence number. Throws ArgumentError when t_s
  /// goes backwards.
  std::uint64_t append(EventRecord record);

  std::vector<EventRecord> query(const EventQuery& q = {}) const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<EventRecord> records_;
  std::ofstream file_;
};

/// Reads a JSON-lines event log. A torn final line is ignored; damage
/// anywhere else throws ValidationError naming the line.
std::vector<EventRecord> read_event_log(const std::filesystem::path& path);
void write_event_log(const std::filesystem::path& path, const std::vector<EventRecord>& records);

}  // namespace fibersense::service
