#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fibersense/service/events.hpp"

namespace fibersense::service {

enum class MessageKind { snapshot, tile, event, overflow };

struct StreamMessage {
  MessageKind kind = MessageKind::tile;
  /// Event messages hold the record object without "type"/"seq"; the
  /// subscriber stamps those on delivery (see Subscriber::pop).
  std::shared_ptr<const std::string> body;
};

/// Bounded per-connection buffer. When full, the oldest tile makes room;
/// tiles arriving to a buffer full of events are dropped; an event arriving
/// to a buffer full of events overflows the subscriber, which then yields a
/// single overflow notice and reports closed.
class Subscriber {
 public:
  explicit Subscriber(std::size_t capacity) : capacity_(capacity) {}

  void push(const StreamMessage& msg);

  /// Next message as wire text, waiting up to `timeout`. Event messages are
  /// numbered 1, 2, ... per subscriber. nullopt on timeout or once closed and
  /// drained.
  std::optional<std::string> pop(std::chrono::milliseconds timeout);
  std::optional<std::string> try_pop() { return pop(std::chrono::milliseconds(0)); }

  /// Wakes waiters; later pushes are ignored.
  void close();
  bool closed() const;
  bool overflowed() const;
  std::uint64_t tiles_dropped() const;
  std::size_t buffered() const;

  /// Invoked (outside the lock) after each accepted push, e.g. to wake an
  /// async writer. Must not block.
  void set_wakeup(std::function<void()> wakeup);

 private:
  friend class Hub;
  void push_locked(const StreamMessage& msg);

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<StreamMessage> buffer_;
  std::size_t capacity_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t tiles_dropped_ = 0;
  bool closed_ = false;
  bool overflowed_ = false;
  std::function<void()> wakeup_;
};

/// Fan-out from the pipeline to stream subscribers. Publishing never blocks
/// on a subscriber. The hub tracks the live event set so that a joining
/// subscriber's snapshot and the event stream that follows it are consistent.
class Hub {
 public:
  explicit Hub(std::size_t subscriber_capacity = 64) : capacity_(subscriber_capacity) {}

  /// Snapshot is queued first: {"type":"snapshot","config":..., "events":[live]}.
  std::shared_ptr<Subscriber> subscribe(const nlohmann::json& config);
  void unsubscribe(const std::shared_ptr<Subscriber>& sub);

  void publish_tile(const nlohmann::json& tile);
  void publish_event(const EventRecord& record);
  /// Clears the live set (new run).
  void reset();

  std::size_t subscriber_count() const;
  std::vector<EventRecord> live_events() const;
  std::uint64_t tiles_published() const;

 private:
  mutable std::mutex mutex_;
  std::size_t capacity_;
  std::vector<std::shared_ptr<Subscriber>> subscribers_;
  std::map<std::uint64_t, EventRecord> live_;
  std::uint64_t tiles_ = 0;
};

}  // namespace fibersense::service
