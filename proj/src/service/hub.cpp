#include "fibersense/service/hub.hpp"

#include <algorithm>

namespace fibersense::service {

void Subscriber::push_locked(const StreamMessage& msg) {
  if (closed_) return;
  if (buffer_.size() < capacity_) {
    buffer_.push_back(msg);
    return;
  }
  auto oldest_tile = std::find_if(buffer_.begin(), buffer_.end(), [](const StreamMessage& m) {
    return m.kind == MessageKind::tile;
  });
  if (oldest_tile != buffer_.end()) {
    buffer_.erase(oldest_tile);
    ++tiles_dropped_;
    buffer_.push_back(msg);
    return;
  }
  if (msg.kind == MessageKind::tile) {
    ++tiles_dropped_;
    return;
  }
  // Only undeliverable events remain: give up on this subscriber.
  buffer_.clear();
  buffer_.push_back({MessageKind::overflow,
                     std::make_shared<const std::string>(
                         R"({"type":"overflow","reason":"event backlog exceeded subscriber buffer"})")});
  overflowed_ = true;
  closed_ = true;
}

void Subscriber::push(const StreamMessage& msg) {
  std::function<void()> wake;
  {
    std::lock_guard lock(mutex_);
    push_locked(msg);
    wake = wakeup_;
  }
  cv_.notify_all();
  if (wake) wake();
}

std::optional<std::string> Subscriber::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  if (timeout.count() > 0) {
    cv_.wait_for(lock, timeout, [&] { return !buffer_.empty() || closed_; });
  }
  if (buffer_.empty()) return std::nullopt;
  StreamMessage msg = std::move(buffer_.front());
  buffer_.pop_front();
  if (msg.kind != MessageKind::event) return *msg.body;
  // body is a JSON object text; splice the envelope fields in front.
  std::string out = R"({"type":"event","seq":)" + std::to_string(next_seq_++);
  if (msg.body->size() > 2) {
    out += ',';
    out.append(*msg.body, 1, std::string::npos);
  } else {
    out += '}';
  }
  return out;
}

void Subscriber::close() {
  std::function<void()> wake;
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
    wake = wakeup_;
  }
  cv_.notify_all();
  if (wake) wake();
}

bool Subscriber::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

bool Subscriber::overflowed() const {
  std::lock_guard lock(mutex_);
  return overflowed_;
}

std::uint64_t Subscriber::tiles_dropped() const {
  std::lock_guard lock(mutex_);
  return tiles_dropped_;
}

std::size_t Subscriber::buffered() const {
  std::lock_guard lock(mutex_);
  return buffer_.size();
}

void Subscriber::set_wakeup(std::function<void()> wakeup) {
  std::lock_guard lock(mutex_);
  wakeup_ = std::move(wakeup);
}

std::shared_ptr<Subscriber> Hub::subscribe(const nlohmann::json& config) {
  auto sub = std::make_shared<Subscriber>(capacity_);
  std::lock_guard lock(mutex_);
  nlohmann::json events = nlohmann::json::array();
  for (const auto& [id, r] : live_) events.push_back(to_json(r));
  nlohmann::json snapshot{{"type", "snapshot"}, {"config", config}, {"events", std::move(events)}};
  {
    // A fresh buffer always has room for the snapshot.
    std::lock_guard sub_lock(sub->mutex_);
    sub->buffer_.push_back(
        {MessageKind::snapshot, std::make_shared<const std::string>(snapshot.dump())});
  }
  subscribers_.push_back(sub);
  return sub;
}

void Hub::unsubscribe(const std::shared_ptr<Subscriber>& sub) {
  std::lock_guard lock(mutex_);
  std::erase(subscribers_, sub);
  sub->close();
}

void Hub::publish_tile(const nlohmann::json& tile) {
  const StreamMessage msg{MessageKind::tile, std::make_shared<const std::string>(tile.dump())};
  std::vector<std::shared_ptr<Subscriber>> subs;
  {
    std::lock_guard lock(mutex_);
    ++tiles_;
    subs = subscribers_;
  }
  for (const auto& s : subs) s->push(msg);
}

void Hub::publish_event(const EventRecord& record) {
  const StreamMessage msg{MessageKind::event,
                          std::make_shared<const std::string>(to_json(record).dump())};
  // Under the hub lock so no subscriber can join between the live-set update
  // and the push (it would otherwise see the event twice or not at all).
  std::lock_guard lock(mutex_);
  if (record.kind == EventKind::ended) {
    live_.erase(record.id);
  } else {
    live_[record.id] = record;
  }
  for (const auto& s : subscribers_) s->push(msg);
}

void Hub::reset() {
  std::lock_guard lock(mutex_);
  live_.clear();
}

std::size_t Hub::subscriber_count() const {
  std::lock_guard lock(mutex_);
  return subscribers_.size();
}

std::vector<EventRecord> Hub::live_events() const {
  std::lock_guard lock(mutex_);
  std::vector<EventRecord> out;
  for (const auto& [id, r] : live_) out.push_back(r);
  return out;
}

std::uint64_t Hub::tiles_published() const {
  std::lock_guard lock(mutex_);
  return tiles_;
}

}  // namespace fibersense::service
