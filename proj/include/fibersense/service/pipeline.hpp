#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "json.hpp"

#include "fibersense/classify/tree.hpp"
#include "fibersense/service/config.hpp"
#include "fibersense/service/events.hpp"
#include "fibersense/service/hub.hpp"
#include "fibersense/service/processor.hpp"
#include "fibersense/service/queue.hpp"
#include "fibersense/sim/recording.hpp"
#include "fibersense/sim/scenario.hpp"

namespace fibersense::service {

struct ControlAck {
  /// Simulation time of the first trace synthesized with the command applied.
  double applied_t_s = 0.0;
};

struct LatencyStats {
  std::size_t count = 0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
};

/// Nearest-rank percentile of `samples` (unsorted); 0 when empty.
double percentile(std::vector<double> samples, double q);

/// Source -> detector/classifier -> fan-out, on two threads joined by a
/// bounded block queue. The source blocks when the queue is full, so every
/// block is processed exactly once and in order; only the stream fan-out may
/// drop (tiles). Live blocks are narrowed to f32 before processing so that a
/// recording replays to the identical event log.
class Pipeline {
 public:
  /// Loads the model and opens the replay file or scenario up front; startup
  /// failures throw (ConfigError, ModelError, FormatError, ScriptError).
  explicit Pipeline(PipelineConfig config);
  ~Pipeline();

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  void start();
  /// Stops the source, drains and finishes processing, joins the threads.
  void stop();
  /// Blocks until the source is exhausted and the last block is processed.
  void wait();
  /// Like wait() with a deadline; true when finished.
  bool wait_for(std::chrono::milliseconds timeout);
  bool finished() const;

  /// Live mode only (ModeError otherwise). Validates first (ValidationError),
  /// then queues the command for the simulator and waits for its ack.
  ControlAck control(const sim::ControlCommand& cmd,
                     std::chrono::milliseconds timeout = std::chrono::seconds(5));

  const PipelineConfig& config() const { return config_; }
  nlohmann::json effective_config() const { return to_json(config_); }
  nlohmann::json status() const;
  EventStore& store() { return *store_; }
  const EventStore& store() const { return *store_; }
  Hub& hub() { return hub_; }
  LatencyStats latency() const;
  std::uint64_t blocks_processed() const { return blocks_processed_.load(); }
  double pulse_rate_hz() const { return rate_hz_; }
  std::size_t n_bins() const { return n_bins_; }

 private:
  struct QueuedBlock {
    sim::WaterfallBlock block;
    std::chrono::steady_clock::time_point available;
  };
  struct PendingControl {
    sim::ControlCommand command;
    std::promise<double> applied;
  };

  void run_source();
  void run_processor();
  void drain_controls(sim::ScenarioSource& source);
  void fail_controls(const std::string& why);
  /// Sleeps until `sim_time_s` is due at the configured speed; false if stopping.
  bool pace(double sim_time_s);
  void publish(const std::vector<EventRecord>& records);
  void set_error(const std::string& message);

  PipelineConfig config_;
  std::shared_ptr<const classify::TreeModel> model_;
  std::optional<sim::ScenarioScript> script_;
  std::unique_ptr<sim::PotdReader> reader_;
  std::size_t n_bins_ = 0;
  double bin_size_m_ = 1.0;
  double rate_hz_ = 1000.0;

  std::unique_ptr<EventStore> store_;
  Hub hub_;
  std::unique_ptr<EventProcessor> processor_;
  BoundedQueue<QueuedBlock> blocks_;
  BoundedQueue<std::shared_ptr<PendingControl>> controls_;

  std::thread source_thread_;
  std::thread processor_thread_;
  std::chrono::steady_clock::time_point started_;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> started_flag_{false};
  std::atomic<bool> source_done_{false};
  std::atomic<std::uint64_t> blocks_processed_{0};
  std::atomic<double> sim_time_s_{0.0};

  mutable std::mutex state_mutex_;
  std::condition_variable finished_cv_;
  bool finished_ = false;
  std::string error_;
  std::deque<double> latencies_ms_;
};

}  // namespace fibersense::service
