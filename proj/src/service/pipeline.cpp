#include "fibersense/service/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "fibersense/errors.hpp"
#include "fibersense/features/features.hpp"
#include "fibersense/service/tiles.hpp"
#include "fibersense/sim/json_io.hpp"

namespace fibersense::service {

namespace {

constexpr std::size_t kMaxLatencySamples = 100000;

using Clock = std::chrono::steady_clock;

}  // namespace

double percentile(std::vector<double> samples, double q) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
  return samples[std::clamp<std::size_t>(rank, 1, samples.size()) - 1];
}

Pipeline::Pipeline(PipelineConfig config)
    : config_(std::move(config)),
      hub_(config_.subscriber_buffer),
      blocks_(config_.block_queue_capacity),
      controls_(config_.control_queue_capacity) {
  config_.validate();
  if (!config_.classifier.model_path.empty()) {
    model_ = std::make_shared<const classify::TreeModel>(
        classify::load_model(config_.classifier.model_path));
  }

  if (config_.mode == SourceMode::replay) {
    reader_ = std::make_unique<sim::PotdReader>(config_.replay_path);
    n_bins_ = reader_->header().n_bins;
    bin_size_m_ = reader_->header().bin_size_m;
    rate_hz_ = reader_->header().pulse_rate_hz;
  } else {
    if (!config_.scenario_path.empty()) {
      script_ = sim::load_scenario(config_.scenario_path);
      sim::validate(*script_);
      // The pipeline config owns seed and geometry; the scenario contributes
      // its timeline and, when no duration is configured, its length.
      script_->seed = config_.seed;
      script_->layout = config_.layout;
      script_->sources = config_.sources;
      script_->noise_sigma_rad = config_.noise_sigma_rad;
      if (config_.duration_s == 0.0) config_.duration_s = script_->duration_s;
    }
    const auto layout = sim::build_layout(config_.layout);
    sim::validate(config_.sources, layout);
    n_bins_ = layout.n_bins();
    bin_size_m_ = layout.bin_size_m();
    rate_hz_ = layout.pulse_rate_hz();
  }

  store_ = config_.events_path.empty() ? std::make_unique<EventStore>()
                                       : std::make_unique<EventStore>(config_.events_path);
  processor_ = std::make_unique<EventProcessor>(n_bins_, bin_size_m_, rate_hz_,
                                                ProcessorSettings::from(config_), model_);
}

Pipeline::~Pipeline() { stop(); }

void Pipeline::start() {
  if (started_flag_.exchange(true)) return;
  started_ = Clock::now();
  processor_thread_ = std::thread([this] { run_processor(); });
  source_thread_ = std::thread([this] { run_source(); });
}

void Pipeline::stop() {
  stopping_ = true;
  {
    std::lock_guard lock(state_mutex_);
    finished_cv_.notify_all();
  }
  if (source_thread_.joinable()) source_thread_.join();
  if (processor_thread_.joinable()) processor_thread_.join();
}

void Pipeline::wait() {
  std::unique_lock lock(state_mutex_);
  finished_cv_.wait(lock, [&] { return finished_; });
}

bool Pipeline::wait_for(std::chrono::milliseconds timeout) {
  std::unique_lock lock(state_mutex_);
  return finished_cv_.wait_for(lock, timeout, [&] { return finished_; });
}

bool Pipeline::finished() const {
  std::lock_guard lock(state_mutex_);
  return finished_;
}

void Pipeline::set_error(const std::string& message) {
  std::lock_guard lock(state_mutex_);
  if (error_.empty()) error_ = message;
}

bool Pipeline::pace(double sim_time_s) {
  if (config_.speed <= 0.0) return !stopping_;
  const auto due = started_ + std::chrono::duration_cast<Clock::duration>(
                                  std::chrono::duration<double>(sim_time_s / config_.speed));
  std::unique_lock lock(state_mutex_);
  finished_cv_.wait_until(lock, due, [&] { return stopping_.load(); });
  return !stopping_;
}

void Pipeline::drain_controls(sim::ScenarioSource& source) {
  while (auto pending = controls_.try_pop()) {
    try {
      (*pending)->applied.set_value(source.apply_now((*pending)->command));
    } catch (...) {
      (*pending)->applied.set_exception(std::current_exception());
    }
  }
}

void Pipeline::fail_controls(const std::string& why) {
  controls_.close();
  while (auto pending = controls_.try_pop()) {
    (*pending)->applied.set_exception(std::make_exception_ptr(ModeError(why)));
  }
}

void Pipeline::run_source() {
  std::unique_ptr<sim::PotdWriter> writer;
  try {
    if (!config_.record_path.empty()) {
      sim::PotdHeader header;
      header.n_bins = static_cast<std::uint32_t>(n_bins_);
      header.bin_size_m = static_cast<float>(bin_size_m_);
      header.pulse_rate_hz = static_cast<float>(rate_hz_);
      writer = std::make_unique<sim::PotdWriter>(config_.record_path, header);
    }

    if (config_.mode == SourceMode::live) {
      sim::SimConfig sim_config;
      sim_config.layout = config_.layout;
      sim_config.sources = config_.sources;
      sim_config.seed = config_.seed;
      sim_config.noise_sigma_rad = config_.noise_sigma_rad;
      const auto total =
          static_cast<std::uint64_t>(std::llround(config_.duration_s * rate_hz_));
      sim::ScenarioSource source(sim_config,
                                 script_ ? script_->timeline : std::vector<sim::TimedCommand>{},
                                 total, config_.block_size_traces);
      while (!stopping_) {
        drain_controls(source);
        auto block = source.next_block();
        if (!block) break;
        sim::quantize_to_f32(*block);
        if (writer) writer->write(*block);
        const double end_s =
            block->t0_s + static_cast<double>(block->n_traces) / rate_hz_;
        if (!pace(end_s)) break;
        if (!blocks_.push({std::move(*block), Clock::now()})) break;
      }
      fail_controls("simulation has stopped");
    } else {
      fail_controls("control commands are rejected in replay mode");
      while (!stopping_) {
        auto block = reader_->read_block(config_.block_size_traces);
        if (!block) break;
        if (writer) writer->write(*block);
        const double end_s =
            block->t0_s + static_cast<double>(block->n_traces) / rate_hz_;
        if (!pace(end_s)) break;
        if (!blocks_.push({std::move(*block), Clock::now()})) break;
      }
    }
  } catch (const std::exception& e) {
    set_error(e.what());
    fail_controls("source failed");
  }
  if (writer) {
    try {
      writer->close();
    } catch (const std::exception& e) {
      set_error(e.what());
    }
  }
  source_done_ = true;
  blocks_.close();
}

void Pipeline::publish(const std::vector<EventRecord>& records) {
  for (auto r : records) {
    r.sequence = store_->append(r);
    hub_.publish_event(r);
  }
}

void Pipeline::run_processor() {
  try {
    while (auto item = blocks_.pop()) {
      const auto& block = item->block;
      publish(processor_->process_block(block));
      const auto tile = make_tile(block, rate_hz_, bin_size_m_, config_.stream_downsample.time_factor,
                                  config_.stream_downsample.space_factor);
      hub_.publish_tile(to_json(tile));
      const double ms =
          std::chrono::duration<double, std::milli>(Clock::now() - item->available).count();
      sim_time_s_ = block.t0_s + static_cast<double>(block.n_traces) / rate_hz_;
      ++blocks_processed_;
      std::lock_guard lock(state_mutex_);
      latencies_ms_.push_back(ms);
      if (latencies_ms_.size() > kMaxLatencySamples) latencies_ms_.pop_front();
    }
    publish(processor_->finish());
  } catch (const std::exception& e) {
    set_error(e.what());
    blocks_.close();
  }
  std::lock_guard lock(state_mutex_);
  finished_ = true;
  finished_cv_.notify_all();
}

ControlAck Pipeline::control(const sim::ControlCommand& cmd, std::chrono::milliseconds timeout) {
  if (config_.mode != SourceMode::live) {
    throw ModeError("control commands are rejected in replay mode");
  }
  sim::validate(cmd);
  auto pending = std::make_shared<PendingControl>();
  pending->command = cmd;
  auto applied = pending->applied.get_future();
  if (source_done_ || !controls_.try_push(pending)) {
    if (source_done_) throw ModeError("simulation has stopped");
    throw Error("control queue is full");
  }
  if (applied.wait_for(timeout) != std::future_status::ready) {
    throw Error("timed out waiting for the simulator to apply the command");
  }
  return {applied.get()};
}

LatencyStats Pipeline::latency() const {
  std::vector<double> samples;
  {
    std::lock_guard lock(state_mutex_);
    samples.assign(latencies_ms_.begin(), latencies_ms_.end());
  }
  LatencyStats s;
  s.count = samples.size();
  if (samples.empty()) return s;
  s.p50_ms = percentile(samples, 0.50);
  s.p95_ms = percentile(samples, 0.95);
  s.max_ms = *std::max_element(samples.begin(), samples.end());
  return s;
}

nlohmann::json Pipeline::status() const {
  const auto lat = latency();
  std::string state;
  std::string error;
  {
    std::lock_guard lock(state_mutex_);
    error = error_;
    if (!error_.empty()) {
      state = "error";
    } else if (finished_) {
      state = "finished";
    } else if (started_flag_) {
      state = "running";
    } else {
      state = "idle";
    }
  }
  nlohmann::json j{
      {"mode", to_string(config_.mode)},
      {"state", state},
      {"sim_time_s", sim_time_s_.load()},
      {"blocks_processed", blocks_processed_.load()},
      {"events_logged", store_->size()},
      {"live_events", hub_.live_events().size()},
      {"subscribers", hub_.subscriber_count()},
      {"tiles_published", hub_.tiles_published()},
      {"classifying", model_ != nullptr},
      {"feature_order_hash", features::feature_order_hash_hex()},
      {"n_bins", n_bins_},
      {"pulse_rate_hz", rate_hz_},
      {"latency_ms",
       {{"count", lat.count}, {"p50", lat.p50_ms}, {"p95", lat.p95_ms}, {"max", lat.max_ms}}},
  };
  if (!error.empty()) j["error"] = error;
  return j;
}

}  // namespace fibersense::service
