// Command-line front end: simulate, train, detect, serve, replay, extract.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "fibersense/classify/tree.hpp"
#include "fibersense/errors.hpp"
#include "fibersense/features/dataset.hpp"
#include "fibersense/service/config.hpp"
#include "fibersense/service/labeling.hpp"
#include "fibersense/service/pipeline.hpp"
#include "fibersense/service/processor.hpp"
#include "fibersense/service/server.hpp"
#include "fibersense/sim/json_io.hpp"
#include "fibersense/sim/recording.hpp"
#include "fibersense/sim/scenario.hpp"

namespace fs = fibersense;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

fs::service::PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? fs::service::PipelineConfig{} : fs::service::load_config(path);
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_path,
                 const std::string& labels_path, std::optional<std::uint64_t> seed,
                 std::size_t block_size) {
  auto script = fs::sim::load_scenario(scenario_path);
  if (seed) script.seed = *seed;
  fs::sim::PotdHeader header;
  header.n_bins = static_cast<std::uint32_t>(script.layout.n_bins);
  header.bin_size_m = static_cast<float>(script.layout.bin_size_m);
  header.pulse_rate_hz = static_cast<float>(script.layout.pulse_rate_hz);
  fs::sim::PotdWriter writer(out_path, header);
  const auto run = fs::sim::run_scenario(
      script, [&](const fs::sim::WaterfallBlock& b) { writer.write(b); }, block_size);
  writer.close();
  fs::sim::write_labels(labels_path, run.labels);
  std::cerr << "wrote " << run.n_traces << " traces x " << header.n_bins << " bins to "
            << out_path << ", " << run.labels.size() << " label spans to " << labels_path << '\n';
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& out_path, std::size_t max_depth,
              std::size_t min_leaf) {
  const auto data = fs::features::read_dataset(data_path);
  if (data.rows.empty()) throw fs::DatasetError("dataset " + data_path + " is empty");
  const auto model = fs::classify::train_tree(data, {max_depth, min_leaf});
  fs::classify::save_model(out_path, model);
  std::cerr << "trained on " << data.rows.size() << " rows: " << model.nodes.size()
            << " nodes, depth " << model.depth() << " -> " << out_path << '\n';
  return 0;
}

int cmd_detect(const std::string& in_path, const std::string& model_path,
               const std::string& out_path, const std::string& config_path) {
  auto config = config_or_default(config_path);
  std::shared_ptr<const fs::classify::TreeModel> model;
  if (!model_path.empty()) {
    model = std::make_shared<const fs::classify::TreeModel>(fs::classify::load_model(model_path));
  }
  const auto t0 = std::chrono::steady_clock::now();
  fs::sim::PotdReader reader(in_path);
  fs::service::EventProcessor processor(reader.header().n_bins, reader.header().bin_size_m,
                                        reader.header().pulse_rate_hz,
                                        fs::service::ProcessorSettings::from(config), model);
  std::filesystem::remove(out_path);
  fs::service::EventStore store(out_path);
  while (auto block = reader.read_block(config.block_size_traces)) {
    for (auto& r : processor.process_block(*block)) store.append(r);
  }
  for (auto& r : processor.finish()) store.append(r);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double audio_s = static_cast<double>(reader.traces_read()) / reader.header().pulse_rate_hz;
  std::cerr << "processed " << audio_s << " s of data in " << secs << " s, " << store.size()
            << " event records -> " << out_path << '\n';
  return 0;
}

int cmd_extract(const std::string& in_path, const std::string& labels_path,
                const std::string& out_path, const std::string& config_path, bool no_velocity) {
  auto config = config_or_default(config_path);
  if (no_velocity) config.features.use_velocity = false;
  const auto labels = fs::sim::read_labels(labels_path);
  fs::sim::PotdReader reader(in_path);
  fs::service::EventProcessor processor(reader.header().n_bins, reader.header().bin_size_m,
                                        reader.header().pulse_rate_hz,
                                        fs::service::ProcessorSettings::from(config));
  const auto data = fs::service::extract_labeled_features(
      processor, [&] { return reader.read_block(config.block_size_traces); }, labels);
  fs::features::write_dataset(out_path, data);
  std::cerr << "extracted " << data.rows.size() << " labeled feature rows -> " << out_path << '\n';
  return 0;
}

void serve_until_interrupted(fs::service::Pipeline& pipeline, bool exit_when_done) {
  while (!g_interrupted) {
    if (pipeline.wait_for(std::chrono::milliseconds(200)) && exit_when_done) break;
  }
}

int cmd_serve(const std::string& config_path, std::optional<std::uint16_t> port,
              bool exit_when_done) {
  auto config = fs::service::load_config(config_path);
  if (port) config.listen_port = *port;
  fs::service::Pipeline pipeline(config);
  fs::service::HttpServer server(pipeline, config.listen_address, config.listen_port,
                                 config.static_dir);
  server.start();
  std::cerr << "serving on http://" << config.listen_address << ':' << server.port() << " ("
            << fs::service::to_string(config.mode) << " mode)\n";
  pipeline.start();
  serve_until_interrupted(pipeline, exit_when_done);
  pipeline.stop();
  server.stop();
  const auto lat = pipeline.latency();
  std::cerr << "stopped after " << pipeline.blocks_processed() << " blocks; latency p95 "
            << lat.p95_ms << " ms\n";
  return 0;
}

int cmd_replay(const std::string& in_path, double speed, const std::string& config_path,
               const std::string& model_path, const std::string& events_path, bool serve) {
  auto config = config_or_default(config_path);
  config.mode = fs::service::SourceMode::replay;
  config.replay_path = in_path;
  config.speed = speed;
  if (!model_path.empty()) config.classifier.model_path = model_path;
  if (!events_path.empty()) config.events_path = events_path;
  fs::service::Pipeline pipeline(config);
  std::unique_ptr<fs::service::HttpServer> server;
  if (serve) {
    server = std::make_unique<fs::service::HttpServer>(pipeline, config.listen_address,
                                                       config.listen_port, config.static_dir);
    server->start();
    std::cerr << "serving on http://" << config.listen_address << ':' << server->port() << '\n';
  }
  pipeline.start();
  if (serve) {
    serve_until_interrupted(pipeline, false);
  } else {
    while (!g_interrupted && !pipeline.wait_for(std::chrono::milliseconds(200))) {
    }
  }
  pipeline.stop();
  if (server) server->stop();
  if (!serve) {
    for (const auto& r : pipeline.store().query()) std::cout << to_json(r).dump() << '\n';
  }
  const auto status = pipeline.status();
  if (status.contains("error")) {
    std::cerr << "replay failed: " << status["error"].get<std::string>() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  CLI::App app{"Distributed fiber sensing: simulation, event detection and classification"};
  app.require_subcommand(1);

  std::string scenario, out, labels, data, in, model, config, events;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint16_t> port;
  std::size_t block_size = 100, max_depth = 6, min_leaf = 3;
  double speed = 1.0;
  bool no_velocity = false, serve = false, exit_when_done = false;

  auto* simulate = app.add_subcommand("simulate", "Run a scenario script and record it");
  simulate->add_option("--scenario", scenario, "Scenario JSON")->required();
  simulate->add_option("--out", out, "Output POTD recording")->required();
  simulate->add_option("--labels", labels, "Output label spans (JSON lines)")->required();
  simulate->add_option("--seed", seed, "Override the scenario seed");
  simulate->add_option("--block-size", block_size, "Traces per block")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Train a decision tree on a feature dataset");
  train->add_option("--data", data, "Feature dataset (JSON lines)")->required();
  train->add_option("--out", out, "Output model file")->required();
  train->add_option("--max-depth", max_depth, "Maximum tree depth")->check(CLI::PositiveNumber);
  train->add_option("--min-leaf", min_leaf, "Minimum leaf size")->check(CLI::PositiveNumber);

  auto* detect = app.add_subcommand("detect", "Offline detection and classification of a recording");
  detect->add_option("--in", in, "Input POTD recording")->required();
  detect->add_option("--model", model, "Model file (omit for detection only)");
  detect->add_option("--out", out, "Output event log (JSON lines)")->required();
  detect->add_option("--config", config, "Pipeline config for detector settings");

  auto* serve_cmd = app.add_subcommand("serve", "Run the live pipeline with the HTTP/WebSocket API");
  serve_cmd->add_option("--config", config, "Pipeline config")->required();
  serve_cmd->add_option("--port", port, "Override the listen port (0 = any free port)");
  serve_cmd->add_flag("--exit-when-done", exit_when_done,
                      "Exit once a bounded source (duration or replay) is exhausted");

  auto* replay = app.add_subcommand("replay", "Feed a recording through the pipeline");
  replay->add_option("--in", in, "Input POTD recording")->required();
  replay->add_option("--speed", speed, "Pacing factor; 0 = as fast as possible")
      ->check(CLI::NonNegativeNumber);
  replay->add_option("--config", config, "Pipeline config");
  replay->add_option("--model", model, "Model file");
  replay->add_option("--events", events, "Append event records to this file");
  replay->add_flag("--serve", serve, "Also expose the HTTP/WebSocket API");

  auto* extract = app.add_subcommand("extract", "Build labeled training features from a recording");
  extract->add_option("--in", in, "Input POTD recording")->required();
  extract->add_option("--labels", labels, "Label spans (JSON lines)")->required();
  extract->add_option("--out", out, "Output feature dataset")->required();
  extract->add_option("--config", config, "Pipeline config for detector/feature settings");
  extract->add_flag("--no-velocity", no_velocity, "Zero the velocity feature (ablation)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return cmd_simulate(scenario, out, labels, seed, block_size);
    if (*train) return cmd_train(data, out, max_depth, min_leaf);
    if (*detect) return cmd_detect(in, model, out, config);
    if (*serve_cmd) return cmd_serve(config, port, exit_when_done);
    if (*replay) return cmd_replay(in, speed, config, model, events, serve);
    if (*extract) return cmd_extract(in, labels, out, config, no_velocity);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
