// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.
//
//   acceptance [--cli <path to fibersense>] [--only A3,A7]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "CLI11.hpp"

#include "fibersense/classify/tree.hpp"
#include "fibersense/detect/background.hpp"
#include "fibersense/service/labeling.hpp"
#include "fibersense/service/pipeline.hpp"
#include "fibersense/service/server.hpp"
#include "fibersense/sim/json_io.hpp"
#include "fibersense/sim/layout.hpp"
#include "fibersense/sim/recording.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace fibersense;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using Rng = boost::random::mt19937_64;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

fs::path workdir() {
  const auto dir = fs::temp_directory_path() / "fibersense_acceptance";
  fs::create_directories(dir);
  return dir;
}

bool relative_close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

// A1: streaming background against the explicit weighted sums.
Outcome streaming_statistics() {
  constexpr std::size_t kBlocks = 10000;
  constexpr std::size_t kBins = 8;
  constexpr double kAlpha = 0.01;
  Rng rng(101);
  boost::random::uniform_int_distribution<std::size_t> traces(10, 100);
  boost::random::uniform_real_distribution<double> scale(0.01, 3.0), coin(0.0, 1.0);
  boost::random::normal_distribution<double> normal;

  std::vector<sim::WaterfallBlock> blocks;
  std::vector<std::vector<std::uint8_t>> freezes;
  for (std::size_t b = 0; b < kBlocks; ++b) {
    sim::WaterfallBlock block;
    block.t0_s = static_cast<double>(b);
    block.n_traces = traces(rng);
    block.n_bins = kBins;
    const double s = scale(rng);
    for (std::size_t i = 0; i < block.n_traces * kBins; ++i) block.samples.push_back(s * normal(rng));
    blocks.push_back(std::move(block));
    std::vector<std::uint8_t> f(kBins);
    for (auto& v : f) v = coin(rng) < 0.2;
    freezes.push_back(std::move(f));
  }

  const auto t0 = Clock::now();
  auto bg = detect::BackgroundModel::zeros(kBins, kAlpha);
  for (std::size_t b = 0; b < kBlocks; ++b) {
    detect::update_background(bg, detect::block_energy(blocks[b]), freezes[b]);
  }
  const double elapsed = seconds_since(t0);

  std::vector<std::vector<double>> energies;
  for (const auto& block : blocks) energies.push_back(oracle::two_pass_energy(block));
  const auto ref = oracle::batch_background(energies, freezes, kAlpha, kBins);
  double worst = 0.0;
  bool ok = true;
  for (std::size_t x = 0; x < kBins; ++x) {
    ok = ok && relative_close(bg.mean[x], ref.mean[x], 1e-9) && relative_close(bg.var[x], ref.var[x], 1e-9);
    worst = std::max({worst, std::abs(bg.mean[x] - ref.mean[x]) / std::abs(ref.mean[x]),
                      std::abs(bg.var[x] - ref.var[x]) / std::abs(ref.var[x])});
  }
  return {ok && elapsed < 10.0,
          fmt("%zu blocks, worst relative error %.2e, streaming time %.3f s", kBlocks, worst, elapsed)};
}

classify::TrainingSet random_dataset(Rng& rng) {
  boost::random::uniform_int_distribution<std::size_t> rows(6, 30), feats(1, 4), classes(2, 3);
  boost::random::uniform_int_distribution<int> grid(0, 9);
  classify::TrainingSet set;
  set.n_features = feats(rng);
  const std::size_t k = classes(rng);
  for (std::size_t c = 0; c < k; ++c) set.classes.push_back(std::string(1, static_cast<char>('a' + c)));
  boost::random::uniform_int_distribution<std::size_t> label(0, k - 1);
  const std::size_t n = rows(rng);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(set.n_features);
    for (auto& v : x) v = grid(rng) * 0.25;
    set.x.push_back(std::move(x));
    set.y.push_back(label(rng));
  }
  return set;
}

// A2: trained trees against the brute-force tree.
Outcome tree_vs_brute_force() {
  const auto t0 = Clock::now();
  Rng rng(202);
  boost::random::uniform_real_distribution<double> q(-1.0, 3.0);
  int matched = 0, deterministic = 0;
  constexpr int kDatasets = 200;
  for (int i = 0; i < kDatasets; ++i) {
    const auto set = random_dataset(rng);
    const classify::TreeParams params{6, 2};
    const auto model = classify::train_tree(set, params);
    const double got = oracle::training_impurity(oracle::model_leaves(model, set));
    const double want = oracle::training_impurity(oracle::brute_tree_leaves(set, params));
    matched += got == want;

    bool same = classify::train_tree(set, params) == model;
    for (int j = 0; j < 20 && same; ++j) {
      std::vector<double> v(set.n_features);
      for (auto& x : v) x = q(rng);
      const auto a = classify::predict(model, v);
      const auto b = classify::predict(model, v);
      same = a.label == b.label && a.confidence == b.confidence && a.distribution == b.distribution &&
             a.leaf == oracle::walk(model, v);
    }
    deterministic += same;
  }
  const double elapsed = seconds_since(t0);
  return {matched == kDatasets && deterministic == kDatasets && elapsed < 60.0,
          fmt("impurity equal on %d/%d, deterministic on %d/%d, %.2f s", matched, kDatasets,
              deterministic, kDatasets, elapsed)};
}

// A3: one stationary speaker.
Outcome stationary_event() {
  constexpr double kOnset = 6.0;
  constexpr double kSpeakerM = 470.0;
  int good = 0;
  double worst_err = 0.0, worst_latency = 0.0;
  std::size_t worst_count = 1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto tracks = scenarios::detect_tracks(scenarios::speaker_tone(seed, kOnset, 15.0));
    if (tracks.size() != 1) {
      worst_count = std::max(worst_count, tracks.size());
      continue;
    }
    const double err = std::abs(tracks[0].median_centroid() - kSpeakerM);
    const double latency = tracks[0].confirmed_t_s - kOnset;
    worst_err = std::max(worst_err, err);
    worst_latency = std::max(worst_latency, latency);
    good += err <= 2.0 && latency <= 1.0 && latency >= 0.0;
  }
  return {good == 20, fmt("%d/20 runs good; worst centroid error %.2f m, worst latency %.2f s, "
                          "max tracks in a run %zu",
                          good, worst_err, worst_latency, worst_count)};
}

// A4: one car at 2 m/s.
Outcome moving_event() {
  constexpr double kSpeed = 2.0;
  int good = 0;
  double worst_rel = 0.0;
  std::size_t most_ids = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto tracks = scenarios::detect_tracks(scenarios::car_drive(seed, kSpeed, 6.0, 20.0));
    most_ids = std::max(most_ids, tracks.size());
    if (tracks.empty() || tracks.size() > 2) continue;
    // The track that held the car longest carries the estimate.
    const auto& main = *std::max_element(tracks.begin(), tracks.end(), [](const auto& a, const auto& b) {
      return a.velocity_history.size() < b.velocity_history.size();
    });
    const double rel = std::abs(main.median_velocity() - kSpeed) / kSpeed;
    worst_rel = std::max(worst_rel, rel);
    good += main.ever_moving && rel <= 0.2;
  }
  return {good == 20, fmt("%d/20 runs moving within 20%%; worst velocity error %.1f%%, max ids %zu",
                          good, 100.0 * worst_rel, most_ids)};
}

// A5: speaker, fan and car at once.
Outcome simultaneous_events() {
  int good = 0;
  std::string failures;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto script = scenarios::three_sources(seed, 6.0, 20.0);
    const auto labels = sim::derive_labels(script, sim::build_layout(script.layout));
    const auto tracks = scenarios::detect_tracks(script);
    bool ok = tracks.size() == 3 && labels.size() == 3;
    if (ok) {
      std::vector<std::size_t> perm{0, 1, 2};
      bool found = false;
      do {
        bool all = true;
        for (std::size_t i = 0; i < 3; ++i) {
          const auto& t = tracks[i];
          const auto& span = labels[perm[i]];
          all = all && service::overlap_fraction(t.median_x_start(), t.median_x_end(), span.x_start_m,
                                                 span.x_end_m) >= 0.5;
        }
        found = found || all;
      } while (std::next_permutation(perm.begin(), perm.end()));
      ok = found;
    }
    good += ok;
    if (!ok) failures += fmt(" seed %llu: %zu tracks;", static_cast<unsigned long long>(seed), tracks.size());
  }
  return {good == 20, fmt("%d/20 runs with 3 tracks matched 1-to-1", good) + failures};
}

// A6: classification from a small training set.
Outcome small_data_classification() {
  const auto t0 = Clock::now();
  const auto settings = service::ProcessorSettings{};
  const auto train = scenarios::training_set(1000, 30, 10, settings);
  const auto model = std::make_shared<const classify::TreeModel>(classify::train_tree(train));

  struct Seen {
    double t0 = 1e300, t1 = -1e300;
    std::vector<double> x0, x1;
    std::string label;
  };
  int n = 0, correct = 0;
  std::map<std::string, int> confusion;
  for (std::uint64_t seed = 5000; n < 300; ++seed) {
    const auto script = scenarios::episodes(seed, 10);
    const auto labels = sim::derive_labels(script, sim::build_layout(script.layout));
    const auto run = scenarios::process(script, settings, model);
    std::map<std::uint64_t, Seen> seen;
    for (const auto& r : run.records) {
      auto& e = seen[r.id];
      e.t0 = std::min(e.t0, r.t_s);
      e.t1 = std::max(e.t1, r.t_s);
      e.x0.push_back(r.x_start_m);
      e.x1.push_back(r.x_end_m);
      if (r.kind == service::EventKind::ended) e.label = r.label;
    }
    for (const auto& span : labels) {
      if (n >= 300) break;
      ++n;
      // The track overlapping the span longest in time whose typical extent
      // lies at least half inside the span's zone.
      const Seen* best = nullptr;
      double best_overlap = 0.0;
      for (const auto& [id, e] : seen) {
        const double dt = std::min(e.t1, span.t_end_s) - std::max(e.t0, span.t_start_s);
        if (dt <= 0.0) continue;
        const double f = service::overlap_fraction(scenarios::median(e.x0), scenarios::median(e.x1),
                                                   span.x_start_m, span.x_end_m);
        if (f < 0.5) continue;
        if (dt > best_overlap) {
          best_overlap = dt;
          best = &e;
        }
      }
      const std::string predicted = best ? best->label : "missed";
      ++confusion[span.label + "->" + predicted];
      correct += predicted == span.label;
    }
  }
  std::string mistakes;
  for (const auto& [k, v] : confusion) {
    const auto arrow = k.find("->");
    if (k.substr(0, arrow) != k.substr(arrow + 2)) mistakes += fmt(" %s:%d", k.c_str(), v);
  }
  const double accuracy = static_cast<double>(correct) / n;
  return {accuracy >= 0.9,
          fmt("accuracy %d/%d = %.1f%% (train: 30 events per class, %zu rows; %zu nodes; %.1f s); errors:", correct, n,
              100.0 * accuracy, train.rows.size(), model->nodes.size(), seconds_since(t0)) +
              (mistakes.empty() ? std::string(" none") : mistakes)};
}

// A7: quiet fiber.
Outcome false_alarms() {
  const auto t0 = Clock::now();
  int quiet = 0;
  std::string noisy;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto tracks = scenarios::detect_tracks(scenarios::quiescent(7000 + seed, 60.0));
    if (tracks.empty()) {
      ++quiet;
    } else {
      noisy += fmt(" %llu(%zu)", static_cast<unsigned long long>(7000 + seed), tracks.size());
    }
  }
  return {quiet >= 95, fmt("%d/100 runs without a confirmed track, %.1f s", quiet, seconds_since(t0)) +
                           (noisy.empty() ? "" : "; tracks in seeds" + noisy)};
}

// Streams from /api/stream until told to stop, to load the live server like a console.
class StreamReader {
 public:
  explicit StreamReader(std::uint16_t port) : ws_(ioc_) {
    boost::asio::ip::tcp::resolver resolver(ioc_);
    boost::asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/api/stream");
    thread_ = std::thread([this] {
      boost::beast::flat_buffer buffer;
      boost::beast::error_code ec;
      while (!ec) {
        ws_.read(buffer, ec);
        messages_ += !ec;
        buffer.consume(buffer.size());
      }
    });
  }
  ~StreamReader() {
    boost::beast::error_code ec;
    ws_.next_layer().shutdown(boost::asio::ip::tcp::socket::shutdown_both, ec);
    thread_.join();
  }
  std::size_t messages() const { return messages_; }

 private:
  boost::asio::io_context ioc_;
  boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_;
  std::thread thread_;
  std::atomic<std::size_t> messages_{0};
};

// A8: offline throughput and live latency.
Outcome real_time(const std::string& cli) {
  const auto dir = workdir();
  const auto potd = dir / "a8.potd";
  const auto events = dir / "a8.jsonl";
  const auto model_path = dir / "a8_model.json";
  const auto script = scenarios::three_sources(808, 6.0, 60.0);
  {
    sim::PotdHeader header;
    header.n_bins = static_cast<std::uint32_t>(script.layout.n_bins);
    header.bin_size_m = static_cast<float>(script.layout.bin_size_m);
    header.pulse_rate_hz = static_cast<float>(script.layout.pulse_rate_hz);
    sim::PotdWriter writer(potd, header);
    sim::run_scenario(script, [&](const sim::WaterfallBlock& b) { writer.write(b); });
    writer.close();
  }
  classify::save_model(model_path, *scenarios::reference_model());

  std::string offline;
  bool offline_ok = false;
  if (cli.empty()) {
    offline = "offline: no --cli given";
  } else {
    const std::string cmd = "\"" + cli + "\" detect --in \"" + potd.string() + "\" --model \"" +
                            model_path.string() + "\" --out \"" + events.string() + "\" 2>/dev/null";
    const auto t0 = Clock::now();
    const int rc = std::system(cmd.c_str());
    const double elapsed = seconds_since(t0);
    const auto log = service::read_event_log(events);
    offline_ok = rc == 0 && elapsed < 30.0 && !log.empty();
    offline = fmt("offline detect of 60 s: %.2f s (rc %d, %zu records)", elapsed, rc, log.size());
  }

  // Live: the same scenario at real-time pacing with a stream client attached.
  const auto scenario_path = dir / "a8_scenario.json";
  std::ofstream(scenario_path) << nlohmann::json(script).dump();
  service::PipelineConfig config;
  config.seed = script.seed;
  config.scenario_path = scenario_path.string();
  config.classifier.model_path = model_path.string();
  config.speed = 1.0;
  service::Pipeline pipeline(config);
  service::HttpServer server(pipeline, "127.0.0.1", 0, "");
  server.start();
  std::size_t streamed = 0;
  {
    StreamReader reader(server.port());
    pipeline.start();
    pipeline.wait();
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    streamed = reader.messages();
  }
  server.stop();
  const auto lat = pipeline.latency();
  const bool live_ok = lat.count == 600 && lat.p95_ms < 400.0 && pipeline.blocks_processed() == 600;
  return {offline_ok && live_ok,
          offline + fmt("; live 60 s: %zu blocks, latency p50 %.1f ms p95 %.1f ms max %.1f ms, "
                        "%zu stream messages",
                        lat.count, lat.p50_ms, lat.p95_ms, lat.max_ms, streamed)};
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// A9: recordings and models survive a round trip bit for bit.
Outcome format_round_trips() {
  const auto dir = workdir();
  Rng rng(909);
  boost::random::uniform_int_distribution<std::size_t> bins(1, 64), traces(0, 300), block(1, 120);
  boost::random::uniform_real_distribution<double> value(-10.0, 10.0), mag(-40.0, 40.0);
  int potd_ok = 0;
  for (int c = 0; c < 100; ++c) {
    sim::PotdHeader header;
    header.n_bins = static_cast<std::uint32_t>(bins(rng));
    header.bin_size_m = static_cast<float>(value(rng) + 11.0);
    header.pulse_rate_hz = static_cast<float>(1000.0 + 100.0 * value(rng));
    const std::size_t n = traces(rng);
    sim::WaterfallBlock all;
    all.n_bins = header.n_bins;
    all.n_traces = n;
    for (std::size_t i = 0; i < n * header.n_bins; ++i) {
      // f32 values across many magnitudes, including signed zeros and subnormals.
      double v = value(rng) * std::pow(10.0, mag(rng));
      if (i % 97 == 0) v = -0.0;
      if (i % 89 == 0) v = 1e-42;
      all.samples.push_back(static_cast<double>(static_cast<float>(v)));
    }
    const auto first = dir / "a9_first.potd";
    const auto second = dir / "a9_second.potd";
    {
      sim::PotdWriter w(first, header);
      // Written in random block sizes.
      for (std::size_t t = 0; t < n;) {
        const std::size_t m = std::min(n - t, block(rng));
        sim::WaterfallBlock b;
        b.t0_s = static_cast<double>(t) / header.pulse_rate_hz;
        b.n_traces = m;
        b.n_bins = header.n_bins;
        b.samples.assign(all.samples.begin() + static_cast<std::ptrdiff_t>(t * header.n_bins),
                         all.samples.begin() + static_cast<std::ptrdiff_t>((t + m) * header.n_bins));
        w.write(b);
        t += m;
      }
      w.close();
    }
    bool ok = true;
    {
      sim::PotdReader r(first);
      auto expect = header;
      expect.n_traces = n;
      ok = r.header() == expect;
      sim::PotdWriter w(second, r.header());
      std::size_t offset = 0;
      while (auto b = r.read_block(block(rng))) {
        for (double v : b->samples) {
          const double want = all.samples[offset++];
          ok = ok && std::memcmp(&v, &want, sizeof v) == 0;
        }
        w.write(*b);
      }
      ok = ok && offset == all.samples.size();
      w.close();
    }
    ok = ok && file_bytes(first) == file_bytes(second) &&
         fs::file_size(first) == sim::kPotdHeaderBytes + n * header.n_bins * 4;
    potd_ok += ok;
  }

  int model_ok = 0;
  boost::random::uniform_real_distribution<double> q(-1.0, 3.0);
  for (int c = 0; c < 100; ++c) {
    const auto set = random_dataset(rng);
    features::LabeledDataset data;
    for (std::size_t i = 0; i < set.x.size(); ++i) {
      features::FeatureRow row;
      // Awkward doubles so thresholds need all 17 significant digits.
      for (std::size_t f = 0; f < set.n_features; ++f) row.features.values[f] = set.x[i][f] / 3.0 + 1e-7 * f;
      row.label = set.classes[set.y[i]];
      data.rows.push_back(row);
    }
    const auto model = classify::train_tree(data, {6, 2});
    const auto path = dir / "a9_model.json";
    const auto again = dir / "a9_model_again.json";
    classify::save_model(path, model);
    const auto loaded = classify::load_model(path);
    classify::save_model(again, loaded);
    bool ok = loaded == model && file_bytes(path) == file_bytes(again);
    for (int j = 0; j < 30 && ok; ++j) {
      features::FeatureVector v;
      for (auto& x : v.values) x = q(rng);
      const auto a = classify::predict(model, v);
      const auto b = classify::predict(loaded, v);
      ok = a.label == b.label && a.leaf == b.leaf &&
           std::memcmp(&a.confidence, &b.confidence, sizeof(double)) == 0 &&
           a.distribution == b.distribution;
    }
    model_ok += ok;
  }
  return {potd_ok == 100 && model_ok == 100,
          fmt("POTD %d/100 bit-exact, model %d/100 bit-exact", potd_ok, model_ok)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria A1-A9"};
  std::string cli;
  std::string only;
  app.add_option("--cli", cli, "Path to the fibersense executable (for the offline detect timing)");
  app.add_option("--only", only, "Comma-separated subset, e.g. A3,A7");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", streaming_statistics},
      {"A2", tree_vs_brute_force},
      {"A3", stationary_event},
      {"A4", moving_event},
      {"A5", simultaneous_events},
      {"A6", small_data_classification},
      {"A7", false_alarms},
      {"A8", [&] { return real_time(cli); }},
      {"A9", format_round_trips},
  };

  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && ("," + only + ",").find("," + name + ",") == std::string::npos) continue;
    Outcome out;
    try {
      out = run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    failed += !out.pass;
    std::cout << name << ' ' << (out.pass ? "PASS" : "FAIL") << "  " << out.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
