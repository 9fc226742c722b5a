#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"

#include "fibersense/detect/background.hpp"
#include "fibersense/errors.hpp"
#include "fibersense/sim/json_io.hpp"
#include "fibersense/sim/recording.hpp"
#include "fibersense/sim/scenario.hpp"
#include "fibersense/sim/simulator.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace fibersense;
using namespace fibersense::sim;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("fibersense_test_sim_" + name);
}

WaterfallBlock synth(Simulator& s, std::size_t traces) {
  WaterfallBlock all;
  while (traces > 0) {
    const std::size_t n = std::min<std::size_t>(traces, 1000);
    auto b = s.synthesize_block(n);
    if (all.n_traces == 0) {
      all = std::move(b);
    } else {
      all.samples.insert(all.samples.end(), b.samples.begin(), b.samples.end());
      all.n_traces += b.n_traces;
    }
    traces -= n;
  }
  return all;
}

std::vector<double> column(const WaterfallBlock& b, std::size_t bin) {
  std::vector<double> out(b.n_traces);
  for (std::size_t t = 0; t < b.n_traces; ++t) out[t] = b.at(t, bin);
  return out;
}

// Ball between two walls by unfolding: position runs along a line of period
// 2L and the second half of each period runs backwards.
double fold_oracle(double unfolded, double lo, double hi) {
  const double length = hi - lo;
  double m = std::fmod(unfolded - lo, 2.0 * length);
  if (m < 0) m += 2.0 * length;
  return m > length ? lo + 2.0 * length - m : lo + m;
}

SimConfig noiseless() {
  SimConfig c;
  c.noise_sigma_rad = 0.0;
  c.unit_sensitivity = true;
  return c;
}

std::size_t loudest_bin(const WaterfallBlock& b) {
  const auto e = oracle::two_pass_energy(b);
  return static_cast<std::size_t>(std::max_element(e.begin(), e.end()) - e.begin());
}

}  // namespace

TEST_CASE("default layout places the zones") {
  const auto layout = build_layout();
  CHECK(layout.n_bins() == 1000);
  CHECK(layout.pulse_rate_hz() == 1000.0);
  const auto& acoustic = layout.zone(SegmentKind::acoustic_zone);
  CHECK(acoustic.start_m == 400.0);
  CHECK(acoustic.end_m == 550.0);
  CHECK(layout.zone(SegmentKind::aerial_zone).start_m == 550.0);
  CHECK(layout.zone(SegmentKind::road_zone).end_m == 850.0);
}

TEST_CASE("layout rejects overlaps, gaps and missing zones") {
  LayoutConfig overlap;
  overlap.segments = {{0, 500, SegmentKind::acoustic_zone}, {400, 1000, SegmentKind::aerial_zone}};
  CHECK_THROWS_AS(build_layout(overlap), LayoutError);

  LayoutConfig gap;
  gap.segments.back().end_m = 999.0;
  CHECK_THROWS_AS(build_layout(gap), LayoutError);

  LayoutConfig missing;
  missing.segments = {{0, 500, SegmentKind::lead_in}, {500, 1000, SegmentKind::acoustic_zone}};
  CHECK_THROWS_AS(build_layout(missing), LayoutError);
}

TEST_CASE("all sources off contribute nothing") {
  const auto layout = build_layout();
  SourceField field(layout, 1);
  const auto centers = layout.bin_centers();
  for (int i = 0; i < 50; ++i) {
    const auto c = field.contribution(SourceState{}, i / 1000.0, centers);
    CHECK(std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; }));
  }
}

TEST_CASE("speaker tone peaks at 120 Hz at its center") {
  auto config = noiseless();
  config.sources.speaker.on = true;
  Simulator s(config);
  const auto block = synth(s, 2000);
  const auto bin = static_cast<std::size_t>(config.sources.speaker.center_m);
  const auto power = oracle::dft_power(column(block, bin));
  const auto k = std::max_element(power.begin() + 1, power.end()) - power.begin();
  const double resolution = 1000.0 / 2000.0;
  CHECK(std::abs(static_cast<double>(k) * resolution - 120.0) <= resolution);
}

TEST_CASE("driving car advances 20 m in 10 s") {
  SimConfig config;
  config.unit_sensitivity = true;
  config.sources.car.driving = true;
  config.sources.car.speed_mps = 2.0;
  Simulator s(config);
  const auto first = synth(s, 1000);  // centered on t = 0.5 s
  synth(s, 9000);
  const auto last = synth(s, 1000);  // centered on t = 10.5 s
  const double advance =
      static_cast<double>(loudest_bin(last)) - static_cast<double>(loudest_bin(first));
  CHECK(advance == doctest::Approx(20.0).epsilon(0.1));
}

TEST_CASE("quiescent noise has the configured spread") {
  SimConfig config;
  config.seed = 11;
  Simulator s(config);
  const auto block = synth(s, 10000);
  std::size_t outside = 0;
  for (std::size_t x = 0; x < block.n_bins; ++x) {
    double sum = 0, sum_sq = 0;
    for (std::size_t t = 0; t < block.n_traces; ++t) {
      sum += block.at(t, x);
      sum_sq += block.at(t, x) * block.at(t, x);
    }
    const double n = static_cast<double>(block.n_traces);
    const double mean = sum / n;
    const double sd = std::sqrt(sum_sq / n - mean * mean);
    // A mean beyond 3.3 standard errors has probability ~1e-3 per bin.
    if (std::abs(mean) > 3.3 * 0.01 / std::sqrt(n)) ++outside;
    CHECK(sd >= 0.7 * 0.01);
    CHECK(sd <= 1.3 * 0.01);
  }
  CHECK(outside <= 5);
}

TEST_CASE("same seed and commands give identical output") {
  const auto script = scenarios::three_sources(5, 0.3, 2.0);
  std::vector<double> a, b;
  run_scenario(script, [&](const WaterfallBlock& blk) {
    a.insert(a.end(), blk.samples.begin(), blk.samples.end());
  });
  run_scenario(script, [&](const WaterfallBlock& blk) {
    b.insert(b.end(), blk.samples.begin(), blk.samples.end());
  });
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("block size does not change the output") {
  const auto script = scenarios::three_sources(6, 0.25, 1.5);
  std::vector<double> a, b;
  run_scenario(script, [&](const WaterfallBlock& blk) {
    a.insert(a.end(), blk.samples.begin(), blk.samples.end());
  }, 100);
  run_scenario(script, [&](const WaterfallBlock& blk) {
    b.insert(b.end(), blk.samples.begin(), blk.samples.end());
  }, 37);
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("car reflects at the road zone edges") {
  SimConfig config;
  config.sources.car.position_m = 710.0;
  Simulator s(config);
  s.apply_control(CarControl{CarControl::Action::start, 2.0});
  for (int i = 0; i < 800; ++i) s.synthesize_block(100);
  // 710 + 2 * 80 = 870, folded back from the 850 m wall.
  CHECK(s.car_position_m() == doctest::Approx(fold_oracle(870.0, 700.0, 850.0)).epsilon(1e-12));
  CHECK(s.car_position_m() == doctest::Approx(830.0).epsilon(1e-12));
  CHECK(reflect(870.0, 700.0, 850.0) == doctest::Approx(830.0));
  CHECK(reflect(1010.0, 700.0, 850.0) == doctest::Approx(fold_oracle(1010.0, 700.0, 850.0)));
  CHECK(reflect(650.0, 700.0, 850.0) == doctest::Approx(750.0));
}

TEST_CASE("fan raises the aerial zone energy") {
  SimConfig config;
  config.seed = 3;
  Simulator s(config);
  const auto& aerial = s.layout().zone(SegmentKind::aerial_zone);
  auto zone_energy = [&](const WaterfallBlock& b) {
    const auto e = oracle::two_pass_energy(b);
    double sum = 0;
    for (auto x = static_cast<std::size_t>(aerial.start_m); x < static_cast<std::size_t>(aerial.end_m); ++x) {
      sum += e[x];
    }
    return sum;
  };
  const double before = zone_energy(s.synthesize_block(500));
  s.apply_control(SetFan{true});
  CHECK(s.sources().fan.on);
  const double after = zone_energy(s.synthesize_block(500));
  CHECK(after / before > 2.0);
}

TEST_CASE("car commands") {
  Simulator s(SimConfig{});
  s.apply_control(CarControl{CarControl::Action::start, 3.0});
  s.synthesize_block(500);
  const double pos = s.car_position_m();
  CHECK(pos == doctest::Approx(721.5));

  SUBCASE("stop keeps the position") {
    s.apply_control(CarControl{CarControl::Action::stop, 0.0});
    CHECK_FALSE(s.sources().car.driving);
    s.synthesize_block(500);
    CHECK(s.car_position_m() == pos);
  }
  SUBCASE("excess speed is rejected and changes nothing") {
    CHECK_THROWS_AS(s.apply_control(CarControl{CarControl::Action::start, 99.0}), ValidationError);
    CHECK_THROWS_AS(s.apply_control(CarControl{CarControl::Action::start, -10.5}), ValidationError);
    CHECK(s.sources().car.driving);
    CHECK(s.sources().car.speed_mps == 3.0);
  }
  CHECK_THROWS_AS(s.synthesize_block(0), Error);
}

TEST_CASE("commands take effect from the next trace") {
  auto config = noiseless();
  Simulator s(config);
  s.synthesize_block(10);
  s.apply_control(SetAudio{AudioSignal::tone, true});
  const auto b = s.synthesize_block(10);
  const auto bin = static_cast<std::size_t>(config.sources.speaker.center_m);
  // The tone at t = 10 ms is sin(2pi*1.2) + 0.5 sin(2pi*2.4), nonzero.
  CHECK(b.at(0, bin) != 0.0);
  CHECK(b.t0_s == doctest::Approx(0.01));
}

TEST_CASE("scenario runs and label derivation") {
  SUBCASE("empty timeline") {
    const auto script = scenarios::quiescent(1, 10.0);
    std::uint64_t traces = 0;
    const auto run = run_scenario(script, [&](const WaterfallBlock& b) { traces += b.n_traces; });
    CHECK(traces == 10000);
    CHECK(run.n_traces == 10000);
    CHECK(run.labels.empty());
  }
  SUBCASE("fan on from 1 s to 6 s") {
    auto script = scenarios::quiescent(1, 8.0);
    script.timeline = {{1.0, SetFan{true}}, {6.0, SetFan{false}}};
    const auto labels = derive_labels(script, build_layout());
    REQUIRE(labels.size() == 1);
    CHECK(labels[0] == LabelSpan{1.0, 6.0, 550.0, 700.0, "wind"});
  }
  SUBCASE("three sources in [2, 8] s have disjoint extents") {
    auto script = scenarios::quiescent(1, 10.0);
    script.timeline = {{2.0, SetAudio{AudioSignal::chirp, true}},
                       {2.0, SetFan{true}},
                       {2.0, CarControl{CarControl::Action::start, 1.0}},
                       {8.0, SetAudio{AudioSignal::chirp, false}},
                       {8.0, SetFan{false}},
                       {8.0, CarControl{CarControl::Action::stop, 0.0}}};
    const auto layout = build_layout();
    auto labels = derive_labels(script, layout);
    REQUIRE(labels.size() == 3);
    std::sort(labels.begin(), labels.end(),
              [](const auto& a, const auto& b) { return a.x_start_m < b.x_start_m; });
    for (std::size_t i = 0; i + 1 < labels.size(); ++i) {
      CHECK(labels[i].x_end_m <= labels[i + 1].x_start_m);
    }
    CHECK(labels[0].label == "acoustic");
    CHECK(labels[0].x_start_m == layout.zone(SegmentKind::acoustic_zone).start_m);
    CHECK(labels[1].label == "wind");
    CHECK(labels[2].label == "vehicle");
    CHECK(labels[2].x_end_m == layout.zone(SegmentKind::road_zone).end_m);
    for (const auto& l : labels) {
      CHECK(l.t_start_s == 2.0);
      CHECK(l.t_end_s == 8.0);
    }
  }
  SUBCASE("unsorted timeline") {
    auto script = scenarios::quiescent(1, 10.0);
    script.timeline = {{5.0, SetFan{true}}, {1.0, SetFan{false}}};
    CHECK_THROWS_AS(run_scenario(script, [](const WaterfallBlock&) {}), ScriptError);
  }
  SUBCASE("a source left on closes at the end") {
    const auto script = scenarios::speaker_tone(1, 3.0, 7.0);
    const auto labels = derive_labels(script, build_layout());
    REQUIRE(labels.size() == 1);
    CHECK(labels[0].t_end_s == 7.0);
  }
}

TEST_CASE("sources superpose") {
  auto config = noiseless();
  config.seed = 42;
  auto with = [&](bool speaker, bool fan) {
    auto c = config;
    c.sources.speaker.on = speaker;
    c.sources.fan.on = fan;
    Simulator s(c);
    return synth(s, 1500);
  };
  const auto both = with(true, true);
  const auto speaker = with(true, false);
  const auto fan = with(false, true);
  double worst = 0;
  for (std::size_t i = 0; i < both.samples.size(); ++i) {
    worst = std::max(worst, std::abs(both.samples[i] - (speaker.samples[i] + fan.samples[i])));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("speaker energy stays local") {
  auto config = noiseless();
  config.sources.speaker.on = true;
  Simulator s(config);
  const auto e = oracle::two_pass_energy(synth(s, 1000));
  const double peak = *std::max_element(e.begin(), e.end());
  const auto& sp = config.sources.speaker;
  const auto centers = s.layout().bin_centers();
  for (std::size_t x = 0; x < e.size(); ++x) {
    if (std::abs(centers[x] - sp.center_m) > 4.0 * sp.spatial_sigma_m) CHECK(e[x] < 0.02 * peak);
  }
}

TEST_CASE("every label span is detectable in its zone") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto script = scenarios::episodes(seed, 3);
    const auto labels = derive_labels(script, build_layout(script.layout));
    std::vector<std::vector<double>> energies;
    std::vector<double> block_t0;
    run_scenario(script, [&](const WaterfallBlock& b) {
      energies.push_back(oracle::two_pass_energy(b));
      block_t0.push_back(b.t0_s);
    });
    // Quiescent statistics from the warmup before the first command.
    const std::size_t quiet_blocks = static_cast<std::size_t>(script.timeline.front().t_s * 10.0);
    const std::size_t n_bins = energies.front().size();
    std::vector<double> mean(n_bins), sd(n_bins);
    for (std::size_t x = 0; x < n_bins; ++x) {
      double sum = 0, sum_sq = 0;
      for (std::size_t b = 0; b < quiet_blocks; ++b) {
        sum += energies[b][x];
        sum_sq += energies[b][x] * energies[b][x];
      }
      mean[x] = sum / static_cast<double>(quiet_blocks);
      sd[x] = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(quiet_blocks) - mean[x] * mean[x]));
    }
    for (const auto& l : labels) {
      std::size_t blocks = 0, detectable = 0;
      for (std::size_t b = 0; b < energies.size(); ++b) {
        if (block_t0[b] < l.t_start_s || block_t0[b] + 0.1 > l.t_end_s) continue;
        ++blocks;
        bool any = false;
        for (auto x = static_cast<std::size_t>(l.x_start_m); x < static_cast<std::size_t>(l.x_end_m); ++x) {
          any = any || energies[b][x] >= mean[x] + 5.0 * sd[x];
        }
        detectable += any ? 1 : 0;
      }
      CAPTURE(l.label);
      CHECK(blocks > 0);
      CHECK(detectable == blocks);
    }
  }
}

TEST_CASE("POTD round trip and file size") {
  const auto path = temp_path("roundtrip.potd");
  PotdHeader header{1000, 1.0F, 1000.0F, 0};
  SimConfig config;
  config.sources.speaker.on = true;
  Simulator s(config);
  std::vector<WaterfallBlock> written;
  {
    PotdWriter writer(path, header);
    for (int i = 0; i < 100; ++i) {
      written.push_back(s.synthesize_block(100));
      writer.write(written.back());
    }
    writer.close();
  }
  CHECK(std::filesystem::file_size(path) == kPotdHeaderBytes + 10000ULL * 1000ULL * 4ULL);

  PotdReader reader(path);
  CHECK(reader.header().n_traces == 10000);
  CHECK(reader.header().n_bins == 1000);
  std::size_t i = 0;
  while (auto block = reader.read_block(100)) {
    REQUIRE(i < written.size());
    CHECK(block->t0_s == doctest::Approx(written[i].t0_s));
    bool exact = true;
    for (std::size_t k = 0; k < block->samples.size(); ++k) {
      exact = exact && block->samples[k] == static_cast<double>(static_cast<float>(written[i].samples[k]));
    }
    CHECK(exact);
    ++i;
  }
  CHECK(i == written.size());
  std::filesystem::remove(path);
}

TEST_CASE("POTD decoding errors carry offsets") {
  const auto path = temp_path("bad.potd");
  PotdHeader header{10, 1.0F, 1000.0F, 0};
  {
    PotdWriter writer(path, header);
    WaterfallBlock b{0.0, 3, 10, std::vector<double>(30, 0.5)};
    writer.write(b);
    writer.close();
  }
  SUBCASE("half a trace at the end") {
    {
      std::ofstream out(path, std::ios::binary | std::ios::app);
      const float half[5] = {1, 2, 3, 4, 5};
      out.write(reinterpret_cast<const char*>(half), sizeof half);
    }
    // The header still says 3 traces; make it streamed so the tail is read.
    {
      std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
      f.seekp(20);
      const std::uint64_t zero = 0;
      f.write(reinterpret_cast<const char*>(&zero), sizeof zero);
    }
    PotdReader reader(path);
    try {
      while (reader.read_block(2)) {
      }
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == kPotdHeaderBytes + 3 * 10 * 4);
    }
  }
  SUBCASE("bad magic") {
    {
      std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
      f.write("XOTD", 4);
    }
    try {
      PotdReader reader(path);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("unsupported version") {
    {
      std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
      f.seekp(4);
      const std::uint16_t v = 9;
      f.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    try {
      PotdReader reader(path);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 4);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("control commands parse from JSON bodies") {
  using nlohmann::json;
  CHECK(fan_command_from_json(json{{"on", true}}).on);
  const auto audio = audio_command_from_json(json{{"signal", "chirp"}, {"on", true}});
  CHECK(audio.signal == AudioSignal::chirp);
  const auto car = car_command_from_json(json{{"command", "start"}, {"speed_mps", 2.5}});
  CHECK(car.action == CarControl::Action::start);
  CHECK(car.speed_mps == 2.5);
  CHECK_THROWS_AS(audio_command_from_json(json{{"signal", "siren"}, {"on", true}}), ValidationError);
  CHECK_THROWS_AS(car_command_from_json(json{{"command", "reverse"}}), ValidationError);
  CHECK_THROWS_AS(fan_command_from_json(json{{"on", "yes"}}), ValidationError);

  const ControlCommand cmd = CarControl{CarControl::Action::stop, 0.0};
  CHECK(std::get<CarControl>(command_from_json(command_to_json(cmd))).action ==
        CarControl::Action::stop);
}

TEST_CASE("scenario JSON round trip") {
  auto script = scenarios::three_sources(9, 1.5, 12.0);
  script.timeline.push_back({6.0, SetAudio{AudioSignal::rumble, true}});
  nlohmann::json j = script;
  const auto path = temp_path("scenario.json");
  std::ofstream(path) << j.dump();
  const auto loaded = load_scenario(path);
  CHECK(loaded.seed == 9);
  CHECK(loaded.duration_s == 12.0);
  REQUIRE(loaded.timeline.size() == 4);
  CHECK(std::get<SetAudio>(loaded.timeline[3].command).signal == AudioSignal::rumble);
  CHECK(derive_labels(loaded, build_layout()) == derive_labels(script, build_layout()));

  const auto labels_path = temp_path("labels.jsonl");
  const auto labels = derive_labels(script, build_layout());
  write_labels(labels_path, labels);
  CHECK(read_labels(labels_path) == labels);
  std::filesystem::remove(path);
  std::filesystem::remove(labels_path);
}
