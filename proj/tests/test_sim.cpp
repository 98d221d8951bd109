#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "refpts/io.hpp"
#include "refpts/sim.hpp"

using namespace refpts;
using namespace refpts::sim;

namespace {

const std::string kConfigDir = REFPTS_CONFIG_DIR;

ScenarioConfig small_scenario(std::uint64_t seed) {
  ScenarioConfig cfg = io::load_scenario_config(kConfigDir + "/benchmark_fn_fp.json");
  cfg.seed = seed;
  cfg.duration_frames = 10;
  return cfg;
}

WorldState still_world(std::initializer_list<Point3> positions) {
  WorldState world;
  std::uint64_t id = 0;
  for (const Point3& p : positions) {
    GroundTruthObject o;
    o.gt_id = id++;
    o.position = p;
    world.objects.push_back(o);
  }
  return world;
}

}  // namespace

TEST_CASE("step_world: zero-velocity objects stay put") {
  WorldState world = still_world({{1, 2, 0}, {-3, 4, 0}});
  step_world(world, 0.2);
  step_world(world, 0.2);
  CHECK(world.object_position(0) == Point3{1, 2, 0});
  CHECK(world.object_position(1) == Point3{-3, 4, 0});
}

TEST_CASE("step_world: unit velocity advances x by dt") {
  WorldState world = still_world({{0, 0, 0}});
  world.objects[0].velocity = {1.0, 0.0};
  step_world(world, 0.2);
  CHECK(world.object_position(0).x == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("step_world: 100 small steps equal one large step exactly") {
  WorldState stepped = still_world({{2.0, -1.0, 0.0}});
  stepped.objects[0].velocity = {0.7, -1.3};
  WorldState jumped = stepped;

  const double dt = 0.2;
  for (int i = 0; i < 100; ++i) step_world(stepped, dt);
  step_world(jumped, 100 * dt);

  CHECK(stepped.elapsed_us == jumped.elapsed_us);
  CHECK(stepped.object_position(0) == jumped.object_position(0));

  // Closed-form kinematics oracle.
  const double t = 100 * dt;
  CHECK(stepped.object_position(0).x == doctest::Approx(2.0 + 0.7 * t).epsilon(1e-12));
  CHECK(stepped.object_position(0).y == doctest::Approx(-1.0 - 1.3 * t).epsilon(1e-12));
}

TEST_CASE("simulate_detector: perfect detector reproduces in-FoV GT in the local frame") {
  WorldState world = still_world({{5, 5, 0}, {100, 0, 0}, {-2, 3, 0}});
  world.objects[0].velocity = {2.0, 0.0};

  DetectorProfile profile;
  profile.position_noise_sigma = 0.0;
  profile.fov_range = {-10, 10, -10, 10};
  Rng rng(1);
  const TransformSE3 pose = TransformSE3::from_yaw(0.0, {1.0, 0.0, 0.0});
  const AgentFrame frame = simulate_detector(world, pose, profile, 0, rng);

  REQUIRE(frame.points.size() == 2);  // the object at x=100 is out of FoV
  CHECK(frame.points[0].position == Point3{4.0, 5.0, 0.0});
  CHECK(frame.points[1].position == Point3{-3.0, 3.0, 0.0});
  CHECK(*frame.points[0].velocity == Velocity2{2.0, 0.0});
  CHECK(frame.points[0].size == world.objects[0].size);
  CHECK(frame.points[0].class_label == world.objects[0].class_label);
  CHECK(!frame.in_ego_frame);
}

TEST_CASE("simulate_detector: fn_rate 1 leaves only false positives") {
  WorldState world = still_world({{1, 1, 0}, {2, 2, 0}, {3, 3, 0}});
  DetectorProfile profile;
  profile.fn_rate = 1.0;
  profile.fp_rate = 0.5;
  Rng rng(2);
  DetectionDebug debug;
  const AgentFrame frame =
      simulate_detector(world, TransformSE3::identity(), profile, 0, rng, &debug);
  CHECK(frame.points.size() == 2);  // ceil(0.5 * 3)
  for (bool fp : debug.is_false_positive) CHECK(fp);
  for (const ReferencePoint& p : frame.points) {
    CHECK(profile.fov_range.contains(p.position.x, p.position.y));
    CHECK(p.confidence >= profile.fp_confidence_range[0]);
    CHECK(p.confidence <= profile.fp_confidence_range[1]);
  }
}

TEST_CASE("simulate_detector: binomial expectation at fn_rate 0.4") {
  WorldState world;
  for (int i = 0; i < 10; ++i) {
    GroundTruthObject o;
    o.gt_id = static_cast<std::uint64_t>(i);
    o.position = {static_cast<double>(i), 0.0, 0.0};
    world.objects.push_back(o);
  }
  DetectorProfile profile;
  profile.fn_rate = 0.4;
  Rng rng(3);
  std::uint64_t total = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    total += simulate_detector(world, TransformSE3::identity(), profile, 0, rng).points.size();
  }
  const double mean = static_cast<double>(total) / trials;
  CHECK(mean == doctest::Approx(6.0).epsilon(0.1 / 6.0));
}

TEST_CASE("simulate_detector: forced misses are deterministic blind windows") {
  WorldState world = still_world({{1, 1, 0}, {5, 5, 0}});
  DetectorProfile profile;
  profile.position_noise_sigma = 0.0;
  profile.forced_misses.push_back({0, 2, 4});
  for (std::uint64_t f = 0; f < 6; ++f) {
    Rng rng(4);
    const AgentFrame frame = simulate_detector(world, TransformSE3::identity(), profile, f, rng);
    const bool blind = f >= 2 && f <= 4;
    CHECK(frame.points.size() == (blind ? 1 : 2));
  }
}

TEST_CASE("transmit: immediate delivery and guaranteed drop") {
  wire::WireMessage msg;
  msg.records.push_back({});
  ChannelModel channel;
  Rng rng(5);
  Transmission tx = transmit(msg, channel, 7, rng);
  CHECK(!tx.dropped);
  CHECK(tx.deliver_frame == 7);
  CHECK(tx.payload_bytes == 12);

  channel.drop_probability = 1.0;
  channel.latency_frames = 3;
  tx = transmit(msg, channel, 7, rng);
  CHECK(tx.dropped);
  CHECK(tx.payload_bytes == 12);  // sent bytes count even when dropped
  CHECK(tx.deliver_frame == 10);
}

TEST_CASE("transmit: Bernoulli expectation at drop 0.3") {
  wire::WireMessage msg;
  ChannelModel channel;
  channel.drop_probability = 0.3;
  Rng rng(6);
  int delivered = 0;
  for (int i = 0; i < 10000; ++i) {
    if (!transmit(msg, channel, 0, rng).dropped) ++delivered;
  }
  CHECK(delivered > 6900);
  CHECK(delivered < 7100);
}

TEST_CASE("run_scenario: zero duration yields an empty but valid report") {
  ScenarioConfig cfg = small_scenario(9);
  cfg.duration_frames = 0;
  const ScenarioReport report = run_scenario(cfg);
  CHECK(report.per_frame.empty());
  CHECK(report.bandwidth.total_payload_bytes == 0);
  CHECK(report.metrics.recall == 0.0);
  CHECK(report.effective_points_histogram.empty());
}

TEST_CASE("run_scenario: identical seeds give identical reports") {
  const ScenarioConfig cfg = small_scenario(1234);
  std::vector<track::FrameEvents> ev1, ev2;
  const ScenarioReport a = run_scenario(cfg, &ev1);
  const ScenarioReport b = run_scenario(cfg, &ev2);
  CHECK(a == b);
  CHECK(io::report_to_json(a) == io::report_to_json(b));
  CHECK(io::events_to_jsonl(ev1) == io::events_to_jsonl(ev2));

  ScenarioConfig other = cfg;
  other.seed = 1235;
  CHECK(run_scenario(other) != a);
}

TEST_CASE("run_scenario: ledger exactness against per-frame sums") {
  const ScenarioConfig cfg = small_scenario(77);
  const ScenarioReport report = run_scenario(cfg);
  std::uint64_t sum = 0;
  for (const FrameStats& fs : report.per_frame) sum += fs.sent_payload_bytes;
  CHECK(sum == report.bandwidth.total_payload_bytes);
  CHECK(report.bandwidth.messages_sent ==
        report.bandwidth.messages_dropped + report.bandwidth.messages_delivered);
  CHECK(report.bandwidth.total_header_bytes ==
        report.bandwidth.messages_sent * wire::kHeaderBytes);
  // One sender, a clean channel: one message per frame.
  CHECK(report.bandwidth.messages_sent == cfg.duration_frames);
}

TEST_CASE("run_scenario: sent bytes equal payload_bytes of the transmitted counts") {
  ScenarioConfig cfg = small_scenario(78);
  const ScenarioReport report = run_scenario(cfg);
  wire::PayloadFlags flags{.has_velocity = true, .has_size = true, .has_confidence = true};
  for (const FrameStats& fs : report.per_frame) {
    CHECK(fs.sent_payload_bytes == wire::payload_bytes(fs.transmitted_points, flags));
  }
  CHECK(report.bandwidth.max_payload_bytes_per_frame ==
        wire::payload_bytes(cfg.query_capacity, flags));
}

TEST_CASE("run_scenario: FN monotonicity in expectation over seeds") {
  // Expected fused recall is non-increasing in the sender FN rate.
  const double fn_rates[] = {0.0, 0.3, 0.6, 0.9};
  double means[4] = {};
  ScenarioConfig base = small_scenario(0);
  base.duration_frames = 6;
  base.world.object_count = 8;
  base.agents[0].detector.fn_rate = 0.3;  // imperfect ego so the sender matters
  for (int level = 0; level < 4; ++level) {
    ScenarioConfig cfg = base;
    cfg.agents[1].detector.fn_rate = fn_rates[level];
    double sum = 0.0;
    const int seeds = 1000;
    for (int s = 0; s < seeds; ++s) {
      cfg.seed = 10000 + static_cast<std::uint64_t>(s);
      sum += run_scenario(cfg).metrics.fused_detection_recall;
    }
    means[level] = sum / seeds;
  }
  for (int level = 1; level < 4; ++level) {
    CHECK(means[level] <= means[level - 1] + 0.01);
  }
  // And the effect is real: FN 0.9 must sit measurably below FN 0.0.
  CHECK(means[3] < means[0]);
}

TEST_CASE("run_scenario: zero-information sender leaves ego-only metrics unchanged") {
  ScenarioConfig cfg = small_scenario(55);
  cfg.duration_frames = 20;
  // Sender parked far away: its FoV contains no objects, frames are empty.
  cfg.agents[1].start = {10000.0, 10000.0, 0.0};

  ScenarioConfig ego_only = cfg;
  ego_only.agents.resize(1);

  const ScenarioReport with_sender = run_scenario(cfg);
  const ScenarioReport alone = run_scenario(ego_only);
  CHECK(with_sender.metrics == alone.metrics);
  for (const FrameStats& fs : with_sender.per_frame) {
    CHECK(fs.transmitted_points == 0);
    CHECK(fs.sent_payload_bytes == 0);
  }
  // Empty messages still cross the channel.
  CHECK(with_sender.bandwidth.messages_sent == cfg.duration_frames);
}

TEST_CASE("run_scenario: monotone cooperation with a noise-free subset sender") {
  for (std::uint64_t seed : {21, 22, 23, 24, 25}) {
    ScenarioConfig cfg = small_scenario(seed);
    cfg.duration_frames = 15;
    cfg.agents[0].detector.fn_rate = 0.4;
    // Noise-free sender whose detections are a subset of GT.
    cfg.agents[1].detector.position_noise_sigma = 0.0;
    cfg.agents[1].detector.fn_rate = 0.2;
    cfg.agents[1].detector.fp_rate = 0.0;

    ScenarioConfig ego_only = cfg;
    ego_only.agents.resize(1);

    const double fused = run_scenario(cfg).metrics.fused_detection_recall;
    const double alone = run_scenario(ego_only).metrics.fused_detection_recall;
    CHECK(fused >= alone);
  }
}

TEST_CASE("run_scenario: channel latency delays fusion by the configured frames") {
  ScenarioConfig cfg = small_scenario(66);
  cfg.duration_frames = 8;
  cfg.agents[0].detector.fn_rate = 1.0;  // ego sees nothing; fused == delivered sender points
  cfg.agents[1].detector.fn_rate = 0.0;
  cfg.agents[1].detector.fp_rate = 0.0;
  cfg.channel.latency_frames = 3;

  const ScenarioReport report = run_scenario(cfg);
  for (std::uint64_t f = 0; f < 3; ++f) {
    CHECK(report.per_frame[f].fused_points == 0);
  }
  bool any_after = false;
  for (std::uint64_t f = 3; f < 8; ++f) {
    any_after = any_after || report.per_frame[f].fused_points > 0;
  }
  CHECK(any_after);
}

TEST_CASE("run_scenario: query fusion transmits min(K, detections) records") {
  ScenarioConfig cfg = io::load_scenario_config(kConfigDir + "/topk_coverage.json");
  cfg.duration_frames = 40;
  const ScenarioReport report = run_scenario(cfg);
  const std::size_t k = cfg.query_fusion->k;
  for (const FrameStats& fs : report.per_frame) {
    CHECK(fs.transmitted_points <= k);
    const wire::PayloadFlags flags{.has_confidence = true, .has_semantics = true};
    CHECK(fs.sent_payload_bytes ==
          wire::payload_bytes(fs.transmitted_points, flags, cfg.query_fusion->embed_dim));
  }
  CHECK(report.bandwidth.max_payload_bytes_per_frame ==
        wire::payload_bytes(k, wire::PayloadFlags{.has_confidence = true, .has_semantics = true},
                            cfg.query_fusion->embed_dim));
}

TEST_CASE("config validation fails before frame zero") {
  ScenarioConfig cfg = small_scenario(1);
  cfg.agents[0].is_ego = false;
  CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);

  cfg = small_scenario(1);
  cfg.agents[1].agent_id = cfg.agents[0].agent_id;
  CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);

  cfg = small_scenario(1);
  cfg.fusion.tau_d = -1.0;
  CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);

  cfg = small_scenario(1);
  cfg.channel.fps = 0.0;
  CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);
}
