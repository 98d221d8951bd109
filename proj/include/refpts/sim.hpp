#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "refpts/core.hpp"
#include "refpts/query.hpp"
#include "refpts/rng.hpp"
#include "refpts/tracker.hpp"
#include "refpts/wire.hpp"

namespace refpts::sim {

struct GroundTruthObject {
  std::uint64_t gt_id = 0;
  Point3 position;  // at the world state's current time
  Velocity2 velocity;
  Size3 size{4.5, 1.8, 1.5};
  int class_label = 0;

  bool operator==(const GroundTruthObject&) const = default;
};

/// Deterministic detector blind window: the object is dropped from this
/// detector's candidates for frames [from_frame, to_frame].
struct ForcedMiss {
  std::uint64_t gt_id = 0;
  std::uint64_t from_frame = 0;
  std::uint64_t to_frame = 0;

  bool operator==(const ForcedMiss&) const = default;
};

struct DetectorProfile {
  BevRect fov_range{-40.0, 40.0, -40.0, 40.0};  // agent-relative BEV rectangle
  double position_noise_sigma = 0.3;            // Gaussian on local x, y
  double fn_rate = 0.0;                         // in [0, 1]
  double fp_rate = 0.0;                         // in [0, 1]
  std::array<double, 2> tp_confidence_range{0.5, 1.0};
  std::array<double, 2> fp_confidence_range{0.05, 0.5};
  bool provides_velocity = true;
  bool provides_size = true;
  std::vector<ForcedMiss> forced_misses;

  void validate() const;
  bool operator==(const DetectorProfile&) const = default;
};

struct ChannelModel {
  double drop_probability = 0.0;
  std::uint64_t latency_frames = 0;
  double fps = 5.0;

  void validate() const;
  bool operator==(const ChannelModel&) const = default;
};

/// Agent with a linear pose trajectory: start + t * velocity at fixed yaw.
struct AgentSpec {
  std::uint32_t agent_id = 0;
  bool is_ego = false;
  Point3 start;
  double yaw = 0.0;
  Velocity2 velocity;
  DetectorProfile detector;

  bool operator==(const AgentSpec&) const = default;
};

struct WorldConfig {
  std::size_t object_count = 12;  // randomly seeded objects
  BevRect area{-60.0, 60.0, -60.0, 60.0};
  double speed_min = 0.0;
  double speed_max = 2.0;
  int class_count = 3;
  /// Scripted objects appended after the random ones (frozen scenarios).
  /// Their gt_ids must not collide with the random ids 0..object_count-1.
  std::vector<GroundTruthObject> explicit_objects;

  void validate() const;
  bool operator==(const WorldConfig&) const = default;
};

/// Attributes the senders put on the wire (intersected with what each
/// detector provides).
struct WireAttrs {
  bool velocity = true;
  bool size = true;
  bool confidence = true;

  bool operator==(const WireAttrs&) const = default;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  std::uint64_t duration_frames = 0;
  WorldConfig world;
  std::vector<AgentSpec> agents;  // the first is_ego agent receives and fuses
  FusionConfig fusion;
  std::optional<QueryFusionConfig> query_fusion;
  ChannelModel channel;
  WireAttrs wire_attrs;
  track::TrackerConfig tracker;
  std::size_t query_capacity = kDefaultQueryCapacity;

  void validate() const;  // throws std::invalid_argument before frame 0
  std::size_t ego_index() const;
  bool operator==(const ScenarioConfig&) const = default;
};

/// Object seeds plus integer-microsecond elapsed time. Positions are the
/// closed form p0 + v * t, so stepping N times by dt lands exactly where one
/// step of N*dt does.
struct WorldState {
  std::vector<GroundTruthObject> objects;  // positions at t = 0
  std::uint64_t elapsed_us = 0;

  double time_seconds() const { return static_cast<double>(elapsed_us) * 1e-6; }
  Point3 object_position(std::size_t i) const;
  GroundTruthObject object_now(std::size_t i) const;
};

WorldState seed_world(const WorldConfig& cfg, Rng& rng);

/// Advances every object and the clock by dt (rounded to whole microseconds).
void step_world(WorldState& state, double dt);

/// world_from_agent pose at time t.
TransformSE3 agent_pose_at(const AgentSpec& agent, double t);

/// Per-detection provenance for instrumented runs.
struct DetectionDebug {
  std::vector<bool> is_false_positive;
  std::vector<std::uint64_t> source_gt;  // gt_id, or UINT64_MAX for FPs
};

/// Detector model: in-FoV ground truth becomes candidates in the agent's
/// local frame; each candidate is independently dropped with fn_rate;
/// survivors get Gaussian x/y noise and a confidence from
/// tp_confidence_range; ceil(fp_rate * |candidates|) spurious detections are
/// placed uniformly in the FoV with confidence from fp_confidence_range.
/// Velocity and size attach only when the profile provides them (false
/// positives get zero velocity and a nominal size).
AgentFrame simulate_detector(const WorldState& world, const TransformSE3& world_from_agent,
                             const DetectorProfile& profile, std::uint64_t frame_index,
                             Rng& rng, DetectionDebug* debug = nullptr);

struct Transmission {
  std::uint64_t send_frame = 0;
  std::uint64_t deliver_frame = 0;
  bool dropped = false;
  std::uint64_t payload_bytes = 0;  // record body, header excluded
  std::uint64_t record_count = 0;
};

/// Drops the message with drop_probability, else schedules delivery
/// latency_frames later. Payload bytes are accounted either way.
Transmission transmit(const wire::WireMessage& msg, const ChannelModel& channel,
                      std::uint64_t send_frame, Rng& rng);

struct FrameStats {
  std::uint64_t frame = 0;
  std::uint64_t gt_visible = 0;            // GT inside the ego visible range
  std::uint64_t ego_detections = 0;
  std::uint64_t fused_points = 0;
  std::uint64_t detection_matched_gt = 0;  // GT matched by a fused detection
  std::uint64_t tracks_alive = 0;
  std::uint64_t transmitted_points = 0;    // effective points across all senders
  std::uint64_t sent_payload_bytes = 0;
  std::uint64_t valid_sender_detections = 0;  // GT-matched sender detections
  std::uint64_t valid_transmitted = 0;        // GT-matched among transmitted

  bool operator==(const FrameStats&) const = default;
};

struct BandwidthSummary {
  std::uint64_t total_payload_bytes = 0;
  std::uint64_t total_header_bytes = 0;
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_dropped = 0;
  std::uint64_t messages_delivered = 0;
  double mean_payload_bytes_per_frame = 0.0;
  double payload_bytes_per_second = 0.0;
  std::uint64_t max_payload_bytes_per_frame = 0;  // full-capacity payload model

  bool operator==(const BandwidthSummary&) const = default;
};

struct TopKStats {
  std::uint64_t valid_total = 0;
  std::uint64_t valid_captured = 0;
  double capture_ratio = 0.0;
  double mean_valid_per_frame = 0.0;

  bool operator==(const TopKStats&) const = default;
};

struct ScenarioReport {
  ScenarioConfig config;
  std::vector<FrameStats> per_frame;
  track::TrackingMetrics metrics;
  std::map<std::uint64_t, track::PerObjectStats> per_object;
  BandwidthSummary bandwidth;
  std::map<std::uint64_t, std::uint64_t> effective_points_histogram;
  TopKStats topk;

  bool operator==(const ScenarioReport&) const = default;
};

/// Full deterministic loop: step world, run every detector, encode and
/// transmit sender payloads, decode deliveries on the ego, align/associate/
/// fuse (query fusion when configured), feed the tracker, and accumulate
/// metrics and the bandwidth ledger. Identical config (seed included) yields
/// an identical report. Optionally emits per-frame tracker events.
ScenarioReport run_scenario(const ScenarioConfig& cfg,
                            std::vector<track::FrameEvents>* events_out = nullptr);

}  // namespace refpts::sim
