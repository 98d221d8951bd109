#include "refpts/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

namespace refpts::sim {

namespace {

constexpr std::uint64_t kNoSourceGt = UINT64_MAX;

void check_range01(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument(std::string(what) + " must be in [0, 1]");
  }
}

void check_rect(const BevRect& r, const char* what) {
  if (!(r.x_min < r.x_max) || !(r.y_min < r.y_max)) {
    throw std::invalid_argument(std::string(what) + " is an empty rectangle");
  }
}

std::uint64_t dt_to_us(double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("step_world: dt must be > 0");
  }
  const auto us = static_cast<std::uint64_t>(std::llround(dt * 1e6));
  if (us == 0) {
    throw std::invalid_argument("step_world: dt below microsecond resolution");
  }
  return us;
}

}  // namespace

void DetectorProfile::validate() const {
  check_rect(fov_range, "DetectorProfile: fov_range");
  check_range01(fn_rate, "DetectorProfile: fn_rate");
  check_range01(fp_rate, "DetectorProfile: fp_rate");
  if (!(position_noise_sigma >= 0.0)) {
    throw std::invalid_argument("DetectorProfile: position_noise_sigma must be >= 0");
  }
  for (const auto& range : {tp_confidence_range, fp_confidence_range}) {
    check_range01(range[0], "DetectorProfile: confidence bound");
    check_range01(range[1], "DetectorProfile: confidence bound");
    if (range[0] > range[1]) {
      throw std::invalid_argument("DetectorProfile: confidence range lo > hi");
    }
  }
}

void ChannelModel::validate() const {
  check_range01(drop_probability, "ChannelModel: drop_probability");
  if (!(fps > 0.0)) {
    throw std::invalid_argument("ChannelModel: fps must be > 0");
  }
}

void WorldConfig::validate() const {
  check_rect(area, "WorldConfig: area");
  if (!(speed_min >= 0.0) || speed_max < speed_min) {
    throw std::invalid_argument("WorldConfig: bad speed range");
  }
  if (class_count < 1) {
    throw std::invalid_argument("WorldConfig: class_count must be >= 1");
  }
  for (const GroundTruthObject& o : explicit_objects) {
    if (o.gt_id < object_count) {
      throw std::invalid_argument(
          "WorldConfig: explicit gt_id collides with the random id range");
    }
    if (o.size.length <= 0.0 || o.size.width <= 0.0 || o.size.height <= 0.0) {
      throw std::invalid_argument("WorldConfig: explicit object size must be positive");
    }
  }
  for (std::size_t i = 0; i < explicit_objects.size(); ++i) {
    for (std::size_t j = i + 1; j < explicit_objects.size(); ++j) {
      if (explicit_objects[i].gt_id == explicit_objects[j].gt_id) {
        throw std::invalid_argument("WorldConfig: duplicate explicit gt_id");
      }
    }
  }
}

void ScenarioConfig::validate() const {
  if (agents.empty()) {
    throw std::invalid_argument("ScenarioConfig: no agents");
  }
  bool has_ego = false;
  for (const AgentSpec& a : agents) {
    has_ego = has_ego || a.is_ego;
    a.detector.validate();
  }
  if (!has_ego) {
    throw std::invalid_argument("ScenarioConfig: no ego agent");
  }
  for (std::size_t i = 0; i < agents.size(); ++i) {
    for (std::size_t j = i + 1; j < agents.size(); ++j) {
      if (agents[i].agent_id == agents[j].agent_id) {
        throw std::invalid_argument("ScenarioConfig: duplicate agent_id " +
                                    std::to_string(agents[i].agent_id));
      }
    }
  }
  world.validate();
  fusion.validate();
  channel.validate();
  tracker.validate();
  if (query_fusion) query_fusion->validate();
  if (query_capacity == 0) {
    throw std::invalid_argument("ScenarioConfig: query_capacity must be >= 1");
  }
}

std::size_t ScenarioConfig::ego_index() const {
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (agents[i].is_ego) return i;
  }
  throw std::invalid_argument("ScenarioConfig: no ego agent");
}

Point3 WorldState::object_position(std::size_t i) const {
  const GroundTruthObject& o = objects[i];
  const double t = time_seconds();
  return {o.position.x + t * o.velocity.vx, o.position.y + t * o.velocity.vy, o.position.z};
}

GroundTruthObject WorldState::object_now(std::size_t i) const {
  GroundTruthObject o = objects[i];
  o.position = object_position(i);
  return o;
}

WorldState seed_world(const WorldConfig& cfg, Rng& rng) {
  cfg.validate();
  WorldState state;
  state.objects.reserve(cfg.object_count);
  for (std::size_t i = 0; i < cfg.object_count; ++i) {
    GroundTruthObject o;
    o.gt_id = i;
    o.position = {rng.uniform(cfg.area.x_min, cfg.area.x_max),
                  rng.uniform(cfg.area.y_min, cfg.area.y_max), 0.0};
    const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
    const double heading = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    o.velocity = {speed * std::cos(heading), speed * std::sin(heading)};
    o.size = {rng.uniform(3.6, 5.0), rng.uniform(1.6, 2.0), rng.uniform(1.4, 1.8)};
    o.class_label = static_cast<int>(i % static_cast<std::size_t>(cfg.class_count));
    state.objects.push_back(o);
  }
  for (const GroundTruthObject& o : cfg.explicit_objects) {
    state.objects.push_back(o);
  }
  return state;
}

void step_world(WorldState& state, double dt) {
  state.elapsed_us += dt_to_us(dt);
}

TransformSE3 agent_pose_at(const AgentSpec& agent, double t) {
  return TransformSE3::from_yaw(agent.yaw, {agent.start.x + t * agent.velocity.vx,
                                            agent.start.y + t * agent.velocity.vy,
                                            agent.start.z});
}

AgentFrame simulate_detector(const WorldState& world, const TransformSE3& world_from_agent,
                             const DetectorProfile& profile, std::uint64_t frame_index,
                             Rng& rng, DetectionDebug* debug) {
  profile.validate();
  const TransformSE3 agent_from_world = inverse(world_from_agent);

  AgentFrame frame;
  frame.frame_index = frame_index;
  frame.timestamp = world.time_seconds();
  frame.in_ego_frame = false;
  if (debug) {
    debug->is_false_positive.clear();
    debug->source_gt.clear();
  }

  std::size_t candidates = 0;
  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    const GroundTruthObject& gt = world.objects[i];
    const Point3 local = transform_point(agent_from_world, world.object_position(i));
    if (!profile.fov_range.contains(local.x, local.y)) continue;
    ++candidates;

    bool forced_out = false;
    for (const ForcedMiss& miss : profile.forced_misses) {
      if (miss.gt_id == gt.gt_id && frame_index >= miss.from_frame &&
          frame_index <= miss.to_frame) {
        forced_out = true;
        break;
      }
    }
    if (forced_out) continue;
    if (rng.bernoulli(profile.fn_rate)) continue;  // false negative

    ReferencePoint p;
    p.position = {local.x + rng.normal(0.0, profile.position_noise_sigma),
                  local.y + rng.normal(0.0, profile.position_noise_sigma), local.z};
    p.confidence = rng.uniform(profile.tp_confidence_range[0], profile.tp_confidence_range[1]);
    if (profile.provides_velocity) {
      p.velocity = transform_velocity(agent_from_world, gt.velocity);
    }
    if (profile.provides_size) p.size = gt.size;
    p.class_label = gt.class_label;
    frame.points.push_back(p);
    if (debug) {
      debug->is_false_positive.push_back(false);
      debug->source_gt.push_back(gt.gt_id);
    }
  }

  const auto fp_count =
      static_cast<std::size_t>(std::ceil(profile.fp_rate * static_cast<double>(candidates)));
  for (std::size_t k = 0; k < fp_count; ++k) {
    ReferencePoint p;
    p.position = {rng.uniform(profile.fov_range.x_min, profile.fov_range.x_max),
                  rng.uniform(profile.fov_range.y_min, profile.fov_range.y_max), 0.0};
    p.confidence = rng.uniform(profile.fp_confidence_range[0], profile.fp_confidence_range[1]);
    if (profile.provides_velocity) p.velocity = Velocity2{0.0, 0.0};
    if (profile.provides_size) p.size = Size3{4.5, 1.8, 1.5};
    p.class_label = 0;
    frame.points.push_back(p);
    if (debug) {
      debug->is_false_positive.push_back(true);
      debug->source_gt.push_back(kNoSourceGt);
    }
  }

  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    frame.points[i].instance_id = i;
  }
  return frame;
}

Transmission transmit(const wire::WireMessage& msg, const ChannelModel& channel,
                      std::uint64_t send_frame, Rng& rng) {
  channel.validate();
  Transmission tx;
  tx.send_frame = send_frame;
  tx.deliver_frame = send_frame + channel.latency_frames;
  tx.record_count = msg.records.size();
  tx.payload_bytes = wire::payload_bytes(msg.records.size(), msg.flags, msg.embed_dim);
  tx.dropped = rng.bernoulli(channel.drop_probability);
  return tx;
}

namespace {

wire::PayloadFlags effective_flags(const WireAttrs& attrs, const DetectorProfile& profile) {
  wire::PayloadFlags flags;
  flags.has_velocity = attrs.velocity && profile.provides_velocity;
  flags.has_size = attrs.size && profile.provides_size;
  flags.has_confidence = attrs.confidence;
  return flags;
}

std::vector<Query> synthesize_queries(const AgentFrame& frame, std::size_t embed_dim,
                                      Rng& rng) {
  std::vector<Query> out;
  out.reserve(frame.points.size());
  for (const ReferencePoint& p : frame.points) {
    Query q;
    q.reference_point = p.position;
    q.confidence = p.confidence;
    q.instance_id = p.instance_id;
    q.pos_embed.reserve(embed_dim);
    q.sem_embed.reserve(embed_dim);
    for (std::size_t i = 0; i < embed_dim; ++i) q.pos_embed.push_back(rng.uniform(-1.0, 1.0));
    for (std::size_t i = 0; i < embed_dim; ++i) q.sem_embed.push_back(rng.uniform(-1.0, 1.0));
    out.push_back(std::move(q));
  }
  return out;
}

// Count of detections within gate of some ground-truth object, measured in
// the world frame.
std::uint64_t count_gt_matched(const std::vector<Point3>& world_positions,
                               const WorldState& world, double gate) {
  std::uint64_t matched = 0;
  for (const Point3& p : world_positions) {
    for (std::size_t i = 0; i < world.objects.size(); ++i) {
      if (distance(p, world.object_position(i)) < gate) {
        ++matched;
        break;
      }
    }
  }
  return matched;
}

struct PendingDelivery {
  std::uint64_t deliver_frame = 0;
  std::uint64_t send_frame = 0;
  std::size_t sender_slot = 0;
  std::vector<std::uint8_t> bytes;
};

// Mirrors fuse()'s unmatched-and-in-range filter so the receiver-side query
// list stays index-aligned with the fused frame.
void append_fallback_queries(std::vector<Query>& ego_queries,
                             const std::vector<Query>& selected_aligned,
                             const MatchSet& pairing, const FusionConfig& cfg,
                             std::uint64_t id_base) {
  std::uint64_t next_id = id_base;
  for (const std::size_t s : pairing.unmatched_sender) {
    const Query& src = selected_aligned[s];
    if (!cfg.visible_range.contains(src.reference_point.x, src.reference_point.y)) continue;
    Query q = src;
    q.instance_id = next_id++;
    ego_queries.push_back(std::move(q));
  }
}

}  // namespace

ScenarioReport run_scenario(const ScenarioConfig& cfg,
                            std::vector<track::FrameEvents>* events_out) {
  cfg.validate();

  ScenarioReport report;
  report.config = cfg;

  const std::size_t ego = cfg.ego_index();
  const double dt = 1.0 / cfg.channel.fps;
  const std::uint64_t dt_us = dt_to_us(dt);

  Rng master(cfg.seed);
  Rng world_rng = master.fork(0);
  Rng channel_rng = master.fork(1);
  std::vector<Rng> detector_rngs;
  std::vector<Rng> embed_rngs;
  for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
    detector_rngs.push_back(master.fork(100 + i));
    embed_rngs.push_back(master.fork(200 + i));
  }

  WorldState world = seed_world(cfg.world, world_rng);
  std::deque<PendingDelivery> pending;
  track::TrackerState tracker;
  std::optional<TransformSE3> prev_ego_pose;
  std::vector<track::FrameLog> logs;

  std::uint64_t sum_gt_visible = 0;
  std::uint64_t sum_detection_matched = 0;

  for (std::uint64_t f = 0; f < cfg.duration_frames; ++f) {
    if (f > 0) step_world(world, dt);
    const double now = world.time_seconds();

    FrameStats fs;
    fs.frame = f;

    std::vector<TransformSE3> poses;
    poses.reserve(cfg.agents.size());
    for (const AgentSpec& agent : cfg.agents) {
      poses.push_back(agent_pose_at(agent, now));
    }
    const TransformSE3 ego_from_world = inverse(poses[ego]);

    std::vector<AgentFrame> frames(cfg.agents.size());
    for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
      frames[i] = simulate_detector(world, poses[i], cfg.agents[i].detector, f,
                                    detector_rngs[i]);
      frames[i].agent_id = cfg.agents[i].agent_id;
    }
    AgentFrame ego_frame = frames[ego];
    ego_frame.in_ego_frame = true;
    fs.ego_detections = ego_frame.points.size();

    std::vector<Query> ego_queries;
    if (cfg.query_fusion) {
      ego_queries = synthesize_queries(ego_frame, cfg.query_fusion->embed_dim,
                                       embed_rngs[ego]);
    }

    // Senders encode and transmit.
    for (std::size_t s = 0; s < cfg.agents.size(); ++s) {
      if (s == ego) continue;
      const AgentFrame& detections = frames[s];
      const std::uint64_t timestamp_us = world.elapsed_us;

      wire::WireMessage msg;
      std::vector<Point3> transmitted_world;
      std::vector<Point3> detected_world;
      for (const ReferencePoint& p : detections.points) {
        detected_world.push_back(transform_point(poses[s], p.position));
      }
      if (cfg.query_fusion) {
        const std::vector<Query> queries =
            synthesize_queries(detections, cfg.query_fusion->embed_dim, embed_rngs[s]);
        const std::vector<Query> selected = select_top_k(queries, cfg.query_fusion->k);
        msg = wire::message_from_queries(selected, detections.agent_id, f, timestamp_us,
                                         cfg.wire_attrs.confidence);
        for (const Query& q : selected) {
          transmitted_world.push_back(transform_point(poses[s], q.reference_point));
        }
      } else {
        msg = wire::message_from_frame(detections,
                                       effective_flags(cfg.wire_attrs, cfg.agents[s].detector),
                                       cfg.query_capacity);
        transmitted_world = detected_world;
      }

      const Transmission tx = transmit(msg, cfg.channel, f, channel_rng);
      fs.transmitted_points += tx.record_count;
      fs.sent_payload_bytes += tx.payload_bytes;
      fs.valid_sender_detections += count_gt_matched(detected_world, world, cfg.fusion.tau_d);
      fs.valid_transmitted += count_gt_matched(transmitted_world, world, cfg.fusion.tau_d);

      report.bandwidth.total_payload_bytes += tx.payload_bytes;
      report.bandwidth.total_header_bytes += wire::kHeaderBytes;
      report.bandwidth.messages_sent += 1;
      if (tx.dropped) {
        report.bandwidth.messages_dropped += 1;
      } else {
        pending.push_back({tx.deliver_frame, f, s, wire::encode(msg)});
      }
    }

    // Ego decodes deliveries due this frame and folds them in pairwise.
    AgentFrame fused = ego_frame;
    for (auto it = pending.begin(); it != pending.end();) {
      if (it->deliver_frame != f) {
        ++it;
        continue;
      }
      const wire::WireMessage msg = wire::decode(it->bytes);
      const double t_send = static_cast<double>(it->send_frame * dt_us) * 1e-6;
      const TransformSE3 sender_pose = agent_pose_at(cfg.agents[it->sender_slot], t_send);
      const TransformSE3 to_ego = compose(ego_from_world, sender_pose);
      report.bandwidth.messages_delivered += 1;

      if (msg.flags.has_semantics) {
        std::vector<Query> selected = wire::queries_from_message(msg);
        for (Query& q : selected) {
          q.reference_point = transform_point(to_ego, q.reference_point);
        }
        AgentFrame sender_points =
            queries_to_frame(selected, msg.agent_id, f, now, /*in_ego_frame=*/true);
        const MatchSet pairing = associate(fused, sender_points, cfg.fusion);
        if (cfg.query_fusion) {
          ego_queries = fuse_queries(ego_queries, selected, pairing, *cfg.query_fusion);
        }
        const AgentFrame next = fuse(fused, sender_points, pairing, cfg.fusion);
        if (cfg.query_fusion) {
          std::uint64_t id_base = 0;
          for (const Query& q : ego_queries) id_base = std::max(id_base, q.instance_id + 1);
          append_fallback_queries(ego_queries, selected, pairing, cfg.fusion, id_base);
        }
        fused = next;
      } else {
        AgentFrame sender_local = wire::frame_from_message(msg);
        sender_local.to_ego = to_ego;
        const AgentFrame aligned = align_sender_frame(sender_local, to_ego);
        const MatchSet matches = associate(fused, aligned, cfg.fusion);
        fused = fuse(fused, aligned, matches, cfg.fusion);
      }
      it = pending.erase(it);
    }
    fs.fused_points = fused.points.size();

    // Ground truth visible to the ego, in ego coordinates.
    AgentFrame gt_frame;
    std::vector<track::GtSnapshot> gt_snapshots;
    for (std::size_t i = 0; i < world.objects.size(); ++i) {
      const Point3 local = transform_point(ego_from_world, world.object_position(i));
      if (!cfg.fusion.visible_range.contains(local.x, local.y)) continue;
      ReferencePoint p;
      p.position = local;
      p.instance_id = world.objects[i].gt_id;
      gt_frame.points.push_back(p);
      gt_snapshots.push_back({world.objects[i].gt_id, local});
    }
    fs.gt_visible = gt_frame.points.size();

    FusionConfig det_match_cfg = cfg.fusion;
    det_match_cfg.matching_policy = MatchingPolicy::optimal_assignment;
    fs.detection_matched_gt = associate(gt_frame, fused, det_match_cfg).pairs.size();
    sum_gt_visible += fs.gt_visible;
    sum_detection_matched += fs.detection_matched_gt;

    // Tracker consumes the fused frame.
    if (f > 0) {
      apply_ego_motion(tracker, compose(ego_from_world, *prev_ego_pose));
      predict(tracker, dt);
    }
    track::FrameEvents events = update(tracker, fused, cfg.tracker, ego_frame.points.size());
    if (events_out) events_out->push_back(std::move(events));
    fs.tracks_alive = tracker.tracks.size();

    track::FrameLog log;
    log.frame_index = f;
    for (const track::Track& t : tracker.tracks) {
      log.tracks.push_back({t.track_id, t.position});
    }
    log.ground_truth = std::move(gt_snapshots);
    logs.push_back(std::move(log));

    report.effective_points_histogram[fs.transmitted_points] += 1;
    report.per_frame.push_back(fs);
    report.topk.valid_total += fs.valid_sender_detections;
    report.topk.valid_captured += fs.valid_transmitted;
    prev_ego_pose = poses[ego];
  }

  report.metrics = track::evaluate(logs, cfg.tracker.gate_distance, &report.per_object);
  report.metrics.fused_detection_recall =
      sum_gt_visible ? static_cast<double>(sum_detection_matched) / sum_gt_visible : 0.0;

  if (cfg.duration_frames > 0) {
    report.bandwidth.mean_payload_bytes_per_frame =
        static_cast<double>(report.bandwidth.total_payload_bytes) /
        static_cast<double>(cfg.duration_frames);
    report.bandwidth.payload_bytes_per_second = wire::bandwidth_at_fps(
        report.bandwidth.mean_payload_bytes_per_frame, cfg.channel.fps);
    report.topk.mean_valid_per_frame = static_cast<double>(report.topk.valid_total) /
                                       static_cast<double>(cfg.duration_frames);
  }
  if (cfg.query_fusion) {
    wire::PayloadFlags flags;
    flags.has_confidence = cfg.wire_attrs.confidence;
    flags.has_semantics = true;
    report.bandwidth.max_payload_bytes_per_frame =
        wire::payload_bytes(cfg.query_fusion->k, flags, cfg.query_fusion->embed_dim);
  } else {
    wire::PayloadFlags flags;
    flags.has_velocity = cfg.wire_attrs.velocity;
    flags.has_size = cfg.wire_attrs.size;
    flags.has_confidence = cfg.wire_attrs.confidence;
    report.bandwidth.max_payload_bytes_per_frame =
        wire::payload_bytes(cfg.query_capacity, flags, 0);
  }
  report.topk.capture_ratio =
      report.topk.valid_total
          ? static_cast<double>(report.topk.valid_captured) /
                static_cast<double>(report.topk.valid_total)
          : 0.0;
  return report;
}

}  // namespace refpts::sim
