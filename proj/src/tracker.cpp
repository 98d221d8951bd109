#include "refpts/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace refpts::track {

void TrackerConfig::validate() const {
  if (!(gate_distance > 0.0) || !std::isfinite(gate_distance)) {
    throw std::invalid_argument("TrackerConfig: gate_distance must be > 0");
  }
  if (!(confidence_decay > 0.0 && confidence_decay <= 1.0)) {
    throw std::invalid_argument("TrackerConfig: confidence_decay must be in (0, 1]");
  }
}

void predict(TrackerState& state, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("predict: dt must be > 0");
  }
  for (Track& t : state.tracks) {
    if (t.velocity) {
      t.position.x += dt * t.velocity->vx;
      t.position.y += dt * t.velocity->vy;
    }
  }
}

void apply_ego_motion(TrackerState& state, const TransformSE3& prev_to_current) {
  for (Track& t : state.tracks) {
    t.position = transform_point(prev_to_current, t.position);
    if (t.velocity) t.velocity = transform_velocity(prev_to_current, *t.velocity);
  }
}

FrameEvents update(TrackerState& state, const AgentFrame& fused, const TrackerConfig& cfg,
                   std::size_t ego_point_count) {
  cfg.validate();
  FrameEvents events;
  events.frame_index = fused.frame_index;

  // Reuse the reference-point association machinery: tracks on the ego side,
  // detections on the sender side, gate_distance as the threshold.
  AgentFrame track_frame;
  track_frame.points.reserve(state.tracks.size());
  for (const Track& t : state.tracks) {
    ReferencePoint p;
    p.position = t.position;
    p.instance_id = t.track_id;
    track_frame.points.push_back(p);
  }
  FusionConfig match_cfg;
  match_cfg.tau_d = cfg.gate_distance;
  match_cfg.matching_policy = MatchingPolicy::optimal_assignment;
  const MatchSet assignment = associate(track_frame, fused, match_cfg);

  std::vector<char> detection_used(fused.points.size(), 0);
  std::vector<char> track_matched(state.tracks.size(), 0);
  for (const MatchPair& pair : assignment.pairs) {
    Track& t = state.tracks[pair.ego_index];
    const ReferencePoint& det = fused.points[pair.sender_index];
    t.position = det.position;
    t.velocity = det.velocity;
    t.size = det.size;
    t.confidence = det.confidence;
    t.misses = 0;
    track_matched[pair.ego_index] = 1;
    detection_used[pair.sender_index] = 1;
    events.matches.push_back({t.track_id, pair.sender_index, pair.distance});
  }

  std::vector<Track> survivors;
  survivors.reserve(state.tracks.size());
  for (std::size_t i = 0; i < state.tracks.size(); ++i) {
    Track& t = state.tracks[i];
    t.age_frames += 1;
    if (!track_matched[i]) {
      t.misses += 1;
      t.confidence *= cfg.confidence_decay;
      if (t.misses > cfg.max_misses) {
        events.deaths.push_back(t.track_id);
        continue;
      }
    }
    survivors.push_back(t);
  }

  for (std::size_t d = 0; d < fused.points.size(); ++d) {
    if (detection_used[d]) continue;
    const ReferencePoint& det = fused.points[d];
    Track t;
    t.track_id = state.next_track_id++;
    t.position = det.position;
    t.velocity = det.velocity;
    t.size = det.size;
    t.confidence = det.confidence;
    t.age_frames = 1;
    t.misses = 0;
    t.source = d < ego_point_count ? TrackSource::ego : TrackSource::sender_injected;
    events.births.push_back({t.track_id, d, t.source});
    survivors.push_back(t);
  }

  state.tracks = std::move(survivors);
  return events;
}

TrackingMetrics evaluate(const std::vector<FrameLog>& logs, double gate_distance,
                         std::map<std::uint64_t, PerObjectStats>* per_object) {
  struct ObjectTrace {
    std::uint64_t present = 0;
    std::uint64_t matched = 0;
    std::uint64_t switches = 0;
    std::uint64_t last_track = 0;
    bool has_last_track = false;
    std::uint64_t last_matched_frame = 0;
    std::uint64_t current_run = 0;
    std::vector<std::uint64_t> runs;
  };
  std::map<std::uint64_t, ObjectTrace> traces;

  std::uint64_t total_gt = 0, matched_gt = 0, total_tracks = 0, matched_tracks = 0;

  FusionConfig match_cfg;
  match_cfg.tau_d = gate_distance;
  match_cfg.matching_policy = MatchingPolicy::optimal_assignment;

  for (const FrameLog& log : logs) {
    AgentFrame gt_frame;
    for (const GtSnapshot& g : log.ground_truth) {
      ReferencePoint p;
      p.position = g.position;
      p.instance_id = g.gt_id;
      gt_frame.points.push_back(p);
    }
    AgentFrame trk_frame;
    for (const TrackSnapshot& t : log.tracks) {
      ReferencePoint p;
      p.position = t.position;
      p.instance_id = t.track_id;
      trk_frame.points.push_back(p);
    }
    const MatchSet assignment = associate(gt_frame, trk_frame, match_cfg);

    total_gt += log.ground_truth.size();
    total_tracks += log.tracks.size();
    matched_gt += assignment.pairs.size();
    matched_tracks += assignment.pairs.size();

    for (const MatchPair& pair : assignment.pairs) {
      const std::uint64_t gt_id = log.ground_truth[pair.ego_index].gt_id;
      const std::uint64_t track_id = log.tracks[pair.sender_index].track_id;
      ObjectTrace& trace = traces[gt_id];
      trace.matched += 1;
      const bool contiguous = trace.current_run > 0 &&
                              log.frame_index == trace.last_matched_frame + 1 &&
                              trace.has_last_track && trace.last_track == track_id;
      if (contiguous) {
        trace.current_run += 1;
      } else {
        if (trace.current_run > 0) trace.runs.push_back(trace.current_run);
        trace.current_run = 1;
      }
      if (trace.has_last_track && trace.last_track != track_id) {
        trace.switches += 1;
      }
      trace.last_track = track_id;
      trace.has_last_track = true;
      trace.last_matched_frame = log.frame_index;
    }
    for (const GtSnapshot& g : log.ground_truth) {
      traces[g.gt_id].present += 1;
    }
  }

  TrackingMetrics metrics;
  metrics.recall = total_gt ? static_cast<double>(matched_gt) / total_gt : 0.0;
  metrics.precision = total_tracks ? static_cast<double>(matched_tracks) / total_tracks : 0.0;

  std::uint64_t run_count = 0, run_frames = 0;
  for (auto& [gt_id, trace] : traces) {
    if (trace.current_run > 0) {
      trace.runs.push_back(trace.current_run);
      trace.current_run = 0;
    }
    metrics.id_switches += trace.switches;
    for (std::uint64_t r : trace.runs) {
      run_count += 1;
      run_frames += r;
    }
    if (per_object) {
      PerObjectStats stats;
      stats.matched_frames = trace.matched;
      stats.present_frames = trace.present;
      stats.id_switches = trace.switches;
      if (!trace.runs.empty()) {
        std::uint64_t sum = 0;
        for (std::uint64_t r : trace.runs) sum += r;
        stats.mean_persistence = static_cast<double>(sum) / trace.runs.size();
      }
      (*per_object)[gt_id] = stats;
    }
  }
  metrics.mean_track_persistence =
      run_count ? static_cast<double>(run_frames) / run_count : 0.0;
  return metrics;
}

}  // namespace refpts::track
