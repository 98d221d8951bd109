#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "refpts/core.hpp"

namespace refpts::track {

enum class TrackSource { ego, sender_injected };

struct Track {
  std::uint64_t track_id = 0;
  Point3 position;
  std::optional<Velocity2> velocity;
  std::optional<Size3> size;
  double confidence = 0.0;
  std::uint64_t age_frames = 1;
  std::uint64_t misses = 0;
  TrackSource source = TrackSource::ego;

  bool operator==(const Track&) const = default;
};

struct TrackerConfig {
  double gate_distance = 2.0;     // association gate, meters
  std::uint64_t max_misses = 3;   // track dies when misses exceed this
  double confidence_decay = 0.9;  // applied per missed frame

  void validate() const;  // throws std::invalid_argument
  bool operator==(const TrackerConfig&) const = default;
};

struct TrackerState {
  std::vector<Track> tracks;
  std::uint64_t next_track_id = 1;
};

struct FrameEvents {
  struct Birth {
    std::uint64_t track_id;
    std::size_t detection_index;
    TrackSource source;
  };
  struct Match {
    std::uint64_t track_id;
    std::size_t detection_index;
    double distance;
  };
  std::uint64_t frame_index = 0;
  std::vector<Birth> births;
  std::vector<std::uint64_t> deaths;
  std::vector<Match> matches;
};

/// Constant-velocity propagation: tracks with a velocity advance by
/// dt * velocity, tracks without stay in place. No track is created or
/// destroyed.
void predict(TrackerState& state, double dt);

/// Re-expresses track positions and velocities in a new ego frame
/// (ego-motion compensation between consecutive frames).
void apply_ego_motion(TrackerState& state, const TransformSE3& prev_to_current);

/// Gated one-to-one assignment between predicted tracks and fused detections
/// (optimal assignment on the thresholded distance matrix, the same machinery
/// as associate()). Matched tracks adopt the detection state outright —
/// position, confidence, and velocity/size exactly as present on the
/// detection (absent attributes clear the track's). Unmatched tracks
/// increment misses, decay confidence, and die past max_misses; unmatched
/// detections spawn new tracks. Detections with index >= ego_point_count are
/// recorded as sender-injected at birth.
FrameEvents update(TrackerState& state, const AgentFrame& fused, const TrackerConfig& cfg,
                   std::size_t ego_point_count);

struct TrackSnapshot {
  std::uint64_t track_id;
  Point3 position;
};

struct GtSnapshot {
  std::uint64_t gt_id;
  Point3 position;
};

/// Per-frame logs consumed by evaluate(); positions in ego coordinates.
struct FrameLog {
  std::uint64_t frame_index = 0;
  std::vector<TrackSnapshot> tracks;
  std::vector<GtSnapshot> ground_truth;
};

struct PerObjectStats {
  std::uint64_t matched_frames = 0;
  std::uint64_t present_frames = 0;
  std::uint64_t id_switches = 0;
  double mean_persistence = 0.0;  // mean same-track consecutive-frame run length

  bool operator==(const PerObjectStats&) const = default;
};

struct TrackingMetrics {
  double recall = 0.0;
  double precision = 0.0;
  std::uint64_t id_switches = 0;
  double mean_track_persistence = 0.0;
  double fused_detection_recall = 0.0;  // filled by the scenario runner

  bool operator==(const TrackingMetrics&) const = default;
};

/// Frame-by-frame gated matching of tracks to ground truth: recall = matched
/// GT / present GT, precision = matched tracks / present tracks, an identity
/// switch whenever a GT object's matched track id differs from its previously
/// matched one, persistence = mean length of same-track consecutive matched
/// runs. Denominators of zero yield 0.
TrackingMetrics evaluate(const std::vector<FrameLog>& logs, double gate_distance,
                         std::map<std::uint64_t, PerObjectStats>* per_object = nullptr);

}  // namespace refpts::track
