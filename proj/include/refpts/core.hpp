#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "refpts/geometry.hpp"

namespace refpts {

/// Transmission capacity of a detection head's query set; also the frame size
/// used for max-payload accounting.
inline constexpr std::size_t kDefaultQueryCapacity = 900;

/// One detected instance: a spatial anchor with optional motion/extent
/// attributes. Velocity and size are optional so heterogeneous senders can
/// ship positions only.
struct ReferencePoint {
  Point3 position;
  std::optional<Velocity2> velocity;
  std::optional<Size3> size;
  double confidence = 1.0;  // in [0, 1]
  int class_label = 0;
  std::uint64_t instance_id = 0;

  bool operator==(const ReferencePoint&) const = default;
};

/// One agent's detection set for one timestamp. Coordinates are the agent's
/// local frame until aligned (in_ego_frame marks alignment).
struct AgentFrame {
  std::uint32_t agent_id = 0;
  std::uint64_t frame_index = 0;
  double timestamp = 0.0;  // seconds
  std::vector<ReferencePoint> points;
  std::optional<TransformSE3> to_ego;
  bool in_ego_frame = false;

  bool operator==(const AgentFrame&) const = default;
};

/// Throws std::invalid_argument on duplicate instance ids, capacity overflow,
/// confidence out of [0,1], non-finite values, or non-positive sizes.
void validate_frame(const AgentFrame& frame,
                    std::size_t capacity = kDefaultQueryCapacity);

/// Axis-aligned BEV rectangle, meters. Bounds are inclusive.
struct BevRect {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  bool operator==(const BevRect&) const = default;
};

enum class MatchingPolicy {
  /// Candidate pairs processed in ascending distance order; ties broken by
  /// smaller (ego_index, sender_index).
  greedy_distance,
  /// Maximum-cardinality matching of minimum total distance on the
  /// thresholded distance matrix.
  optimal_assignment,
};

struct FusionConfig {
  double tau_d = 2.0;  // association gate, meters
  BevRect visible_range{-51.2, 51.2, -51.2, 51.2};
  bool use_velocity = true;
  bool use_size = true;
  MatchingPolicy matching_policy = MatchingPolicy::greedy_distance;
  bool planar_distance = false;  // gate on (x, y) distance instead of 3D

  void validate() const;  // throws std::invalid_argument
  bool operator==(const FusionConfig&) const = default;
};

struct MatchPair {
  std::size_t ego_index = 0;
  std::size_t sender_index = 0;
  double distance = 0.0;
  bool operator==(const MatchPair&) const = default;
};

/// One-to-one association result. Sender indices are partitioned three ways:
/// paired, suppressed (within tau_d of some ego point but lost the one-to-one
/// competition; treated as duplicates of an existing instance), and unmatched
/// (no ego point within tau_d at all). Only unmatched senders are candidates
/// for addition during fusion.
struct MatchSet {
  std::vector<MatchPair> pairs;             // sorted by ego_index
  std::vector<std::size_t> suppressed_sender;
  std::vector<std::size_t> unmatched_sender;
  std::vector<std::size_t> unmatched_ego;

  bool operator==(const MatchSet&) const = default;
};

/// Transforms every point into the ego frame: positions via transform_point,
/// velocities via transform_velocity, sizes copied. Confidences, labels and
/// ids are preserved; the result is marked in_ego_frame.
AgentFrame align_sender_frame(const AgentFrame& sender, const TransformSE3& to_ego);

/// One-to-one matching between ego and aligned sender points with every pair
/// distance < cfg.tau_d, under cfg.matching_policy. Deterministic for a given
/// input. Both frames must be in ego coordinates.
MatchSet associate(const AgentFrame& ego, const AgentFrame& sender_aligned,
                   const FusionConfig& cfg);

/// Unified frame: every ego point unchanged and in original order, then one
/// new point per unmatched sender point inside cfg.visible_range, carrying
/// the sender's confidence and class label, velocity/size gated by
/// cfg.use_velocity / cfg.use_size, and a fresh ego-side instance id. Matched
/// and suppressed sender points contribute nothing beyond the retained ego
/// points.
AgentFrame fuse(const AgentFrame& ego, const AgentFrame& sender_aligned,
                const MatchSet& matches, const FusionConfig& cfg);

}  // namespace refpts
