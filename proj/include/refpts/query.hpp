#pragma once

#include <cstdint>
#include <vector>

#include "refpts/core.hpp"

namespace refpts {

/// Detector query split into positional and semantic embedding halves of
/// equal dimension, anchored at a reference point.
struct Query {
  std::vector<double> pos_embed;
  std::vector<double> sem_embed;
  double confidence = 0.0;  // in [0, 1]
  Point3 reference_point;   // ego-frame after alignment
  std::uint64_t instance_id = 0;

  bool operator==(const Query&) const = default;
};

struct QueryFusionConfig {
  std::size_t k = 10;        // Top-K transmission count
  double lambda = 0.5;       // additive scaling coefficient, in (0, 1]
  std::size_t embed_dim = 128;

  void validate() const;  // throws std::invalid_argument
  bool operator==(const QueryFusionConfig&) const = default;
};

/// min(k, |input|) queries with the highest confidences, in descending
/// confidence order; ties broken by ascending instance_id.
std::vector<Query> select_top_k(const std::vector<Query>& sender_queries, std::size_t k);

/// Additive semantic aggregation: for each pair (ego m, sender n) in
/// `pairing`, sem_embed[m] += lambda * sender sem_embed[n]; positional
/// embeddings are never modified and unpaired ego queries pass through
/// untouched. `pairing` is expected from associate() over the two reference
/// point sets. Throws std::invalid_argument on any embedding dimension
/// mismatch (heterogeneous models must not silently fuse).
std::vector<Query> fuse_queries(const std::vector<Query>& ego_queries,
                                const std::vector<Query>& selected,
                                const MatchSet& pairing, const QueryFusionConfig& cfg);

/// Frame view of a query set (reference points + confidences) for reuse of
/// the reference-point association machinery.
AgentFrame queries_to_frame(const std::vector<Query>& queries, std::uint32_t agent_id,
                            std::uint64_t frame_index, double timestamp,
                            bool in_ego_frame);

/// Reference points of the selected sender queries that were not paired;
/// these fall back to plain geometric fusion via fuse().
std::vector<ReferencePoint> unpaired_reference_points(const std::vector<Query>& selected,
                                                      const MatchSet& pairing);

}  // namespace refpts
