#include "refpts/query.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace refpts {

void QueryFusionConfig::validate() const {
  if (k < 1) {
    throw std::invalid_argument("QueryFusionConfig: k must be >= 1");
  }
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("QueryFusionConfig: lambda must be in (0, 1]");
  }
  if (embed_dim == 0) {
    throw std::invalid_argument("QueryFusionConfig: embed_dim must be > 0");
  }
}

std::vector<Query> select_top_k(const std::vector<Query>& sender_queries, std::size_t k) {
  std::vector<Query> out = sender_queries;
  std::stable_sort(out.begin(), out.end(), [](const Query& a, const Query& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.instance_id < b.instance_id;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

namespace {

std::size_t common_dim(const std::vector<Query>& queries, const char* side) {
  std::size_t dim = 0;
  bool first = true;
  for (const Query& q : queries) {
    if (q.pos_embed.size() != q.sem_embed.size()) {
      throw std::invalid_argument(std::string("fuse_queries: ") + side +
                                  " query has pos/sem dimension mismatch (" +
                                  std::to_string(q.pos_embed.size()) + " vs " +
                                  std::to_string(q.sem_embed.size()) + ")");
    }
    if (first) {
      dim = q.sem_embed.size();
      first = false;
    } else if (q.sem_embed.size() != dim) {
      throw std::invalid_argument(std::string("fuse_queries: inconsistent ") + side +
                                  " embedding dimensions (" + std::to_string(dim) +
                                  " vs " + std::to_string(q.sem_embed.size()) + ")");
    }
  }
  return dim;
}

}  // namespace

std::vector<Query> fuse_queries(const std::vector<Query>& ego_queries,
                                const std::vector<Query>& selected,
                                const MatchSet& pairing, const QueryFusionConfig& cfg) {
  const std::size_t ego_dim = common_dim(ego_queries, "ego");
  const std::size_t sender_dim = common_dim(selected, "sender");
  if (!ego_queries.empty() && !selected.empty() && ego_dim != sender_dim) {
    throw std::invalid_argument(
        "fuse_queries: embedding dimension mismatch between models (ego d=" +
        std::to_string(ego_dim) + ", sender d=" + std::to_string(sender_dim) + ")");
  }

  std::vector<Query> out = ego_queries;
  for (const MatchPair& pair : pairing.pairs) {
    if (pair.ego_index >= out.size() || pair.sender_index >= selected.size()) {
      throw std::invalid_argument("fuse_queries: pairing indexes out of range");
    }
    Query& ego = out[pair.ego_index];
    const Query& sender = selected[pair.sender_index];
    for (std::size_t i = 0; i < ego.sem_embed.size(); ++i) {
      ego.sem_embed[i] += cfg.lambda * sender.sem_embed[i];
    }
  }
  return out;
}

AgentFrame queries_to_frame(const std::vector<Query>& queries, std::uint32_t agent_id,
                            std::uint64_t frame_index, double timestamp,
                            bool in_ego_frame) {
  AgentFrame frame;
  frame.agent_id = agent_id;
  frame.frame_index = frame_index;
  frame.timestamp = timestamp;
  frame.in_ego_frame = in_ego_frame;
  frame.points.reserve(queries.size());
  for (const Query& q : queries) {
    ReferencePoint p;
    p.position = q.reference_point;
    p.confidence = q.confidence;
    p.instance_id = q.instance_id;
    frame.points.push_back(p);
  }
  return frame;
}

std::vector<ReferencePoint> unpaired_reference_points(const std::vector<Query>& selected,
                                                      const MatchSet& pairing) {
  std::vector<char> paired(selected.size(), 0);
  for (const MatchPair& pair : pairing.pairs) {
    if (pair.sender_index < paired.size()) paired[pair.sender_index] = 1;
  }
  std::vector<ReferencePoint> out;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (paired[i]) continue;
    ReferencePoint p;
    p.position = selected[i].reference_point;
    p.confidence = selected[i].confidence;
    p.instance_id = selected[i].instance_id;
    out.push_back(p);
  }
  return out;
}

}  // namespace refpts
