#include "refpts/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace refpts {

void validate_frame(const AgentFrame& frame, std::size_t capacity) {
  if (frame.points.size() > capacity) {
    throw std::invalid_argument("AgentFrame: " + std::to_string(frame.points.size()) +
                                " points exceed capacity " + std::to_string(capacity));
  }
  std::unordered_set<std::uint64_t> ids;
  ids.reserve(frame.points.size());
  for (const ReferencePoint& p : frame.points) {
    if (!ids.insert(p.instance_id).second) {
      throw std::invalid_argument("AgentFrame: duplicate instance_id " +
                                  std::to_string(p.instance_id));
    }
    if (!is_finite(p.position)) {
      throw std::invalid_argument("AgentFrame: non-finite position");
    }
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
      throw std::invalid_argument("AgentFrame: confidence outside [0, 1]");
    }
    if (p.velocity && !is_finite(*p.velocity)) {
      throw std::invalid_argument("AgentFrame: non-finite velocity");
    }
    if (p.size) {
      if (!is_finite(*p.size) || p.size->length <= 0.0 || p.size->width <= 0.0 ||
          p.size->height <= 0.0) {
        throw std::invalid_argument("AgentFrame: size components must be positive");
      }
    }
  }
}

void FusionConfig::validate() const {
  if (!(tau_d > 0.0) || !std::isfinite(tau_d)) {
    throw std::invalid_argument("FusionConfig: tau_d must be > 0");
  }
  if (!(visible_range.x_min < visible_range.x_max) ||
      !(visible_range.y_min < visible_range.y_max)) {
    throw std::invalid_argument("FusionConfig: empty visible_range");
  }
}

AgentFrame align_sender_frame(const AgentFrame& sender, const TransformSE3& to_ego) {
  AgentFrame out = sender;
  out.in_ego_frame = true;
  out.to_ego.reset();
  for (ReferencePoint& p : out.points) {
    p.position = transform_point(to_ego, p.position);
    if (p.velocity) p.velocity = transform_velocity(to_ego, *p.velocity);
    // Sizes are axis-aligned extents and pass through unchanged.
  }
  return out;
}

namespace {

double pair_distance(const Point3& a, const Point3& b, bool planar) {
  return planar ? planar_distance(a, b) : distance(a, b);
}

// Min-cost perfect matching on a dense square matrix via shortest augmenting
// paths with potentials. Rows are processed in index order and columns scanned
// in index order with strict improvement, so the result is deterministic.
std::vector<int> solve_square_assignment(const std::vector<std::vector<double>>& a) {
  const int n = static_cast<int>(a.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

void greedy_match(const std::vector<std::vector<double>>& dist, double tau,
                  std::vector<MatchPair>& pairs) {
  struct Candidate {
    double d;
    std::size_t m, n;
  };
  std::vector<Candidate> candidates;
  for (std::size_t m = 0; m < dist.size(); ++m) {
    for (std::size_t n = 0; n < dist[m].size(); ++n) {
      if (dist[m][n] < tau) candidates.push_back({dist[m][n], m, n});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.m != b.m) return a.m < b.m;
    return a.n < b.n;
  });
  std::vector<char> ego_taken(dist.size(), 0);
  std::vector<char> sender_taken(dist.empty() ? 0 : dist[0].size(), 0);
  for (const Candidate& c : candidates) {
    if (ego_taken[c.m] || sender_taken[c.n]) continue;
    ego_taken[c.m] = 1;
    sender_taken[c.n] = 1;
    pairs.push_back({c.m, c.n, c.d});
  }
}

void optimal_match(const std::vector<std::vector<double>>& dist, double tau,
                   std::vector<MatchPair>& pairs) {
  const std::size_t n_ego = dist.size();
  const std::size_t n_sender = n_ego == 0 ? 0 : dist[0].size();
  const std::size_t n = std::max(n_ego, n_sender);
  if (n == 0) return;
  // Infeasible and padding entries cost kBig; any feasible edge (< tau) is
  // then preferred over leaving both endpoints unmatched, which makes the
  // perfect matching on the padded matrix a maximum-cardinality minimum-cost
  // matching on the thresholded graph.
  const double big = tau * static_cast<double>(n + 1) + 1.0;
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, big));
  for (std::size_t m = 0; m < n_ego; ++m) {
    for (std::size_t s = 0; s < n_sender; ++s) {
      if (dist[m][s] < tau) cost[m][s] = dist[m][s];
    }
  }
  const std::vector<int> row_to_col = solve_square_assignment(cost);
  for (std::size_t m = 0; m < n_ego; ++m) {
    const int s = row_to_col[m];
    if (s >= 0 && static_cast<std::size_t>(s) < n_sender && dist[m][s] < tau) {
      pairs.push_back({m, static_cast<std::size_t>(s), dist[m][s]});
    }
  }
}

}  // namespace

MatchSet associate(const AgentFrame& ego, const AgentFrame& sender_aligned,
                   const FusionConfig& cfg) {
  cfg.validate();
  const std::size_t n_ego = ego.points.size();
  const std::size_t n_sender = sender_aligned.points.size();

  std::vector<std::vector<double>> dist(n_ego, std::vector<double>(n_sender, 0.0));
  std::vector<char> near_any_ego(n_sender, 0);
  for (std::size_t m = 0; m < n_ego; ++m) {
    for (std::size_t s = 0; s < n_sender; ++s) {
      dist[m][s] = pair_distance(ego.points[m].position, sender_aligned.points[s].position,
                                 cfg.planar_distance);
      if (dist[m][s] < cfg.tau_d) near_any_ego[s] = 1;
    }
  }

  MatchSet out;
  if (cfg.matching_policy == MatchingPolicy::greedy_distance) {
    greedy_match(dist, cfg.tau_d, out.pairs);
  } else {
    optimal_match(dist, cfg.tau_d, out.pairs);
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.ego_index < b.ego_index; });

  std::vector<char> ego_paired(n_ego, 0), sender_paired(n_sender, 0);
  for (const MatchPair& p : out.pairs) {
    ego_paired[p.ego_index] = 1;
    sender_paired[p.sender_index] = 1;
  }
  for (std::size_t m = 0; m < n_ego; ++m) {
    if (!ego_paired[m]) out.unmatched_ego.push_back(m);
  }
  for (std::size_t s = 0; s < n_sender; ++s) {
    if (sender_paired[s]) continue;
    if (near_any_ego[s]) {
      out.suppressed_sender.push_back(s);
    } else {
      out.unmatched_sender.push_back(s);
    }
  }
  return out;
}

AgentFrame fuse(const AgentFrame& ego, const AgentFrame& sender_aligned,
                const MatchSet& matches, const FusionConfig& cfg) {
  cfg.validate();
  AgentFrame out = ego;
  out.in_ego_frame = true;

  std::uint64_t next_id = 0;
  for (const ReferencePoint& p : ego.points) {
    next_id = std::max(next_id, p.instance_id + 1);
  }

  for (const std::size_t s : matches.unmatched_sender) {
    const ReferencePoint& src = sender_aligned.points[s];
    if (!cfg.visible_range.contains(src.position.x, src.position.y)) continue;
    ReferencePoint added;
    added.position = src.position;
    if (cfg.use_velocity && src.velocity) added.velocity = src.velocity;
    if (cfg.use_size && src.size) added.size = src.size;
    added.confidence = src.confidence;
    added.class_label = src.class_label;
    added.instance_id = next_id++;
    out.points.push_back(added);
  }
  return out;
}

}  // namespace refpts
