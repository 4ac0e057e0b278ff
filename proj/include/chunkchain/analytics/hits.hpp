#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chunkchain/analytics/distributions.hpp"

namespace chunkchain::analytics {

/// Directed topic dependencies: content topic -> prerequisite topic.
class TopicGraph {
 public:
  std::size_t node(std::string_view label) {
    auto [it, inserted] = index_.try_emplace(std::string(label), labels_.size());
    if (inserted) labels_.emplace_back(label);
    return it->second;
  }

  /// Adds an edge; repeated edges collapse into one. Self-loops are rejected.
  void add_edge(std::string_view content, std::string_view prerequisite) {
    if (content == prerequisite) throw StatsError("self-loop on topic \"" + std::string(content) + "\"");
    auto from = node(content);
    auto to = node(prerequisite);
    if (std::find(edges_.begin(), edges_.end(), std::pair{from, to}) == edges_.end()) edges_.emplace_back(from, to);
  }

  const std::vector<std::string> &labels() const { return labels_; }
  const std::vector<std::pair<std::size_t, std::size_t>> &edges() const { return edges_; }
  std::size_t size() const { return labels_.size(); }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

struct TopicScore {
  std::string label;
  double hub = 0;
  double authority = 0;
};

struct HitsResult {
  std::vector<TopicScore> scores;        // in node order
  std::vector<TopicScore> by_hub;        // descending hub score, ties by label
  std::vector<TopicScore> by_authority;  // descending authority score, ties by label
  int iterations = 0;
};

namespace detail {

inline void l1_normalize(std::vector<double> &v) {
  double sum = 0;
  for (double x : v) sum += x;
  if (sum > 0)
    for (double &x : v) x /= sum;
}

}  // namespace detail

/// HITS hub/authority scores by power iteration from a uniform start, both
/// vectors L1-normalized each round. Iteration stops once the per-round change
/// and the remaining distance to the fixed point, extrapolated from the
/// observed contraction rate, are both below `tol`.
inline HitsResult hits(const TopicGraph &graph, double tol = 1e-9, int max_iter = 10'000) {
  if (graph.edges().empty()) throw StatsError("topic graph has no edges");
  const auto n = graph.size();
  std::vector<double> hub(n, 1.0 / static_cast<double>(n)), auth(n, 0.0);
  std::vector<double> next_hub(n), next_auth(n);
  double previous_change = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= max_iter; ++iter) {
    std::fill(next_auth.begin(), next_auth.end(), 0.0);
    for (auto [from, to] : graph.edges()) next_auth[to] += hub[from];
    detail::l1_normalize(next_auth);
    std::fill(next_hub.begin(), next_hub.end(), 0.0);
    for (auto [from, to] : graph.edges()) next_hub[from] += next_auth[to];
    detail::l1_normalize(next_hub);

    double change = 0;
    for (std::size_t i = 0; i < n; ++i)
      change = std::max({change, std::fabs(next_hub[i] - hub[i]), std::fabs(next_auth[i] - auth[i])});
    hub.swap(next_hub);
    auth.swap(next_auth);
    const double rate = change / previous_change;
    previous_change = change;
    const bool settled = change < 1e-15 || (rate < 1.0 && change * rate / (1.0 - rate) < tol);
    if (change < tol && settled) {
      HitsResult out;
      out.iterations = iter;
      for (std::size_t i = 0; i < n; ++i) out.scores.push_back({graph.labels()[i], hub[i], auth[i]});
      out.by_hub = out.by_authority = out.scores;
      std::stable_sort(out.by_hub.begin(), out.by_hub.end(), [](const TopicScore &a, const TopicScore &b) {
        return a.hub != b.hub ? a.hub > b.hub : a.label < b.label;
      });
      std::stable_sort(out.by_authority.begin(), out.by_authority.end(),
                       [](const TopicScore &a, const TopicScore &b) {
                         return a.authority != b.authority ? a.authority > b.authority : a.label < b.label;
                       });
      return out;
    }
  }
  throw StatsError("HITS did not converge within " + std::to_string(max_iter) + " iterations");
}

inline nlohmann::json to_json(const HitsResult &r) {
  auto column = [](const std::vector<TopicScore> &rows, bool hub_column) {
    auto out = nlohmann::json::array();
    for (const auto &s : rows) out.push_back({{"label", s.label}, {"score", hub_column ? s.hub : s.authority}});
    return out;
  };
  return {{"kind", "hits"},
          {"iterations", r.iterations},
          {"hubs", column(r.by_hub, true)},
          {"authorities", column(r.by_authority, false)}};
}

}  // namespace chunkchain::analytics
