#pragma once

// Independent reference computations for the analytics module: Eigen for
// linear algebra, Boost.Math for distributions.

#include <map>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "chunkchain/analytics/hits.hpp"
#include "chunkchain/analytics/stats.hpp"

namespace chunkchain::oracle {

inline double t_two_sided_p(double t, double df) {
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

inline double f_upper(double f, double d1, double d2) {
  boost::math::fisher_f dist(d1, d2);
  return boost::math::cdf(boost::math::complement(dist, f));
}

struct HitsVectors {
  std::vector<double> hub, authority;
};

/// Limit of the hub/authority iteration: the uniform start, pushed once
/// through H^T, projected onto the dominant eigenspace of H^T H.
inline HitsVectors hits(const analytics::TopicGraph &g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (auto [from, to] : g.edges()) h(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to)) = 1.0;
  Eigen::MatrixXd m = h.transpose() * h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const double top = eig.eigenvalues().maxCoeff();
  Eigen::VectorXd start = h.transpose() * Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (eig.eigenvalues()(k) < top * (1.0 - 1e-9)) continue;
    Eigen::VectorXd v = eig.eigenvectors().col(k);
    a += v * v.dot(start);
  }
  a /= a.sum();
  Eigen::VectorXd hub = h * a;
  hub /= hub.sum();
  return {{hub.data(), hub.data() + n}, {a.data(), a.data() + n}};
}

struct AncovaFit {
  double f = 0, df1 = 0, df2 = 0, p = 0;
  std::map<std::string, double> adjusted;
};

/// ANCOVA by solving normal equations with cell-means coding.
inline AncovaFit ancova(const std::vector<analytics::AssessmentRecord> &records) {
  std::vector<analytics::Group> groups;
  for (const auto &r : records)
    if (std::find(groups.begin(), groups.end(), r.group) == groups.end()) groups.push_back(r.group);
  const auto n = static_cast<Eigen::Index>(records.size());
  const auto k = static_cast<Eigen::Index>(groups.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, k + 1);
  Eigen::MatrixXd x0(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &r = records[static_cast<std::size_t>(i)];
    auto gi = std::find(groups.begin(), groups.end(), r.group) - groups.begin();
    x(i, gi) = 1.0;
    x(i, k) = r.pretest;
    x0(i, 0) = 1.0;
    x0(i, 1) = r.pretest;
    y(i) = r.posttest;
  }
  Eigen::VectorXd beta = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  Eigen::VectorXd beta0 = (x0.transpose() * x0).ldlt().solve(x0.transpose() * y);
  const double rss = (y - x * beta).squaredNorm();
  const double rss0 = (y - x0 * beta0).squaredNorm();
  AncovaFit out;
  out.df1 = static_cast<double>(k - 1);
  out.df2 = static_cast<double>(n - k - 1);
  out.f = ((rss0 - rss) / out.df1) / (rss / out.df2);
  out.p = f_upper(out.f, out.df1, out.df2);
  const double grand = x.col(k).mean();
  for (Eigen::Index g = 0; g < k; ++g)
    out.adjusted[std::string(analytics::to_string(groups[static_cast<std::size_t>(g)]))] = beta(g) + beta(k) * grand;
  return out;
}

inline analytics::TopicGraph random_graph(std::mt19937_64 &rng, std::size_t max_nodes = 15) {
  std::uniform_int_distribution<std::size_t> nodes(2, max_nodes);
  const auto n = nodes(rng);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_int_distribution<std::size_t> count(1, n * 2);
  analytics::TopicGraph g;
  for (std::size_t i = 0; i < n; ++i) g.node("t" + std::to_string(i));
  const auto edges = count(rng);
  for (std::size_t e = 0; e < edges; ++e) {
    auto a = pick(rng), b = pick(rng);
    if (a != b) g.add_edge("t" + std::to_string(a), "t" + std::to_string(b));
  }
  if (g.edges().empty()) g.add_edge("t0", "t1");
  return g;
}

/// Three-group dataset. `covariate_effect` scales the pretest's influence.
inline std::vector<analytics::AssessmentRecord> random_ancova_data(std::mt19937_64 &rng, double covariate_effect) {
  using analytics::Group;
  std::uniform_int_distribution<int> size(5, 30);
  std::normal_distribution<double> noise(0.0, 4.0);
  std::uniform_real_distribution<double> pre(5.0, 45.0), shift(-5.0, 5.0);
  std::vector<analytics::AssessmentRecord> out;
  int id = 0;
  for (auto g : {Group::A, Group::B, Group::P}) {
    const double offset = shift(rng);
    const int n = size(rng);
    for (int i = 0; i < n; ++i) {
      analytics::AssessmentRecord r;
      r.student_id = "s" + std::to_string(id++);
      r.group = g;
      r.pretest = pre(rng);
      r.posttest = 20.0 + offset + covariate_effect * r.pretest + noise(rng);
      out.push_back(r);
    }
  }
  return out;
}

/// Three-group dataset whose posttest is exactly uncorrelated with pretest
/// inside every group, so the fitted covariate slope is zero.
inline std::vector<analytics::AssessmentRecord> zero_covariate_data(std::mt19937_64 &rng) {
  using analytics::Group;
  std::uniform_int_distribution<int> size(5, 30);
  std::normal_distribution<double> noise(0.0, 4.0);
  std::uniform_real_distribution<double> pre(5.0, 45.0), level(15.0, 40.0);
  std::vector<analytics::AssessmentRecord> out;
  int id = 0;
  for (auto g : {Group::A, Group::B, Group::P}) {
    const auto n = static_cast<Eigen::Index>(size(rng));
    Eigen::VectorXd p(n), e(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = pre(rng);
      e(i) = noise(rng);
    }
    Eigen::VectorXd pc = p.array() - p.mean();
    e.array() -= e.mean();
    e -= pc * (pc.dot(e) / pc.squaredNorm());
    const double mean_level = level(rng);
    for (Eigen::Index i = 0; i < n; ++i)
      out.push_back({"s" + std::to_string(id++), g, analytics::Cohort::last, p(i), mean_level + e(i), std::nullopt});
  }
  return out;
}

/// Sample with exactly the requested Pearson correlation to `x`.
inline std::vector<double> correlated_with(const std::vector<double> &x, double r, std::mt19937_64 &rng) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  xv.array() -= xv.mean();
  xv.normalize();
  std::normal_distribution<double> z;
  Eigen::VectorXd e(n);
  for (Eigen::Index i = 0; i < n; ++i) e(i) = z(rng);
  e.array() -= e.mean();
  e -= xv * xv.dot(e);
  e.normalize();
  Eigen::VectorXd y = r * xv + std::sqrt(1.0 - r * r) * e;
  y.array() = y.array() * 10.0 + 30.0;
  return {y.data(), y.data() + n};
}

}  // namespace chunkchain::oracle
