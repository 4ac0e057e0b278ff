#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chunkchain/analytics/distributions.hpp"

namespace chunkchain::analytics {

enum class Group { A, B, P };
enum class Cohort { last, prelast, third_last };

inline std::string_view to_string(Group g) {
  switch (g) {
    case Group::A: return "A";
    case Group::B: return "B";
    case Group::P: return "P";
  }
  return "?";
}

inline std::string_view to_string(Cohort c) {
  switch (c) {
    case Cohort::last: return "last";
    case Cohort::prelast: return "prelast";
    case Cohort::third_last: return "third_last";
  }
  return "?";
}

struct AssessmentRecord {
  std::string student_id;
  Group group = Group::A;
  Cohort cohort = Cohort::last;
  double pretest = 0;
  double posttest = 0;
  std::optional<double> grade;
};

enum class TestKind { two_sample_t, ancova, correlation_t };

inline std::string_view to_string(TestKind k) {
  switch (k) {
    case TestKind::two_sample_t: return "two_sample_t";
    case TestKind::ancova: return "ancova";
    case TestKind::correlation_t: return "correlation_t";
  }
  return "?";
}

struct TestReport {
  TestKind kind = TestKind::two_sample_t;
  std::size_t n = 0;
  double df = 0;
  std::optional<double> df2;  // denominator df of an F statistic
  double statistic = 0;       // t or F; infinite for a perfect correlation
  double p = 1;
  std::optional<double> mean_difference;
  std::optional<double> r;
  std::optional<double> covariate_slope;
  std::map<std::string, double> group_means;
  std::map<std::string, double> adjusted_means;
};

inline nlohmann::json to_json(const TestReport &r) {
  auto opt = [](const std::optional<double> &v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j = {{"kind", to_string(r.kind)}, {"n", r.n}, {"df", r.df}, {"p", r.p}};
  j["statistic_name"] = r.kind == TestKind::ancova ? "F" : "t";
  j["statistic"] = std::isfinite(r.statistic) ? nlohmann::json(r.statistic) : nlohmann::json(nullptr);
  j["perfect_correlation"] = r.kind == TestKind::correlation_t && std::isinf(r.statistic);
  j["df2"] = opt(r.df2);
  j["mean_difference"] = opt(r.mean_difference);
  j["cor"] = opt(r.r);
  j["covariate_slope"] = opt(r.covariate_slope);
  j["group_means"] = r.group_means;
  j["adjusted_means"] = r.adjusted_means;
  return j;
}

namespace detail {

inline double mean(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double sum_squares_about_mean(std::span<const double> x) {
  const double m = mean(x);
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return s;
}

struct LeastSquares {
  std::vector<double> beta;
  double rss = 0;
  std::optional<std::size_t> deficient_column;  // first column found dependent on earlier ones
};

/// Least squares via Householder QR without pivoting. `x` is row-major n x p.
inline LeastSquares least_squares(std::vector<double> x, std::vector<double> y, std::size_t p) {
  const std::size_t n = y.size();
  if (x.size() != n * p) throw StatsError("design matrix shape mismatch");
  if (n < p) return {{}, 0, p - 1};
  auto at = [&](std::size_t i, std::size_t j) -> double & { return x[i * p + j]; };

  double scale = 0;
  for (double v : x) scale = std::max(scale, std::fabs(v));
  std::vector<double> col_norm(p, 0.0);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t i = 0; i < n; ++i) col_norm[j] += at(i, j) * at(i, j);

  for (std::size_t k = 0; k < p; ++k) {
    double norm = 0;
    for (std::size_t i = k; i < n; ++i) norm += at(i, k) * at(i, k);
    norm = std::sqrt(norm);
    // Column k has nothing left once earlier columns are projected out.
    if (norm <= 1e-10 * std::sqrt(col_norm[k]) || norm == 0) return {{}, 0, k};
    const double alpha = at(k, k) > 0 ? -norm : norm;
    std::vector<double> v(n - k);
    for (std::size_t i = k; i < n; ++i) v[i - k] = at(i, k);
    v[0] -= alpha;
    double vnorm2 = 0;
    for (double e : v) vnorm2 += e * e;
    for (std::size_t j = k; j < p; ++j) {
      double dot = 0;
      for (std::size_t i = k; i < n; ++i) dot += v[i - k] * at(i, j);
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = k; i < n; ++i) at(i, j) -= f * v[i - k];
    }
    double dot = 0;
    for (std::size_t i = k; i < n; ++i) dot += v[i - k] * y[i];
    const double f = 2.0 * dot / vnorm2;
    for (std::size_t i = k; i < n; ++i) y[i] -= f * v[i - k];
  }

  LeastSquares out;
  out.beta.assign(p, 0.0);
  for (std::size_t k = p; k-- > 0;) {
    double s = y[k];
    for (std::size_t j = k + 1; j < p; ++j) s -= at(k, j) * out.beta[j];
    out.beta[k] = s / at(k, k);
  }
  for (std::size_t i = p; i < n; ++i) out.rss += y[i] * y[i];
  return out;
}

}  // namespace detail

/// Pooled-variance (Student) two-sample t-test, two-sided.
inline TestReport two_sample_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw StatsError("each sample needs at least 2 observations");
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  const double df = n1 + n2 - 2;
  const double pooled = (detail::sum_squares_about_mean(a) + detail::sum_squares_about_mean(b)) / df;
  if (!(pooled > 0)) throw StatsError("pooled variance is zero");
  const double diff = detail::mean(a) - detail::mean(b);
  const double t = diff / std::sqrt(pooled * (1.0 / n1 + 1.0 / n2));
  TestReport r;
  r.kind = TestKind::two_sample_t;
  r.n = a.size() + b.size();
  r.df = df;
  r.statistic = t;
  r.p = student_t_two_sided_p(t, df);
  r.mean_difference = diff;
  r.group_means = {{"sample1", detail::mean(a)}, {"sample2", detail::mean(b)}};
  return r;
}

/// Pearson correlation with its t-test. |r| = 1 reports an infinite t and p = 0.
inline TestReport correlation_t(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw StatsError("correlation needs samples of equal length");
  if (x.size() < 3) throw StatsError("correlation needs at least 3 pairs");
  const double mx = detail::mean(x), my = detail::mean(y);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0) || !(syy > 0)) throw StatsError("correlation undefined for a constant input vector");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(x.size()) - 2;
  TestReport out;
  out.kind = TestKind::correlation_t;
  out.n = x.size();
  out.df = df;
  out.r = r;
  const double rest = 1.0 - r * r;
  if (rest <= 0) {
    out.statistic = std::copysign(std::numeric_limits<double>::infinity(), r);
    out.p = 0;
  } else {
    out.statistic = r * std::sqrt(df) / std::sqrt(rest);
    out.p = student_t_two_sided_p(out.statistic, df);
  }
  return out;
}

struct AnovaResult {
  double f = 0;
  double df1 = 0;
  double df2 = 0;
  double p = 1;
};

/// One-way ANOVA across the given groups.
inline AnovaResult one_way_anova(const std::vector<std::vector<double>> &groups) {
  if (groups.size() < 2) throw StatsError("ANOVA needs at least 2 groups");
  std::vector<double> all;
  double within = 0;
  for (const auto &g : groups) {
    if (g.empty()) throw StatsError("ANOVA group is empty");
    all.insert(all.end(), g.begin(), g.end());
    within += detail::sum_squares_about_mean(g);
  }
  const double between = detail::sum_squares_about_mean(all) - within;
  AnovaResult r;
  r.df1 = static_cast<double>(groups.size() - 1);
  r.df2 = static_cast<double>(all.size() - groups.size());
  if (!(r.df2 > 0)) throw StatsError("ANOVA has no residual degrees of freedom");
  if (!(within > 0)) throw StatsError("ANOVA within-group variance is zero");
  r.f = std::max(0.0, between / r.df1) / (within / r.df2);
  r.p = f_upper_tail(r.f, r.df1, r.df2);
  return r;
}

/// ANCOVA of posttest on group with pretest as covariate. F tests the group
/// factor (full model against covariate-only); adjusted means are model
/// predictions at the grand pretest mean.
inline TestReport ancova(std::span<const AssessmentRecord> records) {
  std::map<Group, std::size_t> counts;
  for (const auto &r : records) ++counts[r.group];
  for (const auto &[g, c] : counts)
    if (c < 2) throw StatsError("group " + std::string(to_string(g)) + " has fewer than 2 records");
  if (counts.size() < 2) throw StatsError("ANCOVA needs at least 2 groups");

  std::vector<Group> groups;
  for (const auto &[g, c] : counts) groups.push_back(g);
  const std::size_t k = groups.size(), n = records.size();
  if (n <= k + 1) throw StatsError("ANCOVA has no residual degrees of freedom");

  std::vector<double> pre, post;
  for (const auto &r : records) {
    pre.push_back(r.pretest);
    post.push_back(r.posttest);
  }
  if (!(detail::sum_squares_about_mean(pre) > 0)) throw StatsError("rank-deficient design: pretest is constant");

  // Columns: intercept, k-1 group indicators (first group is the reference), pretest.
  const std::size_t p = k + 1;
  std::vector<double> full(n * p, 0.0), reduced(n * 2, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    full[i * p] = 1.0;
    auto gi = static_cast<std::size_t>(std::find(groups.begin(), groups.end(), records[i].group) - groups.begin());
    if (gi > 0) full[i * p + gi] = 1.0;
    full[i * p + k] = pre[i];
    reduced[i * 2] = 1.0;
    reduced[i * 2 + 1] = pre[i];
  }
  auto fit = detail::least_squares(full, post, p);
  if (fit.deficient_column)
    throw StatsError("rank-deficient design: pretest is collinear with group membership");
  auto base = detail::least_squares(reduced, post, 2);
  if (base.deficient_column) throw StatsError("rank-deficient design: pretest is constant");

  TestReport out;
  out.kind = TestKind::ancova;
  out.n = n;
  out.df = static_cast<double>(k - 1);
  out.df2 = static_cast<double>(n - k - 1);
  if (!(fit.rss > 0)) throw StatsError("ANCOVA residual variance is zero");
  out.statistic = std::max(0.0, base.rss - fit.rss) / out.df / (fit.rss / *out.df2);
  out.p = f_upper_tail(out.statistic, out.df, *out.df2);
  out.covariate_slope = fit.beta[k];
  const double grand_pre = detail::mean(pre);
  for (std::size_t g = 0; g < k; ++g) {
    const auto label = std::string(to_string(groups[g]));
    out.adjusted_means[label] = fit.beta[0] + (g > 0 ? fit.beta[g] : 0.0) + fit.beta[k] * grand_pre;
    double sum = 0;
    std::size_t c = 0;
    for (const auto &r : records)
      if (r.group == groups[g]) {
        sum += r.posttest;
        ++c;
      }
    out.group_means[label] = sum / static_cast<double>(c);
  }
  return out;
}

}  // namespace chunkchain::analytics
