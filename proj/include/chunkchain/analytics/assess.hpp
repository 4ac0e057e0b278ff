#pragma once

#include <optional>
#include <vector>

#include "chunkchain/analytics/csv.hpp"
#include "chunkchain/analytics/stats.hpp"

namespace chunkchain::analytics {

/// Keeps only records of `cohort`, or all of them.
inline std::vector<AssessmentRecord> select_cohort(const std::vector<AssessmentRecord> &records,
                                                   std::optional<Cohort> cohort) {
  std::vector<AssessmentRecord> out;
  for (const auto &r : records)
    if (!cohort || r.cohort == *cohort) out.push_back(r);
  return out;
}

/// Posttest of the treatment groups (A and B together) against placebo (P).
inline TestReport assess_treatment_t(const std::vector<AssessmentRecord> &records) {
  std::vector<double> treatment, placebo;
  for (const auto &r : records) (r.group == Group::P ? placebo : treatment).push_back(r.posttest);
  auto report = two_sample_t(treatment, placebo);
  report.group_means = {{"treatment", report.group_means.at("sample1")},
                        {"placebo", report.group_means.at("sample2")}};
  return report;
}

/// Correlation between grade and posttest score over records with a grade.
inline TestReport assess_grade_correlation(const RecordTable &table, std::optional<Cohort> cohort) {
  if (!table.has_grade_column) throw StatsError("no grade column in records");
  std::vector<double> grades, scores;
  for (const auto &r : select_cohort(table.records, cohort)) {
    if (!r.grade) continue;
    grades.push_back(*r.grade);
    scores.push_back(r.posttest);
  }
  return correlation_t(grades, scores);
}

}  // namespace chunkchain::analytics
