#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chunkchain/analytics/hits.hpp"
#include "chunkchain/analytics/stats.hpp"

namespace chunkchain::analytics {

constexpr double kMaxScore = 54.0;

class CsvError : public Error {
 public:
  CsvError(std::size_t line, const std::string &what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// RFC 4180 style rows: quoted fields may contain commas, doubled quotes and
/// newlines. Blank lines are skipped.
inline std::vector<CsvRow> parse_csv(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<CsvRow> rows;
  CsvRow row{1, {}};
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;
  auto end_row = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    const bool blank = row.fields.size() == 1 && row.fields[0].empty() && !field_started;
    if (!blank) rows.push_back(std::move(row));
    row = CsvRow{line, {}};
    field_started = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw CsvError(line, "unexpected quote inside a field");
        quoted = field_started = true;
        break;
      case ',':
        row.fields.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw CsvError(line, "unterminated quoted field");
  if (field_started || !field.empty() || !row.fields.empty()) end_row();
  return rows;
}

namespace detail {

inline std::string trimmed(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(" \t") - b + 1));
}

struct Header {
  std::map<std::string, std::size_t> columns;

  std::optional<std::size_t> find(const std::string &name) const {
    auto it = columns.find(name);
    return it == columns.end() ? std::nullopt : std::optional(it->second);
  }
  std::size_t require(const std::string &name) const {
    auto at = find(name);
    if (!at) throw CsvError(1, "missing required column \"" + name + "\"");
    return *at;
  }
};

inline Header read_header(const std::vector<CsvRow> &rows) {
  if (rows.empty()) throw CsvError(0, "file is empty");
  Header h;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) {
    auto name = trimmed(rows[0].fields[i]);
    if (!h.columns.emplace(name, i).second) throw CsvError(rows[0].line, "duplicate column \"" + name + "\"");
  }
  return h;
}

inline const std::string &cell(const CsvRow &row, std::size_t column, const Header &h) {
  if (row.fields.size() != h.columns.size())
    throw CsvError(row.line, "expected " + std::to_string(h.columns.size()) + " fields, found " +
                                 std::to_string(row.fields.size()));
  return row.fields[column];
}

inline double parse_number(const std::string &raw, std::size_t line, std::string_view column) {
  auto text = trimmed(raw);
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
    throw CsvError(line, "column \"" + std::string(column) + "\" is not a number: \"" + text + "\"");
  return value;
}

}  // namespace detail

/// Reads `content,prerequisite` edges.
inline TopicGraph read_edges_csv(std::string_view text) {
  auto rows = parse_csv(text);
  auto header = detail::read_header(rows);
  const auto content = header.require("content");
  const auto prerequisite = header.require("prerequisite");
  TopicGraph graph;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    auto from = detail::trimmed(detail::cell(rows[i], content, header));
    auto to = detail::trimmed(detail::cell(rows[i], prerequisite, header));
    if (from.empty() || to.empty()) throw CsvError(rows[i].line, "empty topic label");
    try {
      graph.add_edge(from, to);
    } catch (const StatsError &e) {
      throw CsvError(rows[i].line, e.what());
    }
  }
  return graph;
}

struct RecordTable {
  std::vector<AssessmentRecord> records;
  bool has_grade_column = false;
};

/// Reads `student_id,group,cohort,pretest,posttest[,grade]` records.
inline RecordTable read_records_csv(std::string_view text) {
  auto rows = parse_csv(text);
  auto header = detail::read_header(rows);
  const auto id = header.require("student_id");
  const auto group = header.require("group");
  const auto cohort = header.require("cohort");
  const auto pre = header.require("pretest");
  const auto post = header.require("posttest");
  const auto grade = header.find("grade");

  RecordTable table;
  table.has_grade_column = grade.has_value();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto &row = rows[i];
    AssessmentRecord r;
    r.student_id = detail::trimmed(detail::cell(row, id, header));
    auto g = detail::trimmed(detail::cell(row, group, header));
    if (g == "A") r.group = Group::A;
    else if (g == "B") r.group = Group::B;
    else if (g == "P") r.group = Group::P;
    else throw CsvError(row.line, "group must be A, B or P, found \"" + g + "\"");
    auto c = detail::trimmed(detail::cell(row, cohort, header));
    if (c == "last") r.cohort = Cohort::last;
    else if (c == "prelast") r.cohort = Cohort::prelast;
    else if (c == "third_last") r.cohort = Cohort::third_last;
    else throw CsvError(row.line, "cohort must be last, prelast or third_last, found \"" + c + "\"");
    r.pretest = detail::parse_number(detail::cell(row, pre, header), row.line, "pretest");
    r.posttest = detail::parse_number(detail::cell(row, post, header), row.line, "posttest");
    for (auto [value, name] : {std::pair{r.pretest, "pretest"}, std::pair{r.posttest, "posttest"}})
      if (value < 0 || value > kMaxScore)
        throw CsvError(row.line, std::string(name) + " score outside [0, 54]");
    if (grade) {
      const auto &raw = detail::cell(row, *grade, header);
      if (!detail::trimmed(raw).empty()) r.grade = detail::parse_number(raw, row.line, "grade");
    }
    table.records.push_back(std::move(r));
  }
  return table;
}

}  // namespace chunkchain::analytics
