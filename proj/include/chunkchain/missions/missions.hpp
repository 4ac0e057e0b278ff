#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chunkchain/ledger/bytes.hpp"
#include "chunkchain/missions/default_pack.hpp"

namespace chunkchain::missions {

using json = nlohmann::json;

enum class MissionKind { quiz, action };

enum class ActionEvent { posted_message, viewed_transaction, viewed_block, viewed_peers, manual_nonce_found };

inline std::string_view to_string(ActionEvent e) {
  switch (e) {
    case ActionEvent::posted_message: return "posted_message";
    case ActionEvent::viewed_transaction: return "viewed_transaction";
    case ActionEvent::viewed_block: return "viewed_block";
    case ActionEvent::viewed_peers: return "viewed_peers";
    case ActionEvent::manual_nonce_found: return "manual_nonce_found";
  }
  return "?";
}

inline std::optional<ActionEvent> action_event_from_string(std::string_view s) {
  for (auto e : {ActionEvent::posted_message, ActionEvent::viewed_transaction, ActionEvent::viewed_block,
                 ActionEvent::viewed_peers, ActionEvent::manual_nonce_found})
    if (to_string(e) == s) return e;
  return std::nullopt;
}

struct Quiz {
  std::vector<std::string> choices;
  std::size_t correct_index = 0;
};

struct Mission {
  std::string id;
  int level = 1;
  MissionKind kind = MissionKind::quiz;
  std::string prompt;
  std::optional<Quiz> quiz;
  std::optional<ActionEvent> action_event;
};

struct MissionPack {
  json classroom;  // free-form metadata
  std::vector<Mission> missions;

  const Mission *find(std::string_view id) const {
    for (const auto &m : missions)
      if (m.id == id) return &m;
    return nullptr;
  }
  int max_level() const {
    int top = 0;
    for (const auto &m : missions) top = std::max(top, m.level);
    return top;
  }
};

struct PackViolation {
  std::size_t line = 0;  // 1-based; 0 when no position applies
  std::string message;
};

class PackError : public Error {
 public:
  explicit PackError(std::vector<PackViolation> violations)
      : Error(summarize(violations)), violations_(std::move(violations)) {}

  const std::vector<PackViolation> &violations() const { return violations_; }

 private:
  static std::string summarize(const std::vector<PackViolation> &vs) {
    std::string out = "mission pack has " + std::to_string(vs.size()) + " violation(s)";
    for (const auto &v : vs) {
      out += "\n  ";
      if (v.line) out += "line " + std::to_string(v.line) + ": ";
      out += v.message;
    }
    return out;
  }

  std::vector<PackViolation> violations_;
};

namespace detail {

/// Line numbers at which each element of the top-level "missions" array
/// starts. Tolerant scanner; only used to annotate violations.
inline std::vector<std::size_t> mission_lines(std::string_view text) {
  std::vector<std::size_t> lines;
  std::size_t line = 1;
  int depth = 0;
  bool in_string = false, escaped = false;
  std::string last_key, current;
  bool in_missions = false;
  int missions_depth = -1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\n') ++line;
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      else current.push_back(c);
      continue;
    }
    switch (c) {
      case '"':
        in_string = true;
        current.clear();
        break;
      case ':':
        last_key = current;
        break;
      case '[':
        ++depth;
        if (depth == 2 && last_key == "missions") {
          in_missions = true;
          missions_depth = depth;
        }
        break;
      case '{':
        if (in_missions && depth == missions_depth) lines.push_back(line);
        ++depth;
        break;
      case ']':
        if (in_missions && depth == missions_depth) in_missions = false;
        --depth;
        break;
      case '}':
        --depth;
        break;
      default:
        break;
    }
  }
  return lines;
}

}  // namespace detail

/// Parses and validates a mission pack document. Throws PackError listing
/// every violation found.
inline MissionPack load_mission_pack(std::string_view document) {
  std::vector<PackViolation> violations;
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error &e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, document.size()); ++i)
      if (document[i] == '\n') ++line;
    throw PackError({{line, std::string("not valid JSON: ") + e.what()}});
  }
  if (!doc.is_object()) throw PackError({{1, "document must be a JSON object"}});
  if (!doc.contains("version") || doc["version"] != 1) violations.push_back({1, "\"version\" must be 1"});
  if (!doc.contains("missions") || !doc["missions"].is_array() || doc["missions"].empty()) {
    violations.push_back({1, "\"missions\" must be a non-empty array"});
    throw PackError(std::move(violations));
  }

  auto lines = detail::mission_lines(document);
  MissionPack pack;
  pack.classroom = doc.value("classroom", json::object());
  std::set<std::string> ids;
  std::set<int> levels;
  const auto &items = doc["missions"];
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto &item = items[i];
    const std::size_t line = i < lines.size() ? lines[i] : 0;
    const std::string where = "missions[" + std::to_string(i) + "]";
    auto bad = [&](std::string msg) { violations.push_back({line, where + ": " + msg}); };
    if (!item.is_object()) {
      bad("must be an object");
      continue;
    }
    Mission m;
    if (!item.contains("id") || !item["id"].is_string() || item["id"].get<std::string>().empty()) {
      bad("\"id\" must be a non-empty string");
    } else {
      m.id = item["id"].get<std::string>();
      if (!ids.insert(m.id).second) bad("duplicate mission id \"" + m.id + "\"");
    }
    if (!item.contains("level") || !item["level"].is_number_integer() || item["level"].get<int>() < 1) {
      bad("\"level\" must be an integer >= 1");
    } else {
      m.level = item["level"].get<int>();
      levels.insert(m.level);
    }
    if (item.contains("prompt") && item["prompt"].is_string()) m.prompt = item["prompt"].get<std::string>();
    else bad("\"prompt\" must be a string");

    const auto kind = item.value("kind", std::string{});
    const bool has_quiz = item.contains("quiz");
    const bool has_action = item.contains("action_event");
    if (kind == "quiz") {
      m.kind = MissionKind::quiz;
      if (has_action) bad("quiz mission must not define \"action_event\"");
      if (!has_quiz) {
        bad("quiz mission must define \"quiz\"");
      } else {
        const auto &q = item["quiz"];
        Quiz quiz;
        if (!q.is_object() || !q.contains("choices") || !q["choices"].is_array() || q["choices"].size() < 2 ||
            q["choices"].size() > 6) {
          bad("\"quiz.choices\" must list 2 to 6 strings");
        } else {
          for (const auto &c : q["choices"]) {
            if (!c.is_string()) {
              bad("\"quiz.choices\" entries must be strings");
              break;
            }
            quiz.choices.push_back(c.get<std::string>());
          }
          if (!q.contains("correct_index") || !q["correct_index"].is_number_unsigned() ||
              q["correct_index"].get<std::size_t>() >= q["choices"].size()) {
            bad("\"quiz.correct_index\" must index into choices");
          } else {
            quiz.correct_index = q["correct_index"].get<std::size_t>();
          }
        }
        m.quiz = std::move(quiz);
      }
    } else if (kind == "action") {
      m.kind = MissionKind::action;
      if (has_quiz) bad("action mission must not define \"quiz\"");
      if (!has_action || !item["action_event"].is_string()) {
        bad("action mission must define \"action_event\"");
      } else if (auto e = action_event_from_string(item["action_event"].get<std::string>())) {
        m.action_event = e;
      } else {
        bad("unknown action_event \"" + item["action_event"].get<std::string>() + "\"");
      }
    } else {
      bad("\"kind\" must be \"quiz\" or \"action\"");
    }
    pack.missions.push_back(std::move(m));
  }
  if (!levels.empty() && (*levels.begin() != 1 || *levels.rbegin() != static_cast<int>(levels.size())))
    violations.push_back({0, "levels must be contiguous starting at 1"});
  if (!violations.empty()) throw PackError(std::move(violations));
  return pack;
}

inline MissionPack default_pack() { return load_mission_pack(kDefaultPackJson); }

/// Pack as shown to students: quiz answers stripped.
inline json public_view(const MissionPack &pack) {
  json out = {{"classroom", pack.classroom}, {"missions", json::array()}};
  for (const auto &m : pack.missions) {
    json j = {{"id", m.id},
              {"level", m.level},
              {"kind", m.kind == MissionKind::quiz ? "quiz" : "action"},
              {"prompt", m.prompt}};
    if (m.quiz) j["choices"] = m.quiz->choices;
    if (m.action_event) j["action_event"] = to_string(*m.action_event);
    out["missions"].push_back(std::move(j));
  }
  return out;
}

struct Progress {
  std::set<std::string> completed;
  std::map<std::string, int> attempts;
  int level = 1;

  friend bool operator==(const Progress &, const Progress &) = default;
};

/// 1 + number of consecutive fully completed levels starting at level 1.
inline int compute_level(const MissionPack &pack, const std::set<std::string> &completed) {
  int level = 1;
  for (int l = 1; l <= pack.max_level(); ++l) {
    bool all = std::all_of(pack.missions.begin(), pack.missions.end(),
                           [&](const Mission &m) { return m.level != l || completed.contains(m.id); });
    if (!all) break;
    level = l + 1;
  }
  return level;
}

/// First open mission of an unlocked level, in pack order.
inline const Mission *next_open_mission(const MissionPack &pack, const Progress &p) {
  for (const auto &m : pack.missions)
    if (m.level <= p.level && !p.completed.contains(m.id)) return &m;
  return nullptr;
}

inline json to_json(const Progress &p) {
  return {{"completed", p.completed}, {"attempts", p.attempts}, {"level", p.level}};
}

class MissionError : public Error {
 public:
  enum class Code { unknown_mission, locked, wrong_kind, bad_answer };
  MissionError(Code code, const std::string &what) : Error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

enum class QuizOutcome { correct, incorrect, already_done };

inline std::string_view to_string(QuizOutcome o) {
  switch (o) {
    case QuizOutcome::correct: return "correct";
    case QuizOutcome::incorrect: return "incorrect";
    case QuizOutcome::already_done: return "already_done";
  }
  return "?";
}

struct QuizResult {
  Progress progress;
  QuizOutcome outcome;
};

inline QuizResult answer_quiz(const MissionPack &pack, Progress progress, std::string_view mission_id,
                              std::size_t answer_index) {
  const auto *m = pack.find(mission_id);
  if (!m) throw MissionError(MissionError::Code::unknown_mission, "unknown mission \"" + std::string(mission_id) + "\"");
  if (m->kind != MissionKind::quiz || !m->quiz)
    throw MissionError(MissionError::Code::wrong_kind, "mission \"" + m->id + "\" is not a quiz");
  if (m->level > progress.level)
    throw MissionError(MissionError::Code::locked, "mission \"" + m->id + "\" requires level " + std::to_string(m->level));
  if (answer_index >= m->quiz->choices.size())
    throw MissionError(MissionError::Code::bad_answer, "answer index out of range");
  if (progress.completed.contains(m->id)) return {std::move(progress), QuizOutcome::already_done};
  if (answer_index != m->quiz->correct_index) {
    ++progress.attempts[m->id];
    return {std::move(progress), QuizOutcome::incorrect};
  }
  ++progress.attempts[m->id];
  progress.completed.insert(m->id);
  progress.level = compute_level(pack, progress.completed);
  return {std::move(progress), QuizOutcome::correct};
}

struct EventResult {
  Progress progress;
  std::vector<std::string> newly_completed;
};

/// Completes every open action mission of an unlocked level that matches
/// `event`. Events matching only locked missions are dropped.
inline EventResult record_event(const MissionPack &pack, Progress progress, ActionEvent event) {
  EventResult out;
  for (const auto &m : pack.missions) {
    if (m.kind != MissionKind::action || m.action_event != event) continue;
    if (m.level > progress.level || progress.completed.contains(m.id)) continue;
    progress.completed.insert(m.id);
    out.newly_completed.push_back(m.id);
  }
  progress.level = compute_level(pack, progress.completed);
  out.progress = std::move(progress);
  return out;
}

}  // namespace chunkchain::missions
