#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chunkchain/ledger/block.hpp"
#include "chunkchain/p2p/message.hpp"

namespace chunkchain::node {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct NodeConfig {
  std::string classroom_name = "classroom";
  std::string classroom_passphrase;
  std::uint16_t listen_tcp = p2p::kDefaultPeerPort;
  std::uint16_t client_api = 8080;
  std::string bind_address = "0.0.0.0";
  std::string advertise_host;  // empty: first non-loopback IPv4 address
  bool discovery = true;
  std::vector<std::string> static_peers;
  unsigned difficulty = 12;
  std::int64_t auto_mine_interval_ms = 10'000;
  std::optional<std::string> mission_pack_path;
  std::optional<std::string> serve_ui_path;
  std::string log_level = "off";
};

inline const std::vector<std::string> &log_levels() {
  static const std::vector<std::string> levels{"off", "critical", "error", "warn", "info", "debug", "trace"};
  return levels;
}

/// Problems with `c`, empty when valid.
inline std::vector<std::string> config_problems(const NodeConfig &c) {
  std::vector<std::string> out;
  if (c.classroom_name.empty()) out.emplace_back("classroom_name must not be empty");
  if (c.classroom_passphrase.size() < 8) out.emplace_back("classroom_passphrase must be at least 8 characters");
  if (c.listen_tcp != 0 && c.listen_tcp == c.client_api) out.emplace_back("listen_tcp and client_api ports must differ");
  if (c.listen_tcp == p2p::kDiscoveryPort || c.client_api == p2p::kDiscoveryPort)
    out.emplace_back("port 40123 is reserved for discovery beacons");
  if (c.difficulty > kMaxDifficulty) out.emplace_back("difficulty must be between 0 and 32");
  if (c.auto_mine_interval_ms < 0) out.emplace_back("auto_mine_interval_ms must be >= 0");
  if (std::find(log_levels().begin(), log_levels().end(), c.log_level) == log_levels().end())
    out.emplace_back("log_level must be one of off, critical, error, warn, info, debug, trace");
  return out;
}

inline void validate(const NodeConfig &c) {
  auto problems = config_problems(c);
  if (problems.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto &p : problems) msg += "\n  " + p;
  throw ConfigError(msg);
}

/// Overlays fields present in `j` onto `c`. Unknown keys are rejected.
inline NodeConfig apply_json(NodeConfig c, const nlohmann::json &j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  try {
    for (const auto &[key, value] : j.items()) {
      if (key == "classroom_name") c.classroom_name = value.get<std::string>();
      else if (key == "classroom_passphrase") c.classroom_passphrase = value.get<std::string>();
      else if (key == "listen_tcp") c.listen_tcp = value.get<std::uint16_t>();
      else if (key == "client_api") c.client_api = value.get<std::uint16_t>();
      else if (key == "bind_address") c.bind_address = value.get<std::string>();
      else if (key == "advertise_host") c.advertise_host = value.get<std::string>();
      else if (key == "discovery") c.discovery = value.get<bool>();
      else if (key == "static_peers") c.static_peers = value.get<std::vector<std::string>>();
      else if (key == "difficulty") c.difficulty = value.get<unsigned>();
      else if (key == "auto_mine_interval_ms") c.auto_mine_interval_ms = value.get<std::int64_t>();
      else if (key == "mission_pack_path") c.mission_pack_path = value.get<std::string>();
      else if (key == "serve_ui_path") c.serve_ui_path = value.get<std::string>();
      else if (key == "log_level") c.log_level = value.get<std::string>();
      else throw ConfigError("unknown config key \"" + key + "\"");
    }
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  return c;
}

inline NodeConfig load_config_file(const std::string &path, NodeConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto j = nlohmann::json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
  return apply_json(std::move(base), j);
}

/// Path named by CHUNKCHAIN_CONFIG, if set and non-empty.
inline std::optional<std::string> config_path_from_env() {
  const char *v = std::getenv("CHUNKCHAIN_CONFIG");
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

inline nlohmann::json to_json(const NodeConfig &c) {
  nlohmann::json j = {{"classroom_name", c.classroom_name},
                      {"listen_tcp", c.listen_tcp},
                      {"client_api", c.client_api},
                      {"bind_address", c.bind_address},
                      {"advertise_host", c.advertise_host},
                      {"discovery", c.discovery},
                      {"static_peers", c.static_peers},
                      {"difficulty", c.difficulty},
                      {"auto_mine_interval_ms", c.auto_mine_interval_ms},
                      {"log_level", c.log_level}};
  j["mission_pack_path"] = c.mission_pack_path ? nlohmann::json(*c.mission_pack_path) : nlohmann::json(nullptr);
  j["serve_ui_path"] = c.serve_ui_path ? nlohmann::json(*c.serve_ui_path) : nlohmann::json(nullptr);
  return j;
}

}  // namespace chunkchain::node
