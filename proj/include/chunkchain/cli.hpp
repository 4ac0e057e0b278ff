#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>

#include "chunkchain/analytics/assess.hpp"
#include "chunkchain/analytics/hits.hpp"
#include "chunkchain/node/runtime.hpp"

namespace chunkchain::cli {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

inline nlohmann::json fetch_status(const std::string &host, std::uint16_t port) {
  namespace beast = boost::beast;
  boost::asio::io_context ioc;
  boost::asio::ip::tcp::resolver resolver(ioc);
  beast::tcp_stream stream(ioc);
  stream.expires_after(std::chrono::seconds(5));
  stream.connect(resolver.resolve(host, std::to_string(port)));
  beast::http::request<beast::http::empty_body> req{beast::http::verb::get, "/status", 11};
  req.set(beast::http::field::host, host);
  beast::http::write(stream, req);
  beast::flat_buffer buf;
  beast::http::response<beast::http::string_body> res;
  beast::http::read(stream, buf, res);
  if (res.result() != beast::http::status::ok) throw Error("node answered /status with HTTP " + std::to_string(res.result_int()));
  return nlohmann::json::parse(res.body());
}

inline void print_hits_table(const analytics::HitsResult &r, std::ostream &out) {
  const auto width = std::max<std::size_t>(
      5, std::max_element(r.scores.begin(), r.scores.end(), [](const auto &a, const auto &b) {
           return a.label.size() < b.label.size();
         })->label.size());
  out << std::left << std::setw(static_cast<int>(width)) << "hub" << "  " << std::setw(12) << "score"
      << "  " << std::setw(static_cast<int>(width)) << "authority" << "  score\n";
  out << std::fixed << std::setprecision(9);
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    const auto &h = r.by_hub[i];
    const auto &a = r.by_authority[i];
    out << std::setw(static_cast<int>(width)) << h.label << "  " << std::setw(12) << h.hub << "  "
        << std::setw(static_cast<int>(width)) << a.label << "  " << a.authority << '\n';
  }
  out.unsetf(std::ios::floatfield);
  out << std::setprecision(6);
}

inline void print_report_table(const analytics::TestReport &r, std::ostream &out) {
  out << "test       " << to_string(r.kind) << '\n';
  out << "n          " << r.n << '\n';
  out << "df         " << r.df;
  if (r.df2) out << ", " << *r.df2;
  out << '\n';
  if (std::isinf(r.statistic)) out << "statistic  infinite (perfect correlation)\n";
  else out << "statistic  " << (r.kind == analytics::TestKind::ancova ? "F = " : "t = ") << std::setprecision(6) << r.statistic << '\n';
  out << "p          " << std::setprecision(6) << r.p << '\n';
  if (r.r) out << "cor        " << *r.r << '\n';
  if (r.mean_difference) out << "mean diff  " << *r.mean_difference << '\n';
  for (const auto &[g, m] : r.group_means) out << "mean[" << g << "]  " << m << '\n';
  for (const auto &[g, m] : r.adjusted_means) out << "adjusted[" << g << "]  " << m << '\n';
}

/// Entry point for the `chunkchain` binary. `node start` blocks until interrupted.
inline int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"chunkchain: LAN classroom blockchain chat"};
  app.require_subcommand(1);

  auto *node_cmd = app.add_subcommand("node", "Run or query a node")->require_subcommand(1);

  auto *start = node_cmd->add_subcommand("start", "Start a node in the foreground");
  std::string config_file;
  node::NodeConfig flags;
  std::string discovery;
  std::string mission_pack, serve_ui;
  start->add_option("--config", config_file, "JSON config file (default: $CHUNKCHAIN_CONFIG)");
  start->add_option("--classroom", flags.classroom_name, "Classroom name");
  start->add_option("--passphrase", flags.classroom_passphrase, "Classroom passphrase (at least 8 characters)");
  start->add_option("--listen-tcp", flags.listen_tcp, "Peer TCP port");
  start->add_option("--client-api", flags.client_api, "HTTP/WebSocket port for browsers");
  start->add_option("--bind", flags.bind_address, "Address to bind listeners to");
  start->add_option("--advertise-host", flags.advertise_host, "Host peers should dial (default: first LAN IPv4)");
  start->add_option("--discovery", discovery, "UDP beacon discovery")->check(CLI::IsMember({"on", "off"}));
  start->add_option("--peer", flags.static_peers, "Static peer host:port (repeatable)");
  start->add_option("--difficulty", flags.difficulty, "Leading zero bits required of block hashes")->check(CLI::Range(0, 32));
  start->add_option("--auto-mine-ms", flags.auto_mine_interval_ms, "Auto-miner interval in ms (0 disables)");
  start->add_option("--mission-pack", mission_pack, "Mission pack JSON file");
  start->add_option("--serve-ui", serve_ui, "Directory of UI assets served at /");
  start->add_option("--log-level", flags.log_level, "off, critical, error, warn, info, debug or trace");

  auto *status = node_cmd->add_subcommand("status", "Print a running node's status");
  std::string host = "127.0.0.1";
  std::uint16_t port = 8080;
  bool status_json = false;
  status->add_option("--host", host, "Node host");
  status->add_option("--port", port, "Node client_api port");
  status->add_flag("--json", status_json, "Print the raw JSON status");

  auto *packs = app.add_subcommand("packs", "Mission pack tools")->require_subcommand(1);
  auto *validate_cmd = packs->add_subcommand("validate", "Check a mission pack file");
  std::string pack_file;
  validate_cmd->add_option("file", pack_file, "Mission pack JSON")->required();

  auto *analytics_cmd = app.add_subcommand("analytics", "Teacher analytics")->require_subcommand(1);
  auto *hits_cmd = analytics_cmd->add_subcommand("hits", "Hub and authority scores of a topic graph");
  std::string edges_file;
  bool json_only = false;
  hits_cmd->add_option("edges", edges_file, "CSV with header content,prerequisite")->required();
  hits_cmd->add_flag("--json", json_only, "Print only the JSON report");

  auto *assess_cmd = analytics_cmd->add_subcommand("assess", "Statistical tests on assessment records");
  std::string records_file, test_name;
  std::optional<analytics::Cohort> cohort;
  assess_cmd->add_option("records", records_file, "CSV with header student_id,group,cohort,pretest,posttest,grade")->required();
  assess_cmd->add_option("--test", test_name, "t, ancova or cor")->required()->check(CLI::IsMember({"t", "ancova", "cor"}));
  assess_cmd->add_option("--cohort", cohort, "last, prelast or third_last")
      ->transform(CLI::CheckedTransformer(std::map<std::string, analytics::Cohort>{
          {"last", analytics::Cohort::last}, {"prelast", analytics::Cohort::prelast}, {"third_last", analytics::Cohort::third_last}}));
  assess_cmd->add_flag("--json", json_only, "Print only the JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << e.what() << "\n\n";
    for (auto *sub : {start, status, validate_cmd, hits_cmd, assess_cmd})
      if (sub->parsed()) {
        err << sub->help();
        return kExitUsage;
      }
    err << app.help();
    return kExitUsage;
  }

  try {
    if (start->parsed()) {
      node::NodeConfig cfg;
      if (config_file.empty()) config_file = node::config_path_from_env().value_or("");
      if (!config_file.empty()) cfg = node::load_config_file(config_file, cfg);
      auto given = [&](const char *name) { return start->count(name) > 0; };
      if (given("--classroom")) cfg.classroom_name = flags.classroom_name;
      if (given("--passphrase")) cfg.classroom_passphrase = flags.classroom_passphrase;
      if (given("--listen-tcp")) cfg.listen_tcp = flags.listen_tcp;
      if (given("--client-api")) cfg.client_api = flags.client_api;
      if (given("--bind")) cfg.bind_address = flags.bind_address;
      if (given("--advertise-host")) cfg.advertise_host = flags.advertise_host;
      if (given("--discovery")) cfg.discovery = discovery == "on";
      if (given("--peer")) cfg.static_peers = flags.static_peers;
      if (given("--difficulty")) cfg.difficulty = flags.difficulty;
      if (given("--auto-mine-ms")) cfg.auto_mine_interval_ms = flags.auto_mine_interval_ms;
      if (given("--mission-pack")) cfg.mission_pack_path = mission_pack;
      if (given("--serve-ui")) cfg.serve_ui_path = serve_ui;
      if (given("--log-level")) cfg.log_level = flags.log_level;
      try {
        node::validate(cfg);
      } catch (const node::ConfigError &e) {
        err << e.what() << '\n';
        return kExitUsage;
      }
      node::Runtime rt(cfg);
      rt.start();
      rt.stop_on_signals();
      out << "node " << rt.self_id() << " running; browsers connect to http://" << cfg.bind_address << ':' << rt.api_port()
          << "/ (Ctrl-C to stop)" << std::endl;
      rt.run();
      return kExitOk;
    }

    if (status->parsed()) {
      auto s = fetch_status(host, port);
      if (status_json) {
        out << s.dump(2) << '\n';
      } else {
        out << "classroom  " << s["classroom"].get<std::string>() << '\n'
            << "tip        " << s["tip_index"] << '\n'
            << "peers      " << s["peers"] << '\n'
            << "sessions   " << s["sessions"] << '\n'
            << "mempool    " << s["mempool"] << '\n';
      }
      return kExitOk;
    }

    if (validate_cmd->parsed()) {
      try {
        auto pack = missions::load_mission_pack(node::read_text_file(pack_file));
        out << "ok: " << pack.missions.size() << " missions over " << pack.max_level() << " levels\n";
        return kExitOk;
      } catch (const missions::PackError &e) {
        for (const auto &v : e.violations()) {
          err << pack_file << ':';
          if (v.line) err << v.line << ':';
          err << ' ' << v.message << '\n';
        }
        return kExitRuntime;
      }
    }

    if (hits_cmd->parsed()) {
      auto result = analytics::hits(analytics::read_edges_csv(node::read_text_file(edges_file)));
      if (!json_only) {
        print_hits_table(result, out);
        out << '\n';
      }
      out << analytics::to_json(result).dump() << '\n';
      return kExitOk;
    }

    if (assess_cmd->parsed()) {
      auto table = analytics::read_records_csv(node::read_text_file(records_file));
      analytics::TestReport report;
      if (test_name == "t") {
        report = analytics::assess_treatment_t(analytics::select_cohort(table.records, cohort));
      } else if (test_name == "ancova") {
        auto rows = analytics::select_cohort(table.records, cohort);
        report = analytics::ancova(rows);
      } else {
        report = analytics::assess_grade_correlation(table, cohort);
      }
      if (!json_only) {
        print_report_table(report, out);
        out << '\n';
      }
      out << analytics::to_json(report).dump() << '\n';
      return kExitOk;
    }
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace chunkchain::cli
