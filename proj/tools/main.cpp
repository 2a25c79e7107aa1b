// qdet: run quantum-determination scenarios from config files, sweep
// parameters, export interaction graphs, and self-check core invariants.
//
// Exit codes: 0 success, 1 validation problem (bad flags, config, or input
// files), 2 internal invariant violation (a bug report event is printed on
// stderr). Machine-readable outputs are written only on success, atomically.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qdet/causal.hpp"
#include "qdet/config.hpp"
#include "qdet/errors.hpp"
#include "qdet/io.hpp"
#include "qdet/rng.hpp"
#include "qdet/scenarios.hpp"

namespace {

using namespace qdet;

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

std::string resolve_out_dir(const std::string& flag,
                            const std::string& config_dir) {
  if (!flag.empty()) return flag;
  if (!config_dir.empty()) return config_dir;
  if (const char* env = std::getenv("QDET_OUT_DIR"); env && *env) return env;
  return "out";
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::map<std::string, std::string> collect_overrides(
    const std::vector<std::string>& sets, const std::string& seed,
    const std::string& trials, const std::string& format) {
  std::map<std::string, std::string> overrides;
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ValidationError("--set expects section.key=value (got '" + s +
                            "')");
    overrides[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (!seed.empty()) overrides["engine.seed"] = seed;
  if (!trials.empty()) overrides["scenario.trials"] = trials;
  if (!format.empty()) overrides["output.format"] = format;
  return overrides;
}

void write_report_files(const RunReport& report, const std::string& dir,
                        const std::string& format) {
  const bool json = format == "json";
  write_file_atomic(join_path(dir, "events.jsonl"),
                    events_to_jsonl(report.events));
  write_file_atomic(join_path(dir, json ? "statistics.json" : "statistics.csv"),
                    json ? statistics_to_json(report.statistics)
                         : statistics_to_csv(report.statistics));
  write_file_atomic(join_path(dir, "graph.dot"), report.graph.export_dot());
  if (!report.reports.empty())
    write_file_atomic(
        join_path(dir, json ? "differentiation.json" : "differentiation.csv"),
        json ? reports_to_json(report.reports)
             : reports_to_csv(report.reports));
  if (!report.sweep.empty())
    write_file_atomic(join_path(dir, json ? "sweep.json" : "sweep.csv"),
                      json ? sweep_to_json(report.sweep)
                           : sweep_to_csv(report.sweep));
}

int cmd_run(const std::string& config_path, const std::string& seed,
            const std::string& trials, const std::string& out_flag,
            const std::string& format, const std::vector<std::string>& sets) {
  const SimulationConfig cfg = load_config_file(
      config_path, collect_overrides(sets, seed, trials, format));
  const RunReport report = run(cfg.scenario, cfg.engine,
                               cfg.scenario.params.trials, cfg.engine.seed);
  const std::string dir = resolve_out_dir(out_flag, cfg.output.dir);
  write_report_files(report, dir, cfg.output.format);

  std::cout << "scenario " << to_string(cfg.scenario.name) << ", engine "
            << cfg.engine.name() << ", " << cfg.scenario.params.trials
            << " trials, seed " << cfg.engine.seed << "\n";
  std::cout << "wrote " << dir << "/{events.jsonl, statistics."
            << cfg.output.format << ", graph.dot, ...}\n";
  for (const auto& [key, value] : report.statistics)
    std::cout << "  " << key << " = " << value << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::vector<std::string>& values, const std::string& seed,
              const std::string& out_flag, const std::string& format) {
  if (values.empty()) throw ValidationError("--values must list at least one value");

  std::vector<std::pair<std::string, std::map<std::string, double>>> rows;
  std::string dir_from_config, table_format = "csv";
  for (const std::string& value : values) {
    auto overrides = collect_overrides({}, seed, "", format);
    overrides[param] = value;
    const SimulationConfig cfg = load_config_file(config_path, overrides);
    const RunReport report = run(cfg.scenario, cfg.engine,
                                 cfg.scenario.params.trials, cfg.engine.seed);
    rows.push_back({value, report.statistics});
    dir_from_config = cfg.output.dir;
    table_format = cfg.output.format;
  }

  std::set<std::string> keys;
  for (const auto& [value, stats] : rows)
    for (const auto& [k, v] : stats) keys.insert(k);

  std::string out;
  if (table_format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [value, stats] : rows) {
      nlohmann::json row;
      row[param] = value;
      for (const auto& [k, v] : stats) row[k] = v;
      arr.push_back(row);
    }
    out = arr.dump(2) + "\n";
  } else {
    out = param;
    for (const std::string& k : keys) out += "," + k;
    out += "\n";
    for (const auto& [value, stats] : rows) {
      out += value;
      for (const std::string& k : keys) {
        auto it = stats.find(k);
        out += ",";
        if (it != stats.end()) out += nlohmann::json(it->second).dump();
      }
      out += "\n";
    }
  }
  const std::string dir = resolve_out_dir(out_flag, dir_from_config);
  const std::string file =
      join_path(dir, table_format == "json" ? "sweep_runs.json" : "sweep_runs.csv");
  write_file_atomic(file, out);
  std::cout << "wrote " << file << " (" << rows.size() << " runs over "
            << param << ")\n";
  return 0;
}

int cmd_export_graph(const std::string& log_path, const std::string& out_path) {
  const std::vector<ScenarioEvent> events =
      events_from_jsonl(read_file(log_path));
  const StructureGraph g = build_endqt_dag(events);
  write_file_atomic(out_path, g.export_dot());
  std::cout << "wrote " << out_path << " (" << g.node_ids().size()
            << " nodes, " << g.edges().size() << " edges)\n";
  return 0;
}

int cmd_bell(const std::string& engine_name, std::vector<double> angles,
             int trials, std::uint64_t seed) {
  TheoryEngine engine = engine_from_string(engine_name);
  engine.seed = seed;
  ScenarioParams p;
  p.trials = trials;
  p.settings_a = {angles[0] * kDegToRad, angles[1] * kDegToRad};
  p.settings_b = {angles[2] * kDegToRad, angles[3] * kDegToRad};
  const Scenario sc = make_scenario(ScenarioName::EprBell, p);
  const RunReport report = run(sc, engine, trials, seed);

  const QuantumCausalModel model = singlet_model(
      {{"a0", p.settings_a[0]}, {"a1", p.settings_a[1]}},
      {{"b0", p.settings_b[0]}, {"b1", p.settings_b[1]}});

  std::cout << "engine " << engine.name() << ", " << trials
            << " trials, seed " << seed << "\n";
  std::cout << "settings (deg): a = " << angles[0] << ", " << angles[1]
            << "; b = " << angles[2] << ", " << angles[3] << "\n";
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const std::string key =
          "a" + std::to_string(i) + "b" + std::to_string(j);
      const double analytic = qcm_correlator(
          model, "a" + std::to_string(i), "b" + std::to_string(j));
      std::cout << "  E(" << key
                << "): empirical = " << report.statistics.at("correlator." + key)
                << ", analytic = " << analytic << "\n";
    }
  const double s_emp = report.statistics.at("chsh");
  const double s_ana = chsh(model, "a0", "a1", "b0", "b1");
  std::cout << "CHSH empirical = " << s_emp << "  (|S| = " << std::abs(s_emp)
            << ")\n";
  std::cout << "CHSH analytic  = " << s_ana << "  (|S| = " << std::abs(s_ana)
            << ")\n";
  return 0;
}

// ---- verify suites: quick self-checks of the analytically forced values ----

bool verify_bell(std::string& detail) {
  const double pi = 3.14159265358979323846;
  // correlators across a 4x4 angle grid
  std::map<std::string, double> sa, sb;
  for (int i = 0; i < 4; ++i) {
    sa["a" + std::to_string(i)] = i * pi / 4.0;
    sb["b" + std::to_string(i)] = i * pi / 4.0 + pi / 8.0;
  }
  const QuantumCausalModel m = singlet_model(sa, sb);
  double worst = 0.0;
  for (const auto& [la, a] : sa)
    for (const auto& [lb, b] : sb)
      worst = std::max(worst,
                       std::abs(qcm_correlator(m, la, lb) + std::cos(a - b)));
  if (worst > 1e-10) {
    detail = "correlator grid deviates by " + std::to_string(worst);
    return false;
  }
  const QuantumCausalModel canonical = singlet_model(
      {{"a", 0.0}, {"ap", pi / 2.0}}, {{"b", pi / 4.0}, {"bp", 3.0 * pi / 4.0}});
  const double s = chsh(canonical, "a", "ap", "b", "bp");
  if (std::abs(std::abs(s) - 2.0 * std::sqrt(2.0)) > 1e-9) {
    detail = "CHSH magnitude " + std::to_string(std::abs(s));
    return false;
  }
  if (classical_chsh_bound() != 2.0) {
    detail = "classical bound != 2";
    return false;
  }
  RngStream rng(20240817);
  for (int rep = 0; rep < 1000; ++rep) {
    double e[2][2] = {{0, 0}, {0, 0}};
    double total = 0.0;
    double w[16];
    for (int k = 0; k < 16; ++k) total += (w[k] = rng.uniform());
    for (int k = 0; k < 16; ++k) {
      const int ra0 = (k & 1) ? 1 : -1, ra1 = (k & 2) ? 1 : -1;
      const int rb0 = (k & 4) ? 1 : -1, rb1 = (k & 8) ? 1 : -1;
      e[0][0] += w[k] / total * ra0 * rb0;
      e[0][1] += w[k] / total * ra0 * rb1;
      e[1][0] += w[k] / total * ra1 * rb0;
      e[1][1] += w[k] / total * ra1 * rb1;
    }
    const double sm = chsh_from_correlators(e[0][0], e[0][1], e[1][0], e[1][1]);
    if (std::abs(sm) > 2.0 + 1e-9) {
      detail = "factorizable mixture broke the classical bound";
      return false;
    }
  }
  return true;
}

bool verify_sweep(std::string& detail) {
  const double pi = 3.14159265358979323846;
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(pi / 2.0 * i / 9.0);
  const auto rows = weak_sweep(grid);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].d_star + 1e-12 < rows[i - 1].d_star) {
      detail = "differentiation decreased along the grid";
      return false;
    }
    if (rows[i].visibility > rows[i - 1].visibility + 1e-12) {
      detail = "visibility increased along the grid";
      return false;
    }
  }
  if (std::abs(rows.front().d_star) > 1e-9 ||
      std::abs(rows.front().visibility - 1.0) > 1e-9 ||
      std::abs(rows.back().d_star - 1.0) > 1e-9 ||
      std::abs(rows.back().visibility) > 1e-9) {
    detail = "endpoint values off";
    return false;
  }
  return true;
}

bool verify_determinism(std::string& detail) {
  for (const char* name : {"grw", "mwi_local", "endqt"}) {
    const TheoryEngine engine = engine_from_string(name);
    ScenarioParams p;
    p.trials = 100;
    const Scenario sc = make_scenario(ScenarioName::EprBell, p);
    const std::string one = events_to_jsonl(run(sc, engine, 100, 77).events);
    const std::string two = events_to_jsonl(run(sc, engine, 100, 77).events);
    if (one != two) {
      detail = std::string("event logs for '") + name + "' differ under one seed";
      return false;
    }
  }
  return true;
}

// One randomized but engine-shaped op sequence: unstable interactions only
// reach components without determination edges, and a determination event
// resolves its whole component at once. Every committed op must leave the
// DS/IS partition well defined.
void random_graph_sequence(StructureGraph& g, RngStream& rng, int n, int ops) {
  for (int i = 0; i < n; ++i)
    g.add_node({"n" + std::to_string(i), SystemKind::NonGenerator,
                {"p", "q"}, false});
  const auto has_ds_edges = [&](const std::string& x) {
    const auto part = g.partition();
    const auto comp = part.at(x);
    if (comp.cls != StructureClass::Ds) return false;
    for (const Edge& e : g.edges())
      if (part.at(e.from) == comp) return true;
    return false;
  };
  const auto has_potential_loop = [&](const std::string& x) {
    for (const Edge& e : g.edges())
      if (e.kind == EdgeKind::PotentialDestruction && e.from == x) return true;
    return false;
  };
  double t = 0.0;
  for (int op = 0; op < ops; ++op) {
    t += 1.0;
    const std::string a = "n" + std::to_string(int(rng.uniform() * n));
    const std::string b = "n" + std::to_string(int(rng.uniform() * n));
    const double pick = rng.uniform();
    try {
      if (pick < 0.45) {
        if (a != b && !has_ds_edges(a) && !has_ds_edges(b))
          g.add_interaction(a, b, EdgeKind::Udi, rng.uniform() < 0.5, t);
      } else if (pick < 0.55) {
        if (!has_ds_edges(a) && !has_potential_loop(a) &&
            g.node(a).locations.size() >= 2)
          g.add_interaction(a, a, EdgeKind::PotentialDestruction, false, t);
      } else if (pick < 0.85) {
        const auto part = g.partition();
        const auto comp = part.at(a);
        std::set<std::pair<std::string, std::string>> done_pairs;
        std::set<std::string> promoted;
        const std::vector<Edge> snapshot = g.edges();
        for (const Edge& e : snapshot) {
          if (part.at(e.from) != comp) continue;
          if (e.kind == EdgeKind::Udi) {
            const auto pair = std::minmax(e.from, e.to);
            if (!done_pairs.insert({pair.first, pair.second}).second) continue;
            if (rng.uniform() < 0.7)
              g.replace_udi_with_sdi(e.from, e.to, t);
            else
              g.retire_udi(e.from, e.to, t);
          } else if (e.kind == EdgeKind::PotentialDestruction &&
                     promoted.insert(e.from).second) {
            g.promote_destruction(e.from, rng.uniform() < 0.5 ? "p" : "q", t);
          }
        }
        g.mark_determinate(a);
      } else {
        g.retire_udi(a, b, t);
      }
    } catch (const ValidationError&) {
      // op not legal in this state (e.g. no udi to retire); skip it
    }
    g.partition();  // must never report a mixed component
  }
}

bool verify_structures(std::string& detail) {
  RngStream rng(31337);
  for (int seq = 0; seq < 200; ++seq) {
    StructureGraph g;
    random_graph_sequence(g, rng, 3 + int(rng.uniform() * 4), 20);
  }
  (void)detail;
  return true;
}

int cmd_verify(const std::string& suite) {
  const std::vector<std::pair<std::string, bool (*)(std::string&)>> all = {
      {"bell", verify_bell},
      {"sweep", verify_sweep},
      {"determinism", verify_determinism},
      {"structures", verify_structures},
  };
  bool any = false, ok = true;
  for (const auto& [name, fn] : all) {
    if (suite != "all" && suite != name) continue;
    any = true;
    std::string detail;
    bool pass = false;
    try {
      pass = fn(detail);
    } catch (const std::exception& ex) {
      detail = ex.what();
    }
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << name;
    if (!pass && !detail.empty()) std::cout << ": " << detail;
    std::cout << "\n";
    ok = ok && pass;
  }
  if (!any)
    throw ValidationError("unknown suite '" + suite +
                          "' (expected all, bell, sweep, determinism, "
                          "structures)");
  return ok ? 0 : 1;
}

std::string quoted_command(int argc, char** argv) {
  std::string cmd;
  for (int i = 0; i < argc; ++i) {
    if (i) cmd += ' ';
    cmd += argv[i];
  }
  return cmd;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum determination scenarios"};
  app.require_subcommand(1);

  std::string config_path, seed_str, trials_str, out_dir, format;
  std::vector<std::string> sets;

  auto* run_cmd = app.add_subcommand("run", "run a configured scenario");
  run_cmd->add_option("--config", config_path, "config file")->required();
  run_cmd->add_option("--seed", seed_str, "override engine.seed");
  run_cmd->add_option("--trials", trials_str, "override scenario.trials");
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--format", format, "table format: csv or json");
  run_cmd->add_option("--set", sets, "extra overrides, section.key=value");

  std::string param;
  std::vector<std::string> values;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "re-run a config over a parameter grid");
  sweep_cmd->add_option("--config", config_path, "config file")->required();
  sweep_cmd->add_option("--param", param, "dotted parameter path")->required();
  sweep_cmd->add_option("--values", values, "comma-separated grid")
      ->required()
      ->delimiter(',');
  sweep_cmd->add_option("--seed", seed_str, "override engine.seed");
  sweep_cmd->add_option("--out", out_dir, "output directory");
  sweep_cmd->add_option("--format", format, "table format: csv or json");

  std::string log_path, graph_out = "graph.dot";
  auto* export_cmd = app.add_subcommand(
      "export-graph", "build a DOT interaction graph from an event log");
  export_cmd->add_option("--log", log_path, "events.jsonl path")->required();
  export_cmd->add_option("--out", graph_out, "output DOT path");

  std::string suite = "all";
  auto* verify_cmd =
      app.add_subcommand("verify", "self-check analytic invariants");
  verify_cmd->add_option("--suite", suite,
                         "all | bell | sweep | determinism | structures");

  std::string engine_name;
  std::vector<double> angles;
  int bell_trials = 10000;
  std::uint64_t bell_seed = 42;
  auto* bell_cmd = app.add_subcommand(
      "bell", "two-wing correlation run at four analyzer angles");
  bell_cmd->add_option("--engine", engine_name, "theory engine")->required();
  bell_cmd
      ->add_option("--angles", angles, "a0,a1,b0,b1 in degrees")
      ->required()
      ->delimiter(',')
      ->expected(4);
  bell_cmd->add_option("--trials", bell_trials, "trial count");
  bell_cmd->add_option("--seed", bell_seed, "run seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (run_cmd->parsed())
      return cmd_run(config_path, seed_str, trials_str, out_dir, format, sets);
    if (sweep_cmd->parsed())
      return cmd_sweep(config_path, param, values, seed_str, out_dir, format);
    if (export_cmd->parsed()) return cmd_export_graph(log_path, graph_out);
    if (verify_cmd->parsed()) return cmd_verify(suite);
    if (bell_cmd->parsed())
      return cmd_bell(engine_name, angles, bell_trials, bell_seed);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    // Invariant violation mid-run: emit a bug-report event and signal it.
    ScenarioEvent bug;
    bug.type = "bug_report";
    bug.theory = "cli";
    bug.notes = {{"what", e.what()}, {"command", quoted_command(argc, argv)}};
    std::cerr << events_to_jsonl({bug});
    return 2;
  }
  return 1;
}
