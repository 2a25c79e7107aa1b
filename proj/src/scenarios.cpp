#include "qdet/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "qdet/errors.hpp"
#include "qdet/hilbert.hpp"
#include "scenario_detail.hpp"

namespace qdet {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string join_lines(const std::vector<std::string>& lines) {
  std::ostringstream out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out << '\n';
    out << lines[i];
  }
  return out.str();
}

// All problems with a resolved parameter set, path-qualified.
std::vector<std::string> param_problems(ScenarioName name,
                                        const ScenarioParams& p) {
  std::vector<std::string> out;
  if (p.trials < 1) out.push_back("scenario.trials must be >= 1");
  switch (name) {
    case ScenarioName::SternGerlachInterferometer:
      if (!(p.dt > 0.0) || !std::isfinite(p.dt))
        out.push_back("scenario.dt must be > 0");
      if (p.max_steps < 1) out.push_back("scenario.max_steps must be >= 1");
      break;
    case ScenarioName::EprBell:
      if (p.settings_a.empty())
        out.push_back("scenario.settings_a needs at least one angle");
      if (p.settings_b.empty())
        out.push_back("scenario.settings_b needs at least one angle");
      for (double a : p.settings_a)
        if (!std::isfinite(a)) {
          out.push_back("scenario.settings_a must be finite angles");
          break;
        }
      for (double b : p.settings_b)
        if (!std::isfinite(b)) {
          out.push_back("scenario.settings_b must be finite angles");
          break;
        }
      if (p.phase_sign != 1 && p.phase_sign != -1)
        out.push_back("scenario.phase must be 'minus' or 'plus'");
      if (p.dress_size < 2 || p.dress_size > 16)
        out.push_back("scenario.dress_size must be in [2, 16]");
      break;
    case ScenarioName::SdcChain:
      if (p.register_size < 2 || p.register_size > 16)
        out.push_back("scenario.register_size must be in [2, 16]");
      break;
    case ScenarioName::WeakMeasurementSweep:
      if (p.points < 2) out.push_back("scenario.points must be >= 2");
      break;
  }
  return out;
}

ScenarioParams resolved_params(ScenarioName name, ScenarioParams p) {
  if (p.trials == -1) {  // the documented leave-at-default sentinel, only
    switch (name) {
      case ScenarioName::SternGerlachInterferometer: p.trials = 10000; break;
      case ScenarioName::EprBell: p.trials = 10000; break;
      case ScenarioName::SdcChain: p.trials = 200; break;
      case ScenarioName::WeakMeasurementSweep: p.trials = 1; break;
    }
  }
  if (name == ScenarioName::EprBell) {
    if (p.settings_a.empty()) p.settings_a = {0.0, kPi / 2.0};
    if (p.settings_b.empty()) p.settings_b = {kPi / 4.0, 3.0 * kPi / 4.0};
  }
  return p;
}

}  // namespace

std::string to_string(ScenarioName name) {
  switch (name) {
    case ScenarioName::SternGerlachInterferometer: return "stern_gerlach";
    case ScenarioName::EprBell: return "epr_bell";
    case ScenarioName::SdcChain: return "sdc_chain";
    case ScenarioName::WeakMeasurementSweep: return "weak_sweep";
  }
  throw ValidationError("unknown scenario enum value");
}

ScenarioName scenario_from_string(const std::string& text) {
  if (text == "stern_gerlach") return ScenarioName::SternGerlachInterferometer;
  if (text == "epr_bell") return ScenarioName::EprBell;
  if (text == "sdc_chain") return ScenarioName::SdcChain;
  if (text == "weak_sweep") return ScenarioName::WeakMeasurementSweep;
  throw ValidationError(
      "scenario.name must be one of stern_gerlach, epr_bell, sdc_chain, "
      "weak_sweep (got '" +
      text + "')");
}

// ---- engine selection ---------------------------------------------------------

std::string TheoryEngine::name() const {
  switch (kind) {
    case Kind::Grw:
      return "grw";
    case Kind::Mwi:
      switch (mwi_variant) {
        case MwiVariant::QuasiLocal: return "mwi_quasilocal";
        case MwiVariant::Local: return "mwi_local";
        case MwiVariant::Global: return "mwi_global";
      }
      break;
    case Kind::Relational:
      return relational_variant == RelationalVariant::Rqm
                 ? "relational_rqm"
                 : "relational_single_world";
    case Kind::EnDqt:
      return "endqt";
  }
  throw ValidationError("unknown engine enum value");
}

void TheoryEngine::validate() const {
  std::vector<std::string> problems;
  if (kind == Kind::Grw) {
    if (!(grw.lambda > 0.0) || !std::isfinite(grw.lambda))
      problems.push_back("grw.lambda must be > 0");
    if (!(grw.sigma > 0.0) || !std::isfinite(grw.sigma))
      problems.push_back("grw.sigma must be > 0");
  }
  if (kind == Kind::EnDqt) {
    for (const auto& [label, k] : endqt.initiators) {
      if (label.empty()) problems.push_back("endqt initiator label empty");
      if (k != 'A' && k != 'B')
        problems.push_back("endqt initiator kind must be 'A' or 'B'");
    }
    if (!(endqt.eps > 0.0)) problems.push_back("endqt.eps must be > 0");
    if (!(endqt.window > 0.0)) problems.push_back("endqt.window must be > 0");
    if (endqt.size_threshold < 1)
      problems.push_back("endqt.size_threshold must be >= 1");
  }
  if (!problems.empty()) throw ValidationError(join_lines(problems));
}

TheoryEngine engine_from_string(const std::string& name) {
  TheoryEngine e;
  if (name == "grw") {
    e.kind = TheoryEngine::Kind::Grw;
  } else if (name == "mwi_quasilocal" || name == "mwi_local" ||
             name == "mwi_global") {
    e.kind = TheoryEngine::Kind::Mwi;
    e.mwi_variant = name == "mwi_quasilocal" ? MwiVariant::QuasiLocal
                    : name == "mwi_local"    ? MwiVariant::Local
                                             : MwiVariant::Global;
  } else if (name == "relational_rqm" || name == "relational_single_world") {
    e.kind = TheoryEngine::Kind::Relational;
    e.relational_variant = name == "relational_rqm"
                               ? RelationalVariant::Rqm
                               : RelationalVariant::SingleWorld;
  } else if (name == "endqt") {
    e.kind = TheoryEngine::Kind::EnDqt;
  } else {
    throw ValidationError(
        "engine.kind must be one of grw, mwi_quasilocal, mwi_local, "
        "mwi_global, relational_rqm, relational_single_world, endqt (got '" +
        name + "')");
  }
  return e;
}

// ---- scenario assembly --------------------------------------------------------

void Scenario::validate() const {
  std::set<std::string> declared;
  for (const auto& [label, dim] : systems) {
    if (label.empty()) throw ValidationError("scenario declares an empty system label");
    if (!declared.insert(label).second)
      throw ValidationError("scenario declares system '" + label + "' twice");
    if (dim < 0 || dim == 1)
      throw ValidationError("system '" + label + "' has invalid dimension " +
                            std::to_string(dim));
  }
  double prev_start = -1.0;
  for (const auto& e : schedule.entries) {
    if (!declared.count(e.from) || !declared.count(e.to))
      throw ValidationError("schedule entry '" + e.tag +
                            "' references an undeclared system");
    if (!(e.start < e.end))
      throw ValidationError("schedule entry '" + e.tag +
                            "' needs start < end");
    if (e.start < prev_start)
      throw ValidationError("schedule entries must be sorted by start time");
    prev_start = e.start;
  }
  if (!initial_state) throw ValidationError("scenario has no initial state");
}

Scenario make_scenario(ScenarioName name, const ScenarioParams& params) {
  Scenario sc;
  sc.name = name;
  sc.params = resolved_params(name, params);
  const auto problems = param_problems(name, sc.params);
  if (!problems.empty()) throw ValidationError(join_lines(problems));

  const ScenarioParams& p = sc.params;
  switch (name) {
    case ScenarioName::SternGerlachInterferometer: {
      sc.systems = {{"spin", 2}, {"path", 2}, {"det", 3}};
      sc.schedule.entries = {{0.0, 1.0, "spin", "path", "beam_split", 1.0},
                             {1.0, 2.0, "path", "det", "detector_couple", 1.0}};
      sc.initial_state = [] {
        SpaceLayout layout({{"spin", 2}, {"path", 2}, {"det", 3}});
        Vector amps = Vector::Zero(layout.total_dim());
        const double r = 1.0 / std::sqrt(2.0);
        amps(1) = r;  // spin 0, path 0, det at the ready site 1
        amps(7) = r;  // spin 1, path 0, det at the ready site 1
        return StateVector(std::move(amps), layout);
      };
      break;
    }
    case ScenarioName::EprBell: {
      sc.systems = {
          {"source", 0}, {"A", 2}, {"B", 2}, {"LA", 0}, {"LB", 0}};
      sc.schedule.entries = {{0.0, 1.0, "LB", "B", "record_dephase", 1.0},
                             {1.0, 2.0, "LA", "A", "record_dephase", 1.0}};
      const int sign = p.phase_sign;
      sc.initial_state = [sign] {
        SpaceLayout layout({{"A", 2}, {"B", 2}});
        Vector amps = Vector::Zero(4);
        const double r = 1.0 / std::sqrt(2.0);
        amps(1) = r;         // |0>_A |1>_B
        amps(2) = sign * r;  // |1>_A |0>_B
        return StateVector(std::move(amps), layout);
      };
      break;
    }
    case ScenarioName::SdcChain: {
      const int dim0 = 1 << p.register_size;
      sc.systems = {{"S0", dim0}, {"S1", 2}, {"S2", 2}};
      const double onset =
          p.permuted ? detail::sdc::kOnsetStartPermuted : detail::sdc::kOnsetStart;
      sc.schedule.entries = {
          {0.0, detail::sdc::kDephaseEnd, "S0", "S1", "record_dephase", 1.0},
          {onset, detail::sdc::kOnsetEnd, "S1", "S2", "phase_onset",
           detail::sdc::kOnsetStrength},
          {detail::sdc::kOnsetEnd, detail::sdc::kRecordEnd, "S2", "S1",
           "ctrl_orth", detail::sdc::kRecordStrength}};
      sc.initial_state = [dim0] {
        SpaceLayout layout({{"S0", dim0}, {"S1", 2}, {"S2", 2}});
        const int total = layout.total_dim();
        Vector amps = Vector::Constant(total, 1.0 / std::sqrt(double(total)));
        return StateVector(std::move(amps), layout);
      };
      break;
    }
    case ScenarioName::WeakMeasurementSweep: {
      sc.systems = {{"path", 2}, {"probe", 2}};
      sc.schedule.entries = {{0.0, 1.0, "path", "probe", "weak_probe", 1.0}};
      sc.initial_state = [] {
        SpaceLayout layout({{"path", 2}, {"probe", 2}});
        Vector amps = Vector::Zero(4);
        const double r = 1.0 / std::sqrt(2.0);
        amps(0) = r;  // path arm0, probe ready
        amps(2) = r;  // path arm1, probe ready
        return StateVector(std::move(amps), layout);
      };
      break;
    }
  }
  sc.validate();
  return sc;
}

// ---- weak measurement sweep -----------------------------------------------------

std::vector<SweepRow> weak_sweep(const std::vector<double>& strengths) {
  if (strengths.empty())
    throw ValidationError("weak_sweep needs at least one strength");
  SpaceLayout layout({{"path", 2}, {"probe", 2}});
  // Conditional probe rotation: nothing happens on arm0, the probe turns by
  // the coupling angle on arm1, so the two record states overlap as
  // cos(strength).
  Matrix h = Matrix::Zero(4, 4);
  h.block(2, 2, 2, 2) = pauli_y_matrix();
  Vector ready = Vector::Zero(4);
  ready(0) = ready(2) = 1.0 / std::sqrt(2.0);
  const StateVector psi0(std::move(ready), layout);
  const Observable pointer = Observable::pauli_z("path");

  std::vector<SweepRow> rows;
  rows.reserve(strengths.size());
  for (double s : strengths) {
    if (!std::isfinite(s))
      throw ValidationError("weak_sweep strengths must be finite");
    const StateVector psi = evolve(psi0, hermitian_propagator(h, s));
    const OverlapMatrix ov = environment_overlaps(psi, "path", pointer);
    const DensityOperator rho = reduced_density(psi, {"path"});
    SweepRow row;
    row.strength = s;
    row.overlap = std::abs(ov.entries(0, 1));
    row.d_star = degree_of_differentiation(rho);
    row.visibility = 2.0 * std::abs(rho.matrix()(0, 1));
    rows.push_back(row);
  }
  return rows;
}

// ---- shared runner glue ---------------------------------------------------------

namespace detail {

std::vector<OverlapMatrix> staged_overlaps(
    const std::vector<std::pair<double, StateVector>>& stages,
    const std::string& system, const Observable& pointer) {
  std::vector<OverlapMatrix> series;
  series.reserve(stages.size());
  for (const auto& [t, state] : stages) {
    OverlapMatrix m = environment_overlaps(state, system, pointer);
    m.time = t;
    series.push_back(std::move(m));
  }
  return series;
}

void push_event(RunReport& report, std::string type, double t,
                const std::string& theory, std::vector<std::string> systems,
                std::map<std::string, double> values,
                std::map<std::string, std::string> notes) {
  ScenarioEvent e;
  e.type = std::move(type);
  e.t = t;
  e.theory = theory;
  e.systems = std::move(systems);
  e.values = std::move(values);
  e.notes = std::move(notes);
  report.events.push_back(std::move(e));
}

std::string process_kind_label(ProcessKind kind) {
  return kind == ProcessKind::QuasiIrreversible ? "quasi_irreversible"
                                                : "reversible";
}

// Deterministic coupling-strength sweep over [0, pi/2]. No randomness is
// consumed, so every trial reports the same table; the interest is in the
// monotone exchange between interference visibility and differentiation.
RunReport run_weak_sweep(const Scenario& sc, const TheoryEngine& engine,
                         int trials, std::uint64_t /*seed*/) {
  const int points = sc.params.points;
  const std::string theory = engine.name();

  std::vector<double> strengths;
  strengths.reserve(points);
  for (int i = 0; i < points; ++i)
    strengths.push_back(kPi / 2.0 * double(i) / double(points - 1));

  RunReport report;
  report.sweep = weak_sweep(strengths);

  DifferentiationReport rep{"arm", "path", "interferometer", {}};
  for (const SweepRow& row : report.sweep) {
    push_event(report, "sweep_point", row.strength, theory, {"path", "probe"},
               {{"strength", row.strength},
                {"overlap", row.overlap},
                {"d_star", row.d_star},
                {"visibility", row.visibility}});
    rep.samples.push_back({row.strength, row.d_star});
  }
  report.reports.push_back(std::move(rep));

  StructureGraph g;
  g.add_node({"path", SystemKind::NonGenerator, {"arm0", "arm1"}, false});
  g.add_node({"probe", SystemKind::Generator, {"lab"}, false});
  g.add_interaction("probe", "path", EdgeKind::Udi, false, 0.0);
  report.graph = std::move(g);

  const SweepRow& first = report.sweep.front();
  const SweepRow& last = report.sweep.back();
  report.statistics["trials"] = double(trials);
  report.statistics["points"] = double(points);
  report.statistics["overlap.first"] = first.overlap;
  report.statistics["overlap.last"] = last.overlap;
  report.statistics["d_star.first"] = first.d_star;
  report.statistics["d_star.last"] = last.d_star;
  report.statistics["visibility.first"] = first.visibility;
  report.statistics["visibility.last"] = last.visibility;
  for (int trial = 0; trial < trials; ++trial)
    push_event(report, "trial_outcome", kPi / 2.0, theory, {"path"},
               {{"trial", double(trial)},
                {"d_star", last.d_star},
                {"visibility", last.visibility}});
  return report;
}

}  // namespace detail

// ---- dispatch ---------------------------------------------------------------------

RunReport run(const Scenario& scenario, const TheoryEngine& engine, int trials,
              std::uint64_t seed) {
  scenario.validate();
  engine.validate();
  if (trials < 1) throw ValidationError("run: trials must be >= 1");
  switch (scenario.name) {
    case ScenarioName::SternGerlachInterferometer:
      return detail::run_stern_gerlach(scenario, engine, trials, seed);
    case ScenarioName::EprBell:
      return detail::run_epr_bell(scenario, engine, trials, seed);
    case ScenarioName::SdcChain:
      if (engine.kind != TheoryEngine::Kind::EnDqt)
        throw ValidationError(
            "sdc_chain runs on the endqt engine only (got '" + engine.name() +
            "')");
      return detail::run_sdc_chain(scenario, engine, trials, seed);
    case ScenarioName::WeakMeasurementSweep:
      return detail::run_weak_sweep(scenario, engine, trials, seed);
  }
  throw ValidationError("unknown scenario enum value");
}

}  // namespace qdet
