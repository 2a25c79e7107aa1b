// Two-wing entangled pair. A source emits the pair; each wing is analyzed at
// a configurable angle by its own lab. The representative trial additionally
// runs a microscopic record-register calibration of the analyzer coupling so
// the quasi-irreversibility evidence fed to the engines is measured, not
// assumed. Trials cycle deterministically through the settings grid and the
// aggregated counts yield correlators, a CHSH value for a 2x2 grid, and an
// empirical no-signalling gap.

#include <array>
#include <cmath>
#include <utility>

#include "qdet/causal.hpp"
#include "qdet/errors.hpp"
#include "qdet/hilbert.hpp"
#include "scenario_detail.hpp"

namespace qdet::detail {

namespace {

constexpr unsigned kCalibrationSeed = 4242;  // analyzer register couplings

Matrix axis_matrix(double theta) {
  return std::cos(theta) * pauli_z_matrix() + std::sin(theta) * pauli_x_matrix();
}

// Detector flip conditioned on the minus eigenspace of the wing's analyzer
// axis: plus outcomes leave the detector at site 0, minus moves it to 1.
Matrix detector_couple(double theta) {
  const Matrix id = Matrix::Identity(2, 2);
  const Matrix p_plus = 0.5 * (id + axis_matrix(theta));
  const Matrix p_minus = 0.5 * (id - axis_matrix(theta));
  Matrix flip = Matrix::Zero(2, 2);
  flip(0, 1) = flip(1, 0) = 1.0;
  Matrix u = Matrix::Zero(4, 4);
  u.block(0, 0, 2, 2) = p_plus(0, 0) * id + p_minus(0, 0) * flip;
  u.block(0, 2, 2, 2) = p_plus(0, 1) * id + p_minus(0, 1) * flip;
  u.block(2, 0, 2, 2) = p_plus(1, 0) * id + p_minus(1, 0) * flip;
  u.block(2, 2, 2, 2) = p_plus(1, 1) * id + p_minus(1, 1) * flip;
  return u;
}

StructureGraph wing_graph(const TheoryEngine& engine, bool with_comparer) {
  const SystemKind lab_kind = engine.kind == TheoryEngine::Kind::EnDqt
                                  ? SystemKind::Initiator
                                  : SystemKind::Generator;
  StructureGraph g;
  g.add_node({"source", SystemKind::Initiator, {"source"}, true});
  g.add_node({"A", SystemKind::NonGenerator, {"local"}, false});
  g.add_node({"B", SystemKind::NonGenerator, {"local"}, false});
  g.add_node({"LA", lab_kind, {"lab_a"}, false});
  g.add_node({"LB", lab_kind, {"lab_b"}, false});
  if (with_comparer) g.add_node({"C", SystemKind::Generator, {"lab"}, false});
  g.add_interaction("source", "A", EdgeKind::Udi, true, 0.0);
  g.add_interaction("source", "B", EdgeKind::Udi, true, 0.0);
  g.add_interaction("LB", "B", EdgeKind::Udi, false, 0.0);
  g.add_interaction("LA", "A", EdgeKind::Udi, false, 0.0);
  return g;
}

// Dominant detector site of a collapsed wing detector; -1 when unresolved.
int dominant_site(const StateVector& psi, const std::string& det) {
  const DensityOperator rho = reduced_density(psi, {det});
  return rho.matrix()(0, 0).real() >= rho.matrix()(1, 1).real() ? 0 : 1;
}

struct Calibration {
  ProcessClass process;
  DifferentiationReport report;  // of the calibrated wing stand-in
};

// Microscopic model of one analyzer: a fresh qubit in a balanced
// superposition dephases against an m-qubit record register over [0, 1];
// the run continues to t = 2 with the coupling off, so the trailing window
// shows whether the records persist.
Calibration calibrate_analyzer(int m, const ClassifyParams& cp) {
  std::vector<FactorSpace> factors = {{"W", 2}};
  for (int k = 0; k < m; ++k) factors.push_back({"r" + std::to_string(k), 2});
  SpaceLayout layout(std::move(factors));
  Vector amps = Vector::Constant(layout.total_dim(),
                                 1.0 / std::sqrt(double(layout.total_dim())));
  StateVector initial(std::move(amps), layout);

  const SpinEnvironment env = SpinEnvironment::make(m, kCalibrationSeed);
  InteractionSchedule sched;
  for (int k = 0; k < m; ++k)
    sched.entries.push_back(
        {0.0, 1.0, "W", "r" + std::to_string(k), "zz", env.couplings[k]});

  const Observable pointer = Observable::pauli_z("W");
  const auto traj =
      run_schedule(initial, sched, 0.05, HamiltonianRegistry::standard(), 2.0);

  std::vector<OverlapMatrix> series;
  Calibration cal;
  for (const auto& point : traj) {
    OverlapMatrix ov = environment_overlaps(point.state, "W", pointer);
    ov.time = point.t;
    series.push_back(std::move(ov));
    cal.report.samples.push_back(
        {point.t,
         degree_of_differentiation(reduced_density(point.state, {"W"}))});
  }
  cal.process =
      classify_process(series, m, cp.eps, cp.window, cp.size_threshold);
  return cal;
}

}  // namespace

RunReport run_epr_bell(const Scenario& sc, const TheoryEngine& engine,
                       int trials, std::uint64_t seed) {
  const ScenarioParams& p = sc.params;
  const std::string theory = engine.name();
  const int na = int(p.settings_a.size());
  const int nb = int(p.settings_b.size());
  RunReport report;

  const StateVector psi = sc.initial_state();

  std::vector<Observable> pointer_a, pointer_b;
  for (double a : p.settings_a)
    pointer_a.push_back(Observable::spin_axis("A", a));
  for (double b : p.settings_b)
    pointer_b.push_back(Observable::spin_axis("B", b));

  // Representative-trial microscopics: one calibration of the analyzer
  // design (both wings use the same construction).
  const auto cp = classify_params(engine, 0.15);
  Calibration cal = calibrate_analyzer(p.dress_size, cp);
  const ProcessClass& evidence = cal.process;
  for (const std::string& wing : {std::string("B"), std::string("A")}) {
    DifferentiationReport rep = cal.report;
    rep.property = "analyzer_axis";
    rep.system = wing;
    rep.region = wing == "A" ? "lab_a" : "lab_b";
    report.reports.push_back(std::move(rep));
  }

  push_event(report, "source_emission", 0.0, theory, {"source", "A", "B"}, {},
             {{"phase", p.phase_sign < 0 ? "minus" : "plus"}});
  push_event(report, "process_class", 0.0, theory, {"B", "A"},
             {{"env_size", double(evidence.evidence.env_size)},
              {"window_max", evidence.evidence.recurrence_estimate}},
             {{"kind", process_kind_label(evidence.kind)}});
  push_event(report, "sdc_measurement", 1.0, theory, {"B", "LB"});
  push_event(report, "sdc_measurement", 2.0, theory, {"A", "LA"});

  EnDqtParams ep = engine.endqt;
  if (ep.initiators.empty())
    ep.initiators = {{"LA", 'A'}, {"LB", 'A'}};
  DcLedger ledger = ep.make_ledger();

  // counts[i][j][a][b]: a,b = 0 for +1, 1 for -1.
  std::vector<std::array<std::array<long, 2>, 2>> counts(na * nb);
  std::vector<long> pair_trials(na * nb, 0);
  long count_none = 0;

  for (int trial = 0; trial < trials; ++trial) {
    RngStream rng = trial_stream(seed, trial);
    const int pair = trial % (na * nb);
    const int ia = pair / nb;
    const int ib = pair % nb;
    double value_a = 0.0, value_b = 0.0;  // 0 = unresolved

    switch (engine.kind) {
      case TheoryEngine::Kind::EnDqt: {
        StructureGraph g = wing_graph(engine, false);
        DeterminateEvent evb = endqt_determinate_event(
            psi, "LB", "B", pointer_b[ib], evidence, ledger, g, rng, 1.0);
        if (evb.occurred) {
          g.retire_udi("source", "B", 1.0);
          value_b = evb.values.at("B");
          DeterminateEvent eva =
              endqt_determinate_event(evb.state, "LA", "A", pointer_a[ia],
                                      evidence, ledger, g, rng, 2.0);
          if (eva.occurred) {
            g.retire_udi("source", "A", 2.0);
            value_a = eva.values.at("A");
          }
          if (trial == 0) {
            push_event(report, "determinate_value", 1.0, theory, {"LB", "B"},
                       {{"B", value_b}});
            if (eva.occurred)
              push_event(report, "determinate_value", 2.0, theory, {"LA", "A"},
                         {{"A", value_a}});
          }
        } else if (trial == 0) {
          push_event(report, "determinate_refused", 1.0, theory, {"LB", "B"},
                     {}, {{"reason", evb.reason}});
        }
        if (trial == 0) report.graph = std::move(g);
        break;
      }
      case TheoryEngine::Kind::Grw: {
        SpaceLayout det_layout = SpaceLayout::single("detB", 2);
        StateVector state = tensor(psi, StateVector::basis_state(
                                            SpaceLayout::single("detA", 2), 0));
        state = tensor(state, StateVector::basis_state(det_layout, 0));
        state = apply_local(state, detector_couple(p.settings_b[ib]),
                            {"B", "detB"});
        double t = 1.0;
        bool hit_b = false, hit_a = false;
        for (int k = 0; k < p.max_steps && !hit_b; ++k) {
          GrwStepResult step =
              grw_step(state, {"detB"}, p.dt, engine.grw, rng, t);
          t += p.dt;
          state = std::move(step.state);
          if (!step.events.empty()) {
            hit_b = true;
            value_b = dominant_site(state, "detB") == 0 ? 1.0 : -1.0;
            if (trial == 0)
              push_event(report, "collapse", step.events.front().t, theory,
                         {"detB"},
                         {{"center", double(step.events.front().center)}});
          }
        }
        if (hit_b) {
          state = apply_local(state, detector_couple(p.settings_a[ia]),
                              {"A", "detA"});
          double ta = std::max(2.0, t);
          for (int k = 0; k < p.max_steps && !hit_a; ++k) {
            GrwStepResult step =
                grw_step(state, {"detA"}, p.dt, engine.grw, rng, ta);
            ta += p.dt;
            state = std::move(step.state);
            if (!step.events.empty()) {
              hit_a = true;
              value_a = dominant_site(state, "detA") == 0 ? 1.0 : -1.0;
              if (trial == 0)
                push_event(report, "collapse", step.events.front().t, theory,
                           {"detA"},
                           {{"center", double(step.events.front().center)}});
            }
          }
        }
        if (!(hit_b && hit_a)) value_a = value_b = 0.0;
        if (trial == 0) {
          // Localization determined each wing relative to its detector's
          // records; mirror that in the structure graph.
          StructureGraph g = wing_graph(engine, false);
          if (hit_b) {
            g.replace_udi_with_sdi("LB", "B", 1.0);
            g.retire_udi("source", "B", 1.0);
            g.mark_determinate("LB");
            g.mark_determinate("B");
          }
          if (hit_b && hit_a) {
            g.replace_udi_with_sdi("LA", "A", 2.0);
            g.retire_udi("source", "A", 2.0);
            g.mark_determinate("LA");
            g.mark_determinate("A");
          }
          report.graph = std::move(g);
        }
        break;
      }
      case TheoryEngine::Kind::Mwi: {
        const std::set<std::string> locals;  // wings carry no lab factors
        WorldSet wb = mwi_branch(psi, "B", pointer_b[ib], "spin",
                                 engine.mwi_variant, wing_graph(engine, false),
                                 evidence, 1.0, locals);
        std::vector<double> weights;
        for (const auto& w : wb.worlds) weights.push_back(w.weight);
        const int iw = rng.pick_weighted(weights);
        value_b = wb.worlds[iw].assignments.at({"B", "spin"});

        WorldSet wa =
            mwi_branch(wb.worlds[iw].state, "A", pointer_a[ia], "spin",
                       engine.mwi_variant, wb.worlds[iw].graph, evidence, 2.0,
                       locals);
        std::vector<double> weights_a;
        for (const auto& w : wa.worlds) weights_a.push_back(w.weight);
        const int jw = rng.pick_weighted(weights_a);
        value_a = wa.worlds[jw].assignments.at({"A", "spin"});

        if (trial == 0) {
          for (std::size_t w = 0; w < wb.worlds.size(); ++w)
            push_event(report, "branch", 1.0, theory, {"B"},
                       {{"weight", wb.worlds[w].weight},
                        {"spin", wb.worlds[w].assignments.at({"B", "spin"})},
                        {"world", double(w)}});
          push_event(report, "world_pick", 1.0, theory, {"B"},
                     {{"world", double(iw)}});
          for (std::size_t w = 0; w < wa.worlds.size(); ++w)
            push_event(report, "branch", 2.0, theory, {"A"},
                       {{"weight", wa.worlds[w].weight},
                        {"spin", wa.worlds[w].assignments.at({"A", "spin"})},
                        {"world", double(w)}});
          push_event(report, "world_pick", 2.0, theory, {"A"},
                     {{"world", double(jw)}});

          // Wing-side record bookkeeping on the surviving branch's graph.
          StructureGraph g = wa.worlds[jw].graph;
          g.replace_udi_with_sdi("LB", "B", 2.0);
          g.retire_udi("source", "B", 2.0);
          g.mark_determinate("LB");
          g.replace_udi_with_sdi("LA", "A", 2.0);
          g.retire_udi("source", "A", 2.0);
          g.mark_determinate("LA");
          report.graph = std::move(g);
          report.worlds = wb;
          if (engine.mwi_variant == MwiVariant::Local) {
            // Pre-meeting bookkeeping: each wing branches independently off
            // the shared state; pairs carry product weights.
            WorldSet wa_ind = mwi_branch(psi, "A", pointer_a[ia], "spin",
                                         engine.mwi_variant,
                                         wing_graph(engine, false), evidence,
                                         1.0, locals);
            report.world_pairs = mwi_pair_worlds(wb, wa_ind);
          }
        }
        break;
      }
      case TheoryEngine::Kind::Relational: {
        RelationalTable table;
        auto fb = relational_interact(table, psi, "C", "B", pointer_b[ib],
                                      "spin", engine.relational_variant,
                                      {"C"}, rng, 1.0);
        auto fa = relational_interact(table, psi, "C", "A", pointer_a[ia],
                                      "spin", engine.relational_variant,
                                      {"C"}, rng, 2.0);
        if (fb && fa) {
          value_b = fb->value;
          value_a = fa->value;
        }
        if (trial == 0) {
          if (fb)
            push_event(report, "relative_fact", 1.0, theory, {"C", "B"},
                       {{"spin", fb->value}});
          if (fa)
            push_event(report, "relative_fact", 2.0, theory, {"C", "A"},
                       {{"spin", fa->value}});
          StructureGraph g = wing_graph(engine, true);
          if (fb && fa) {
            g.add_interaction("C", "B", EdgeKind::Sdi, true, 1.0);
            g.retire_udi("source", "B", 1.0);
            g.retire_udi("LB", "B", 1.0);
            g.add_interaction("C", "A", EdgeKind::Sdi, true, 2.0);
            g.retire_udi("source", "A", 2.0);
            g.retire_udi("LA", "A", 2.0);
            g.mark_determinate("C");
            g.mark_determinate("B");
            g.mark_determinate("A");
          }
          report.graph = std::move(g);
        }
        break;
      }
    }

    if (value_a != 0.0 && value_b != 0.0) {
      ++pair_trials[pair];
      ++counts[pair][value_a > 0 ? 0 : 1][value_b > 0 ? 0 : 1];
    } else {
      ++count_none;
    }
    push_event(report, "trial_outcome", 3.0, theory, {"A", "B"},
               {{"trial", double(trial)},
                {"setting_a", double(ia)},
                {"setting_b", double(ib)},
                {"a", value_a},
                {"b", value_b}});
  }

  if (engine.kind == TheoryEngine::Kind::EnDqt)
    report.ledger = std::move(ledger);

  report.statistics["trials"] = double(trials);
  report.statistics["count.none"] = double(count_none);
  std::vector<double> correlators(na * nb, 0.0);
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      const int pair = i * nb + j;
      const auto& c = counts[pair];
      const double n = double(pair_trials[pair]);
      const std::string key =
          "a" + std::to_string(i) + "b" + std::to_string(j);
      report.statistics["count." + key] = n;
      if (n > 0)
        correlators[pair] =
            (double(c[0][0]) + double(c[1][1]) - double(c[0][1]) -
             double(c[1][0])) /
            n;
      report.statistics["correlator." + key] = correlators[pair];
    }
  }
  if (na == 2 && nb == 2)
    report.statistics["chsh"] = chsh_from_correlators(
        correlators[0], correlators[1], correlators[2], correlators[3]);

  // Empirical no-signalling: each wing's marginal must not move with the
  // other wing's setting.
  double gap = 0.0;
  for (int i = 0; i < na; ++i) {
    double lo = 1.0, hi = 0.0;
    bool any = false;
    for (int j = 0; j < nb; ++j) {
      const int pair = i * nb + j;
      if (pair_trials[pair] == 0) continue;
      const double pa = (double(counts[pair][0][0]) +
                         double(counts[pair][0][1])) /
                        double(pair_trials[pair]);
      lo = std::min(lo, pa);
      hi = std::max(hi, pa);
      any = true;
    }
    if (any) gap = std::max(gap, hi - lo);
  }
  for (int j = 0; j < nb; ++j) {
    double lo = 1.0, hi = 0.0;
    bool any = false;
    for (int i = 0; i < na; ++i) {
      const int pair = i * nb + j;
      if (pair_trials[pair] == 0) continue;
      const double pb = (double(counts[pair][0][0]) +
                         double(counts[pair][1][0])) /
                        double(pair_trials[pair]);
      lo = std::min(lo, pb);
      hi = std::max(hi, pb);
      any = true;
    }
    if (any) gap = std::max(gap, hi - lo);
  }
  report.statistics["no_signalling_gap"] = gap;
  return report;
}

}  // namespace qdet::detail
