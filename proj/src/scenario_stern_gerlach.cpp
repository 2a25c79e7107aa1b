// Split spin beam: a spin qubit is separated over two path arms, a three-site
// detector couples to the arms (ready site in the middle, one record site per
// arm), and the selected theory engine turns the entangled whole into a
// definite outcome, a branching bookkeeping, a relative fact, or a
// determination event. Outcome frequencies are 50/50 for every engine.

#include <cmath>
#include <utility>

#include "qdet/errors.hpp"
#include "qdet/hilbert.hpp"
#include "scenario_detail.hpp"

namespace qdet::detail {

namespace {

Matrix beam_split_unitary() {
  // Controlled arm flip: spin down sends the beam to arm1.
  Matrix u = Matrix::Zero(4, 4);
  u(0, 0) = u(1, 1) = 1.0;  // spin 0 keeps the arm
  u(3, 2) = u(2, 3) = 1.0;  // spin 1 swaps the arms
  return u;
}

Matrix detector_couple_unitary() {
  // The ready detector (site 1) moves to site 0 on arm0 and site 2 on arm1.
  Matrix u = Matrix::Zero(6, 6);
  u(0, 1) = u(1, 0) = 1.0;  // arm0: swap sites 0 and 1
  u(2, 2) = 1.0;
  u(3, 3) = 1.0;            // arm1: swap sites 1 and 2
  u(5, 4) = u(4, 5) = 1.0;
  return u;
}

StructureGraph initial_graph(const TheoryEngine& engine, bool potential_loop) {
  StructureGraph g;
  g.add_node({"spin", SystemKind::NonGenerator, {"local"}, false});
  g.add_node({"path", SystemKind::NonGenerator, {"arm0", "arm1"}, false});
  g.add_node({"det",
              engine.kind == TheoryEngine::Kind::EnDqt ? SystemKind::Initiator
                                                       : SystemKind::Generator,
              {"lab"},
              false});
  g.add_interaction("path", "spin", EdgeKind::Udi, true, 1.0);
  g.add_interaction("det", "path", EdgeKind::Udi, false, 2.0);
  if (potential_loop)
    g.add_interaction("path", "path", EdgeKind::PotentialDestruction, false,
                      2.0);
  return g;
}

}  // namespace

RunReport run_stern_gerlach(const Scenario& sc, const TheoryEngine& engine,
                            int trials, std::uint64_t seed) {
  const ScenarioParams& p = sc.params;
  const std::string theory = engine.name();
  RunReport report;

  // Staged preparation shared by every trial.
  const StateVector psi0 = sc.initial_state();
  const StateVector psi1 =
      apply_local(psi0, beam_split_unitary(), {"spin", "path"});
  const StateVector psi2 =
      apply_local(psi1, detector_couple_unitary(), {"path", "det"});

  const Observable pointer = Observable::pauli_z("path");
  const std::vector<std::pair<double, StateVector>> stages = {
      {0.0, psi0}, {1.0, psi1}, {2.0, psi2}, {2.5, psi2}, {3.0, psi2}};
  const auto cp = classify_params(engine, 0.6);
  const ProcessClass evidence = classify_process(
      staged_overlaps(stages, "path", pointer), 2, cp.eps, cp.window,
      cp.size_threshold);

  push_event(report, "stage", 0.0, theory, {"spin", "path", "det"}, {},
             {{"tag", "prepare"}});
  push_event(report, "stage", 1.0, theory, {"spin", "path"}, {},
             {{"tag", "beam_split"}});
  push_event(report, "stage", 2.0, theory, {"path", "det"}, {},
             {{"tag", "detector_couple"}});
  push_event(report, "process_class", 2.0, theory, {"path"},
             {{"env_size", double(evidence.evidence.env_size)},
              {"window_max", evidence.evidence.recurrence_estimate}},
             {{"kind", process_kind_label(evidence.kind)}});

  // Differentiation reports over the staged preparation.
  for (const std::string& sys : {std::string("path"), std::string("spin")}) {
    DifferentiationReport rep;
    rep.property = "arm_or_spin_z";
    rep.system = sys;
    rep.region = "lab";
    for (const auto& [t, state] : stages)
      rep.samples.push_back(
          {t, degree_of_differentiation(reduced_density(state, {sys}))});
    report.reports.push_back(std::move(rep));
  }

  // Many-worlds branching is trial-independent: compute it once.
  WorldSet worlds;
  std::vector<double> world_weights;
  if (engine.kind == TheoryEngine::Kind::Mwi) {
    worlds = mwi_branch(psi2, "path", pointer, "arm", engine.mwi_variant,
                        initial_graph(engine, false), evidence, 3.0,
                        {"spin", "det"});
    for (auto& w : worlds.worlds) {
      // The detector's record is definite inside each branched world even
      // though its dimension hides it from the automatic assignment.
      if (w.assignments.count({"path", "arm"})) {
        w.graph.replace_udi_with_sdi("det", "path", 3.0);
        w.graph.mark_determinate("det");
      }
      world_weights.push_back(w.weight);
    }
  }

  EnDqtParams ep = engine.endqt;
  if (ep.initiators.empty()) ep.initiators = {{"det", 'A'}};
  DcLedger ledger = ep.make_ledger();

  int count_arm0 = 0, count_arm1 = 0, count_none = 0;
  for (int trial = 0; trial < trials; ++trial) {
    RngStream rng = trial_stream(seed, trial);
    int outcome = -1;

    switch (engine.kind) {
      case TheoryEngine::Kind::Grw: {
        StateVector psi = psi2;
        StructureGraph g = initial_graph(engine, true);
        double t = 2.0;
        for (int k = 0; k < p.max_steps; ++k) {
          GrwStepResult step = grw_step(psi, {"det"}, p.dt, engine.grw, rng, t);
          t += p.dt;
          psi = std::move(step.state);
          if (step.events.empty()) continue;
          const CollapseEvent& ce = step.events.front();
          CollapsePropagation prop = grw_collapse_propagate(psi, "det", g, t);
          outcome = prop.values.at("path");
          if (trial == 0) {
            push_event(report, "collapse", ce.t, theory, {"det"},
                       {{"center", double(ce.center)}});
            std::map<std::string, double> vals;
            for (const auto& [sys, v] : prop.values) vals[sys] = double(v);
            push_event(report, "collapse_propagated", t, theory,
                       {"det", "path", "spin"}, std::move(vals));
            report.graph = std::move(g);
          }
          break;
        }
        break;
      }
      case TheoryEngine::Kind::Mwi: {
        const int idx = rng.pick_weighted(world_weights);
        const auto it = worlds.worlds[idx].assignments.find({"path", "arm"});
        const bool assigned = it != worlds.worlds[idx].assignments.end();
        outcome = !assigned ? -1 : (it->second > 0 ? 0 : 1);
        if (trial == 0) {
          for (std::size_t w = 0; w < worlds.worlds.size(); ++w) {
            std::map<std::string, double> vals = {
                {"weight", worlds.worlds[w].weight}, {"world", double(w)}};
            const auto wa = worlds.worlds[w].assignments.find({"path", "arm"});
            if (wa != worlds.worlds[w].assignments.end())
              vals["arm"] = wa->second;
            push_event(report, "branch", 3.0, theory, {"path"},
                       std::move(vals));
          }
          push_event(report, "world_pick", 3.0, theory, {"path"},
                     {{"world", double(idx)}});
          report.graph = worlds.worlds[idx].graph;
        }
        break;
      }
      case TheoryEngine::Kind::Relational: {
        RelationalTable table;
        auto fact = relational_interact(table, psi2, "det", "path", pointer,
                                        "arm", engine.relational_variant,
                                        {"det"}, rng, 3.0);
        if (fact) {
          outcome = fact->value > 0 ? 0 : 1;
          if (trial == 0) {
            push_event(report, "relative_fact", 3.0, theory, {"det", "path"},
                       {{"arm", fact->value}});
            StructureGraph g = initial_graph(engine, false);
            g.replace_udi_with_sdi("det", "path", 3.0);
            g.replace_udi_with_sdi("path", "spin", 3.0);
            g.mark_determinate("det");
            g.mark_determinate("path");
            g.mark_determinate("spin");
            report.graph = std::move(g);
          }
        }
        break;
      }
      case TheoryEngine::Kind::EnDqt: {
        StructureGraph g = initial_graph(engine, false);
        DeterminateEvent ev = endqt_determinate_event(
            psi2, "det", "path", pointer, evidence, ledger, g, rng, 3.0);
        if (ev.occurred) {
          outcome = ev.values.at("path") > 0 ? 0 : 1;
          // The beam-path/spin link carried no determination; the
          // interaction is over, so it retires instead of mixing classes.
          g.retire_udi("path", "spin", 3.0);
          if (trial == 0) {
            push_event(report, "determinate_value", 3.0, theory,
                       {"det", "path"},
                       {{"det", ev.values.at("det")},
                        {"path", ev.values.at("path")}});
            report.graph = std::move(g);
          }
        } else if (trial == 0) {
          push_event(report, "determinate_refused", 3.0, theory,
                     {"det", "path"}, {}, {{"reason", ev.reason}});
          report.graph = std::move(g);
        }
        break;
      }
    }

    if (outcome == 0)
      ++count_arm0;
    else if (outcome == 1)
      ++count_arm1;
    else
      ++count_none;
    push_event(report, "trial_outcome", 4.0, theory, {"path"},
               {{"trial", double(trial)}, {"arm", double(outcome)}});
  }

  if (engine.kind == TheoryEngine::Kind::Mwi) report.worlds = std::move(worlds);
  if (engine.kind == TheoryEngine::Kind::EnDqt) report.ledger = std::move(ledger);

  report.statistics["trials"] = double(trials);
  report.statistics["count.arm0"] = double(count_arm0);
  report.statistics["count.arm1"] = double(count_arm1);
  report.statistics["count.none"] = double(count_none);
  report.statistics["freq.arm0"] = double(count_arm0) / double(trials);
  report.statistics["freq.arm1"] = double(count_arm1) / double(trials);
  return report;
}

}  // namespace qdet::detail
