// Sequential determination chain S0 -> S1 -> S2 on the determination-capacity
// engine. An m-qubit register (S0, expanded internally into qubit factors)
// dephases S1 over [0, 1]; S2's handshake coupling to S1 begins strictly
// inside that window but stays diagonal in S1's pointer basis, so capacity
// can propagate without disturbing the record. Once the S0-S1 window has
// closed, a conditional rotation writes S2's value into S1, and the run ends
// with a frozen tail long enough for the trailing-window stability check.
// The permuted variant delays the handshake until after the S0-S1 window,
// which must refuse the capacity grant and leave S2 undetermined.

#include <cmath>
#include <map>
#include <utility>

#include "qdet/errors.hpp"
#include "qdet/hilbert.hpp"
#include "scenario_detail.hpp"

namespace qdet::detail {

namespace {

StructureGraph chain_graph() {
  StructureGraph g;
  g.add_node({"S0", SystemKind::Initiator, {"lab"}, false});
  g.add_node({"S1", SystemKind::NonGenerator, {"local"}, false});
  g.add_node({"S2", SystemKind::NonGenerator, {"local"}, false});
  g.add_interaction("S0", "S1", EdgeKind::Udi, false, 0.0);
  return g;
}

// Persistence probe: after `freeze_start` nothing couples to the watched
// system, so the overlap series continues unchanged; extend it until the
// trailing classification window lies inside the frozen region.
void extend_frozen(std::vector<OverlapMatrix>& series, double dt,
                   double freeze_start, double window) {
  while (series.back().time < freeze_start + window + 2.0 * dt) {
    OverlapMatrix next = series.back();
    next.time += dt;
    series.push_back(std::move(next));
  }
}

// Post-projection continuation of one S1 branch: the handshake finishes,
// then the conditional rotation records S2 into S1.
struct Branch {
  StateVector end_state;  // state from t = 1.8 on (frozen afterwards)
  ProcessClass process;
  DifferentiationReport report;
};

Branch make_branch(const StateVector& state1, bool permuted,
                   const HamiltonianRegistry& reg, const Observable& pointer2,
                   int env_size, const ClassifyParams& cp) {
  using namespace sdc;
  InteractionSchedule handshake;
  handshake.entries = {{permuted ? kOnsetStartPermuted - kDephaseEnd : 0.0,
                        kOnsetEnd - kDephaseEnd, "S1", "S2", "zz",
                        kOnsetStrength}};
  const auto traj_b = run_schedule(state1, handshake, kSampleDt, reg);

  InteractionSchedule record;
  record.entries = {
      {0.0, kRecordEnd - kOnsetEnd, "S2", "S1", "ctrl_orth", kRecordStrength}};
  const auto traj_c =
      run_schedule(traj_b.back().state, record, kSampleDt, reg);

  Branch br{traj_c.back().state, {}, {"pointer_z", "S2", "chain", {}}};
  std::vector<OverlapMatrix> series;
  auto sample = [&](double t, const StateVector& state) {
    OverlapMatrix ov = environment_overlaps(state, "S2", pointer2);
    ov.time = t;
    series.push_back(std::move(ov));
    br.report.samples.push_back(
        {t, degree_of_differentiation(reduced_density(state, {"S2"}))});
  };
  for (const auto& point : traj_b) sample(kDephaseEnd + point.t, point.state);
  for (std::size_t k = 1; k < traj_c.size(); ++k)
    sample(kOnsetEnd + traj_c[k].t, traj_c[k].state);
  while (br.report.samples.back().t < kRunEnd - 1e-9)
    br.report.samples.push_back({br.report.samples.back().t + kSampleDt,
                                 br.report.samples.back().d_star});
  extend_frozen(series, kSampleDt, kRecordEnd, cp.window);
  br.process =
      classify_process(series, env_size, cp.eps, cp.window, cp.size_threshold);
  return br;
}

}  // namespace

RunReport run_sdc_chain(const Scenario& sc, const TheoryEngine& engine,
                        int trials, std::uint64_t seed) {
  using namespace sdc;
  const ScenarioParams& p = sc.params;
  const std::string theory = engine.name();
  const int m = p.register_size;
  const int env_size = m + 1;  // register qubits plus the chain partner
  RunReport report;

  EnDqtParams ep = engine.endqt;
  if (ep.initiators.empty()) ep.initiators = {{"S0", 'A'}};
  DcLedger ledger = ep.make_ledger();
  const ClassifyParams cp = classify_params(engine, 0.15);
  const auto reg = HamiltonianRegistry::standard();

  // The register evolves qubit by qubit; the aggregate S0 label stays on the
  // graph and in the event values.
  std::vector<FactorSpace> factors;
  for (int k = 0; k < m; ++k) factors.push_back({"s0_" + std::to_string(k), 2});
  factors.push_back({"S1", 2});
  factors.push_back({"S2", 2});
  SpaceLayout layout(std::move(factors));
  Vector amps = Vector::Constant(layout.total_dim(),
                                 1.0 / std::sqrt(double(layout.total_dim())));
  const StateVector initial(std::move(amps), layout);

  const SpinEnvironment env = SpinEnvironment::make(m, kCouplingSeed);
  InteractionSchedule record_window;
  for (int k = 0; k < m; ++k)
    record_window.entries.push_back(
        {0.0, kDephaseEnd, "S1", "s0_" + std::to_string(k), "zz",
         env.couplings[k]});
  if (!p.permuted)
    record_window.entries.push_back(
        {kOnsetStart, kDephaseEnd, "S1", "S2", "zz", kOnsetStrength});

  const Observable pointer1 = Observable::pauli_z("S1");
  const Observable pointer2 = Observable::pauli_z("S2");

  const auto traj_a = run_schedule(initial, record_window, kSampleDt, reg);
  std::vector<OverlapMatrix> series1;
  DifferentiationReport rep1{"pointer_z", "S1", "chain", {}};
  for (const auto& point : traj_a) {
    OverlapMatrix ov = environment_overlaps(point.state, "S1", pointer1);
    ov.time = point.t;
    series1.push_back(std::move(ov));
    rep1.samples.push_back(
        {point.t,
         degree_of_differentiation(reduced_density(point.state, {"S1"}))});
  }
  extend_frozen(series1, kSampleDt, kDephaseEnd, cp.window);
  const ProcessClass proc1 =
      classify_process(series1, env_size, cp.eps, cp.window, cp.size_threshold);
  const StateVector& state_a = traj_a.back().state;

  push_event(report, "process_class", kDephaseEnd, theory, {"S1"},
             {{"env_size", double(proc1.evidence.env_size)},
              {"window_max", proc1.evidence.recurrence_estimate}},
             {{"kind", process_kind_label(proc1.kind)}});

  // Capacity propagation S0 -> S1 -> S2, judged on the declared schedule.
  const GrantResult grant =
      endqt_grant_dc(ledger, sc.schedule, {"S0", "S1", "S2"}, proc1,
                     Observable(reg.build_pair("zz", 2, 2),
                                SpaceLayout({{"S1", 2}, {"S2", 2}})),
                     pointer1, kDephaseEnd);

  std::map<int, Branch> branches;  // keyed by S1's projected component
  long s1_plus = 0, s1_minus = 0, s2_plus = 0, s2_minus = 0, complete = 0;

  for (int trial = 0; trial < trials; ++trial) {
    RngStream rng = trial_stream(seed, trial);
    StructureGraph g = chain_graph();
    if (!p.permuted)
      g.add_interaction("S1", "S2", EdgeKind::Udi, false, kOnsetStart);

    DeterminateEvent ev1 = endqt_determinate_event(
        state_a, "S0", "S1", pointer1, proc1, ledger, g, rng, kDephaseEnd);
    if (trial == 0) {
      if (ev1.occurred)
        push_event(report, "determinate_value", kDephaseEnd, theory,
                   {"S0", "S1"},
                   {{"S0", ev1.values.at("S0")}, {"S1", ev1.values.at("S1")}});
      else
        push_event(report, "determinate_refused", kDephaseEnd, theory,
                   {"S0", "S1"}, {}, {{"reason", ev1.reason}});
      push_event(report, grant.granted ? "dc_grant" : "dc_grant_refused",
                 kDephaseEnd, theory, {"S0", "S1", "S2"}, {},
                 grant.granted
                     ? std::map<std::string, std::string>{}
                     : std::map<std::string, std::string>{
                           {"reason", grant.reason}});
    }
    if (p.permuted)
      g.add_interaction("S1", "S2", EdgeKind::Udi, false, kOnsetStartPermuted);

    double v1 = 0.0, v2 = 0.0;
    bool got2 = false;
    if (ev1.occurred) {
      v1 = ev1.values.at("S1");
      const int key = v1 > 0 ? 1 : 0;
      auto it = branches.find(key);
      if (it == branches.end())
        it = branches
                 .emplace(key, make_branch(ev1.state, p.permuted, reg,
                                           pointer2, env_size, cp))
                 .first;
      const Branch& br = it->second;
      if (trial == 0)
        push_event(report, "process_class", kRecordEnd, theory, {"S2"},
                   {{"env_size", double(br.process.evidence.env_size)},
                    {"window_max", br.process.evidence.recurrence_estimate}},
                   {{"kind", process_kind_label(br.process.kind)}});

      DeterminateEvent ev2 =
          endqt_determinate_event(br.end_state, "S1", "S2", pointer2,
                                  br.process, ledger, g, rng, kRecordEnd);
      got2 = ev2.occurred;
      if (got2) v2 = ev2.values.at("S2");
      if (trial == 0) {
        if (got2)
          push_event(report, "determinate_value", kRecordEnd, theory,
                     {"S1", "S2"},
                     {{"S1", ev2.values.at("S1")},
                      {"S2", ev2.values.at("S2")}});
        else
          push_event(report, "determinate_refused", kRecordEnd, theory,
                     {"S1", "S2"}, {}, {{"reason", ev2.reason}});
      }
      // An undetermined handshake link may not survive next to the
      // determination edge; the window is over, so it retires.
      if (!got2) g.retire_udi("S1", "S2", kRecordEnd);

      if (trial == 0) {
        report.reports = {rep1, br.report};
        report.graph = std::move(g);
      }
    } else if (trial == 0) {
      report.reports = {rep1};
      report.graph = std::move(g);
    }

    if (v1 > 0) ++s1_plus;
    if (v1 < 0) ++s1_minus;
    if (v2 > 0) ++s2_plus;
    if (v2 < 0) ++s2_minus;
    if (ev1.occurred && got2) ++complete;
    push_event(report, "trial_outcome", kRunEnd, theory, {"S1", "S2"},
               {{"trial", double(trial)}, {"s1", v1}, {"s2", v2}});
  }

  report.ledger = std::move(ledger);
  report.statistics["trials"] = double(trials);
  report.statistics["grant"] = grant.granted ? 1.0 : 0.0;
  report.statistics["count.s1_plus"] = double(s1_plus);
  report.statistics["count.s1_minus"] = double(s1_minus);
  report.statistics["count.s2_plus"] = double(s2_plus);
  report.statistics["count.s2_minus"] = double(s2_minus);
  report.statistics["count.none"] = double(trials) - double(complete);
  report.statistics["freq.chain_complete"] = double(complete) / double(trials);
  return report;
}

}  // namespace qdet::detail
