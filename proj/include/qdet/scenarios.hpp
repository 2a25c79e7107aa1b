#pragma once

// Canonical end-to-end runs. Each scenario wires an initial state, an
// interaction story, and a structure graph to one of the pluggable theory
// engines, then reports everything that happened: an event log, aggregate
// outcome statistics, the final structure graph, and differentiation series.
//
// Determinism contract: run(scenario, engine, trials, seed) is a pure
// function of its arguments; identical seeds give byte-identical event logs.
// Every trial draws from an independent random stream split off the run
// seed, so aggregated statistics are independent of trial execution order.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qdet/decomodels.hpp"
#include "qdet/differentiation.hpp"
#include "qdet/events.hpp"
#include "qdet/structures.hpp"
#include "qdet/theories.hpp"

namespace qdet {

enum class ScenarioName {
  SternGerlachInterferometer,  // split spin beam with a detector on one arm
  EprBell,                     // two-wing entangled pair, settable analyzers
  SdcChain,                    // sequential determination chain S0 -> S1 -> S2
  WeakMeasurementSweep,        // variable-strength probe coupling sweep
};

std::string to_string(ScenarioName name);
ScenarioName scenario_from_string(const std::string& text);

// Engine selection plus the per-theory knobs. `seed` is the default run
// seed; callers may override it per invocation.
struct TheoryEngine {
  enum class Kind { Grw, Mwi, Relational, EnDqt };
  Kind kind = Kind::Grw;
  GrwParams grw;
  MwiVariant mwi_variant = MwiVariant::QuasiLocal;
  RelationalVariant relational_variant = RelationalVariant::SingleWorld;
  EnDqtParams endqt;
  std::uint64_t seed = 0;

  std::string name() const;  // "grw", "mwi_local", "endqt", ...
  void validate() const;
};

// Inverse of TheoryEngine::name(); unknown names are rejected.
TheoryEngine engine_from_string(const std::string& name);

// Typed scenario parameters. Fields are grouped by the scenario that reads
// them; make_scenario fills scenario-appropriate defaults for fields left
// at their sentinel values.
struct ScenarioParams {
  int trials = -1;  // -1: scenario default

  // epr_bell
  std::vector<double> settings_a;  // analyzer angles, radians
  std::vector<double> settings_b;
  int phase_sign = -1;  // -1: odd (singlet-type) pair, +1: even-phase pair
  int dress_size = 8;   // record-register qubits for the representative trial

  // stern_gerlach
  double dt = 0.05;  // collapse-hazard step
  int max_steps = 400;

  // sdc_chain
  int register_size = 8;  // qubits in the initiator's record register
  bool permuted = false;  // delay S1-S2 until after S0-S1 has ended

  // weak_sweep
  int points = 10;
};

struct Scenario {
  ScenarioName name = ScenarioName::SternGerlachInterferometer;
  ScenarioParams params;
  // Declared systems as (label, factor dimension); dimension 0 marks a
  // graph-only participant without a Hilbert factor of its own.
  std::vector<std::pair<std::string, int>> systems;
  // Logical interaction windows between declared systems.
  InteractionSchedule schedule;
  std::function<StateVector()> initial_state;

  // The schedule may only reference declared systems.
  void validate() const;
};

Scenario make_scenario(ScenarioName name, const ScenarioParams& params);

struct SweepRow {
  double strength = 0.0;
  double overlap = 0.0;     // |<E_arm0|E_arm1>| of the probe records
  double d_star = 0.0;      // degree of differentiation of the path
  double visibility = 0.0;  // normalized off-diagonal coherence of the path
};

// Variable-strength probe: a balanced two-path state is coupled to a ready
// probe qubit by a conditional rotation of angle `strength`. Each row
// reports the record overlap (= cos strength), the path's degree of
// differentiation, and the interference visibility (= |cos strength|):
// differentiation rises exactly as visibility falls.
std::vector<SweepRow> weak_sweep(const std::vector<double>& strengths);

struct RunReport {
  // Full detail for the representative trial (index 0); every other trial
  // contributes one trial_outcome event.
  std::vector<ScenarioEvent> events;
  std::map<std::string, double> statistics;
  StructureGraph graph;  // final graph of the representative trial
  std::vector<DifferentiationReport> reports;
  std::optional<WorldSet> worlds;      // many-worlds bookkeeping
  std::vector<WorldPair> world_pairs;  // local-variant pre-meeting pairs
  std::optional<DcLedger> ledger;      // determination-capacity records
  std::vector<SweepRow> sweep;         // weak-sweep table
};

// Execute `trials` independent trials (trials >= 1) and aggregate.
// Scenario/engine combinations that make no sense together are rejected
// before any trial runs.
RunReport run(const Scenario& scenario, const TheoryEngine& engine,
              int trials, std::uint64_t seed);

}  // namespace qdet
