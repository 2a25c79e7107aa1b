#pragma once

// Internal glue shared by the scenario runners. Not installed.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qdet/rng.hpp"
#include "qdet/scenarios.hpp"

namespace qdet::detail {

// Independent stream for one trial: splitting off a fresh base stream keeps
// the draw sequence of trial i independent of how many draws other trials
// consumed, so trials can run (or be aggregated) in any order.
inline RngStream trial_stream(std::uint64_t seed, int trial) {
  return RngStream(seed).split(static_cast<std::uint64_t>(trial));
}

struct ClassifyParams {
  double eps = 0.05;
  double window = 0.6;
  int size_threshold = 2;
};

// The determination-capacity engine carries its own classification knobs;
// every other engine uses the scenario defaults.
inline ClassifyParams classify_params(const TheoryEngine& engine,
                                      double default_window) {
  if (engine.kind == TheoryEngine::Kind::EnDqt)
    return {engine.endqt.eps, engine.endqt.window, engine.endqt.size_threshold};
  return {0.05, default_window, 2};
}

// Overlap series sampled from explicitly staged states (used by scenarios
// whose couplings are engineered step unitaries rather than schedules).
std::vector<OverlapMatrix> staged_overlaps(
    const std::vector<std::pair<double, StateVector>>& stages,
    const std::string& system, const Observable& pointer);

void push_event(RunReport& report, std::string type, double t,
                const std::string& theory, std::vector<std::string> systems,
                std::map<std::string, double> values = {},
                std::map<std::string, std::string> notes = {});

std::string process_kind_label(ProcessKind kind);

// Sequential-determination-chain timeline, shared between the schedule
// assembly and the runner. The S1-S2 handshake begins strictly inside the
// S0-S1 record window (unless permuted), stays non-disturbing (diagonal)
// while they overlap, and the record-forming rotation only starts after the
// S0-S1 interaction has ended.
namespace sdc {
constexpr double kDephaseEnd = 1.0;         // S0-S1 record window [0, 1]
constexpr double kOnsetStart = 0.9;         // S1-S2 handshake begins
constexpr double kOnsetStartPermuted = 1.05;  // ... after S0-S1 ended
constexpr double kOnsetEnd = 1.3;
constexpr double kRecordEnd = 1.8;          // conditional rotation reaches pi/2
constexpr double kRunEnd = 2.0;             // frozen tail for stability checks
constexpr double kOnsetStrength = 0.8;
constexpr double kRecordStrength = 3.14159265358979323846;  // pi over 0.5 time
constexpr unsigned kCouplingSeed = 4242;    // register coupling draw
constexpr double kSampleDt = 0.05;
}  // namespace sdc

RunReport run_stern_gerlach(const Scenario& sc, const TheoryEngine& engine,
                            int trials, std::uint64_t seed);
RunReport run_epr_bell(const Scenario& sc, const TheoryEngine& engine,
                       int trials, std::uint64_t seed);
RunReport run_sdc_chain(const Scenario& sc, const TheoryEngine& engine,
                        int trials, std::uint64_t seed);
RunReport run_weak_sweep(const Scenario& sc, const TheoryEngine& engine,
                         int trials, std::uint64_t seed);

}  // namespace qdet::detail
