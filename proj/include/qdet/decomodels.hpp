#pragma once

// Concrete decoherence dynamics: von Neumann measurement-type coupling, the
// exactly solvable spin-spin pure-dephasing environment, and time-ordered
// interaction schedules that drive the larger scenarios.
//
// The canonical environment model is pure dephasing,
//   H = sigma_z^(sys) (x) sum_k g_k sigma_z^(k),
// chosen because it is exactly solvable: with the environment prepared in
// |+>^(x)n the conditional environment states attached to the system's z
// components develop overlap r(t) = prod_k cos(2 g_k t). Self-Hamiltonians
// are zero by default (interaction-dominant regime); schedules accept
// single-system entries as the hook for adding them back.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "qdet/hilbert.hpp"
#include "qdet/rng.hpp"

namespace qdet {

// A register of environment qubits with per-qubit coupling strengths.
// Factors are labeled "<prefix>0" .. "<prefix>{n-1}".
struct SpinEnvironment {
  int n = 0;
  std::vector<double> couplings;  // g_k, units of 1/time
  StateVector initial;            // product state on the n qubits

  // n qubits in |+>, couplings drawn uniformly from [0.5, 1.5] with a seeded
  // generator (incommensurate couplings suppress recurrences).
  static SpinEnvironment make(int n, std::uint64_t seed,
                              const std::string& prefix = "e");
  // Same geometry with explicit couplings (all must be finite).
  static SpinEnvironment with_couplings(std::vector<double> couplings,
                                        const std::string& prefix = "e");
};

// One timed two-party (or, with from == to, single-party) interaction.
struct ScheduleEntry {
  double start = 0.0;
  double end = 0.0;
  std::string from;
  std::string to;
  std::string tag;         // resolved through a HamiltonianRegistry
  double strength = 1.0;   // multiplies the registry Hamiltonian
};

// Ordered list of interactions; entries must satisfy start < end and be
// sorted by start time.
struct InteractionSchedule {
  std::vector<ScheduleEntry> entries;
};

// Maps hamiltonian tags to matrix builders. Pair builders receive the two
// party dimensions in entry order; single-site builders receive one.
class HamiltonianRegistry {
 public:
  using PairBuilder = std::function<Matrix(int dim_from, int dim_to)>;
  using SiteBuilder = std::function<Matrix(int dim)>;

  // Built-in tags:
  //   "zz"        sigma_z (x) sigma_z        (qubit-qubit pure dephasing)
  //   "ctrl_orth" |1><1| (x) sigma_y         (controlled rotation that turns
  //                                           the target toward an orthogonal
  //                                           state; overlap cos(strength*t))
  //   "sz", "sx"  single-site sigma_z / sigma_x self-terms
  static HamiltonianRegistry standard();

  void add_pair(const std::string& tag, PairBuilder builder);
  void add_site(const std::string& tag, SiteBuilder builder);
  bool has_pair(const std::string& tag) const;
  bool has_site(const std::string& tag) const;
  Matrix build_pair(const std::string& tag, int dim_from, int dim_to) const;
  Matrix build_site(const std::string& tag, int dim) const;

 private:
  std::map<std::string, PairBuilder> pair_;
  std::map<std::string, SiteBuilder> site_;
};

struct TrajectoryPoint {
  double t = 0.0;
  StateVector state;
};

// Measurement-type coupling of a qubit to a ready environment:
//   (a|0> + b|1>) |E0>  ->  a|0>|E0> + b|1>|E1>,  <E0|E1> = 0.
// The orthogonal partner |E1> is deterministic: the computational basis
// vector with the smallest overlap with |E0|, Gram-Schmidt orthogonalized
// against it. Non-qubit systems are rejected; see the pointer-basis overload
// for multi-level systems.
StateVector von_neumann_couple(const StateVector& system,
                               const StateVector& env_ready);

// Multi-level generalization: branches on the eigenbasis of `pointer` and
// attaches mutually orthonormal environment partners (E_0 = env_ready, the
// rest Gram-Schmidt chained from basis vectors). Requires env dim >= system
// dim.
StateVector von_neumann_couple(const StateVector& system,
                               const StateVector& env_ready,
                               const Observable& pointer);

// Joint state of system qubit + environment at time t under the pure
// dephasing Hamiltonian (exact diagonal phase dynamics, no stepper).
StateVector spin_env_evolve(const StateVector& sys_qubit,
                            const SpinEnvironment& env, double t);

// Piecewise-constant evolution of `initial` under the schedule: within each
// segment the active entries' Hamiltonians (embedded on their parties) sum;
// disjoint groups of parties evolve independently. The trajectory is sampled
// every dt from t = 0 through t_end (default: the last entry's end time),
// with the endpoint always included. dt > 0; unknown tags are rejected.
std::vector<TrajectoryPoint> run_schedule(const StateVector& initial,
                                          const InteractionSchedule& sched,
                                          double dt,
                                          const HamiltonianRegistry& registry,
                                          double t_end = -1.0);

}  // namespace qdet
