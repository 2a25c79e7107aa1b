#pragma once

// Classical and quantum causal models over finite variables: Markov-
// condition checking against a DAG, factorizability of bipartite conditional
// tables, quantum common-cause models with a Born-rule trace formula, CHSH
// statistics, and the classical bound by exhaustive strategy enumeration.
//
// CHSH convention used everywhere in this project:
//   S = E(a,b) - E(a,b') + E(a',b) + E(a',b')
// with outcomes encoded as +1/-1 on both sides. At the canonical settings
// a=0, a'=pi/2, b=pi/4, b'=3pi/4 a singlet gives S = -2*sqrt(2).

#include <map>
#include <string>
#include <vector>

#include "qdet/events.hpp"
#include "qdet/hilbert.hpp"
#include "qdet/structures.hpp"

namespace qdet {

// Directed acyclic graph over variable labels. Acyclicity is enforced on
// every edge insertion.
class Dag {
 public:
  void add_node(const std::string& label);
  void add_edge(const std::string& from, const std::string& to);
  bool has_node(const std::string& label) const;
  const std::vector<std::string>& nodes() const { return nodes_; }
  // Parents in sorted order (canonical for CPT shapes).
  std::vector<std::string> parents(const std::string& label) const;
  // A topological order (parents before children), recomputed lazily.
  std::vector<std::string> topological_order() const;

 private:
  std::vector<std::string> nodes_;
  std::vector<std::pair<std::string, std::string>> edges_;
};

// Dense table of reals over named finite variables; the first variable is
// the most significant index digit. Used both for joint distributions and
// conditional tables.
struct ProbTable {
  std::vector<std::string> vars;
  std::vector<int> cards;
  std::vector<double> p;

  ProbTable() = default;
  ProbTable(std::vector<std::string> vars, std::vector<int> cards);

  int size() const { return static_cast<int>(p.size()); }
  int var_pos(const std::string& name) const;
  int index(const std::vector<int>& assignment) const;
  std::vector<int> assignment(int linear) const;
  double at(const std::vector<int>& assignment) const {
    return p.at(index(assignment));
  }
  double& at(const std::vector<int>& assignment) { return p[index(assignment)]; }

  // Sum out every variable not in `keep`; kept variables stay in this
  // table's order.
  ProbTable marginal(const std::vector<std::string>& keep) const;
};

// DAG + cardinalities + one conditional probability table per node. The CPT
// for node X has variables [sorted parents of X ..., X] and each row (fixed
// parent assignment) sums to 1 within 1e-9.
struct ClassicalCausalModel {
  Dag dag;
  std::map<std::string, int> cards;
  std::map<std::string, ProbTable> cpts;

  void validate() const;
  // The joint distribution assembled as the product of the CPTs, with
  // variables in dag node order.
  ProbTable joint() const;
};

// Is `joint` Markov with respect to the model's DAG? Compares the joint
// cell-by-cell against the product of its own conditionals; assignments
// whose parent marginal is zero are skipped (their conditionals are
// undefined, contributing no deviation).
struct CmcResult {
  bool markov = false;
  double max_violation = 0.0;
};
CmcResult cmc_check(const ClassicalCausalModel& model, const ProbTable& joint);

// Factorizability of a five-variable conditional table P(A,B|X,Y,L):
// variables positionally (outcome A, outcome B, setting X, setting Y, latent
// L). Each (X,Y,L) slice must be normalized (rejected otherwise). Holds iff
// every slice factors as P(A|X,L) * P(B|Y,L) within 1e-9, which also
// requires the A marginal to ignore Y and the B marginal to ignore X.
struct FactorizabilityResult {
  bool holds = false;
  double max_violation = 0.0;
};
FactorizabilityResult factorizability_check(const ProbTable& table);

// Common-cause quantum model: a bipartite source state, one channel per
// wing carrying its half to the measurement region, and per-setting POVMs.
struct QuantumCausalModel {
  DensityOperator rho_lambda = DensityOperator(
      Matrix::Identity(4, 4) / 4.0, SpaceLayout({{"A", 2}, {"B", 2}}));
  std::string half_a = "A";
  std::string half_b = "B";
  Channel channel_a = Channel::identity(2);
  Channel channel_b = Channel::identity(2);
  std::map<std::string, Povm> povm_a;  // setting label -> POVM
  std::map<std::string, Povm> povm_b;

  void validate() const;
};

// P(x,y | s,t): channels applied to the respective halves of the source
// state, then the product POVM element traced against the result.
double qcm_probability(const QuantumCausalModel& m, const std::string& x,
                       const std::string& y, const std::string& s,
                       const std::string& t);

// E(s,t) = sum_{x,y} val(x) val(y) P(x,y|s,t), outcome labels parsed as
// numbers (the +1/-1 encoding).
double qcm_correlator(const QuantumCausalModel& m, const std::string& s,
                      const std::string& t);

double chsh_from_correlators(double e_ab, double e_abp, double e_apb,
                             double e_apbp);

// S for the model at settings (a, a', b, b').
double chsh(const QuantumCausalModel& m, const std::string& a,
            const std::string& ap, const std::string& b,
            const std::string& bp);

// Exhaustive maximum of |S| over all 16 deterministic strategy pairs
// (A: two settings -> {+1,-1}, B likewise); returns exactly 2. By convexity
// the same bound covers every mixture of such strategies.
double classical_chsh_bound();

// The conditional table P(A,B|X,Y,L) of one deterministic strategy pair,
// with L a point mass (cardinality 1) and outcomes 0 -> +1, 1 -> -1.
// ra0/ra1 are A's responses (+1/-1) to settings 0/1, rb0/rb1 B's.
ProbTable deterministic_strategy_table(int ra0, int ra1, int rb0, int rb1);

// Two-qubit source model with spin measurements in the x-z plane.
// phase_sign=-1 gives (|01> - |10>)/sqrt(2) (correlator -cos(a-b)),
// phase_sign=+1 the plus-phase partner. Setting maps are label -> angle.
QuantumCausalModel singlet_model(const std::map<std::string, double>& settings_a,
                                 const std::map<std::string, double>& settings_b,
                                 int phase_sign = -1);

// Interaction graph of a determination-capacity Bell run, built from its
// event log: a source node whose emission links it to both wings by
// unstable interactions, and per-wing measurement events that retire the
// wing's unstable link and add a stable detector->system edge. Rejects logs
// from other engines. The resulting graph never links the two wings.
StructureGraph build_endqt_dag(const std::vector<ScenarioEvent>& log);

}  // namespace qdet
