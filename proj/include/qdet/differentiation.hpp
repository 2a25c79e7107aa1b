#pragma once

// Degree of differentiation and decoherence diagnostics.
//
// The degree to which a system property has differentiated (taken a definite
// value relative to its surroundings) is measured by the normalized von
// Neumann entropy of the reduced state: 0 for a pure (undifferentiated
// relative to nothing / fully coherent) state, 1 for a maximally mixed one.
// The off-diagonal structure of the conditional environment states tells the
// same story from the environment side: coherence survives exactly as long
// as the environment states attached to different pointer components still
// overlap.

#include <optional>
#include <string>
#include <vector>

#include "qdet/hilbert.hpp"

namespace qdet {

// Conditional-environment overlap matrix at one sample time. entries(i,l) is
// the inner product <E_i|E_l> of the normalized environment states attached
// to pointer components i and l; diagonal entries are exactly 1. Components
// whose amplitude is below 1e-12 are flagged absent: their diagonal is set
// to 1 and their off-diagonals to 0, and classification ignores them.
struct OverlapMatrix {
  double time = 0.0;
  Matrix entries;
  std::vector<bool> present;

  // Largest off-diagonal magnitude among present components.
  double max_offdiagonal() const;
};

struct DifferentiationSample {
  double t = 0.0;
  double d_star = 0.0;
};

// Time series of the degree of differentiation of one property of one
// system in one region.
struct DifferentiationReport {
  std::string property;
  std::string system;
  std::string region;
  std::vector<DifferentiationSample> samples;
};

enum class ProcessKind { Reversible, QuasiIrreversible };

struct ProcessEvidence {
  int env_size = 0;
  double recurrence_estimate = 0.0;  // max trailing-window off-diagonal
  double window = 0.0;               // trailing window span actually used
};

struct ProcessClass {
  ProcessKind kind = ProcessKind::Reversible;
  ProcessEvidence evidence;
};

struct CommutativityResult {
  bool passes = false;
  double residual = 0.0;  // ||[H, O]||_F / ||H||_F
};

// Normalized-entropy degree of differentiation: S(rho)/ln(N), clamped to
// [0,1]. N is the full dimension of the reduced space (multiplicities
// count); N >= 2 required.
double degree_of_differentiation(const DensityOperator& rho);

// Conditional environment states of `joint` relative to the pointer
// eigenbasis of `system`. The pointer observable must live on that single
// factor; everything else is treated as the environment.
OverlapMatrix environment_overlaps(const StateVector& joint,
                                   const std::string& system,
                                   const Observable& pointer);

// Frobenius-relative commutator residual between an interaction Hamiltonian
// and a system observable. `o_s` may live on a sub-layout of `h_se`'s
// layout; it is lifted by tensoring with identity on the missing factors.
CommutativityResult commutativity_check(const Observable& h_se,
                                        const Observable& o_s, double tol);

// Classify a sampled overlap series: QuasiIrreversible iff every present
// off-diagonal magnitude stays below eps over the trailing `window` time
// span AND the environment has at least `size_threshold` subsystems.
// Everything else is Reversible. The evidence (window max, env size) rides
// along so callers can log why.
ProcessClass classify_process(const std::vector<OverlapMatrix>& series,
                              int env_size, double eps, double window,
                              int size_threshold);

// Converged degree of differentiation: defined when all samples in the
// trailing window differ by less than eps, in which case the window mean is
// returned; absent otherwise.
std::optional<double> stable_degree(const DifferentiationReport& report,
                                    double eps, double window);

}  // namespace qdet
