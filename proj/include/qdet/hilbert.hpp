#pragma once

// Finite-dimensional composite Hilbert spaces: labeled tensor factors, state
// vectors, density operators, observables, POVMs and Kraus channels, plus the
// operations everything else is built on (tensor products, partial trace,
// unitary evolution, entropy).
//
// Tolerance conventions, used consistently below:
//   construction invariants (norm, Hermiticity, trace, positivity)  1e-10
//   completeness sums (POVM resolution, Kraus trace preservation)   1e-9
//   entropy eigenvalue floor (values below this contribute zero)    1e-12

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdet/errors.hpp"

namespace qdet {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

constexpr double kConstructionTol = 1e-10;
constexpr double kCompletenessTol = 1e-9;
constexpr double kEntropyFloor = 1e-12;

struct FactorSpace {
  std::string label;
  int dim = 0;
};

// Ordered list of labeled tensor factors. Factor 0 is the leftmost (most
// significant) slot in the Kronecker-product index convention:
//   linear index = ((i0 * d1 + i1) * d2 + i2) ...
class SpaceLayout {
 public:
  SpaceLayout() = default;
  explicit SpaceLayout(std::vector<FactorSpace> factors);
  static SpaceLayout single(const std::string& label, int dim);

  int total_dim() const { return total_dim_; }
  int factor_count() const { return static_cast<int>(factors_.size()); }
  const FactorSpace& factor(int i) const { return factors_.at(i); }
  const std::vector<FactorSpace>& factors() const { return factors_; }

  bool has(const std::string& label) const;
  int index_of(const std::string& label) const;  // ValidationError if absent
  int dim_of(const std::string& label) const;
  std::vector<std::string> labels() const;

  // Concatenation; duplicate labels are rejected.
  SpaceLayout tensor(const SpaceLayout& other) const;
  // Layout of the given labels, kept in this layout's factor order.
  SpaceLayout subset(const std::vector<std::string>& keep) const;

  // Stride of factor i in the linear index (product of dims to its right).
  int stride(int i) const;

  bool operator==(const SpaceLayout& other) const;
  bool operator!=(const SpaceLayout& other) const { return !(*this == other); }

 private:
  std::vector<FactorSpace> factors_;
  int total_dim_ = 1;
};

// Pure state on a layout; unit norm enforced at construction (1e-10).
class StateVector {
 public:
  StateVector(Vector amplitudes, SpaceLayout layout);
  static StateVector basis_state(const SpaceLayout& layout, int index);

  const Vector& amplitudes() const { return amps_; }
  const SpaceLayout& layout() const { return layout_; }
  int dim() const { return static_cast<int>(amps_.size()); }

  // Equality up to global phase (projector distance), within tol.
  bool approx_equal(const StateVector& other, double tol) const;

 private:
  Vector amps_;
  SpaceLayout layout_;
};

// Mixed state: Hermitian, unit trace, positive semidefinite (all 1e-10).
class DensityOperator {
 public:
  DensityOperator(Matrix m, SpaceLayout layout);
  static DensityOperator pure(const StateVector& psi);
  static DensityOperator maximally_mixed(const SpaceLayout& layout);

  const Matrix& matrix() const { return m_; }
  const SpaceLayout& layout() const { return layout_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  Matrix m_;
  SpaceLayout layout_;
};

// Hermitian operator with cached spectral decomposition. Eigenvalues ascend;
// eigenvector columns are orthonormal (checked to 1e-10 by the solver).
class Observable {
 public:
  Observable(Matrix m, SpaceLayout layout);
  static Observable pauli_z(const std::string& label);
  static Observable pauli_x(const std::string& label);
  // Spin component along (sin theta, 0, cos theta) in the x-z plane.
  static Observable spin_axis(const std::string& label, double theta);

  const Matrix& matrix() const { return m_; }
  const SpaceLayout& layout() const { return layout_; }
  const Eigen::VectorXd& eigenvalues() const { return evals_; }
  const Matrix& eigenvectors() const { return evecs_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  Matrix m_;
  SpaceLayout layout_;
  Eigen::VectorXd evals_;
  Matrix evecs_;
};

// Positive-operator-valued measure: labeled PSD elements summing to identity
// (completeness within 1e-9).
class Povm {
 public:
  struct Element {
    std::string label;
    Matrix op;
  };
  explicit Povm(std::vector<Element> elements);
  // Projective two-outcome measurement along the x-z plane axis at angle
  // theta; outcomes labeled "+1" (aligned) and "-1".
  static Povm spin_axis(double theta);

  int size() const { return static_cast<int>(elements_.size()); }
  const Element& element(int i) const { return elements_.at(i); }
  int dim() const { return static_cast<int>(elements_.front().op.rows()); }

 private:
  std::vector<Element> elements_;
};

// Completely positive trace-preserving map given by Kraus operators
// (sum K^dag K = I within 1e-9).
class Channel {
 public:
  explicit Channel(std::vector<Matrix> kraus);
  static Channel identity(int dim);
  static Channel depolarizing(double p);  // qubit
  static Channel dephasing(double p);     // qubit, z basis

  const std::vector<Matrix>& kraus() const { return kraus_; }
  int dim() const { return static_cast<int>(kraus_.front().rows()); }

 private:
  std::vector<Matrix> kraus_;
};

// ---- operations -----------------------------------------------------------

StateVector tensor(const StateVector& a, const StateVector& b);
DensityOperator tensor(const DensityOperator& a, const DensityOperator& b);
Observable tensor(const Observable& a, const Observable& b);

// Trace out every factor not named in `keep`; result factors stay in the
// original layout order. Keeping all labels returns the input unchanged.
DensityOperator partial_trace(const DensityOperator& rho,
                              const std::vector<std::string>& keep);

// Reduced density operator straight from a pure state, never materializing
// the full-space density matrix (cost dim_keep^2 * dim_rest).
DensityOperator reduced_density(const StateVector& psi,
                                const std::vector<std::string>& keep);

// Full-space unitary evolution; U must be unitary within 1e-9.
StateVector evolve(const StateVector& psi, const Matrix& u);
DensityOperator evolve(const DensityOperator& rho, const Matrix& u);

// Apply an operator acting on the named factors (in the given order) to a
// state, by index arithmetic; `op` is d_targets x d_targets. When
// `check_unitary` is set the operator must be unitary within 1e-9. The result
// is always renormalized, which for non-unitary operators (projections,
// collapse factors) is the conditioning step; an annihilated state is an
// integrity failure.
StateVector apply_local(const StateVector& psi, const Matrix& op,
                        const std::vector<std::string>& targets,
                        bool check_unitary = true);

// Embed an operator on the named factors into the full space (identity
// elsewhere), honoring the full layout's factor order.
Matrix embed_on(const SpaceLayout& full, const Matrix& op,
                const std::vector<std::string>& targets);

// Von Neumann entropy S(rho) = -tr(rho ln rho), natural log. Eigenvalues
// below 1e-12 (including the tolerated tiny negatives) contribute zero.
double von_neumann_entropy(const DensityOperator& rho);

// Apply a channel to the named factors of rho.
DensityOperator apply_channel(const DensityOperator& rho, const Channel& ch,
                              const std::vector<std::string>& targets);

// Outcome probabilities tr(E_i rho); clamped to [0,1], sum checked to 1e-9.
std::vector<double> povm_probabilities(const DensityOperator& rho, const Povm& povm);

// ---- small helpers used across modules -------------------------------------

Matrix pauli_x_matrix();
Matrix pauli_y_matrix();
Matrix pauli_z_matrix();

// exp(-i H t) for Hermitian H, via spectral decomposition.
Matrix hermitian_propagator(const Matrix& h, double t);

bool is_hermitian(const Matrix& m, double tol);
bool is_unitary(const Matrix& m, double tol);

}  // namespace qdet
