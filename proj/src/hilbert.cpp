#include "qdet/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/KroneckerProduct>

#include "qdet/detail/indexing.hpp"

namespace qdet {

using detail::combination_offsets;
using detail::complement_positions;
using detail::positions_of;

// ---- SpaceLayout ------------------------------------------------------------

SpaceLayout::SpaceLayout(std::vector<FactorSpace> factors) : factors_(std::move(factors)) {
  total_dim_ = 1;
  for (const auto& f : factors_) {
    if (f.dim < 1) throw ValidationError("factor '" + f.label + "' has dimension < 1");
    if (f.label.empty()) throw ValidationError("factor label must be non-empty");
    total_dim_ *= f.dim;
  }
  for (std::size_t i = 0; i < factors_.size(); ++i)
    for (std::size_t j = i + 1; j < factors_.size(); ++j)
      if (factors_[i].label == factors_[j].label)
        throw ValidationError("duplicate factor label '" + factors_[i].label + "'");
}

SpaceLayout SpaceLayout::single(const std::string& label, int dim) {
  return SpaceLayout({{label, dim}});
}

bool SpaceLayout::has(const std::string& label) const {
  for (const auto& f : factors_)
    if (f.label == label) return true;
  return false;
}

int SpaceLayout::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < factors_.size(); ++i)
    if (factors_[i].label == label) return static_cast<int>(i);
  throw ValidationError("no factor labeled '" + label + "'");
}

int SpaceLayout::dim_of(const std::string& label) const {
  return factors_[index_of(label)].dim;
}

std::vector<std::string> SpaceLayout::labels() const {
  std::vector<std::string> out;
  out.reserve(factors_.size());
  for (const auto& f : factors_) out.push_back(f.label);
  return out;
}

SpaceLayout SpaceLayout::tensor(const SpaceLayout& other) const {
  std::vector<FactorSpace> merged = factors_;
  merged.insert(merged.end(), other.factors_.begin(), other.factors_.end());
  return SpaceLayout(std::move(merged));  // constructor rejects label collisions
}

SpaceLayout SpaceLayout::subset(const std::vector<std::string>& keep) const {
  std::vector<int> pos = positions_of(*this, keep);
  std::sort(pos.begin(), pos.end());
  if (std::adjacent_find(pos.begin(), pos.end()) != pos.end())
    throw ValidationError("duplicate factor label in subset");
  std::vector<FactorSpace> out;
  out.reserve(pos.size());
  for (int p : pos) out.push_back(factors_[p]);
  return SpaceLayout(std::move(out));
}

int SpaceLayout::stride(int i) const {
  int s = 1;
  for (std::size_t j = i + 1; j < factors_.size(); ++j) s *= factors_[j].dim;
  return s;
}

bool SpaceLayout::operator==(const SpaceLayout& other) const {
  if (factors_.size() != other.factors_.size()) return false;
  for (std::size_t i = 0; i < factors_.size(); ++i)
    if (factors_[i].label != other.factors_[i].label ||
        factors_[i].dim != other.factors_[i].dim)
      return false;
  return true;
}

// ---- StateVector ------------------------------------------------------------

StateVector::StateVector(Vector amplitudes, SpaceLayout layout)
    : amps_(std::move(amplitudes)), layout_(std::move(layout)) {
  if (amps_.size() != layout_.total_dim())
    throw ValidationError("state vector length does not match layout dimension");
  const double norm = amps_.norm();
  if (std::abs(norm - 1.0) > kConstructionTol)
    throw ValidationError("state vector is not normalized");
}

StateVector StateVector::basis_state(const SpaceLayout& layout, int index) {
  if (index < 0 || index >= layout.total_dim())
    throw ValidationError("basis state index out of range");
  Vector v = Vector::Zero(layout.total_dim());
  v(index) = 1.0;
  return StateVector(std::move(v), layout);
}

bool StateVector::approx_equal(const StateVector& other, double tol) const {
  if (layout_ != other.layout_) return false;
  const double overlap = std::abs(amps_.dot(other.amps_));
  return std::abs(overlap - 1.0) <= tol;
}

// ---- DensityOperator ---------------------------------------------------------

DensityOperator::DensityOperator(Matrix m, SpaceLayout layout)
    : m_(std::move(m)), layout_(std::move(layout)) {
  if (m_.rows() != m_.cols() || m_.rows() != layout_.total_dim())
    throw ValidationError("density matrix shape does not match layout dimension");
  if (!is_hermitian(m_, kConstructionTol))
    throw ValidationError("density matrix is not Hermitian");
  if (std::abs(m_.trace().real() - 1.0) > kConstructionTol ||
      std::abs(m_.trace().imag()) > kConstructionTol)
    throw ValidationError("density matrix trace is not 1");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -kConstructionTol)
    throw ValidationError("density matrix has a negative eigenvalue");
}

DensityOperator DensityOperator::pure(const StateVector& psi) {
  Matrix m = psi.amplitudes() * psi.amplitudes().adjoint();
  return DensityOperator(std::move(m), psi.layout());
}

DensityOperator DensityOperator::maximally_mixed(const SpaceLayout& layout) {
  const int d = layout.total_dim();
  Matrix m = Matrix::Identity(d, d) / static_cast<double>(d);
  return DensityOperator(std::move(m), layout);
}

// ---- Observable --------------------------------------------------------------

Observable::Observable(Matrix m, SpaceLayout layout)
    : m_(std::move(m)), layout_(std::move(layout)) {
  if (m_.rows() != m_.cols() || m_.rows() != layout_.total_dim())
    throw ValidationError("observable shape does not match layout dimension");
  if (!is_hermitian(m_, kConstructionTol))
    throw ValidationError("observable is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m_);
  evals_ = es.eigenvalues();
  evecs_ = es.eigenvectors();
}

Observable Observable::pauli_z(const std::string& label) {
  return Observable(pauli_z_matrix(), SpaceLayout::single(label, 2));
}

Observable Observable::pauli_x(const std::string& label) {
  return Observable(pauli_x_matrix(), SpaceLayout::single(label, 2));
}

Observable Observable::spin_axis(const std::string& label, double theta) {
  Matrix m = std::cos(theta) * pauli_z_matrix() + std::sin(theta) * pauli_x_matrix();
  return Observable(std::move(m), SpaceLayout::single(label, 2));
}

// ---- Povm ---------------------------------------------------------------------

Povm::Povm(std::vector<Element> elements) : elements_(std::move(elements)) {
  if (elements_.empty()) throw ValidationError("POVM needs at least one element");
  const auto rows = elements_.front().op.rows();
  Matrix sum = Matrix::Zero(rows, rows);
  for (const auto& e : elements_) {
    if (e.op.rows() != rows || e.op.cols() != rows)
      throw ValidationError("POVM element '" + e.label + "' has inconsistent shape");
    if (!is_hermitian(e.op, kConstructionTol))
      throw ValidationError("POVM element '" + e.label + "' is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Matrix> es(e.op, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kConstructionTol)
      throw ValidationError("POVM element '" + e.label + "' is not positive semidefinite");
    sum += e.op;
  }
  if ((sum - Matrix::Identity(rows, rows)).cwiseAbs().maxCoeff() > kCompletenessTol)
    throw ValidationError("POVM elements do not sum to the identity");
}

Povm Povm::spin_axis(double theta) {
  const Matrix axis = std::cos(theta) * pauli_z_matrix() + std::sin(theta) * pauli_x_matrix();
  const Matrix id = Matrix::Identity(2, 2);
  return Povm({{"+1", 0.5 * (id + axis)}, {"-1", 0.5 * (id - axis)}});
}

// ---- Channel -------------------------------------------------------------------

Channel::Channel(std::vector<Matrix> kraus) : kraus_(std::move(kraus)) {
  if (kraus_.empty()) throw ValidationError("channel needs at least one Kraus operator");
  const auto rows = kraus_.front().rows();
  Matrix sum = Matrix::Zero(rows, rows);
  for (const auto& k : kraus_) {
    if (k.rows() != rows || k.cols() != rows)
      throw ValidationError("Kraus operators have inconsistent shapes");
    sum += k.adjoint() * k;
  }
  if ((sum - Matrix::Identity(rows, rows)).cwiseAbs().maxCoeff() > kCompletenessTol)
    throw ValidationError("Kraus operators do not satisfy the completeness relation");
}

Channel Channel::identity(int dim) {
  return Channel({Matrix::Identity(dim, dim)});
}

Channel Channel::depolarizing(double p) {
  if (p < 0.0 || p > 1.0) throw ValidationError("depolarizing probability must be in [0,1]");
  std::vector<Matrix> ks;
  ks.push_back(std::sqrt(1.0 - 3.0 * p / 4.0) * Matrix::Identity(2, 2));
  ks.push_back(std::sqrt(p / 4.0) * pauli_x_matrix());
  ks.push_back(std::sqrt(p / 4.0) * pauli_y_matrix());
  ks.push_back(std::sqrt(p / 4.0) * pauli_z_matrix());
  return Channel(std::move(ks));
}

Channel Channel::dephasing(double p) {
  if (p < 0.0 || p > 1.0) throw ValidationError("dephasing probability must be in [0,1]");
  return Channel({std::sqrt(1.0 - p) * Matrix::Identity(2, 2),
                  std::sqrt(p) * pauli_z_matrix()});
}

// ---- operations -----------------------------------------------------------------

StateVector tensor(const StateVector& a, const StateVector& b) {
  Vector v = Eigen::kroneckerProduct(a.amplitudes(), b.amplitudes()).eval();
  return StateVector(std::move(v), a.layout().tensor(b.layout()));
}

DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
  Matrix m = Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval();
  return DensityOperator(std::move(m), a.layout().tensor(b.layout()));
}

Observable tensor(const Observable& a, const Observable& b) {
  Matrix m = Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval();
  return Observable(std::move(m), a.layout().tensor(b.layout()));
}

DensityOperator partial_trace(const DensityOperator& rho,
                              const std::vector<std::string>& keep) {
  const SpaceLayout& layout = rho.layout();
  std::vector<int> keep_pos = positions_of(layout, keep);
  std::sort(keep_pos.begin(), keep_pos.end());
  if (std::adjacent_find(keep_pos.begin(), keep_pos.end()) != keep_pos.end())
    throw ValidationError("duplicate factor label in keep list");
  const std::vector<int> rest_pos = complement_positions(layout, keep_pos);

  const std::vector<int> keep_off = combination_offsets(layout, keep_pos);
  const std::vector<int> rest_off = combination_offsets(layout, rest_pos);
  const int dk = static_cast<int>(keep_off.size());

  Matrix out = Matrix::Zero(dk, dk);
  const Matrix& m = rho.matrix();
  for (int i = 0; i < dk; ++i)
    for (int j = 0; j < dk; ++j) {
      Complex acc = 0.0;
      for (int t : rest_off) acc += m(keep_off[i] + t, keep_off[j] + t);
      out(i, j) = acc;
    }
  return DensityOperator(std::move(out), layout.subset(keep));
}

DensityOperator reduced_density(const StateVector& psi,
                                const std::vector<std::string>& keep) {
  const SpaceLayout& layout = psi.layout();
  std::vector<int> keep_pos = positions_of(layout, keep);
  std::sort(keep_pos.begin(), keep_pos.end());
  if (std::adjacent_find(keep_pos.begin(), keep_pos.end()) != keep_pos.end())
    throw ValidationError("duplicate factor label in keep list");
  const std::vector<int> rest_pos = complement_positions(layout, keep_pos);

  const std::vector<int> keep_off = combination_offsets(layout, keep_pos);
  const std::vector<int> rest_off = combination_offsets(layout, rest_pos);
  const int dk = static_cast<int>(keep_off.size());

  const Vector& a = psi.amplitudes();
  Matrix out = Matrix::Zero(dk, dk);
  for (int t : rest_off)
    for (int i = 0; i < dk; ++i) {
      const Complex ai = a(keep_off[i] + t);
      if (ai == Complex(0.0, 0.0)) continue;
      for (int j = 0; j < dk; ++j)
        out(i, j) += ai * std::conj(a(keep_off[j] + t));
    }
  // Clean up the numerically-unavoidable Hermiticity error before validation.
  out = 0.5 * (out + out.adjoint()).eval();
  return DensityOperator(std::move(out), layout.subset(keep));
}

StateVector evolve(const StateVector& psi, const Matrix& u) {
  if (u.rows() != psi.dim() || u.cols() != psi.dim())
    throw ValidationError("unitary dimension does not match state");
  if (!is_unitary(u, kCompletenessTol))
    throw ValidationError("evolution operator is not unitary");
  Vector v = u * psi.amplitudes();
  v /= v.norm();  // keep the constructor's 1e-10 norm gate happy
  return StateVector(std::move(v), psi.layout());
}

DensityOperator evolve(const DensityOperator& rho, const Matrix& u) {
  if (u.rows() != rho.dim() || u.cols() != rho.dim())
    throw ValidationError("unitary dimension does not match density operator");
  if (!is_unitary(u, kCompletenessTol))
    throw ValidationError("evolution operator is not unitary");
  Matrix m = u * rho.matrix() * u.adjoint();
  m = 0.5 * (m + m.adjoint()).eval();
  m /= m.trace().real();
  return DensityOperator(std::move(m), rho.layout());
}

StateVector apply_local(const StateVector& psi, const Matrix& op,
                        const std::vector<std::string>& targets,
                        bool check_unitary) {
  const SpaceLayout& layout = psi.layout();
  const std::vector<int> tpos = positions_of(layout, targets);
  {
    std::vector<int> sorted = tpos;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ValidationError("duplicate factor label in target list");
  }
  int dt = 1;
  for (int p : tpos) dt *= layout.factor(p).dim;
  if (op.rows() != dt || op.cols() != dt)
    throw ValidationError("local operator dimension does not match targets");
  if (check_unitary && !is_unitary(op, kCompletenessTol))
    throw ValidationError("local operator is not unitary");

  std::vector<int> tsorted = tpos;
  std::sort(tsorted.begin(), tsorted.end());
  const std::vector<int> rest_pos = complement_positions(layout, tsorted);
  const std::vector<int> toff = combination_offsets(layout, tpos);
  const std::vector<int> roff = combination_offsets(layout, rest_pos);

  Vector out = Vector::Zero(psi.dim());
  const Vector& a = psi.amplitudes();
  Vector gather(dt);
  for (int r : roff) {
    for (int i = 0; i < dt; ++i) gather(i) = a(r + toff[i]);
    Vector scattered = op * gather;
    for (int i = 0; i < dt; ++i) out(r + toff[i]) = scattered(i);
  }
  // The result is renormalized: for unitaries this only scrubs float noise,
  // for projections/collapse factors it is the conditioning step.
  const double n = out.norm();
  if (n < 1e-15) throw IntegrityError("local operator annihilated the state");
  out /= n;
  return StateVector(std::move(out), layout);
}

Matrix embed_on(const SpaceLayout& full, const Matrix& op,
                const std::vector<std::string>& targets) {
  const std::vector<int> tpos = positions_of(full, targets);
  {
    std::vector<int> sorted = tpos;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ValidationError("duplicate factor label in target list");
  }
  int dt = 1;
  for (int p : tpos) dt *= full.factor(p).dim;
  if (op.rows() != dt || op.cols() != dt)
    throw ValidationError("operator dimension does not match targets");

  std::vector<int> tsorted = tpos;
  std::sort(tsorted.begin(), tsorted.end());
  const std::vector<int> rest_pos = complement_positions(full, tsorted);
  const std::vector<int> toff = combination_offsets(full, tpos);
  const std::vector<int> roff = combination_offsets(full, rest_pos);

  Matrix out = Matrix::Zero(full.total_dim(), full.total_dim());
  for (int r : roff)
    for (int i = 0; i < dt; ++i)
      for (int j = 0; j < dt; ++j) out(r + toff[i], r + toff[j]) = op(i, j);
  return out;
}

double von_neumann_entropy(const DensityOperator& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix(), Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = es.eigenvalues()(i);
    if (l < kEntropyFloor) continue;  // includes the tolerated tiny negatives
    s -= l * std::log(l);
  }
  return s;
}

DensityOperator apply_channel(const DensityOperator& rho, const Channel& ch,
                              const std::vector<std::string>& targets) {
  const SpaceLayout& layout = rho.layout();
  int dt = 1;
  for (const auto& t : targets) dt *= layout.dim_of(t);
  if (ch.dim() != dt)
    throw ValidationError("channel dimension does not match targets");

  Matrix out = Matrix::Zero(rho.dim(), rho.dim());
  for (const Matrix& k : ch.kraus()) {
    const Matrix kf = embed_on(layout, k, targets);
    out += kf * rho.matrix() * kf.adjoint();
  }
  out = 0.5 * (out + out.adjoint()).eval();
  const double tr = out.trace().real();
  if (std::abs(tr - 1.0) > kCompletenessTol)
    throw IntegrityError("channel application did not preserve trace");
  out /= tr;
  return DensityOperator(std::move(out), layout);
}

std::vector<double> povm_probabilities(const DensityOperator& rho, const Povm& povm) {
  if (povm.dim() != rho.dim())
    throw ValidationError("POVM dimension does not match density operator");
  std::vector<double> probs;
  probs.reserve(povm.size());
  double total = 0.0;
  for (int i = 0; i < povm.size(); ++i) {
    double p = (povm.element(i).op * rho.matrix()).trace().real();
    p = std::min(1.0, std::max(0.0, p));
    probs.push_back(p);
    total += p;
  }
  if (std::abs(total - 1.0) > kCompletenessTol)
    throw IntegrityError("POVM probabilities do not sum to 1");
  return probs;
}

// ---- helpers ---------------------------------------------------------------------

Matrix pauli_x_matrix() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Matrix pauli_y_matrix() {
  Matrix m(2, 2);
  m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return m;
}

Matrix pauli_z_matrix() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Matrix hermitian_propagator(const Matrix& h, double t) {
  if (!is_hermitian(h, kConstructionTol))
    throw ValidationError("propagator generator is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  Vector phases(es.eigenvalues().size());
  for (int i = 0; i < phases.size(); ++i)
    phases(i) = std::exp(Complex(0.0, -es.eigenvalues()(i) * t));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

bool is_hermitian(const Matrix& m, double tol) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool is_unitary(const Matrix& m, double tol) {
  const Matrix prod = m.adjoint() * m;
  return (prod - Matrix::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace qdet
