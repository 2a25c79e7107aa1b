#include "qdet/decomodels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

namespace qdet {

namespace {

StateVector plus_register(int n, const std::string& prefix) {
  std::vector<FactorSpace> factors;
  for (int k = 0; k < n; ++k)
    factors.push_back({prefix + std::to_string(k), 2});
  SpaceLayout layout(std::move(factors));
  const int dim = layout.total_dim();
  Vector amps = Vector::Constant(dim, Complex(1.0 / std::sqrt(double(dim)), 0.0));
  return StateVector(amps, layout);
}

void check_couplings(const std::vector<double>& g) {
  if (g.empty())
    throw ValidationError("spin environment needs at least one qubit");
  for (double gk : g)
    if (!std::isfinite(gk))
      throw ValidationError("spin environment coupling is not finite");
}

// First vector in [seed, e_0, e_1, ...] orthogonal to everything in `basis`,
// Gram-Schmidt style. Deterministic by construction.
Vector next_orthonormal(const std::vector<Vector>& basis, int dim,
                        const Vector* seed) {
  auto reduce = [&](Vector v) -> Vector {
    for (const Vector& b : basis) v -= b * b.dot(v);
    return v;
  };
  if (seed != nullptr) {
    Vector v = reduce(*seed);
    if (v.norm() > 1e-9) return v / v.norm();
  }
  for (int i = 0; i < dim; ++i) {
    Vector v = reduce(Vector::Unit(dim, i));
    if (v.norm() > 1e-9) return v / v.norm();
  }
  throw IntegrityError("orthonormal extension exhausted the environment space");
}

}  // namespace

SpinEnvironment SpinEnvironment::make(int n, std::uint64_t seed,
                                      const std::string& prefix) {
  if (n < 1) throw ValidationError("spin environment needs at least one qubit");
  RngStream rng(seed, /*stream=*/17);
  std::vector<double> g(n);
  for (double& gk : g) gk = rng.uniform(0.5, 1.5);
  return SpinEnvironment{n, std::move(g), plus_register(n, prefix)};
}

SpinEnvironment SpinEnvironment::with_couplings(std::vector<double> couplings,
                                                const std::string& prefix) {
  check_couplings(couplings);
  const int n = static_cast<int>(couplings.size());
  return SpinEnvironment{n, std::move(couplings), plus_register(n, prefix)};
}

StateVector von_neumann_couple(const StateVector& system,
                               const StateVector& env_ready) {
  if (system.dim() != 2)
    throw ValidationError("von_neumann_couple: system must be a single qubit");
  const int env_dim = env_ready.dim();
  if (env_dim < 2)
    throw ValidationError("von_neumann_couple: environment too small to record");

  const Vector& e0 = env_ready.amplitudes();
  // Orthogonal partner: basis vector least represented in |E0>, made exactly
  // orthogonal to it.
  int pivot = 0;
  for (int i = 1; i < env_dim; ++i)
    if (std::abs(e0(i)) < std::abs(e0(pivot))) pivot = i;
  Vector e1 = Vector::Unit(env_dim, pivot) - e0 * std::conj(e0(pivot));
  e1 /= e1.norm();

  SpaceLayout joint = system.layout().tensor(env_ready.layout());
  Vector amps(joint.total_dim());
  amps.head(env_dim) = system.amplitudes()(0) * e0;
  amps.tail(env_dim) = system.amplitudes()(1) * e1;
  return StateVector(amps, joint);
}

StateVector von_neumann_couple(const StateVector& system,
                               const StateVector& env_ready,
                               const Observable& pointer) {
  const int d = system.dim();
  if (pointer.dim() != d)
    throw ValidationError("von_neumann_couple: pointer dimension mismatch");
  const int env_dim = env_ready.dim();
  if (env_dim < d)
    throw ValidationError(
        "von_neumann_couple: environment smaller than the pointer spectrum");

  const Matrix& basis = pointer.eigenvectors();
  std::vector<Vector> partners;
  partners.push_back(env_ready.amplitudes());
  for (int i = 1; i < d; ++i)
    partners.push_back(next_orthonormal(partners, env_dim, nullptr));

  SpaceLayout joint = system.layout().tensor(env_ready.layout());
  Vector amps = Vector::Zero(joint.total_dim());
  for (int i = 0; i < d; ++i) {
    const Complex c = basis.col(i).dot(system.amplitudes());  // <v_i|psi>
    if (c == Complex(0.0, 0.0)) continue;
    for (int s = 0; s < d; ++s)
      amps.segment(s * env_dim, env_dim) += c * basis(s, i) * partners[i];
  }
  return StateVector(amps, joint);
}

StateVector spin_env_evolve(const StateVector& sys_qubit,
                            const SpinEnvironment& env, double t) {
  if (sys_qubit.dim() != 2)
    throw ValidationError("spin_env_evolve: system must be a single qubit");
  if (t < 0.0) throw ValidationError("spin_env_evolve: t must be >= 0");
  check_couplings(env.couplings);

  SpaceLayout joint = sys_qubit.layout().tensor(env.initial.layout());
  const int env_dim = env.initial.dim();
  const int n = env.n;

  // H is diagonal in the computational basis: eigenvalue s * sum_k g_k z_k
  // with s, z_k = +1 for bit 0 and -1 for bit 1. Phases are exact.
  Eigen::VectorXd env_phase_arg(env_dim);
  for (int r = 0; r < env_dim; ++r) {
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const int bit = (r >> (n - 1 - k)) & 1;
      sum += env.couplings[k] * (bit == 0 ? 1.0 : -1.0);
    }
    env_phase_arg(r) = sum;
  }

  Vector amps(joint.total_dim());
  for (int s = 0; s < 2; ++s) {
    const double sign = (s == 0) ? 1.0 : -1.0;
    for (int r = 0; r < env_dim; ++r) {
      const Complex phase = std::exp(Complex(0.0, -t * sign * env_phase_arg(r)));
      amps(s * env_dim + r) =
          sys_qubit.amplitudes()(s) * env.initial.amplitudes()(r) * phase;
    }
  }
  return StateVector(amps, joint);
}

HamiltonianRegistry HamiltonianRegistry::standard() {
  HamiltonianRegistry reg;
  reg.add_pair("zz", [](int df, int dt_) -> Matrix {
    if (df != 2 || dt_ != 2)
      throw ValidationError("hamiltonian tag 'zz' needs two qubits");
    return Eigen::kroneckerProduct(pauli_z_matrix(), pauli_z_matrix());
  });
  reg.add_pair("ctrl_orth", [](int df, int dt_) -> Matrix {
    if (df != 2 || dt_ != 2)
      throw ValidationError("hamiltonian tag 'ctrl_orth' needs two qubits");
    Matrix proj1 = Matrix::Zero(2, 2);
    proj1(1, 1) = 1.0;
    return Eigen::kroneckerProduct(proj1, pauli_y_matrix());
  });
  reg.add_site("sz", [](int d) -> Matrix {
    if (d != 2) throw ValidationError("hamiltonian tag 'sz' needs a qubit");
    return pauli_z_matrix();
  });
  reg.add_site("sx", [](int d) -> Matrix {
    if (d != 2) throw ValidationError("hamiltonian tag 'sx' needs a qubit");
    return pauli_x_matrix();
  });
  return reg;
}

void HamiltonianRegistry::add_pair(const std::string& tag, PairBuilder b) {
  pair_[tag] = std::move(b);
}
void HamiltonianRegistry::add_site(const std::string& tag, SiteBuilder b) {
  site_[tag] = std::move(b);
}
bool HamiltonianRegistry::has_pair(const std::string& tag) const {
  return pair_.count(tag) > 0;
}
bool HamiltonianRegistry::has_site(const std::string& tag) const {
  return site_.count(tag) > 0;
}
Matrix HamiltonianRegistry::build_pair(const std::string& tag, int dim_from,
                                       int dim_to) const {
  auto it = pair_.find(tag);
  if (it == pair_.end())
    throw ValidationError("unknown pair hamiltonian tag '" + tag + "'");
  return it->second(dim_from, dim_to);
}
Matrix HamiltonianRegistry::build_site(const std::string& tag, int dim) const {
  auto it = site_.find(tag);
  if (it == site_.end())
    throw ValidationError("unknown single-site hamiltonian tag '" + tag + "'");
  return it->second(dim);
}

namespace {

// One group of factors evolving jointly within a schedule segment.
struct ClusterOp {
  std::vector<std::string> labels;  // in full-layout order
  Matrix h;
  bool diagonal = false;
  Matrix evecs;            // spectral data when not diagonal
  Eigen::VectorXd evals;
};

// Applies exp(-i h tau) for a diagonal cluster Hamiltonian directly to the
// amplitude vector (O(total_dim), no matrix work).
void apply_diagonal_phases(Vector& amps, const SpaceLayout& full,
                           const ClusterOp& op, double tau) {
  const int k = static_cast<int>(op.labels.size());
  std::vector<int> stride_full(k), dim(k), stride_sub(k);
  int sub_dim = 1;
  for (int j = k - 1; j >= 0; --j) {
    const int pos = full.index_of(op.labels[j]);
    stride_full[j] = full.stride(pos);
    dim[j] = full.factor(pos).dim;
    stride_sub[j] = sub_dim;
    sub_dim *= dim[j];
  }
  Vector phase(sub_dim);
  for (int s = 0; s < sub_dim; ++s)
    phase(s) = std::exp(Complex(0.0, -tau * op.h(s, s).real()));
  for (int idx = 0; idx < amps.size(); ++idx) {
    int sub = 0;
    for (int j = 0; j < k; ++j)
      sub += ((idx / stride_full[j]) % dim[j]) * stride_sub[j];
    amps(idx) *= phase(sub);
  }
}

std::vector<ClusterOp> build_clusters(
    const std::vector<const ScheduleEntry*>& active, const SpaceLayout& full,
    const HamiltonianRegistry& registry) {
  // Union-find over the labels touched by the active entries.
  std::map<std::string, std::string> parent;
  auto find_root = [&](const std::string& x) {
    if (parent.find(x) == parent.end()) parent[x] = x;
    std::string r = x;
    while (parent[r] != r) r = parent[r];
    std::string c = x;
    while (parent[c] != r) {
      std::string nxt = parent[c];
      parent[c] = r;
      c = nxt;
    }
    return r;
  };
  for (const auto* e : active) {
    find_root(e->from);
    if (e->to != e->from) parent[find_root(e->to)] = find_root(e->from);
  }

  std::map<std::string, std::vector<const ScheduleEntry*>> groups;
  for (const auto* e : active) groups[find_root(e->from)].push_back(e);

  std::vector<ClusterOp> out;
  for (auto& [root, members] : groups) {
    std::set<std::string> involved;
    for (const auto* e : members) {
      involved.insert(e->from);
      involved.insert(e->to);
    }
    ClusterOp op;
    for (const auto& f : full.factors())
      if (involved.count(f.label)) op.labels.push_back(f.label);
    SpaceLayout cluster = full.subset(op.labels);
    op.h = Matrix::Zero(cluster.total_dim(), cluster.total_dim());
    for (const auto* e : members) {
      Matrix term =
          (e->from == e->to)
              ? registry.build_site(e->tag, full.dim_of(e->from))
              : registry.build_pair(e->tag, full.dim_of(e->from),
                                    full.dim_of(e->to));
      std::vector<std::string> on = (e->from == e->to)
                                        ? std::vector<std::string>{e->from}
                                        : std::vector<std::string>{e->from, e->to};
      op.h += e->strength * embed_on(cluster, term, on);
    }
    double offdiag = 0.0;
    for (int r = 0; r < op.h.rows(); ++r)
      for (int c = 0; c < op.h.cols(); ++c)
        if (r != c) offdiag = std::max(offdiag, std::abs(op.h(r, c)));
    op.diagonal = offdiag < 1e-14;
    if (!op.diagonal) {
      Eigen::SelfAdjointEigenSolver<Matrix> solver(op.h);
      op.evecs = solver.eigenvectors();
      op.evals = solver.eigenvalues();
    }
    out.push_back(std::move(op));
  }
  return out;
}

}  // namespace

std::vector<TrajectoryPoint> run_schedule(const StateVector& initial,
                                          const InteractionSchedule& sched,
                                          double dt,
                                          const HamiltonianRegistry& registry,
                                          double t_end) {
  if (dt <= 0.0) throw ValidationError("run_schedule: dt must be > 0");
  const SpaceLayout& full = initial.layout();
  double max_end = 0.0;
  double prev_start = -1.0e300;
  for (const auto& e : sched.entries) {
    if (!(e.start < e.end))
      throw ValidationError("run_schedule: entry must have start < end");
    if (e.start < prev_start)
      throw ValidationError("run_schedule: entries must be ordered by start");
    prev_start = e.start;
    if (e.start < 0.0)
      throw ValidationError("run_schedule: negative start time");
    if (!std::isfinite(e.strength))
      throw ValidationError("run_schedule: entry strength is not finite");
    if (!full.has(e.from) || !full.has(e.to))
      throw ValidationError("run_schedule: entry party '" + e.from + "'/'" +
                            e.to + "' not in the state layout");
    if (e.from == e.to) {
      if (!registry.has_site(e.tag))
        throw ValidationError("run_schedule: unknown single-site tag '" +
                              e.tag + "'");
    } else if (!registry.has_pair(e.tag)) {
      throw ValidationError("run_schedule: unknown pair tag '" + e.tag + "'");
    }
    max_end = std::max(max_end, e.end);
  }
  const double horizon = (t_end < 0.0) ? max_end : t_end;

  // Time points: every sample time plus every entry boundary, deduplicated.
  constexpr double kTimeTol = 1e-12;
  std::vector<std::pair<double, bool>> points;  // (time, is_sample)
  for (int k = 0;; ++k) {
    const double t = k * dt;
    if (t > horizon + kTimeTol) break;
    points.push_back({t, true});
  }
  if (points.empty() || points.back().first < horizon - kTimeTol)
    points.push_back({horizon, true});
  for (const auto& e : sched.entries) {
    for (double b : {e.start, e.end})
      if (b > kTimeTol && b < horizon - kTimeTol) points.push_back({b, false});
  }
  std::sort(points.begin(), points.end());
  std::vector<std::pair<double, bool>> merged;
  for (const auto& p : points) {
    if (!merged.empty() && p.first - merged.back().first < kTimeTol)
      merged.back().second = merged.back().second || p.second;
    else
      merged.push_back(p);
  }

  std::vector<TrajectoryPoint> traj;
  Vector amps = initial.amplitudes();
  if (merged.front().second) traj.push_back({merged.front().first, initial});

  // Cluster structure is reused while the active entry set stays the same.
  std::vector<int> cached_signature{-1};
  std::vector<ClusterOp> clusters;
  for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
    const double a = merged[i].first, b = merged[i + 1].first;
    const double mid = 0.5 * (a + b);
    std::vector<const ScheduleEntry*> active;
    std::vector<int> signature;
    for (std::size_t k = 0; k < sched.entries.size(); ++k) {
      const auto& e = sched.entries[k];
      if (e.start <= mid && mid < e.end) {
        active.push_back(&e);
        signature.push_back(static_cast<int>(k));
      }
    }
    if (signature != cached_signature) {
      clusters = build_clusters(active, full, registry);
      cached_signature = signature;
    }
    const double tau = b - a;
    for (const auto& op : clusters) {
      if (op.diagonal) {
        apply_diagonal_phases(amps, full, op, tau);
      } else {
        Vector phases(op.evals.size());
        for (int j = 0; j < op.evals.size(); ++j)
          phases(j) = std::exp(Complex(0.0, -tau * op.evals(j)));
        Matrix u = op.evecs * phases.asDiagonal() * op.evecs.adjoint();
        StateVector tmp = apply_local(StateVector(amps, full), u, op.labels);
        amps = tmp.amplitudes();
      }
    }
    if (merged[i + 1].second) traj.push_back({b, StateVector(amps, full)});
  }
  return traj;
}

}  // namespace qdet
