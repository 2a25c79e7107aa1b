#include "qdet/differentiation.hpp"

#include <algorithm>
#include <cmath>

#include "qdet/detail/indexing.hpp"

namespace qdet {

double OverlapMatrix::max_offdiagonal() const {
  double best = 0.0;
  for (int i = 0; i < entries.rows(); ++i) {
    if (!present[i]) continue;
    for (int l = 0; l < entries.cols(); ++l) {
      if (l == i || !present[l]) continue;
      best = std::max(best, std::abs(entries(i, l)));
    }
  }
  return best;
}

double degree_of_differentiation(const DensityOperator& rho) {
  const int n = rho.dim();
  if (n < 2)
    throw ValidationError("degree of differentiation needs dimension >= 2");
  const double d = von_neumann_entropy(rho) / std::log(static_cast<double>(n));
  return std::clamp(d, 0.0, 1.0);
}

OverlapMatrix environment_overlaps(const StateVector& joint,
                                   const std::string& system,
                                   const Observable& pointer) {
  const SpaceLayout& layout = joint.layout();
  const int sys_pos = layout.index_of(system);
  const int sys_dim = layout.factor(sys_pos).dim;
  if (pointer.dim() != sys_dim)
    throw ValidationError("pointer observable dimension does not match system factor");
  if (layout.factor_count() < 2)
    throw ValidationError("joint state has no environment factors");

  const std::vector<int> sys_off = detail::combination_offsets(layout, {sys_pos});
  const std::vector<int> env_off =
      detail::complement_positions(layout, {sys_pos});
  const std::vector<int> rest_off = detail::combination_offsets(layout, env_off);
  const int env_dim = static_cast<int>(rest_off.size());

  // Conditional (unnormalized) environment vectors: contract the system index
  // against each pointer eigenvector.
  const Matrix& basis = pointer.eigenvectors();
  std::vector<Vector> env_states(sys_dim);
  std::vector<double> amps(sys_dim, 0.0);
  for (int i = 0; i < sys_dim; ++i) {
    Vector e = Vector::Zero(env_dim);
    for (int s = 0; s < sys_dim; ++s) {
      const Complex coeff = std::conj(basis(s, i));
      if (coeff == Complex(0.0, 0.0)) continue;
      for (int r = 0; r < env_dim; ++r)
        e(r) += coeff * joint.amplitudes()(sys_off[s] + rest_off[r]);
    }
    amps[i] = e.norm();
    env_states[i] = std::move(e);
  }

  OverlapMatrix out;
  out.entries = Matrix::Identity(sys_dim, sys_dim);
  out.present.assign(sys_dim, false);
  for (int i = 0; i < sys_dim; ++i) {
    if (amps[i] < 1e-12) continue;  // component absent from the superposition
    out.present[i] = true;
    env_states[i] /= amps[i];
  }
  for (int i = 0; i < sys_dim; ++i)
    for (int l = 0; l < sys_dim; ++l) {
      if (i == l) continue;
      out.entries(i, l) = (out.present[i] && out.present[l])
                              ? env_states[i].dot(env_states[l])
                              : Complex(0.0, 0.0);
    }
  return out;
}

CommutativityResult commutativity_check(const Observable& h_se,
                                        const Observable& o_s, double tol) {
  Matrix lifted;
  if (o_s.layout() == h_se.layout()) {
    lifted = o_s.matrix();
  } else {
    // Lift the system observable into the joint space (identity elsewhere).
    lifted = embed_on(h_se.layout(), o_s.matrix(), o_s.layout().labels());
  }
  const double h_norm = h_se.matrix().norm();
  if (h_norm < 1e-15)
    throw ValidationError("commutativity check against a zero Hamiltonian");
  const Matrix comm = h_se.matrix() * lifted - lifted * h_se.matrix();
  CommutativityResult res;
  res.residual = comm.norm() / h_norm;
  res.passes = res.residual <= tol;
  return res;
}

ProcessClass classify_process(const std::vector<OverlapMatrix>& series,
                              int env_size, double eps, double window,
                              int size_threshold) {
  if (series.empty()) throw ValidationError("classify_process: empty overlap series");
  if (eps <= 0.0 || window <= 0.0)
    throw ValidationError("classify_process: eps and window must be positive");
  if (size_threshold < 1)
    throw ValidationError("classify_process: size threshold must be >= 1");
  for (std::size_t k = 1; k < series.size(); ++k)
    if (series[k].time <= series[k - 1].time)
      throw ValidationError("classify_process: sample times must strictly increase");

  const double t_last = series.back().time;
  double window_max = 0.0;
  for (const auto& sample : series) {
    if (sample.time < t_last - window) continue;
    window_max = std::max(window_max, sample.max_offdiagonal());
  }

  ProcessClass out;
  out.evidence = {env_size, window_max, window};
  const bool pinned = window_max < eps;
  const bool big_enough = env_size >= size_threshold;
  out.kind = (pinned && big_enough) ? ProcessKind::QuasiIrreversible
                                    : ProcessKind::Reversible;
  return out;
}

std::optional<double> stable_degree(const DifferentiationReport& report,
                                    double eps, double window) {
  if (report.samples.empty())
    throw ValidationError("stable_degree: report has no samples");
  if (eps <= 0.0 || window <= 0.0)
    throw ValidationError("stable_degree: eps and window must be positive");
  for (std::size_t k = 1; k < report.samples.size(); ++k)
    if (report.samples[k].t <= report.samples[k - 1].t)
      throw ValidationError("stable_degree: sample times must strictly increase");

  const double t_last = report.samples.back().t;
  double lo = 1.0e300, hi = -1.0e300, sum = 0.0;
  int count = 0;
  for (const auto& s : report.samples) {
    if (s.t < t_last - window) continue;
    lo = std::min(lo, s.d_star);
    hi = std::max(hi, s.d_star);
    sum += s.d_star;
    ++count;
  }
  if (count == 0 || hi - lo >= eps) return std::nullopt;
  return sum / count;
}

}  // namespace qdet
