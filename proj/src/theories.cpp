#include "qdet/theories.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "qdet/errors.hpp"

namespace qdet {

namespace {

constexpr double kWorldPrune = 1e-12;
constexpr double kWeightTol = 1e-9;
constexpr double kEigenstateTol = 1e-9;

int find_factor(const SpaceLayout& layout, const std::string& label) {
  return layout.has(label) ? layout.index_of(label) : -1;
}

int require_factor(const SpaceLayout& layout, const std::string& label,
                   const char* who) {
  const int i = find_factor(layout, label);
  if (i < 0)
    throw ValidationError(std::string(who) + ": '" + label +
                          "' is not a factor of the state");
  return i;
}

// Marginal probability of each basis site of factor fi.
std::vector<double> site_weights(const StateVector& psi, int fi) {
  const SpaceLayout& l = psi.layout();
  const int d = l.factor(fi).dim;
  const int st = l.stride(fi);
  std::vector<double> w(d, 0.0);
  const Vector& a = psi.amplitudes();
  for (int j = 0; j < a.size(); ++j)
    w[(j / st) % d] += std::norm(a(j));
  return w;
}

// Weight of pointer eigenvector `e` on factor fi and the conditioned
// amplitudes (normalized); weight 0 returns an empty vector.
std::pair<double, Vector> condition_on(const StateVector& psi, int fi,
                                       const Vector& e) {
  const SpaceLayout& l = psi.layout();
  const int d = l.factor(fi).dim;
  const int st = l.stride(fi);
  const Vector& a = psi.amplitudes();
  const int block = st * d;
  const int hi_count = static_cast<int>(a.size()) / block;

  Vector out = Vector::Zero(a.size());
  double weight = 0.0;
  for (int hi = 0; hi < hi_count; ++hi)
    for (int lo = 0; lo < st; ++lo) {
      Complex c = 0.0;
      for (int s = 0; s < d; ++s)
        c += std::conj(e(s)) * a(hi * block + s * st + lo);
      weight += std::norm(c);
      for (int s = 0; s < d; ++s) out(hi * block + s * st + lo) = e(s) * c;
    }
  if (weight <= 0.0) return {0.0, Vector()};
  out /= std::sqrt(weight);
  return {weight, out};
}

void require_pointer_on(const Observable& pointer, const std::string& system,
                        const SpaceLayout& layout, int fi) {
  if (pointer.layout().labels() != std::vector<std::string>{system})
    throw ValidationError("pointer observable must live on factor '" + system +
                          "' alone");
  if (pointer.dim() != layout.factor(fi).dim)
    throw ValidationError("pointer dimension does not match factor '" + system +
                          "'");
}

bool has_udi_between(const StructureGraph& g, const std::string& a,
                     const std::string& b) {
  for (const Edge& e : g.edges())
    if (e.kind == EdgeKind::Udi &&
        ((e.from == a && e.to == b) || (e.from == b && e.to == a)))
      return true;
  return false;
}

}  // namespace

// ---- spontaneous collapse ---------------------------------------------------

void GrwParams::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw ValidationError("grw.lambda must be > 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ValidationError("grw.sigma must be > 0");
}

GrwStepResult grw_step(const StateVector& psi,
                       const std::vector<std::string>& generators, double dt,
                       const GrwParams& params, RngStream& rng, double t0) {
  if (!(dt > 0.0)) throw ValidationError("grw_step: dt must be > 0");
  if (params.lambda < 0.0 || !std::isfinite(params.lambda))
    throw ValidationError("grw_step: lambda must be finite and >= 0");
  if (!(params.sigma > 0.0) || !std::isfinite(params.sigma))
    throw ValidationError("grw_step: sigma must be > 0");

  const SpaceLayout& layout = psi.layout();
  const double hazard = 1.0 - std::exp(-params.lambda * dt);
  Vector amps = psi.amplitudes();
  std::vector<CollapseEvent> events;

  for (const std::string& g : generators) {
    const int fi = require_factor(layout, g, "grw_step");
    const bool hit = rng.uniform() < hazard;
    if (!hit) continue;

    const int d = layout.factor(fi).dim;
    const int st = layout.stride(fi);
    std::vector<double> w(d, 0.0);
    for (int j = 0; j < amps.size(); ++j) w[(j / st) % d] += std::norm(amps(j));
    const int center = rng.pick_weighted(w);

    for (int j = 0; j < amps.size(); ++j) {
      const double x = static_cast<double>((j / st) % d);
      const double dx = x - static_cast<double>(center);
      amps(j) *= std::exp(-dx * dx / (4.0 * params.sigma * params.sigma));
    }
    const double norm = amps.norm();
    if (norm <= 0.0)
      throw IntegrityError("grw_step: collapse annihilated the state");
    amps /= norm;
    events.push_back({g, center, t0 + dt});
  }
  return {StateVector(std::move(amps), layout), std::move(events)};
}

CollapsePropagation grw_collapse_propagate(const StateVector& psi,
                                           const std::string& collapsed,
                                           StructureGraph& graph, double t) {
  const SpaceLayout& layout = psi.layout();
  const int fi = require_factor(layout, collapsed, "grw_collapse_propagate");
  if (!graph.has_node(collapsed))
    throw ValidationError("grw_collapse_propagate: graph has no node '" +
                          collapsed + "'");

  // Exact conditioning on the dominant site of the collapsed factor.
  const std::vector<double> w = site_weights(psi, fi);
  const int outcome = static_cast<int>(
      std::max_element(w.begin(), w.end()) - w.begin());
  Matrix proj = Matrix::Zero(layout.factor(fi).dim, layout.factor(fi).dim);
  proj(outcome, outcome) = 1.0;
  StateVector conditioned = apply_local(psi, proj, {collapsed}, false);

  // Everything reachable through indetermination edges joins the collapse-DS.
  const std::set<EdgeKind> is_kinds{EdgeKind::Udi,
                                    EdgeKind::PotentialDestruction};
  const std::set<std::string> affected = graph.connected_via(collapsed, is_kinds);

  // Breadth-first distances orient the new edges away from the collapse.
  std::map<std::string, int> dist;
  dist[collapsed] = 0;
  std::deque<std::string> queue{collapsed};
  while (!queue.empty()) {
    const std::string cur = queue.front();
    queue.pop_front();
    for (const Edge& e : graph.edges()) {
      if (e.from == e.to) continue;
      if (e.kind != EdgeKind::Udi && e.kind != EdgeKind::PotentialDestruction)
        continue;
      std::string other;
      if (e.from == cur)
        other = e.to;
      else if (e.to == cur)
        other = e.from;
      else
        continue;
      if (dist.count(other)) continue;
      dist[other] = dist[cur] + 1;
      queue.push_back(other);
    }
  }

  CollapsePropagation result{std::move(conditioned), {}};
  for (const std::string& id : affected) {
    const int f = find_factor(layout, id);
    const bool is_factor = f >= 0;
    int value = 0;
    if (is_factor) {
      const std::vector<double> wf = site_weights(result.state, f);
      value = static_cast<int>(std::max_element(wf.begin(), wf.end()) -
                               wf.begin());
      result.values[id] = value;
    }

    const bool has_self_potential = std::any_of(
        graph.edges().begin(), graph.edges().end(), [&](const Edge& e) {
          return e.kind == EdgeKind::PotentialDestruction && e.from == id &&
                 e.to == id;
        });
    if (has_self_potential) {
      if (!is_factor)
        throw IntegrityError(
            "grw_collapse_propagate: node '" + id +
            "' is split across locations but has no lattice factor to decide "
            "the survivor");
      const std::vector<std::string> locations(graph.node(id).locations.begin(),
                                               graph.node(id).locations.end());
      if (value >= static_cast<int>(locations.size()))
        throw IntegrityError("grw_collapse_propagate: node '" + id +
                             "' has no location tag for site " +
                             std::to_string(value));
      graph.promote_destruction(id, locations[value], t);
    }
  }

  // Snapshot first: replace_udi_with_sdi mutates the edge list.
  std::vector<Edge> udis;
  for (const Edge& e : graph.edges())
    if (e.kind == EdgeKind::Udi && affected.count(e.from) &&
        affected.count(e.to))
      udis.push_back(e);
  for (const Edge& e : udis) {
    const bool forward = dist[e.from] <= dist[e.to];
    graph.replace_udi_with_sdi(forward ? e.from : e.to,
                               forward ? e.to : e.from, t);
  }
  for (const std::string& id : affected) graph.mark_determinate(id);
  return result;
}

// ---- many worlds ------------------------------------------------------------

void WorldSet::validate() const {
  double total = 0.0;
  for (const World& w : worlds) {
    if (w.weight < 0.0) throw ValidationError("world weight must be >= 0");
    total += w.weight;
  }
  if (std::abs(total - 1.0) > kWeightTol)
    throw ValidationError("world weights must sum to 1");
}

void WorldSet::prune() {
  worlds.erase(std::remove_if(worlds.begin(), worlds.end(),
                              [](const World& w) {
                                return w.weight < kWorldPrune;
                              }),
               worlds.end());
  double total = 0.0;
  for (const World& w : worlds) total += w.weight;
  if (total <= 0.0) throw IntegrityError("all worlds pruned away");
  for (World& w : worlds) w.weight /= total;
}

WorldSet mwi_branch(const StateVector& psi, const std::string& system,
                    const Observable& pointer, const std::string& property,
                    MwiVariant variant, const StructureGraph& graph,
                    const ProcessClass& evidence, double t,
                    const std::set<std::string>& locals) {
  const SpaceLayout& layout = psi.layout();
  const int fi = require_factor(layout, system, "mwi_branch");
  require_pointer_on(pointer, system, layout, fi);
  if (!graph.has_node(system))
    throw ValidationError("mwi_branch: graph has no node '" + system + "'");

  WorldSet out;
  if (evidence.kind != ProcessKind::QuasiIrreversible) {
    // No stable differentiation, no branching: one world, untouched.
    out.worlds.push_back({1.0, psi, {}, graph});
    return out;
  }

  for (int i = 0; i < pointer.dim(); ++i) {
    const Vector e = pointer.eigenvectors().col(i);
    auto [weight, amps] = condition_on(psi, fi, e);
    if (weight < kWorldPrune) continue;

    World world{weight, StateVector(std::move(amps), layout), {}, graph};
    world.assignments[{system, property}] = pointer.eigenvalues()(i);

    // Who else has a value in this world: each eligible factor whose
    // conditioned reduced state is a pointer eigenstate.
    for (const std::string& other : layout.labels()) {
      if (other == system) continue;
      if (variant == MwiVariant::Local && !locals.count(other)) continue;
      const int oi = require_factor(layout, other, "mwi_branch");
      if (layout.factor(oi).dim != pointer.dim()) continue;
      const DensityOperator rho = reduced_density(world.state, {other});
      for (int j = 0; j < pointer.dim(); ++j) {
        const Vector ej = pointer.eigenvectors().col(j);
        const double p = (ej.adjoint() * rho.matrix() * ej)(0).real();
        if (p > 1.0 - kEigenstateTol) {
          world.assignments[{other, property}] = pointer.eigenvalues()(j);
          break;
        }
      }
    }

    world.graph.mark_determinate(system);
    for (const auto& [key, value] : world.assignments) {
      const std::string& who = key.first;
      if (who == system || !world.graph.has_node(who)) continue;
      if (has_udi_between(world.graph, system, who))
        world.graph.replace_udi_with_sdi(system, who, t);
      else if (variant == MwiVariant::Global)
        world.graph.add_interaction(system, who, EdgeKind::Sdi, true, t);
      world.graph.mark_determinate(who);
    }
    out.worlds.push_back(std::move(world));
  }

  out.prune();
  out.validate();
  return out;
}

std::vector<WorldPair> mwi_pair_worlds(const WorldSet& left,
                                       const WorldSet& right) {
  std::vector<WorldPair> pairs;
  for (int i = 0; i < static_cast<int>(left.worlds.size()); ++i)
    for (int j = 0; j < static_cast<int>(right.worlds.size()); ++j) {
      const double w = left.worlds[i].weight * right.worlds[j].weight;
      if (w >= kWorldPrune) pairs.push_back({w, i, j});
    }
  return pairs;
}

// ---- single-world relationalism ---------------------------------------------

std::optional<RelativeFact> relational_interact(
    RelationalTable& table, const StateVector& base,
    const std::string& observer, const std::string& observed,
    const Observable& pointer, const std::string& property,
    RelationalVariant variant, const std::set<std::string>& generators,
    RngStream& rng, double t) {
  if (observer == observed)
    throw ValidationError("relational_interact: no self-facts");
  if (variant == RelationalVariant::SingleWorld && !generators.count(observer))
    return std::nullopt;

  // The state carrying the records relevant to this reading.
  const StateVector* source = &base;
  if (auto it = table.relative.find(observed); it != table.relative.end())
    source = &it->second;
  else if (auto jt = table.relative.find(observer); jt != table.relative.end())
    source = &jt->second;

  const SpaceLayout& layout = source->layout();
  const int fi = require_factor(layout, observed, "relational_interact");
  require_pointer_on(pointer, observed, layout, fi);

  std::vector<double> weights(pointer.dim());
  std::vector<Vector> branches(pointer.dim());
  for (int i = 0; i < pointer.dim(); ++i) {
    auto [w, amps] = condition_on(*source, fi, pointer.eigenvectors().col(i));
    weights[i] = w;
    branches[i] = std::move(amps);
  }
  const int outcome = rng.pick_weighted(weights);

  RelativeFact fact{observer, observed, property,
                    pointer.eigenvalues()(outcome), t};
  table.relative.insert_or_assign(
      observer, StateVector(std::move(branches[outcome]), layout));
  table.facts.push_back(fact);
  return fact;
}

// ---- determination-capacity propagation --------------------------------------

DcLedger::DcLedger(std::set<std::string> universal_initiators,
                   std::set<std::string> origin_initiators)
    : universal_(std::move(universal_initiators)),
      origins_(std::move(origin_initiators)) {}

DcLedger DcLedger::from_records(std::set<std::string> universal_initiators,
                                std::set<std::string> origin_initiators,
                                std::vector<DcRecord> records) {
  DcLedger ledger(std::move(universal_initiators),
                  std::move(origin_initiators));
  ledger.records_ = std::move(records);
  return ledger;
}

bool DcLedger::is_initiator(const std::string& s) const {
  return universal_.count(s) > 0 || origins_.count(s) > 0;
}

bool DcLedger::holds_dc(const std::string& holder,
                        const std::string& target) const {
  if (universal_.count(holder)) return true;
  for (const DcRecord& r : records_)
    if (r.holder == holder && r.target == target) return true;
  return false;
}

void DcLedger::seed(const std::string& holder, const std::string& target,
                    double t) {
  if (holder == target)
    throw ValidationError("dc ledger: holder and target must differ");
  if (!is_initiator(holder))
    throw ValidationError("dc ledger: only initiators may seed records");
  records_.push_back({holder, target, t, holder});
}

void DcLedger::append(const DcRecord& r) {
  if (r.holder == r.target)
    throw ValidationError("dc ledger: holder and target must differ");
  if (r.via == r.holder) {
    if (!is_initiator(r.holder))
      throw ValidationError("dc ledger: self-granted record from '" +
                            r.holder + "', which is not an initiator");
  } else if (!universal_.count(r.via)) {
    // The grantor needs a DC over the holder that was live at grant time.
    const bool live = std::any_of(
        records_.begin(), records_.end(), [&](const DcRecord& prior) {
          return prior.holder == r.via && prior.target == r.holder &&
                 prior.granted_at <= r.granted_at;
        });
    if (!live)
      throw ValidationError("dc ledger: grantor '" + r.via +
                            "' held no DC over '" + r.holder +
                            "' at grant time");
  }
  records_.push_back(r);
}

bool DcLedger::grounded(std::size_t idx, std::vector<int>& state) const {
  // state: 0 unknown, 1 in progress (cycle), 2 grounded, 3 broken
  if (state[idx] == 2) return true;
  if (state[idx] == 3) return false;
  if (state[idx] == 1) return false;  // cycle: nothing grounds it
  state[idx] = 1;

  const DcRecord& r = records_[idx];
  bool ok = false;
  if (r.via == r.holder) {
    ok = is_initiator(r.holder);
  } else if (universal_.count(r.via)) {
    ok = true;
  } else {
    for (std::size_t j = 0; j < records_.size() && !ok; ++j) {
      if (j == idx) continue;
      const DcRecord& prior = records_[j];
      if (prior.holder == r.via && prior.target == r.holder &&
          prior.granted_at <= r.granted_at)
        ok = grounded(j, state);
    }
  }
  state[idx] = ok ? 2 : 3;
  return ok;
}

void DcLedger::audit() const {
  std::vector<int> state(records_.size(), 0);
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (!grounded(i, state))
      throw IntegrityError("dc ledger: record (" + records_[i].holder +
                           " -> " + records_[i].target +
                           ") has no grant chain back to an initiator");
}

void EnDqtParams::validate() const {
  for (const auto& [label, kind] : initiators) {
    if (label.empty()) throw ValidationError("endqt initiator label empty");
    if (kind != 'A' && kind != 'B')
      throw ValidationError("endqt initiator kind must be 'A' or 'B'");
  }
  if (!(eps > 0.0)) throw ValidationError("endqt.eps must be > 0");
  if (!(window > 0.0)) throw ValidationError("endqt.window must be > 0");
  if (size_threshold < 1)
    throw ValidationError("endqt.size_threshold must be >= 1");
}

DcLedger EnDqtParams::make_ledger() const {
  validate();
  std::set<std::string> universal, origins;
  for (const auto& [label, kind] : initiators)
    (kind == 'A' ? universal : origins).insert(label);
  return DcLedger(std::move(universal), std::move(origins));
}

GrantResult endqt_grant_dc(DcLedger& ledger, const InteractionSchedule& sched,
                           const GrantRequest& req,
                           const ProcessClass& process,
                           const Observable& target_coupling,
                           const Observable& pointer, double t, double tol) {
  if (req.holder == req.grantee || req.grantee == req.target ||
      req.holder == req.target)
    throw ValidationError("endqt_grant_dc: holder, grantee, target must be "
                          "three distinct systems");

  if (!ledger.holds_dc(req.holder, req.grantee))
    return {false, "holder '" + req.holder + "' has no DC over grantee '" +
                       req.grantee + "'"};

  auto touches = [](const ScheduleEntry& e, const std::string& a,
                    const std::string& b) {
    return (e.from == a && e.to == b) || (e.from == b && e.to == a);
  };
  bool timing_ok = false;
  for (const ScheduleEntry& xy : sched.entries) {
    if (!touches(xy, req.holder, req.grantee)) continue;
    for (const ScheduleEntry& yz : sched.entries) {
      if (!touches(yz, req.grantee, req.target)) continue;
      if (xy.start < yz.start && yz.start < xy.end) {
        timing_ok = true;
        break;
      }
    }
    if (timing_ok) break;
  }
  if (!timing_ok)
    return {false, "target '" + req.target +
                       "' does not begin interacting strictly inside the "
                       "holder-grantee interaction window"};

  if (process.kind != ProcessKind::QuasiIrreversible)
    return {false, "grantee decoherence by the holder is not "
                   "quasi-irreversible"};

  const CommutativityResult comm =
      commutativity_check(target_coupling, pointer, tol);
  if (!comm.passes)
    return {false, "target coupling disturbs the pointer states (residual " +
                       std::to_string(comm.residual) + ")"};

  ledger.append({req.grantee, req.target, t, req.holder});
  return {true, ""};
}

DeterminateEvent endqt_determinate_event(const StateVector& psi,
                                         const std::string& holder,
                                         const std::string& target,
                                         const Observable& pointer,
                                         const ProcessClass& process,
                                         const DcLedger& ledger,
                                         StructureGraph& graph, RngStream& rng,
                                         double t) {
  const SpaceLayout& layout = psi.layout();
  const int fi = require_factor(layout, target, "endqt_determinate_event");
  require_pointer_on(pointer, target, layout, fi);
  if (holder == target)
    throw ValidationError("endqt_determinate_event: holder == target");

  if (!ledger.holds_dc(holder, target))
    return {false, "holder '" + holder + "' has no DC over '" + target + "'",
            {}, t, psi};
  if (process.kind != ProcessKind::QuasiIrreversible)
    return {false, "interaction did not decohere the target "
                   "quasi-irreversibly",
            {}, t, psi};
  if (!graph.has_node(holder) || !graph.has_node(target))
    throw ValidationError("endqt_determinate_event: graph is missing the "
                          "holder or target node");

  std::vector<double> weights(pointer.dim());
  std::vector<Vector> branches(pointer.dim());
  for (int i = 0; i < pointer.dim(); ++i) {
    auto [w, amps] = condition_on(psi, fi, pointer.eigenvectors().col(i));
    weights[i] = w;
    branches[i] = std::move(amps);
  }
  const int outcome = rng.pick_weighted(weights);
  const double value = pointer.eigenvalues()(outcome);

  // The determination consumes any undifferentiated link between the pair so
  // the resulting component is purely determination-structured.
  if (has_udi_between(graph, holder, target))
    graph.replace_udi_with_sdi(holder, target, t);
  else
    graph.add_interaction(holder, target, EdgeKind::Sdi, true, t);
  graph.mark_determinate(holder);
  graph.mark_determinate(target);

  DeterminateEvent ev{true,
                      "",
                      {{holder, value}, {target, value}},
                      t,
                      StateVector(std::move(branches[outcome]), layout)};
  return ev;
}

bool composite_holds_dc(const DcLedger& ledger,
                        const std::vector<std::string>& holder_subsystems,
                        const std::string& target,
                        const std::vector<std::string>& target_subsystems) {
  if (holder_subsystems.empty())
    throw ValidationError("composite_holds_dc: composite has no subsystems");
  for (const std::string& sub : holder_subsystems) {
    bool covered = ledger.holds_dc(sub, target);
    for (const std::string& ts : target_subsystems)
      covered = covered || ledger.holds_dc(sub, ts);
    if (!covered) return false;
  }
  return true;
}

}  // namespace qdet
