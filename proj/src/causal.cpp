#include "qdet/causal.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace qdet {

void Dag::add_node(const std::string& label) {
  if (label.empty()) throw ValidationError("dag node label must be non-empty");
  if (has_node(label))
    throw ValidationError("duplicate dag node '" + label + "'");
  nodes_.push_back(label);
}

bool Dag::has_node(const std::string& label) const {
  return std::find(nodes_.begin(), nodes_.end(), label) != nodes_.end();
}

void Dag::add_edge(const std::string& from, const std::string& to) {
  if (!has_node(from) || !has_node(to))
    throw ValidationError("dag edge references unknown node");
  if (from == to) throw ValidationError("dag edges cannot be self-loops");
  for (const auto& [f, t] : edges_)
    if (f == from && t == to)
      throw ValidationError("duplicate dag edge " + from + " -> " + to);
  edges_.push_back({from, to});
  try {
    topological_order();
  } catch (const ValidationError&) {
    edges_.pop_back();
    throw ValidationError("dag edge " + from + " -> " + to +
                          " would create a cycle");
  }
}

std::vector<std::string> Dag::parents(const std::string& label) const {
  if (!has_node(label)) throw ValidationError("unknown dag node '" + label + "'");
  std::vector<std::string> out;
  for (const auto& [f, t] : edges_)
    if (t == label) out.push_back(f);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> Dag::topological_order() const {
  std::map<std::string, int> indegree;
  for (const auto& n : nodes_) indegree[n] = 0;
  for (const auto& [f, t] : edges_) ++indegree[t];
  std::vector<std::string> ready;
  for (const auto& n : nodes_)
    if (indegree[n] == 0) ready.push_back(n);
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string cur = ready.front();
    ready.erase(ready.begin());
    order.push_back(cur);
    for (const auto& [f, t] : edges_)
      if (f == cur && --indegree[t] == 0) ready.push_back(t);
  }
  if (order.size() != nodes_.size())
    throw ValidationError("dag contains a cycle");
  return order;
}

ProbTable::ProbTable(std::vector<std::string> vars_in, std::vector<int> cards_in)
    : vars(std::move(vars_in)), cards(std::move(cards_in)) {
  if (vars.size() != cards.size())
    throw ValidationError("probability table: one cardinality per variable");
  long long total = 1;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].empty())
      throw ValidationError("probability table: empty variable name");
    for (std::size_t j = i + 1; j < vars.size(); ++j)
      if (vars[i] == vars[j])
        throw ValidationError("probability table: duplicate variable '" +
                              vars[i] + "'");
    if (cards[i] < 1)
      throw ValidationError("probability table: cardinality must be >= 1");
    total *= cards[i];
    if (total > (1 << 24))
      throw ValidationError("probability table too large");
  }
  p.assign(static_cast<std::size_t>(total), 0.0);
}

int ProbTable::var_pos(const std::string& name) const {
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vars[i] == name) return static_cast<int>(i);
  throw ValidationError("probability table has no variable '" + name + "'");
}

int ProbTable::index(const std::vector<int>& assignment) const {
  if (assignment.size() != vars.size())
    throw ValidationError("assignment length does not match table variables");
  int idx = 0;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (assignment[i] < 0 || assignment[i] >= cards[i])
      throw ValidationError("assignment out of range for '" + vars[i] + "'");
    idx = idx * cards[i] + assignment[i];
  }
  return idx;
}

std::vector<int> ProbTable::assignment(int linear) const {
  std::vector<int> out(vars.size());
  for (int i = static_cast<int>(vars.size()) - 1; i >= 0; --i) {
    out[i] = linear % cards[i];
    linear /= cards[i];
  }
  return out;
}

ProbTable ProbTable::marginal(const std::vector<std::string>& keep) const {
  std::vector<std::string> kept_vars;
  std::vector<int> kept_cards;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (std::find(keep.begin(), keep.end(), vars[i]) != keep.end()) {
      kept_vars.push_back(vars[i]);
      kept_cards.push_back(cards[i]);
    }
  }
  for (const auto& k : keep) var_pos(k);  // reject unknown names
  ProbTable out(kept_vars, kept_cards);
  for (int linear = 0; linear < size(); ++linear) {
    const auto full = assignment(linear);
    std::vector<int> sub;
    for (std::size_t i = 0; i < vars.size(); ++i)
      if (std::find(kept_vars.begin(), kept_vars.end(), vars[i]) !=
          kept_vars.end())
        sub.push_back(full[i]);
    out.p[out.index(sub)] += p[linear];
  }
  return out;
}

void ClassicalCausalModel::validate() const {
  for (const auto& n : dag.nodes()) {
    if (!cards.count(n))
      throw ValidationError("model missing cardinality for '" + n + "'");
    if (cards.at(n) < 1)
      throw ValidationError("cardinality of '" + n + "' must be >= 1");
    auto it = cpts.find(n);
    if (it == cpts.end())
      throw ValidationError("model missing conditional table for '" + n + "'");
    const ProbTable& cpt = it->second;
    std::vector<std::string> expect = dag.parents(n);
    expect.push_back(n);
    if (cpt.vars != expect)
      throw ValidationError("conditional table for '" + n +
                            "' must cover its sorted parents then itself");
    for (std::size_t i = 0; i < cpt.vars.size(); ++i)
      if (cpt.cards[i] != cards.at(cpt.vars[i]))
        throw ValidationError("conditional table cardinality mismatch for '" +
                              cpt.vars[i] + "'");
    const int n_card = cards.at(n);
    for (int row = 0; row < cpt.size() / n_card; ++row) {
      double sum = 0.0;
      for (int v = 0; v < n_card; ++v) sum += cpt.p[row * n_card + v];
      if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("conditional table row for '" + n +
                              "' does not sum to 1");
    }
  }
}

ProbTable ClassicalCausalModel::joint() const {
  validate();
  std::vector<std::string> vars = dag.nodes();
  std::vector<int> cds;
  for (const auto& v : vars) cds.push_back(cards.at(v));
  ProbTable out(vars, cds);
  for (int linear = 0; linear < out.size(); ++linear) {
    const auto assign = out.assignment(linear);
    double prod = 1.0;
    for (const auto& n : vars) {
      const ProbTable& cpt = cpts.at(n);
      std::vector<int> sub;
      for (const auto& v : cpt.vars)
        sub.push_back(assign[out.var_pos(v)]);
      prod *= cpt.at(sub);
    }
    out.p[linear] = prod;
  }
  return out;
}

CmcResult cmc_check(const ClassicalCausalModel& model, const ProbTable& joint) {
  model.validate();
  if (joint.vars.size() != model.dag.nodes().size())
    throw ValidationError("joint table does not cover the model variables");
  for (const auto& n : model.dag.nodes()) {
    const int pos = joint.var_pos(n);  // throws if missing
    if (joint.cards[pos] != model.cards.at(n))
      throw ValidationError("joint cardinality mismatch for '" + n + "'");
  }

  // Conditionals come from the joint itself: P(x | pa) = P(x, pa) / P(pa).
  struct NodeMarginals {
    std::string node;
    std::vector<std::string> family;  // parents + node
    ProbTable with_node;
    ProbTable parents_only;
  };
  std::vector<NodeMarginals> node_data;
  for (const auto& n : model.dag.nodes()) {
    std::vector<std::string> parents = model.dag.parents(n);
    std::vector<std::string> family = parents;
    family.push_back(n);
    node_data.push_back(
        {n, family, joint.marginal(family), joint.marginal(parents)});
  }

  double worst = 0.0;
  for (int linear = 0; linear < joint.size(); ++linear) {
    const auto assign = joint.assignment(linear);
    double prod = 1.0;
    bool defined = true;
    for (const auto& nd : node_data) {
      std::vector<int> fam_assign;
      for (const auto& v : nd.with_node.vars)
        fam_assign.push_back(assign[joint.var_pos(v)]);
      std::vector<int> par_assign;
      for (const auto& v : nd.parents_only.vars)
        par_assign.push_back(assign[joint.var_pos(v)]);
      const double denom = nd.parents_only.at(par_assign);
      if (denom < 1e-15) {
        defined = false;
        break;
      }
      prod *= nd.with_node.at(fam_assign) / denom;
    }
    if (!defined) continue;  // undefined conditional: contributes nothing
    worst = std::max(worst, std::abs(joint.p[linear] - prod));
  }
  return {worst <= 1e-9, worst};
}

FactorizabilityResult factorizability_check(const ProbTable& table) {
  if (table.vars.size() != 5)
    throw ValidationError(
        "factorizability check needs a five-variable table (A,B,X,Y,latent)");
  const int na = table.cards[0], nb = table.cards[1];
  const int nx = table.cards[2], ny = table.cards[3], nl = table.cards[4];

  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int l = 0; l < nl; ++l) {
        double sum = 0.0;
        for (int a = 0; a < na; ++a)
          for (int b = 0; b < nb; ++b) sum += table.at({a, b, x, y, l});
        if (std::abs(sum - 1.0) > 1e-9)
          throw ValidationError("conditional table slice is not normalized");
      }

  // Slice marginals.
  auto m_a = [&](int a, int x, int y, int l) {
    double s = 0.0;
    for (int b = 0; b < nb; ++b) s += table.at({a, b, x, y, l});
    return s;
  };
  auto m_b = [&](int b, int x, int y, int l) {
    double s = 0.0;
    for (int a = 0; a < na; ++a) s += table.at({a, b, x, y, l});
    return s;
  };

  double worst = 0.0;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int l = 0; l < nl; ++l) {
        for (int a = 0; a < na; ++a)
          for (int b = 0; b < nb; ++b)
            worst = std::max(worst, std::abs(table.at({a, b, x, y, l}) -
                                             m_a(a, x, y, l) * m_b(b, x, y, l)));
        // The wing marginals may not depend on the far setting.
        for (int a = 0; a < na; ++a)
          worst = std::max(worst,
                           std::abs(m_a(a, x, y, l) - m_a(a, x, 0, l)));
        for (int b = 0; b < nb; ++b)
          worst = std::max(worst,
                           std::abs(m_b(b, x, y, l) - m_b(b, 0, y, l)));
      }
  return {worst <= 1e-9, worst};
}

void QuantumCausalModel::validate() const {
  const SpaceLayout& layout = rho_lambda.layout();
  const int da = layout.dim_of(half_a);
  const int db = layout.dim_of(half_b);
  if (half_a == half_b)
    throw ValidationError("source halves must be distinct factors");
  if (channel_a.dim() != da || channel_b.dim() != db)
    throw ValidationError("wing channel dimension does not match its half");
  if (povm_a.empty() || povm_b.empty())
    throw ValidationError("each wing needs at least one measurement setting");
  for (const auto& [s, povm] : povm_a)
    if (povm.dim() != da)
      throw ValidationError("setting '" + s + "' has wrong dimension");
  for (const auto& [t, povm] : povm_b)
    if (povm.dim() != db)
      throw ValidationError("setting '" + t + "' has wrong dimension");
}

namespace {

const Povm::Element& find_outcome(const Povm& povm, const std::string& label,
                                  const std::string& side) {
  for (int i = 0; i < povm.size(); ++i)
    if (povm.element(i).label == label) return povm.element(i);
  throw ValidationError("unknown outcome '" + label + "' on side " + side);
}

const Povm& find_setting(const std::map<std::string, Povm>& povms,
                         const std::string& setting, const std::string& side) {
  auto it = povms.find(setting);
  if (it == povms.end())
    throw ValidationError("unknown setting '" + setting + "' on side " + side);
  return it->second;
}

DensityOperator propagated(const QuantumCausalModel& m) {
  DensityOperator rho = apply_channel(m.rho_lambda, m.channel_a, {m.half_a});
  return apply_channel(rho, m.channel_b, {m.half_b});
}

double outcome_value(const std::string& label) {
  try {
    std::size_t used = 0;
    const double v = std::stod(label, &used);
    if (used != label.size()) throw std::invalid_argument(label);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("outcome label '" + label +
                          "' is not numeric; correlators need +1/-1 labels");
  }
}

}  // namespace

double qcm_probability(const QuantumCausalModel& m, const std::string& x,
                       const std::string& y, const std::string& s,
                       const std::string& t) {
  m.validate();
  const Povm& pa = find_setting(m.povm_a, s, "A");
  const Povm& pb = find_setting(m.povm_b, t, "B");
  const Matrix& ea = find_outcome(pa, x, "A").op;
  const Matrix& eb = find_outcome(pb, y, "B").op;

  DensityOperator rho = propagated(m);
  const SpaceLayout& layout = rho.layout();
  const Matrix joint_effect = embed_on(layout, ea, {m.half_a}) *
                              embed_on(layout, eb, {m.half_b});
  const Complex tr = (rho.matrix() * joint_effect).trace();
  if (std::abs(tr.imag()) > 1e-9)
    throw IntegrityError("outcome probability came out complex");
  return std::clamp(tr.real(), 0.0, 1.0);
}

double qcm_correlator(const QuantumCausalModel& m, const std::string& s,
                      const std::string& t) {
  m.validate();
  const Povm& pa = find_setting(m.povm_a, s, "A");
  const Povm& pb = find_setting(m.povm_b, t, "B");
  double sum = 0.0, total = 0.0;
  for (int i = 0; i < pa.size(); ++i)
    for (int j = 0; j < pb.size(); ++j) {
      const double p = qcm_probability(m, pa.element(i).label,
                                       pb.element(j).label, s, t);
      sum += outcome_value(pa.element(i).label) *
             outcome_value(pb.element(j).label) * p;
      total += p;
    }
  if (std::abs(total - 1.0) > 1e-9)
    throw IntegrityError("outcome probabilities do not sum to 1");
  return sum;
}

double chsh_from_correlators(double e_ab, double e_abp, double e_apb,
                             double e_apbp) {
  return e_ab - e_abp + e_apb + e_apbp;
}

double chsh(const QuantumCausalModel& m, const std::string& a,
            const std::string& ap, const std::string& b,
            const std::string& bp) {
  return chsh_from_correlators(qcm_correlator(m, a, b), qcm_correlator(m, a, bp),
                               qcm_correlator(m, ap, b),
                               qcm_correlator(m, ap, bp));
}

double classical_chsh_bound() {
  // A deterministic strategy fixes an outcome per setting; 4 per side.
  const int vals[2] = {+1, -1};
  double best = 0.0;
  int counted = 0;
  for (int a0 : vals)
    for (int a1 : vals)
      for (int b0 : vals)
        for (int b1 : vals) {
          ++counted;
          const double s = chsh_from_correlators(
              double(a0 * b0), double(a0 * b1), double(a1 * b0),
              double(a1 * b1));
          best = std::max(best, std::abs(s));
        }
  if (counted != 16)
    throw IntegrityError("strategy enumeration must cover 16 pairs");
  return best;
}

ProbTable deterministic_strategy_table(int ra0, int ra1, int rb0, int rb1) {
  for (int r : {ra0, ra1, rb0, rb1})
    if (r != 1 && r != -1)
      throw ValidationError("deterministic responses must be +1 or -1");
  ProbTable t({"A", "B", "X", "Y", "L"}, {2, 2, 2, 2, 1});
  auto slot = [](int v) { return v == 1 ? 0 : 1; };  // outcome 0 <-> +1
  const int ra[2] = {ra0, ra1};
  const int rb[2] = {rb0, rb1};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      t.at({slot(ra[x]), slot(rb[y]), x, y, 0}) = 1.0;
  return t;
}

QuantumCausalModel singlet_model(const std::map<std::string, double>& settings_a,
                                 const std::map<std::string, double>& settings_b,
                                 int phase_sign) {
  if (phase_sign != 1 && phase_sign != -1)
    throw ValidationError("phase sign must be +1 or -1");
  if (settings_a.empty() || settings_b.empty())
    throw ValidationError("each wing needs at least one setting angle");
  SpaceLayout layout({{"A", 2}, {"B", 2}});
  Vector amps = Vector::Zero(4);
  amps(1) = 1.0 / std::sqrt(2.0);                       // |01>
  amps(2) = double(phase_sign) / std::sqrt(2.0);        // |10>
  QuantumCausalModel m;
  m.rho_lambda = DensityOperator::pure(StateVector(amps, layout));
  m.half_a = "A";
  m.half_b = "B";
  m.channel_a = Channel::identity(2);
  m.channel_b = Channel::identity(2);
  for (const auto& [label, angle] : settings_a)
    m.povm_a.emplace(label, Povm::spin_axis(angle));
  for (const auto& [label, angle] : settings_b)
    m.povm_b.emplace(label, Povm::spin_axis(angle));
  return m;
}

StructureGraph build_endqt_dag(const std::vector<ScenarioEvent>& log) {
  if (log.empty())
    throw ValidationError("determination-capacity graph needs a non-empty log");
  for (const auto& e : log)
    if (e.theory != "endqt")
      throw ValidationError("event log entry from engine '" + e.theory +
                            "'; this graph is defined for endqt runs only");

  const ScenarioEvent* emission = nullptr;
  for (const auto& e : log) {
    if (e.type != "source_emission") continue;
    if (emission != nullptr)
      throw ValidationError("log has more than one source emission");
    emission = &e;
  }
  if (emission == nullptr || emission->systems.size() != 3)
    throw ValidationError(
        "log needs one source_emission event naming source and both wings");
  const std::string source = emission->systems[0];
  const std::string wing_a = emission->systems[1];
  const std::string wing_b = emission->systems[2];

  StructureGraph g;
  g.add_node({source, SystemKind::Initiator, {"source"}, false});
  g.add_node({wing_a, SystemKind::NonGenerator, {"wing_a"}, false});
  g.add_node({wing_b, SystemKind::NonGenerator, {"wing_b"}, false});
  g.add_interaction(source, wing_a, EdgeKind::Udi, true, emission->t);
  g.add_interaction(source, wing_b, EdgeKind::Udi, true, emission->t);

  for (const auto& e : log) {
    if (e.type == "sdc_measurement") {
      if (e.systems.size() != 2)
        throw ValidationError("sdc_measurement must name system and detector");
      const std::string& sys = e.systems[0];
      const std::string& det = e.systems[1];
      if (sys != wing_a && sys != wing_b)
        throw ValidationError("measured system '" + sys +
                              "' is not one of the emitted wings");
      g.add_node({det, SystemKind::Generator,
                  {sys == wing_a ? "wing_a" : "wing_b"}, true});
      g.retire_udi(source, sys, e.t);
      g.add_interaction(det, sys, EdgeKind::Sdi, true, e.t);
    } else if (e.type == "determinate_value") {
      for (const auto& sys : e.systems)
        if (g.has_node(sys)) g.mark_determinate(sys);
    }
  }
  return g;
}

}  // namespace qdet
