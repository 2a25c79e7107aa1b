#include "qdet/structures.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace qdet {

std::string to_string(SystemKind k) {
  switch (k) {
    case SystemKind::Generator: return "generator";
    case SystemKind::NonGenerator: return "non_generator";
    case SystemKind::Initiator: return "initiator";
  }
  return "?";
}

std::string to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::Sdi: return "sdi";
    case EdgeKind::Udi: return "udi";
    case EdgeKind::PotentialDestruction: return "potential_destruction";
    case EdgeKind::Destruction: return "destruction";
  }
  return "?";
}

std::string to_string(StructureClass c) {
  return c == StructureClass::Ds ? "DS" : "IS";
}

namespace {

bool ds_class(EdgeKind k) {
  return k == EdgeKind::Sdi || k == EdgeKind::Destruction;
}

}  // namespace

void StructureGraph::add_node(SystemNode node) {
  if (node.id.empty()) throw ValidationError("node id must be non-empty");
  if (node.locations.empty())
    throw ValidationError("node '" + node.id + "' needs at least one location");
  if (nodes_.count(node.id))
    throw ValidationError("duplicate node id '" + node.id + "'");
  partition_cache_.reset();
  nodes_.emplace(node.id, std::move(node));
}

bool StructureGraph::has_node(const std::string& id) const {
  return nodes_.count(id) > 0;
}

const SystemNode& StructureGraph::node(const std::string& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw ValidationError("unknown node '" + id + "'");
  return it->second;
}

std::vector<std::string> StructureGraph::node_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, n] : nodes_) out.push_back(id);
  return out;  // std::map iteration is already sorted
}

void StructureGraph::audit_time(double t) {
  if (t < last_event_time_)
    throw IntegrityError("event time moved backwards (" + std::to_string(t) +
                         " after " + std::to_string(last_event_time_) + ")");
  last_event_time_ = t;
}

void StructureGraph::add_interaction(const std::string& from,
                                     const std::string& to, EdgeKind kind,
                                     bool directed, double t) {
  const SystemNode& nf = node(from);
  node(to);
  if ((kind == EdgeKind::Sdi || kind == EdgeKind::Destruction) && !directed)
    throw ValidationError("edge kind " + to_string(kind) + " must be directed");
  if (kind == EdgeKind::PotentialDestruction && directed)
    throw ValidationError("potential destruction edges are undirected");
  if (from == to) {
    if (kind != EdgeKind::PotentialDestruction)
      throw ValidationError("self-loop only legal for potential destruction");
    if (nf.locations.size() < 2)
      throw ValidationError("potential destruction self-loop needs >= 2 locations");
  }
  audit_time(t);
  partition_cache_.reset();
  edges_.push_back({from, to, kind, directed, t, "", ""});
}

void StructureGraph::promote_destruction(const std::string& node_id,
                                         const std::string& surviving_location,
                                         double t) {
  auto it = nodes_.find(node_id);
  if (it == nodes_.end()) throw ValidationError("unknown node '" + node_id + "'");
  SystemNode& n = it->second;
  if (!n.locations.count(surviving_location))
    throw ValidationError("node '" + node_id + "' has no location '" +
                          surviving_location + "'");
  auto self_potential = std::find_if(edges_.begin(), edges_.end(), [&](const Edge& e) {
    return e.kind == EdgeKind::PotentialDestruction && e.from == node_id &&
           e.to == node_id;
  });
  if (self_potential == edges_.end())
    throw ValidationError("node '" + node_id +
                          "' has no potential destruction interaction");
  if (n.locations.size() < 2)
    throw ValidationError("node '" + node_id + "' has nothing to destroy");
  audit_time(t);
  partition_cache_.reset();
  edges_.erase(self_potential);
  for (const std::string& loc : n.locations) {
    if (loc == surviving_location) continue;
    edges_.push_back({node_id, node_id, EdgeKind::Destruction, true, t,
                      surviving_location, loc});
  }
  n.locations = {surviving_location};
  n.has_determinate_history = true;
}

void StructureGraph::retire_udi(const std::string& a, const std::string& b,
                                double t) {
  node(a);
  node(b);
  auto match = [&](const Edge& e) {
    return e.kind == EdgeKind::Udi &&
           ((e.from == a && e.to == b) || (e.from == b && e.to == a));
  };
  if (std::none_of(edges_.begin(), edges_.end(), match))
    throw ValidationError("no udi between '" + a + "' and '" + b + "'");
  audit_time(t);
  partition_cache_.reset();
  edges_.erase(std::remove_if(edges_.begin(), edges_.end(), match), edges_.end());
}

void StructureGraph::replace_udi_with_sdi(const std::string& from,
                                          const std::string& to, double t) {
  retire_udi(from, to, t);
  edges_.push_back({from, to, EdgeKind::Sdi, true, t, "", ""});
}

void StructureGraph::mark_determinate(const std::string& id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw ValidationError("unknown node '" + id + "'");
  partition_cache_.reset();
  it->second.has_determinate_history = true;
}

std::map<std::string, ComponentRef> StructureGraph::partition() const {
  if (partition_cache_) return *partition_cache_;

  // Union-find over all edges (self-loops join nothing).
  std::map<std::string, std::string> parent;
  for (const auto& [id, n] : nodes_) parent[id] = id;
  auto find = [&](const std::string& x) {
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
  for (const Edge& e : edges_) {
    if (e.from == e.to) continue;
    parent[find(e.from)] = find(e.to);
  }

  // Edge-kind census per component.
  std::map<std::string, std::pair<bool, bool>> census;  // root -> (ds, is)
  for (const Edge& e : edges_) {
    auto& c = census[find(e.from)];
    (ds_class(e.kind) ? c.first : c.second) = true;
  }

  // Components keyed by their smallest member id, then numbered per class.
  std::map<std::string, std::vector<std::string>> members;  // root -> ids
  for (const auto& [id, n] : nodes_) members[find(id)].push_back(id);
  std::vector<std::pair<std::string, std::string>> ordered;  // (min id, root)
  for (const auto& [root, ids] : members)
    ordered.push_back({*std::min_element(ids.begin(), ids.end()), root});
  std::sort(ordered.begin(), ordered.end());

  std::map<std::string, ComponentRef> out;
  int next_ds = 0, next_is = 0;
  for (const auto& [min_id, root] : ordered) {
    const auto [has_ds, has_is] = census.count(root)
                                      ? census[root]
                                      : std::pair<bool, bool>{false, false};
    if (has_ds && has_is)
      throw IntegrityError("component containing '" + min_id +
                           "' mixes determination and indetermination edges");
    StructureClass cls;
    if (has_ds) {
      cls = StructureClass::Ds;
    } else if (has_is) {
      cls = StructureClass::Is;
    } else {
      // Edgeless: the node's own history decides.
      cls = nodes_.at(min_id).has_determinate_history ? StructureClass::Ds
                                                      : StructureClass::Is;
    }
    const int index = (cls == StructureClass::Ds) ? next_ds++ : next_is++;
    for (const std::string& id : members[root]) out[id] = {cls, index};
  }
  partition_cache_ = out;
  return out;
}

std::set<std::string> StructureGraph::connected_via(
    const std::string& id, const std::set<EdgeKind>& kinds) const {
  node(id);
  std::set<std::string> seen{id};
  std::vector<std::string> frontier{id};
  while (!frontier.empty()) {
    std::string cur = frontier.back();
    frontier.pop_back();
    for (const Edge& e : edges_) {
      if (!kinds.count(e.kind)) continue;
      std::string next;
      if (e.from == cur)
        next = e.to;
      else if (e.to == cur)
        next = e.from;
      else
        continue;
      if (seen.insert(next).second) frontier.push_back(next);
    }
  }
  return seen;
}

std::string StructureGraph::export_dot() const {
  auto classes = partition();
  std::ostringstream out;
  out << "digraph structure {\n";
  for (const auto& [id, n] : nodes_) {
    const bool ds = classes.at(id).cls == StructureClass::Ds;
    out << "  \"" << id << "\" [color=" << (ds ? "black" : "grey")
        << ", fontcolor=" << (ds ? "black" : "grey") << "];\n";
  }
  std::vector<const Edge*> sorted;
  for (const Edge& e : edges_) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](const Edge* a, const Edge* b) {
    return std::tie(a->from, a->to, a->kind, a->created_at) <
           std::tie(b->from, b->to, b->kind, b->created_at);
  });
  for (const Edge* e : sorted) {
    out << "  \"" << e->from << "\" -> \"" << e->to << "\" [";
    switch (e->kind) {
      case EdgeKind::Sdi:
        out << "style=solid";
        break;
      case EdgeKind::Udi:
        out << "style=dashed" << (e->directed ? "" : ", dir=none");
        break;
      case EdgeKind::PotentialDestruction:
        out << "style=dotted, dir=none";
        break;
      case EdgeKind::Destruction:
        out << "style=\"bold,dashed\"";
        if (!e->from_loc.empty())
          out << ", label=\"" << e->from_loc << ">" << e->to_loc << "\"";
        break;
    }
    out << "];\n";
  }
  out << "}\n";
  return out.str();
}

std::string StructureGraph::to_json() const {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& [id, n] : nodes_) {
    nlohmann::json jn;
    jn["id"] = id;
    jn["kind"] = to_string(n.kind);
    jn["locations"] = n.locations;
    jn["determinate_history"] = n.has_determinate_history;
    j["nodes"].push_back(jn);
  }
  std::vector<const Edge*> sorted;
  for (const Edge& e : edges_) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](const Edge* a, const Edge* b) {
    return std::tie(a->from, a->to, a->kind, a->created_at) <
           std::tie(b->from, b->to, b->kind, b->created_at);
  });
  j["edges"] = nlohmann::json::array();
  for (const Edge* e : sorted) {
    nlohmann::json je;
    je["from"] = e->from;
    je["to"] = e->to;
    je["kind"] = to_string(e->kind);
    je["directed"] = e->directed;
    je["t"] = e->created_at;
    if (!e->from_loc.empty()) {
      je["surviving"] = e->from_loc;
      je["destroyed"] = e->to_loc;
    }
    j["edges"].push_back(je);
  }
  return j.dump(2);
}

}  // namespace qdet
