#pragma once

// Interaction-graph engine: systems as nodes, typed interaction edges, and
// the partition of the graph into determination structures (DS) and
// indetermination structures (IS).
//
// Edge kinds and their placement rules:
//   Sdi                  stable differentiation, always directed, DS class
//   Udi                  unstable differentiation, directed or not, IS class
//   PotentialDestruction undirected; the only legal self-loop (a system in
//                        superposition across its own location tags), IS class
//   Destruction          directed, produced by promote_destruction (or added
//                        directly by a collapse engine), DS class
//
// A component mixing DS-class and IS-class edges signals a theory-engine bug
// and is surfaced as an integrity failure, never silently repaired.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qdet/errors.hpp"

namespace qdet {

enum class SystemKind { Generator, NonGenerator, Initiator };
enum class EdgeKind { Sdi, Udi, PotentialDestruction, Destruction };
enum class StructureClass { Ds, Is };

std::string to_string(SystemKind k);
std::string to_string(EdgeKind k);
std::string to_string(StructureClass c);

struct SystemNode {
  std::string id;
  SystemKind kind = SystemKind::NonGenerator;
  std::set<std::string> locations = {"local"};
  // Whether the system already carries a stably determinate value from its
  // past; decides DS vs IS for nodes with no edges.
  bool has_determinate_history = false;

  // Initiators are generators by definition.
  bool can_generate() const { return kind != SystemKind::NonGenerator; }
};

struct Edge {
  std::string from;
  std::string to;
  EdgeKind kind = EdgeKind::Udi;
  bool directed = true;
  double created_at = 0.0;
  // Location tags, filled for destruction edges (surviving -> destroyed).
  std::string from_loc;
  std::string to_loc;
};

struct ComponentRef {
  StructureClass cls = StructureClass::Is;
  int index = 0;
  bool operator==(const ComponentRef&) const = default;
};

class StructureGraph {
 public:
  // Node ids must be unique and non-empty; at least one location tag.
  void add_node(SystemNode node);
  bool has_node(const std::string& id) const;
  const SystemNode& node(const std::string& id) const;
  std::vector<std::string> node_ids() const;  // sorted

  // Adds a typed edge at logical time t. Rules: Sdi and Destruction must be
  // directed; PotentialDestruction must not be; self-loops are legal only
  // for PotentialDestruction on a node with >= 2 location tags. Event times
  // must be non-decreasing across all mutations (IntegrityError otherwise).
  void add_interaction(const std::string& from, const std::string& to,
                       EdgeKind kind, bool directed, double t);

  // Collapse of a superposed system: the PotentialDestruction self-loop is
  // replaced by directed Destruction edges from the surviving location tag
  // to each destroyed tag, the destroyed tags are dropped, and the node's
  // determinate-history flag is set. Irreversible; a second call is
  // rejected (no potential edge remains).
  void promote_destruction(const std::string& node_id,
                           const std::string& surviving_location, double t);

  // Theory-engine hooks: retire a Udi between two systems, or replace it
  // with a directed Sdi (collapse propagation / measurement completion).
  void retire_udi(const std::string& a, const std::string& b, double t);
  void replace_udi_with_sdi(const std::string& from, const std::string& to,
                            double t);
  void mark_determinate(const std::string& id);

  // DS/IS assignment. Components are connected via any edges; a component
  // whose edges are all in {Sdi, Destruction} is a DS, all in {Udi,
  // PotentialDestruction} an IS, and a mix raises IntegrityError. Edgeless
  // nodes are DS iff they carry a determinate history. Component indices
  // count DS and IS separately, ordered by smallest member id.
  std::map<std::string, ComponentRef> partition() const;

  // Members of id's component, restricted to the given edge kinds.
  std::set<std::string> connected_via(const std::string& id,
                                      const std::set<EdgeKind>& kinds) const;

  const std::vector<Edge>& edges() const { return edges_; }
  double last_event_time() const { return last_event_time_; }

  // Deterministic DOT rendering: nodes sorted by id (DS black, IS grey),
  // edges sorted by (from, to, kind, time); solid arrows for Sdi, dashed
  // for Udi, dotted non-directed for PotentialDestruction, bold dashed for
  // Destruction.
  std::string export_dot() const;

  // Deterministic JSON snapshot of nodes and edges.
  std::string to_json() const;

 private:
  void audit_time(double t);

  std::map<std::string, SystemNode> nodes_;
  std::vector<Edge> edges_;
  double last_event_time_ = 0.0;
  mutable std::optional<std::map<std::string, ComponentRef>> partition_cache_;
};

}  // namespace qdet
