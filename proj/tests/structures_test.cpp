#include "qdet/structures.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <sstream>

#include "json.hpp"
#include "test_helpers.hpp"

using namespace qdet;

namespace {

SystemNode simple(const std::string& id,
                  SystemKind kind = SystemKind::NonGenerator) {
  return SystemNode{id, kind, {"local"}, false};
}

// Independent partition oracle: breadth-first components over the edge list,
// class from the edge census, indices by smallest member id.
std::map<std::string, ComponentRef> oracle_partition(const StructureGraph& g) {
  auto ids = g.node_ids();
  std::map<std::string, std::set<std::string>> adj;
  for (const auto& id : ids) adj[id];
  for (const auto& e : g.edges()) {
    adj[e.from].insert(e.to);
    adj[e.to].insert(e.from);
  }
  std::set<std::string> visited;
  std::vector<std::set<std::string>> components;
  for (const auto& id : ids) {
    if (visited.count(id)) continue;
    std::set<std::string> comp;
    std::vector<std::string> stack{id};
    while (!stack.empty()) {
      auto cur = stack.back();
      stack.pop_back();
      if (!comp.insert(cur).second) continue;
      visited.insert(cur);
      for (const auto& nxt : adj[cur]) stack.push_back(nxt);
    }
    components.push_back(std::move(comp));
  }
  std::sort(components.begin(), components.end(),
            [](const auto& a, const auto& b) { return *a.begin() < *b.begin(); });

  std::map<std::string, ComponentRef> out;
  int ds = 0, is = 0;
  for (const auto& comp : components) {
    bool has_ds = false, has_is = false;
    for (const auto& e : g.edges()) {
      if (!comp.count(e.from)) continue;
      const bool d =
          e.kind == EdgeKind::Sdi || e.kind == EdgeKind::Destruction;
      (d ? has_ds : has_is) = true;
    }
    REQUIRE_FALSE((has_ds && has_is));  // generator only makes valid graphs
    StructureClass cls;
    if (has_ds)
      cls = StructureClass::Ds;
    else if (has_is)
      cls = StructureClass::Is;
    else
      cls = g.node(*comp.begin()).has_determinate_history ? StructureClass::Ds
                                                          : StructureClass::Is;
    const int index = (cls == StructureClass::Ds) ? ds++ : is++;
    for (const auto& id : comp) out[id] = {cls, index};
  }
  return out;
}

}  // namespace

TEST_CASE("node bookkeeping and validation") {
  StructureGraph g;
  g.add_node(simple("A"));
  REQUIRE(g.has_node("A"));
  REQUIRE_THROWS_AS(g.add_node(simple("A")), ValidationError);
  REQUIRE_THROWS_AS(g.add_node(SystemNode{"", SystemKind::Generator, {"x"}, false}),
                    ValidationError);
  REQUIRE_THROWS_AS(g.add_node(SystemNode{"B", SystemKind::Generator, {}, false}),
                    ValidationError);
  REQUIRE_THROWS_AS(g.node("missing"), ValidationError);
  REQUIRE(SystemNode{"I", SystemKind::Initiator, {"x"}, false}.can_generate());
  REQUIRE_FALSE(simple("N").can_generate());
}

TEST_CASE("edge kind and direction rules") {
  StructureGraph g;
  g.add_node(simple("A"));
  g.add_node(simple("B"));
  REQUIRE_THROWS_AS(g.add_interaction("A", "B", EdgeKind::Sdi, false, 1.0),
                    ValidationError);
  REQUIRE_THROWS_AS(g.add_interaction("A", "B", EdgeKind::Destruction, false, 1.0),
                    ValidationError);
  REQUIRE_THROWS_AS(
      g.add_interaction("A", "B", EdgeKind::PotentialDestruction, true, 1.0),
      ValidationError);
  REQUIRE_THROWS_AS(g.add_interaction("A", "A", EdgeKind::Udi, false, 1.0),
                    ValidationError);
  REQUIRE_THROWS_AS(
      g.add_interaction("A", "A", EdgeKind::PotentialDestruction, false, 1.0),
      ValidationError);  // single location

  g.add_node(SystemNode{"S", SystemKind::NonGenerator, {"up", "down"}, false});
  g.add_interaction("S", "S", EdgeKind::PotentialDestruction, false, 1.0);
  REQUIRE(g.edges().size() == 1);

  // Event clock never runs backwards.
  g.add_interaction("A", "B", EdgeKind::Udi, false, 2.0);
  REQUIRE_THROWS_AS(g.add_interaction("A", "B", EdgeKind::Udi, false, 1.5),
                    IntegrityError);
}

TEST_CASE("nonlocal pair forms an indetermination structure") {
  StructureGraph g;
  g.add_node(simple("A"));
  g.add_node(simple("B"));
  g.add_node(simple("L"));
  g.add_interaction("A", "B", EdgeKind::Udi, false, 0.0);
  auto part = g.partition();
  REQUIRE(part.at("A").cls == StructureClass::Is);
  REQUIRE(part.at("A") == part.at("B"));
  REQUIRE(part.at("L").cls == StructureClass::Is);
  REQUIRE(part.at("L").index != part.at("A").index);
  REQUIRE(oracle_partition(g) == part);
}

TEST_CASE("collapsed wing forms one determination structure") {
  StructureGraph g;
  for (const auto& id : {"A", "B", "E_B", "L_B"}) g.add_node(simple(id));
  g.add_interaction("L_B", "B", EdgeKind::Sdi, true, 1.0);
  g.add_interaction("E_B", "B", EdgeKind::Sdi, true, 1.0);
  g.add_interaction("B", "A", EdgeKind::Sdi, true, 2.0);
  auto part = g.partition();
  for (const auto& id : {"A", "B", "E_B", "L_B"}) {
    REQUIRE(part.at(id).cls == StructureClass::Ds);
    REQUIRE(part.at(id) == part.at("A"));
  }
  REQUIRE(oracle_partition(g) == part);
}

TEST_CASE("fresh nodes are indeterminate singletons, history flips them") {
  StructureGraph g;
  g.add_node(simple("a"));
  g.add_node(simple("b"));
  g.add_node(simple("c"));
  auto part = g.partition();
  REQUIRE(part.at("a") == ComponentRef{StructureClass::Is, 0});
  REQUIRE(part.at("b") == ComponentRef{StructureClass::Is, 1});
  REQUIRE(part.at("c") == ComponentRef{StructureClass::Is, 2});

  g.mark_determinate("b");
  part = g.partition();
  REQUIRE(part.at("b").cls == StructureClass::Ds);
  REQUIRE(oracle_partition(g) == part);
}

TEST_CASE("mixed components are an integrity failure, not repaired") {
  StructureGraph g;
  g.add_node(simple("A"));
  g.add_node(simple("B"));
  g.add_interaction("A", "B", EdgeKind::Udi, false, 0.0);
  g.add_interaction("A", "B", EdgeKind::Sdi, true, 1.0);
  REQUIRE_THROWS_AS(g.partition(), IntegrityError);
}

TEST_CASE("destruction promotion collapses location tags") {
  StructureGraph g;
  g.add_node(SystemNode{"S", SystemKind::NonGenerator, {"down", "up"}, false});
  g.add_interaction("S", "S", EdgeKind::PotentialDestruction, false, 0.5);
  REQUIRE(g.partition().at("S").cls == StructureClass::Is);

  g.promote_destruction("S", "up", 1.0);
  REQUIRE(g.node("S").locations == std::set<std::string>{"up"});
  REQUIRE(g.node("S").has_determinate_history);
  REQUIRE(g.edges().size() == 1);
  const auto& e = g.edges().front();
  REQUIRE(e.kind == EdgeKind::Destruction);
  REQUIRE(e.from_loc == "up");
  REQUIRE(e.to_loc == "down");
  REQUIRE(g.partition().at("S").cls == StructureClass::Ds);

  // Irreversible: no potential edge remains to promote.
  REQUIRE_THROWS_AS(g.promote_destruction("S", "up", 2.0), ValidationError);
}

TEST_CASE("promotion without a potential edge or location is rejected") {
  StructureGraph g;
  g.add_node(SystemNode{"S", SystemKind::NonGenerator, {"a", "b", "c"}, false});
  REQUIRE_THROWS_AS(g.promote_destruction("S", "a", 1.0), ValidationError);
  g.add_interaction("S", "S", EdgeKind::PotentialDestruction, false, 1.0);
  REQUIRE_THROWS_AS(g.promote_destruction("S", "zzz", 2.0), ValidationError);

  const auto before = g.node("S").locations.size();
  g.promote_destruction("S", "b", 2.0);
  REQUIRE(g.node("S").locations.size() <= before - 1);
  REQUIRE(g.edges().size() == 2);  // one destruction edge per destroyed tag
}

TEST_CASE("engine hooks retire or upgrade nonlocal interactions") {
  StructureGraph g;
  g.add_node(simple("A"));
  g.add_node(simple("B"));
  g.add_node(simple("C"));
  g.add_interaction("A", "B", EdgeKind::Udi, false, 0.0);
  g.add_interaction("B", "C", EdgeKind::Udi, false, 0.0);

  g.replace_udi_with_sdi("A", "B", 1.0);
  REQUIRE_THROWS_AS(g.partition(), IntegrityError);  // half-upgraded chain
  g.replace_udi_with_sdi("B", "C", 1.0);
  auto part = g.partition();
  REQUIRE(part.at("A").cls == StructureClass::Ds);
  REQUIRE(part.at("C") == part.at("A"));

  REQUIRE_THROWS_AS(g.retire_udi("A", "B", 2.0), ValidationError);
  g.add_interaction("A", "C", EdgeKind::Udi, false, 3.0);
  g.retire_udi("A", "C", 4.0);
  REQUIRE(g.edges().size() == 2);
}

TEST_CASE("component membership filtered by interaction kind") {
  StructureGraph g;
  for (const auto& id : {"A", "B", "C", "D"}) g.add_node(simple(id));
  g.add_interaction("A", "B", EdgeKind::Udi, false, 0.0);
  g.add_interaction("B", "C", EdgeKind::Udi, true, 1.0);
  g.add_interaction("C", "D", EdgeKind::PotentialDestruction, false, 2.0);
  REQUIRE(g.connected_via("A", {EdgeKind::Udi}) ==
          std::set<std::string>{"A", "B", "C"});
  REQUIRE(g.connected_via("A", {EdgeKind::Udi, EdgeKind::PotentialDestruction}) ==
          std::set<std::string>{"A", "B", "C", "D"});
  REQUIRE(g.connected_via("D", {EdgeKind::Sdi}) == std::set<std::string>{"D"});
}

TEST_CASE("dot export renders styles, classes, and stays parseable") {
  StructureGraph empty;
  REQUIRE(empty.export_dot() == "digraph structure {\n}\n");

  StructureGraph g;
  g.add_node(SystemNode{"S", SystemKind::NonGenerator, {"down", "up"}, false});
  for (const auto& id : {"A", "B", "L"}) g.add_node(simple(id));
  g.add_interaction("A", "B", EdgeKind::Udi, false, 0.0);
  g.add_interaction("S", "S", EdgeKind::PotentialDestruction, false, 0.5);
  REQUIRE_THROWS_AS(g.add_interaction("L", "L2", EdgeKind::Sdi, true, 1.0),
                    ValidationError);  // L2 never added
  g.add_node(simple("L2"));
  g.add_interaction("L", "L2", EdgeKind::Sdi, true, 1.0);
  // interleave: promote the superposed node, then render
  g.promote_destruction("S", "up", 2.0);
  const std::string dot = g.export_dot();

  REQUIRE(dot.find("digraph structure {") == 0);
  REQUIRE(dot.find("style=dashed, dir=none") != std::string::npos);   // udi
  REQUIRE(dot.find("style=solid") != std::string::npos);              // sdi
  REQUIRE(dot.find("style=\"bold,dashed\"") != std::string::npos);    // destruction
  REQUIRE(dot.find("label=\"up>down\"") != std::string::npos);
  REQUIRE(dot.find("\"A\" [color=grey") != std::string::npos);        // IS node
  REQUIRE(dot.find("\"L\" [color=black") != std::string::npos);       // DS node

  // Structural re-parse: line-level node and edge counts survive the trip.
  std::istringstream stream(dot);
  std::string line;
  int node_lines = 0, edge_lines = 0;
  while (std::getline(stream, line)) {
    if (line.find("->") != std::string::npos)
      ++edge_lines;
    else if (line.find("[color=") != std::string::npos)
      ++node_lines;
  }
  REQUIRE(node_lines == static_cast<int>(g.node_ids().size()));
  REQUIRE(edge_lines == static_cast<int>(g.edges().size()));

  REQUIRE(g.export_dot() == dot);  // bit-stable
}

TEST_CASE("json snapshot reflects nodes and edges") {
  StructureGraph g;
  g.add_node(simple("A", SystemKind::Initiator));
  g.add_node(simple("B"));
  g.add_interaction("A", "B", EdgeKind::Sdi, true, 1.5);
  auto j = nlohmann::json::parse(g.to_json());
  REQUIRE(j["nodes"].size() == 2);
  REQUIRE(j["edges"].size() == 1);
  REQUIRE(j["nodes"][0]["id"] == "A");
  REQUIRE(j["nodes"][0]["kind"] == "initiator");
  REQUIRE(j["edges"][0]["kind"] == "sdi");
  REQUIRE(j["edges"][0]["t"] == 1.5);
}

TEST_CASE("partition agrees with the reachability oracle on random graphs") {
  auto gen = testutil::seeded(2718);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    StructureGraph g;
    double clock = 0.0;
    auto tick = [&] { return clock += 0.25; };
    int next_id = 0;
    auto fresh = [&](std::set<std::string> locs) {
      std::string id = "n" + std::to_string(next_id++);
      g.add_node(SystemNode{id, SystemKind::NonGenerator, std::move(locs),
                            u(gen) < 0.2});
      return id;
    };

    const int islands = 1 + static_cast<int>(u(gen) * 4);
    for (int k = 0; k < islands; ++k) {
      const double pick = u(gen);
      if (pick < 0.25) {
        // Isolated node, possibly superposed over its own locations,
        // possibly collapsed afterwards.
        if (u(gen) < 0.5) {
          auto id = fresh({"p", "q"});
          g.add_interaction(id, id, EdgeKind::PotentialDestruction, false,
                            tick());
          if (u(gen) < 0.5) g.promote_destruction(id, "p", tick());
        } else {
          fresh({"local"});
        }
      } else if (pick < 0.6) {
        // Determination island: a small tree of directed stable edges.
        const int size = 2 + static_cast<int>(u(gen) * 3);
        std::vector<std::string> ids;
        for (int i = 0; i < size; ++i) ids.push_back(fresh({"local"}));
        for (int i = 1; i < size; ++i) {
          const int parent = static_cast<int>(u(gen) * i);
          g.add_interaction(ids[parent], ids[i], EdgeKind::Sdi, true, tick());
        }
      } else {
        // Indetermination island: unstable edges, some directed.
        const int size = 2 + static_cast<int>(u(gen) * 3);
        std::vector<std::string> ids;
        for (int i = 0; i < size; ++i) ids.push_back(fresh({"local"}));
        for (int i = 1; i < size; ++i) {
          const int parent = static_cast<int>(u(gen) * i);
          g.add_interaction(ids[parent], ids[i], EdgeKind::Udi, u(gen) < 0.3,
                            tick());
        }
      }
    }

    auto part = g.partition();
    REQUIRE(part == oracle_partition(g));
    REQUIRE(g.partition() == part);  // idempotent

    // Placement rules: every edge sits inside one component of its class.
    for (const auto& e : g.edges()) {
      REQUIRE(part.at(e.from) == part.at(e.to));
      const bool ds =
          e.kind == EdgeKind::Sdi || e.kind == EdgeKind::Destruction;
      REQUIRE(part.at(e.from).cls ==
              (ds ? StructureClass::Ds : StructureClass::Is));
    }
  }
}
