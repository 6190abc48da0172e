#include <catch2/catch_amalgamated.hpp>

#include "polybound/program.hpp"
#include "polybound/util.hpp"

using namespace polybound;

namespace {

CausalGraph canon(const std::string& text) { return canonicalize(parse_graph(text)); }

const char* kIv = "edges: Z -> X; X -> Y; U -> X; U -> Y\nlatent: U\ncard: Z=2, X=2, Y=2\n";
const char* kSix =
    "edges: A -> B; B -> C; C -> D; A -> E; E -> C; D -> F\n"
    "edges: U1 -> B; U1 -> D; U2 -> A; U2 -> C; U2 -> E; U3 -> D; U3 -> F\n"
    "latent: U1, U2, U3\ncard: A=2, B=2, C=2, D=2, E=2, F=2\n";
const char* kMediation =
    "edges: U1 -> V1; U23 -> V2; U23 -> V3; V1 -> V2; V2 -> V3; V1 -> V3\n"
    "latent: U1, U23\ncard: V1=2, V2=2, V3=2\n";

//! Full factual joint of a model at an arbitrary rational parameter point,
//! as an evidence structure (cells sum to one by construction).
EvidenceInfo joint_evidence(const CausalGraph& g, unsigned seed) {
  auto fm = reduce_deterministic(build_functional_model(g), g);
  Rng rng(seed);
  std::vector<Rat> x(fm.n_params);
  for (const auto& d : fm.dists) {
    long long total = 0;
    std::vector<long long> w(d.size());
    for (int e = 0; e < d.size(); ++e) {
      w[e] = 1 + static_cast<long long>(rng.uniform01() * 100);
      total += w[e];
    }
    for (int e = 0; e < d.size(); ++e) x[d.param_offset + e] = Rat(w[e], total);
  }
  EvidenceInfo ev;
  int n = g.n_main();
  std::vector<int> radices;
  for (int v = 0; v < n; ++v) radices.push_back(g.card(v));
  long long cells = 1;
  for (int r : radices) cells *= r;
  for (long long t = 0; t < cells; ++t) {
    auto tuple = index_to_tuple(static_cast<std::size_t>(t), radices);
    EvidenceCell cell;
    std::vector<Event> events;
    for (int v = 0; v < n; ++v) {
      events.push_back(Event{v, {}, tuple[v]});
      if (!cell.key.empty()) cell.key += ",";
      cell.key += g.main_vars[v] + "=" + std::to_string(tuple[v]);
    }
    cell.events = events;
    cell.value = polynomialize(events, fm).poly.eval_exact(x);
    cell.group = 0;
    ev.cells.push_back(std::move(cell));
  }
  ev.n_groups = 1;
  return ev;
}

int active_params(const PolynomialProgram& p) {
  int n = 0;
  for (int v = 0; v < p.fm.n_params; ++v)
    if (p.active[v]) ++n;
  return n;
}

}  // namespace

TEST_CASE("IV program with district factoring is linear in 16+2 parameters") {
  auto g = canon(kIv);
  auto ev = joint_evidence(g, 1);
  auto p = build_program(g, ev, {}, "ATE(X,Y)");
  REQUIRE(p.fm.n_params == 18);
  REQUIRE(classify(p) == ProgramClass::Linear);
  REQUIRE_FALSE(p.objective_aux.has_value());
  for (const auto& c : p.constraints) REQUIRE(c.poly.degree() <= 1);
}

TEST_CASE("IV program with naive evidence is bilinear") {
  auto g = canon(kIv);
  auto ev = joint_evidence(g, 1);
  BuildOptions opts;
  opts.naive_evidence = true;
  auto p = build_program(g, ev, {}, "ATE(X,Y)", opts);
  REQUIRE(classify(p) == ProgramClass::Poly);
  int raw_cells = 0;
  for (const auto& c : p.constraints)
    if (c.evidence_cell >= 0) ++raw_cells;
  REQUIRE(raw_cells == 8);
}

TEST_CASE("fractional estimand introduces a boxed auxiliary") {
  auto g = canon(kIv);
  auto ev = joint_evidence(g, 2);
  std::string late =
      "(P(Y(X=1)=1, X(Z=0)=0, X(Z=1)=1) - P(Y(X=0)=1, X(Z=0)=0, X(Z=1)=1))"
      " / P(X(Z=0)=0, X(Z=1)=1)";
  auto p = build_program(g, ev, {}, late);
  REQUIRE(p.objective_aux.has_value());
  REQUIRE(p.vars[*p.objective_aux].lo == -1.0);
  REQUIRE(p.vars[*p.objective_aux].hi == 1.0);
  REQUIRE(classify(p) == ProgramClass::Poly);
  bool found_side = false;
  for (const auto& c : p.constraints)
    if (c.label == "estimand fraction") {
      found_side = true;
      REQUIRE(c.poly.degree() == 2);
    }
  REQUIRE(found_side);
}

TEST_CASE("six-node naive build has 64 degree-3 evidence equalities") {
  auto g = canon(kSix);
  auto ev = joint_evidence(g, 3);
  BuildOptions opts;
  opts.naive_evidence = true;
  auto p = build_program(g, ev, {}, "ATE(E,C)", opts);
  int raw_cells = 0;
  int deg3 = 0;
  for (const auto& c : p.constraints)
    if (c.evidence_cell >= 0) {
      ++raw_cells;
      if (c.poly.degree() == 3) ++deg3;
    }
  REQUIRE(raw_cells == 64);
  REQUIRE(deg3 == 64);
  REQUIRE(classify(p) == ProgramClass::Poly);
}

TEST_CASE("six-node district build simplifies to a linear program over 128 parameters") {
  auto g = canon(kSix);
  auto ev = joint_evidence(g, 3);
  auto p = simplify(build_program(g, ev, {}, "ATE(E,C)"));
  REQUIRE(active_params(p) == 128);
  for (const auto& c : p.constraints) REQUIRE(c.poly.degree() <= 1);
  REQUIRE(classify(p) == ProgramClass::Linear);
}

TEST_CASE("mediation simplify drops the treatment district") {
  auto g = canon(kMediation);
  auto ev = joint_evidence(g, 4);
  auto p = simplify(build_program(g, ev, {}, "ATE(V2,V3)"));
  int u1 = p.fm.dist_index("U1");
  for (int e = 0; e < p.fm.dists[u1].size(); ++e)
    REQUIRE(p.active[p.fm.param_id(u1, e)] == 0);
  // remaining parameters all interact with the objective
  REQUIRE(active_params(p) == 64);
}

TEST_CASE("fully connected single-district program is untouched by simplify") {
  auto g = canon("edges: X -> Y; U -> X; U -> Y\nlatent: U\ncard: X=2, Y=2\n");
  auto ev = joint_evidence(g, 5);
  auto p0 = build_program(g, ev, {}, "ATE(X,Y)");
  auto p1 = simplify(p0);
  REQUIRE(p1.constraints.size() == p0.constraints.size());
  REQUIRE(active_params(p1) == p0.fm.n_params);
}

TEST_CASE("build is deterministic") {
  auto g = canon(kIv);
  auto ev = joint_evidence(g, 6);
  auto a = build_program(g, ev, {"P(X(Z=0)=1, X(Z=1)=0) = 0"}, "ATE(X,Y)");
  auto b = build_program(g, ev, {"P(X(Z=0)=1, X(Z=1)=0) = 0"}, "ATE(X,Y)");
  REQUIRE(a.constraints.size() == b.constraints.size());
  for (std::size_t i = 0; i < a.constraints.size(); ++i) {
    REQUIRE(a.constraints[i].poly == b.constraints[i].poly);
    REQUIRE(a.constraints[i].rhs == b.constraints[i].rhs);
  }
  REQUIRE(a.objective == b.objective);
}

TEST_CASE("assumptions become tagged polynomial rows") {
  auto g = canon(kIv);
  auto ev = joint_evidence(g, 7);
  auto p = build_program(g, ev, {"P(X(Z=0)=1, X(Z=1)=0) = 0", "ATE(X,Y) >= 0"}, "ATE(X,Y)");
  int n_assume = 0;
  for (const auto& c : p.constraints)
    if (c.from_assumption) {
      ++n_assume;
      REQUIRE(c.rhs == Rat(0));
    }
  REQUIRE(n_assume == 2);
}

TEST_CASE("evidence files reject malformed inputs") {
  auto g = canon(kIv);
  REQUIRE_THROWS_AS(parse_evidence_json(R"({"Z=0": 0.5, "Z=1": 1.5})", g), ParseError);
  REQUIRE_THROWS_AS(parse_evidence_json(R"({"Q=0": 0.5})", g), ParseError);
  REQUIRE_THROWS_AS(parse_evidence_json(R"({"Z=9": 0.5})", g), ParseError);
  auto ev = parse_evidence_json(R"({"Z=0": 158, "Z=1": 842})", g);
  REQUIRE(ev.n == 1000);
  REQUIRE(ev.cells[0].value == Rat(158, 1000));
}

TEST_CASE("full joints that do not sum to one are a build error") {
  auto g = canon(kIv);
  auto ev = joint_evidence(g, 8);
  ev.cells[0].value += Rat(1, 100);
  REQUIRE_THROWS_AS(build_program(g, ev, {}, "ATE(X,Y)"), ModelError);
}

TEST_CASE("evidence contradicting a deterministic relation is rejected") {
  auto g = canon(
      "edges: X -> Y; X -> R; Y -> R; R -> Ystar; Y -> Ystar\n"
      "card: X=2, Y=2, R=2, Ystar=2\n"
      "deterministic: Ystar = Y if R=1 else NA\n");
  EvidenceInfo ev;
  EvidenceCell c;
  c.key = "R=1,Ystar=NA";
  c.events = {Event{*g.main_index("R"), {}, 1},
              Event{*g.main_index("Ystar"), {}, g.na_value(*g.main_index("Ystar"))}};
  c.value = Rat(1, 10);
  ev.cells.push_back(c);
  ev.n_groups = 1;
  REQUIRE_THROWS_AS(build_program(g, ev, {}, "ATE(X,Y)"), ModelError);
}

TEST_CASE("disequality assumptions are rejected") {
  auto g = canon(kIv);
  auto ev = joint_evidence(g, 9);
  REQUIRE_THROWS_AS(build_program(g, ev, {"P(Z=1) != 0.5"}, "ATE(X,Y)"), ModelError);
}
