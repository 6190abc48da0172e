#include <catch2/catch_amalgamated.hpp>

#include "polybound/strata.hpp"

using namespace polybound;

static CausalGraph canon(const std::string& text) { return canonicalize(parse_graph(text)); }

TEST_CASE("response function counts") {
  auto g = canon("V1 -> V2; card V1=2, V2=2");
  REQUIRE(response_function_count(g, "V2") == 4);
  REQUIRE(response_function_count(g, "V1") == 2);
  auto g2 = canon("Z -> Y; X -> Y; card Z=2, X=2, Y=2");
  REQUIRE(response_function_count(g2, "Y") == 16);
  REQUIRE_THROWS_AS(response_function_count(g2, "nope"), ModelError);
}

TEST_CASE("mediation functional model domain sizes") {
  auto g = canon(
      "edges: U1 -> V1; U23 -> V2; U23 -> V3; V1 -> V2; V2 -> V3; V1 -> V3\n"
      "latent: U1, U23\ncard: V1=2, V2=2, V3=2\n");
  auto fm = build_functional_model(g);
  REQUIRE(fm.dists[fm.dist_index("U1")].size() == 2);
  REQUIRE(fm.dists[fm.dist_index("U23")].size() == 4 * 16);
  REQUIRE(fm.n_params == 2 + 64);
}

TEST_CASE("six-node graph reproduces 4 / 128 / 1024") {
  auto g = canon(
      "edges: A -> B; B -> C; C -> D; A -> E; E -> C; D -> F\n"
      "edges: U1 -> B; U1 -> D; U2 -> A; U2 -> C; U2 -> E; U3 -> D; U3 -> F\n"
      "latent: U1, U2, U3\ncard: A=2, B=2, C=2, D=2, E=2, F=2\n");
  auto fm = build_functional_model(g);
  std::multiset<int> sizes;
  for (const auto& d : fm.dists) sizes.insert(d.size());
  REQUIRE(sizes == std::multiset<int>{4, 128, 1024});
}

TEST_CASE("single binary node synthesizes a disturbance with two strata") {
  auto g = canon("card: V=2");
  auto fm = build_functional_model(g);
  REQUIRE(fm.n_dists() == 1);
  REQUIRE(fm.dists[0].synthesized);
  REQUIRE(fm.dists[0].size() == 2);
  REQUIRE(fm.dists[0].names == std::vector<std::string>{"v_0", "v_1"});
}

TEST_CASE("domain sizes match the closed form before reduction") {
  auto g = canon(
      "edges: Z -> X; X -> Y; U -> X; U -> Y\nlatent: U\ncard: Z=3, X=2, Y=2\n");
  auto fm = build_functional_model(g);
  // U governs X (3 parent cells) and Y (2 cells): 2^3 * 2^2 = 32
  REQUIRE(fm.dists[fm.dist_index("U")].size() == 32);
  REQUIRE(fm.dists[fm.dist_index("eps_Z")].size() == 3);
}

TEST_CASE("stratum names follow the compact convention") {
  auto g = canon("V1 -> V2; card V1=2, V2=2");
  auto fm = build_functional_model(g);
  int k = fm.dist_index("eps_V2");
  REQUIRE(fm.dists[k].names ==
          std::vector<std::string>{"v2_00", "v2_01", "v2_10", "v2_11"});
  auto g2 = canon("X -> R_Y; card X=2, R_Y=2");
  auto fm2 = build_functional_model(g2);
  REQUIRE(fm2.dists[fm2.dist_index("eps_R_Y")].names[1] == "r_y,01");
}

TEST_CASE("missingness-with-error proxy reduces 6561 to 16") {
  auto g = canon(
      "edges: A -> R_A; A -> Astar; R_A -> Astar; B -> Astar\n"
      "card: A=2, R_A=2, B=2, Astar=2\n"
      "deterministic: Astar = * if R_A=1 else NA\n");
  auto fm = build_functional_model(g);
  int k = fm.governor_of[*g.main_index("Astar")];
  REQUIRE(fm.dists[k].size() == 6561);  // 3^8
  auto red = reduce_deterministic(fm, g);
  REQUIRE(red.dists[k].size() == 16);  // 2^4
}

TEST_CASE("pure proxy is fully determined") {
  auto g = canon(
      "edges: Y -> Ystar; R -> Ystar\ncard: Y=2, R=2, Ystar=2\n"
      "deterministic: Ystar = Y if R=1 else NA\n");
  auto fm = build_functional_model(g);
  int k = fm.governor_of[*g.main_index("Ystar")];
  REQUIRE(fm.dists[k].size() == 81);  // 3^4 before reduction
  auto red = reduce_deterministic(fm, g);
  REQUIRE(red.dists[k].size() == 1);
}

TEST_CASE("reduction leaves models without rules unchanged") {
  auto g = canon("V1 -> V2; card V1=2, V2=2");
  auto fm = build_functional_model(g);
  auto red = reduce_deterministic(fm, g);
  REQUIRE(red.n_params == fm.n_params);
}

TEST_CASE("surviving responses satisfy the rule at every input") {
  auto g = canon(
      "edges: X -> Y; X -> R; Y -> R; R -> Ystar; Y -> Ystar\n"
      "card: X=2, Y=2, R=2, Ystar=2\n"
      "deterministic: Ystar = Y if R=1 else NA\n");
  auto fm = reduce_deterministic(build_functional_model(g), g);
  int v = *g.main_index("Ystar");
  int k = fm.governor_of[v];
  const auto& d = fm.dists[k];
  const auto& sh = d.shapes[fm.shape_index_of[v]];
  // inputs of Ystar are (Y, R) in declaration order
  REQUIRE(sh.main_inputs == std::vector<int>{*g.main_index("Y"), *g.main_index("R")});
  for (const auto& elem : d.domain) {
    for (int c = 0; c < sh.n_cells; ++c) {
      auto t = index_to_tuple(c, sh.radices);
      int val = elem[sh.table_offset + c];
      if (t[1] == 1)
        REQUIRE(val == t[0]);
      else
        REQUIRE(val == g.na_value(v));
    }
  }
}

TEST_CASE("enumeration is deterministic across rebuilds") {
  const char* text = "edges: Z -> X; X -> Y; U -> X; U -> Y\nlatent: U\ncard: Z=2, X=2, Y=2\n";
  auto a = build_functional_model(canon(text));
  auto b = build_functional_model(canon(text));
  for (int k = 0; k < a.n_dists(); ++k) {
    REQUIRE(a.dists[k].names == b.dists[k].names);
    REQUIRE(a.dists[k].domain == b.dists[k].domain);
  }
  // joint strata names for the confounded pair
  int k = a.dist_index("U");
  REQUIRE(a.dists[k].size() == 16);
  REQUIRE(a.dists[k].names[0] == "x_00:y_00");
  REQUIRE(a.dists[k].names[15] == "x_11:y_11");
}

TEST_CASE("recursive evaluation matches hand-computed potential outcomes") {
  auto g = canon("V1 -> V2; card V1=2, V2=2");
  auto fm = build_functional_model(g);
  int u1 = fm.dist_index("eps_V1"), u2 = fm.dist_index("eps_V2");
  int complier = fm.find_stratum(u2, "v2_01");
  std::vector<int> u(fm.n_dists());
  u[u1] = 0;  // V1 = 0 naturally
  u[u2] = complier;
  std::vector<int> sigma(g.n_main(), -1), memo(g.n_main(), -1);
  REQUIRE(fm.value(1, sigma, u, memo) == 0);  // natural V2 follows V1=0
  std::vector<int> sigma2(g.n_main(), -1), memo2(g.n_main(), -1);
  sigma2[0] = 1;
  REQUIRE(fm.value(1, sigma2, u, memo2) == 1);  // complier: V2(V1=1)=1
}
