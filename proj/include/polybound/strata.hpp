#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "polybound/graph.hpp"
#include "polybound/util.hpp"

namespace polybound {

//! Number of response functions of a main variable: |S(v)| to the power of
//! the product of its main-variable parents' cardinalities.
inline long long response_function_count(const CausalGraph& g, const std::string& v) {
  auto i = g.main_index(v);
  if (!i) throw ModelError(v + " is not a main variable");
  long long cells = 1;
  for (int p : g.main_parents(*i)) cells *= g.card(p);
  long long count = 1;
  for (long long c = 0; c < cells; ++c) count *= g.card(*i);
  return count;
}

//! One disturbance of the functional model together with the enumerated
//! response-function domain of the variables it governs.
struct Disturbance {
  std::string name;
  bool synthesized = false;

  struct VarShape {
    int var = -1;                    // main-variable index
    std::vector<int> main_inputs;    // main parents, declaration order
    std::vector<int> latent_inputs;  // other latent parents (model indices)
    std::vector<int> radices;        // input cardinalities, mains then latents
    int n_cells = 1;
    int out_card = 2;
    int table_offset = 0;            // offset within a domain element
  };
  std::vector<VarShape> shapes;  // governed variables, declaration order
  int element_len = 0;

  //! Response tables concatenated per shape; entry = output value index.
  std::vector<std::vector<std::uint8_t>> domain;
  std::vector<std::string> names;
  int param_offset = 0;

  int size() const { return static_cast<int>(domain.size()); }
};

//! Functional parameterization of a canonical graph: every main variable is
//! assigned one governing disturbance (earliest-declared latent parent, or a
//! synthesized exogenous one), whose value fixes the variable's full
//! response function. A governed variable with additional latent parents
//! takes their values as extra response inputs.
class FunctionalModel {
 public:
  CausalGraph graph;
  std::vector<Disturbance> dists;
  std::vector<int> governor_of;    // per main var
  std::vector<int> shape_index_of;  // per main var: index into governor's shapes
  int n_params = 0;

  int n_dists() const { return static_cast<int>(dists.size()); }

  int dist_index(const std::string& name) const {
    for (int k = 0; k < n_dists(); ++k)
      if (dists[k].name == name) return k;
    throw ModelError("unknown disturbance: " + name);
  }

  //! Global parameter id of Pr(U_k = element e).
  int param_id(int k, int e) const { return dists[k].param_offset + e; }

  //! Value of main variable `var` under intervention `sigma` (-1 = none)
  //! when each disturbance takes the domain element in `u`. Recursive
  //! substitution: intervened parents take their set value, others their
  //! potential value.
  int value(int var, const std::vector<int>& sigma, const std::vector<int>& u,
            std::vector<int>& memo) const {
    if (sigma[var] >= 0) return sigma[var];
    if (memo[var] >= 0) return memo[var];
    int k = governor_of[var];
    const auto& sh = dists[k].shapes[shape_index_of[var]];
    std::vector<int> tuple;
    tuple.reserve(sh.radices.size());
    for (int p : sh.main_inputs) tuple.push_back(value(p, sigma, u, memo));
    for (int lk : sh.latent_inputs) tuple.push_back(u[lk]);
    std::size_t cell = tuple_to_index(tuple, sh.radices);
    int val = dists[k].domain[u[k]][sh.table_offset + cell];
    memo[var] = val;
    return val;
  }

  std::string stratum_name(int k, int e) const { return dists[k].names[e]; }

  int find_stratum(int k, const std::string& name) const {
    const auto& d = dists[k];
    for (int e = 0; e < d.size(); ++e)
      if (d.names[e] == name) return e;
    throw ModelError("unknown stratum '" + name + "' of " + d.name);
  }
};

namespace detail {

inline std::string stratum_name_for_table(const CausalGraph& g, int var,
                                          const std::uint8_t* table, int n_cells) {
  std::string base = lowercase(g.main_vars[var]);
  std::string sep = base.find('_') != std::string::npos ? "," : "_";
  std::string digits;
  for (int c = 0; c < n_cells; ++c) digits += static_cast<char>('0' + table[c]);
  return base + sep + digits;
}

}  // namespace detail

inline FunctionalModel build_functional_model(const CausalGraph& g) {
  if (!g.canonical) throw ModelError("functional model requires a canonical graph");
  FunctionalModel fm;
  fm.graph = g;
  int n = g.n_main();
  fm.governor_of.assign(n, -1);
  fm.shape_index_of.assign(n, -1);

  // Disturbance list: declared ones first, then synthesized fill-ins for
  // main variables with no latent parent (declaration order).
  std::map<std::string, int> dist_index;
  for (const auto& u : g.disturbances) {
    Disturbance d;
    d.name = u;
    dist_index[u] = fm.n_dists();
    fm.dists.push_back(d);
  }
  for (int v = 0; v < n; ++v) {
    auto lps = g.latent_parents(v);
    if (!lps.empty()) {
      fm.governor_of[v] = dist_index[lps.front()];
    } else {
      Disturbance d;
      d.name = "eps_" + g.main_vars[v];
      while (dist_index.count(d.name) || g.is_node(d.name)) d.name += "_";
      d.synthesized = true;
      dist_index[d.name] = fm.n_dists();
      fm.governor_of[v] = fm.n_dists();
      fm.dists.push_back(d);
    }
  }
  for (int v = 0; v < n; ++v) {
    auto& d = fm.dists[fm.governor_of[v]];
    fm.shape_index_of[v] = static_cast<int>(d.shapes.size());
    Disturbance::VarShape sh;
    sh.var = v;
    sh.main_inputs = g.main_parents(v);
    for (const auto& lp : g.latent_parents(v)) {
      int k = dist_index[lp];
      if (k != fm.governor_of[v]) sh.latent_inputs.push_back(k);
    }
    sh.out_card = g.card(v);
    d.shapes.push_back(sh);
  }

  // Latent inputs make domain sizes interdependent; resolve in dependency
  // order and reject bidirected cycles (non-geared graphs).
  std::vector<int> state(fm.n_dists(), 0);  // 0=todo 1=visiting 2=done
  std::function<void(int)> resolve = [&](int k) {
    if (state[k] == 2) return;
    if (state[k] == 1) throw ModelError("non-geared graph: cyclic latent dependencies");
    state[k] = 1;
    auto& d = fm.dists[k];
    for (auto& sh : d.shapes)
      for (int lk : sh.latent_inputs) resolve(lk);
    long long total = 1;
    for (auto& sh : d.shapes) {
      sh.radices.clear();
      for (int p : sh.main_inputs) sh.radices.push_back(fm.graph.card(p));
      for (int lk : sh.latent_inputs) sh.radices.push_back(fm.dists[lk].size());
      sh.n_cells = 1;
      for (int r : sh.radices) sh.n_cells *= r;
      sh.table_offset = d.element_len;
      d.element_len += sh.n_cells;
      long long cnt = 1;
      for (int c = 0; c < sh.n_cells; ++c) cnt *= sh.out_card;
      total *= cnt;
      if (total > 2'000'000) throw ModelError("functional domain too large for " + d.name);
    }
    // enumerate response-function tuples lexicographically (first governed
    // variable most significant; within a table, cell 0 most significant)
    d.domain.resize(total);
    d.names.resize(total);
    std::vector<int> radix;
    for (auto& sh : d.shapes)
      for (int c = 0; c < sh.n_cells; ++c) radix.push_back(sh.out_card);
    for (long long e = 0; e < total; ++e) {
      auto digits = index_to_tuple(static_cast<std::size_t>(e), radix);
      std::vector<std::uint8_t> elem(d.element_len);
      for (int i = 0; i < d.element_len; ++i) elem[i] = static_cast<std::uint8_t>(digits[i]);
      std::string nm;
      for (auto& sh : d.shapes) {
        if (!nm.empty()) nm += ":";
        nm += detail::stratum_name_for_table(fm.graph, sh.var, elem.data() + sh.table_offset,
                                             sh.n_cells);
      }
      d.domain[e] = std::move(elem);
      d.names[e] = nm;
    }
    state[k] = 2;
  };
  for (int k = 0; k < fm.n_dists(); ++k) resolve(k);

  fm.n_params = 0;
  for (auto& d : fm.dists) {
    d.param_offset = fm.n_params;
    fm.n_params += d.size();
  }
  return fm;
}

//! Delete response functions that contradict a declared deterministic
//! relation. A fully determined proxy keeps a single response function.
inline FunctionalModel reduce_deterministic(const FunctionalModel& m, const CausalGraph& g) {
  FunctionalModel out = m;
  for (const auto& rule : g.det_rules) {
    auto vi = g.main_index(rule.child);
    if (!vi) throw ModelError("deterministic rule references undeclared variable: " + rule.child);
    int v = *vi;
    int k = out.governor_of[v];
    auto& d = out.dists[k];
    const auto& sh = d.shapes[out.shape_index_of[v]];

    int guard_pos = -1, source_pos = -1;
    for (std::size_t i = 0; i < sh.main_inputs.size(); ++i) {
      if (g.main_vars[sh.main_inputs[i]] == rule.guard) guard_pos = static_cast<int>(i);
      if (!rule.wildcard && g.main_vars[sh.main_inputs[i]] == rule.source)
        source_pos = static_cast<int>(i);
    }
    if (guard_pos < 0)
      throw ModelError("deterministic guard " + rule.guard + " is not a parent of " + rule.child);
    if (!rule.wildcard && source_pos < 0)
      throw ModelError("deterministic source " + rule.source + " is not a parent of " + rule.child);

    int na = g.na_value(v);
    auto ok = [&](const std::vector<std::uint8_t>& elem) {
      for (int c = 0; c < sh.n_cells; ++c) {
        auto tuple = index_to_tuple(c, sh.radices);
        int val = elem[sh.table_offset + c];
        if (tuple[guard_pos] != rule.guard_value) {
          if (val != na) return false;
        } else if (rule.wildcard) {
          if (val == na) return false;
        } else {
          if (val != tuple[source_pos]) return false;
        }
      }
      return true;
    };

    std::vector<std::vector<std::uint8_t>> dom;
    std::vector<std::string> names;
    for (int e = 0; e < d.size(); ++e) {
      if (ok(d.domain[e])) {
        dom.push_back(d.domain[e]);
        names.push_back(d.names[e]);
      }
    }
    if (dom.empty()) throw ModelError("deterministic rule for " + rule.child + " admits no response");
    d.domain = std::move(dom);
    d.names = std::move(names);
  }
  out.n_params = 0;
  for (auto& d : out.dists) {
    d.param_offset = out.n_params;
    out.n_params += d.size();
  }
  return out;
}

}  // namespace polybound
