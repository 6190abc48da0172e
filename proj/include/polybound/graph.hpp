#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "polybound/util.hpp"

namespace polybound {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

//! Partially deterministic proxy rule: `child = source if guard=v else NA`,
//! or `child = * if guard=v else NA` where `*` leaves the non-NA response
//! free. The else-branch always forces the reserved NA category.
struct DetRule {
  std::string child;
  std::string source;  // empty when wildcard
  bool wildcard = false;
  std::string guard;
  int guard_value = 0;
};

//! Hidden-variable DAG over main variables (finite sample spaces),
//! exogenous disturbances, and ancillary hidden variables (hidden but with
//! parents; removed by canonicalization).
class CausalGraph {
 public:
  std::vector<std::string> main_vars;  // declaration order
  std::vector<int> decl_cards;         // declared cardinality (без NA)
  std::vector<bool> has_na;            // NA category appended by a det rule
  std::vector<std::string> disturbances;
  std::vector<std::string> ancillary;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<DetRule> det_rules;
  bool canonical = false;

  int n_main() const { return static_cast<int>(main_vars.size()); }

  //! Full sample-space size of main variable i, including the NA slot.
  int card(int i) const { return decl_cards[i] + (has_na[i] ? 1 : 0); }
  int na_value(int i) const { return decl_cards[i]; }

  std::optional<int> main_index(const std::string& name) const {
    for (std::size_t i = 0; i < main_vars.size(); ++i)
      if (main_vars[i] == name) return static_cast<int>(i);
    return std::nullopt;
  }

  bool is_hidden(const std::string& name) const {
    return contains(disturbances, name) || contains(ancillary, name);
  }
  bool is_node(const std::string& name) const {
    return main_index(name).has_value() || is_hidden(name);
  }

  std::vector<std::string> parents(const std::string& v) const {
    std::vector<std::string> out;
    for (const auto& [a, b] : edges)
      if (b == v) out.push_back(a);
    return out;
  }
  std::vector<std::string> children(const std::string& v) const {
    std::vector<std::string> out;
    for (const auto& [a, b] : edges)
      if (a == v) out.push_back(b);
    return out;
  }
  //! Main-variable parents of main variable i, in declaration order.
  std::vector<int> main_parents(int i) const {
    std::vector<int> out;
    for (int j = 0; j < n_main(); ++j)
      if (has_edge(main_vars[j], main_vars[i])) out.push_back(j);
    return out;
  }
  //! Disturbance parents of main variable i, in declaration order.
  std::vector<std::string> latent_parents(int i) const {
    std::vector<std::string> out;
    for (const auto& u : disturbances)
      if (has_edge(u, main_vars[i])) out.push_back(u);
    return out;
  }

  bool has_edge(const std::string& a, const std::string& b) const {
    for (const auto& e : edges)
      if (e.first == a && e.second == b) return true;
    return false;
  }
  void add_edge(const std::string& a, const std::string& b) {
    if (a != b && !has_edge(a, b)) edges.emplace_back(a, b);
  }

  const DetRule* det_rule_for(const std::string& child) const {
    for (const auto& r : det_rules)
      if (r.child == child) return &r;
    return nullptr;
  }

  void validate() const;

 private:
  static bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  }
};

namespace detail {

inline bool valid_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '*')) return false;
  return true;
}

//! Kahn topological check over an arbitrary adjacency; throws on a cycle.
inline std::vector<std::string> topo_order(
    const std::vector<std::string>& nodes,
    const std::vector<std::pair<std::string, std::string>>& edges) {
  std::map<std::string, int> indeg;
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& n : nodes) indeg[n] = 0;
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    ++indeg[b];
  }
  std::vector<std::string> queue, order;
  for (const auto& n : nodes)
    if (indeg[n] == 0) queue.push_back(n);
  while (!queue.empty()) {
    std::string n = queue.front();
    queue.erase(queue.begin());
    order.push_back(n);
    for (const auto& m : adj[n])
      if (--indeg[m] == 0) queue.push_back(m);
  }
  if (order.size() != nodes.size()) throw ParseError("cycle detected in graph");
  return order;
}

}  // namespace detail

inline void CausalGraph::validate() const {
  for (const auto& [a, b] : edges) {
    if (!is_node(a)) throw ParseError("undeclared node referenced: " + a);
    if (!is_node(b)) throw ParseError("undeclared node referenced: " + b);
  }
  for (int c : decl_cards)
    if (c < 2) throw ParseError("cardinality < 2");
  std::vector<std::string> nodes = main_vars;
  nodes.insert(nodes.end(), disturbances.begin(), disturbances.end());
  nodes.insert(nodes.end(), ancillary.begin(), ancillary.end());
  detail::topo_order(nodes, edges);
  for (const auto& r : det_rules) {
    if (!main_index(r.child)) throw ParseError("deterministic rule child not a main variable: " + r.child);
    if (!r.wildcard && !main_index(r.source))
      throw ParseError("deterministic rule references undeclared variable: " + r.source);
    if (!main_index(r.guard))
      throw ParseError("deterministic rule references undeclared variable: " + r.guard);
  }
}

//! Parse the line-oriented graph format. Statements are separated by line
//! breaks or semicolons:
//!   edges:   Z -> X; X -> Y; U -> X; U -> Y
//!   latent:  U
//!   card:    Z=2, X=2, Y=2
//!   deterministic: Ystar = Y if R=1 else NA
//! The `edges:` prefix is optional for bare `A -> B` statements; chains
//! `A -> B -> C` expand to consecutive edges. `#` starts a comment.
inline CausalGraph parse_graph(const std::string& text) {
  CausalGraph g;
  std::vector<std::string> hidden_names;
  std::vector<std::pair<std::string, int>> cards;

  auto handle_edges = [&](const std::string& body, int line_no) {
    for (auto& item : split(body, ';')) {
      std::string stmt = trim(item);
      if (stmt.empty()) continue;
      std::vector<std::string> chain;
      std::size_t start = 0;
      while (true) {
        std::size_t p = stmt.find("->", start);
        if (p == std::string::npos) {
          chain.push_back(trim(stmt.substr(start)));
          break;
        }
        chain.push_back(trim(stmt.substr(start, p - start)));
        start = p + 2;
      }
      if (chain.size() < 2) throw ParseError("line " + std::to_string(line_no) + ": expected 'A -> B'");
      for (const auto& n : chain)
        if (!detail::valid_identifier(n))
          throw ParseError("line " + std::to_string(line_no) + ": bad node name '" + n + "'");
      for (std::size_t i = 0; i + 1 < chain.size(); ++i) g.add_edge(chain[i], chain[i + 1]);
    }
  };

  auto handle_latent = [&](const std::string& body, int line_no) {
    for (auto& item : split(body, ',')) {
      std::string n = trim(item);
      if (n.empty()) continue;
      if (!detail::valid_identifier(n))
        throw ParseError("line " + std::to_string(line_no) + ": bad node name '" + n + "'");
      hidden_names.push_back(n);
    }
  };

  auto handle_card = [&](const std::string& body, int line_no) {
    for (auto& item : split(body, ',')) {
      std::string s = trim(item);
      if (s.empty()) continue;
      std::size_t eq = s.find('=');
      if (eq == std::string::npos)
        throw ParseError("line " + std::to_string(line_no) + ": expected 'name=cardinality'");
      std::string n = trim(s.substr(0, eq));
      int c = std::stoi(trim(s.substr(eq + 1)));
      if (!detail::valid_identifier(n))
        throw ParseError("line " + std::to_string(line_no) + ": bad node name '" + n + "'");
      cards.emplace_back(n, c);
    }
  };

  auto handle_det = [&](const std::string& body, int line_no) {
    // child = source|* if guard=value else NA
    auto fail = [&] {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'C = V if R=1 else NA' or 'C = * if R=1 else NA'");
    };
    std::size_t eq = body.find('=');
    std::size_t kif = body.find(" if ");
    std::size_t kelse = body.find(" else ");
    if (eq == std::string::npos || kif == std::string::npos || kelse == std::string::npos) fail();
    DetRule r;
    r.child = trim(body.substr(0, eq));
    std::string src = trim(body.substr(eq + 1, kif - eq - 1));
    if (src == "*")
      r.wildcard = true;
    else
      r.source = src;
    std::string cond = trim(body.substr(kif + 4, kelse - kif - 4));
    std::size_t ceq = cond.find('=');
    if (ceq == std::string::npos) fail();
    r.guard = trim(cond.substr(0, ceq));
    r.guard_value = std::stoi(trim(cond.substr(ceq + 1)));
    if (trim(body.substr(kelse + 6)) != "NA") fail();
    g.det_rules.push_back(r);
  };

  // A statement carries a keyword prefix ("edges", "latent", "card",
  // "deterministic", colon optional) or is a bare edge chain.
  auto keyword_body = [](const std::string& stmt, const char* kw) -> std::optional<std::string> {
    std::string low = lowercase(stmt);
    std::size_t n = std::string(kw).size();
    if (low.rfind(kw, 0) != 0) return std::nullopt;
    if (stmt.size() == n) return std::string();
    char next = stmt[n];
    if (next != ':' && next != ' ' && next != '\t') return std::nullopt;
    std::string b = stmt.substr(n);
    if (!b.empty() && b[0] == ':') b = b.substr(1);
    return trim(b);
  };

  int line_no = 0;
  for (auto& raw_line : split(text, '\n')) {
    ++line_no;
    std::string line = trim(strip_comment(raw_line));
    if (line.empty()) continue;
    // "deterministic" bodies keep their ';'-free shape; others split on ';'
    if (auto b = keyword_body(line, "deterministic")) {
      handle_det(*b, line_no);
      continue;
    }
    for (auto& item : split(line, ';')) {
      std::string stmt = trim(item);
      if (stmt.empty()) continue;
      if (auto b = keyword_body(stmt, "edges"))
        handle_edges(*b, line_no);
      else if (auto b2 = keyword_body(stmt, "latent"))
        handle_latent(*b2, line_no);
      else if (auto b3 = keyword_body(stmt, "card"))
        handle_card(*b3, line_no);
      else if (stmt.find("->") != std::string::npos)
        handle_edges(stmt, line_no);
      else
        throw ParseError("line " + std::to_string(line_no) + ": unrecognized statement '" + stmt + "'");
    }
  }

  for (const auto& [n, c] : cards) {
    if (g.main_index(n)) throw ParseError("duplicate cardinality for " + n);
    g.main_vars.push_back(n);
    g.decl_cards.push_back(c);
    g.has_na.push_back(false);
  }
  for (const auto& n : hidden_names) {
    bool has_parent = false;
    for (const auto& [a, b] : g.edges)
      if (b == n) has_parent = true;
    if (has_parent)
      g.ancillary.push_back(n);
    else
      g.disturbances.push_back(n);
  }
  // NA is a reserved extra category on det-rule children
  for (const auto& r : g.det_rules) {
    auto i = g.main_index(r.child);
    if (i) g.has_na[*i] = true;
  }
  g.validate();
  return g;
}

//! Canonicalize a hidden-variable DAG:
//!  (1) add a -> b for every pair joined by a path whose interior is all
//!      hidden, (2) remove incoming edges to hidden variables, (3) drop
//!      hidden variables whose (remaining) children are a subset of another
//!      hidden variable's children. Childless hidden variables are dropped
//!      as model-irrelevant.
inline CausalGraph canonicalize(const CausalGraph& g) {
  CausalGraph c = g;
  std::set<std::string> hidden(c.disturbances.begin(), c.disturbances.end());
  hidden.insert(c.ancillary.begin(), c.ancillary.end());

  // (1) transitive closure through hidden interiors
  std::vector<std::string> all_nodes = c.main_vars;
  all_nodes.insert(all_nodes.end(), c.disturbances.begin(), c.disturbances.end());
  all_nodes.insert(all_nodes.end(), c.ancillary.begin(), c.ancillary.end());
  auto base_edges = c.edges;
  for (const auto& a : all_nodes) {
    std::vector<std::string> stack;
    std::set<std::string> seen;
    for (const auto& [x, y] : base_edges)
      if (x == a && hidden.count(y)) stack.push_back(y);
    while (!stack.empty()) {
      std::string h = stack.back();
      stack.pop_back();
      if (!seen.insert(h).second) continue;
      for (const auto& [x, y] : base_edges) {
        if (x != h) continue;
        c.add_edge(a, y);
        if (hidden.count(y)) stack.push_back(y);
      }
    }
  }

  // (2) remove incoming edges to hidden variables
  std::erase_if(c.edges, [&](const auto& e) { return hidden.count(e.second) > 0; });

  // (3) subset removal, earliest-declared survivor on ties
  std::vector<std::string> hs(c.disturbances);
  hs.insert(hs.end(), c.ancillary.begin(), c.ancillary.end());
  auto child_set = [&](const std::string& h, const std::set<std::string>& removed) {
    std::set<std::string> out;
    for (const auto& [a, b] : c.edges)
      if (a == h && !removed.count(b)) out.insert(b);
    return out;
  };
  std::set<std::string> removed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < hs.size(); ++i) {
      if (removed.count(hs[i])) continue;
      auto ci = child_set(hs[i], removed);
      if (ci.empty()) {
        removed.insert(hs[i]);
        changed = true;
        continue;
      }
      for (std::size_t j = 0; j < hs.size(); ++j) {
        if (i == j || removed.count(hs[j])) continue;
        auto cj = child_set(hs[j], removed);
        bool subset = std::includes(cj.begin(), cj.end(), ci.begin(), ci.end());
        if (!subset) continue;
        if (ci == cj && i < j) continue;  // earlier declaration survives
        removed.insert(hs[i]);
        changed = true;
        break;
      }
    }
  }
  std::erase_if(c.edges, [&](const auto& e) { return removed.count(e.first) > 0; });

  std::vector<std::string> survivors;
  for (const auto& h : hs)
    if (!removed.count(h)) survivors.push_back(h);
  c.disturbances = survivors;
  c.ancillary.clear();
  c.canonical = true;
  c.validate();
  return c;
}

//! Main variables connected through shared disturbances, with the
//! disturbances attached to the district containing their children.
struct District {
  std::vector<std::string> members;
  std::vector<std::string> latents;
};

inline std::vector<District> districts(const CausalGraph& g) {
  if (!g.canonical) throw ModelError("districts requires a canonical graph");
  int n = g.n_main();
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto unite = [&](int a, int b) { parent[find(a)] = find(b); };

  for (const auto& u : g.disturbances) {
    std::vector<int> kids;
    for (const auto& ch : g.children(u)) {
      auto i = g.main_index(ch);
      if (i) kids.push_back(*i);
    }
    for (std::size_t k = 1; k < kids.size(); ++k) unite(kids[0], kids[k]);
  }

  std::map<int, District> by_root;
  std::vector<int> root_order;
  for (int i = 0; i < n; ++i) {
    int r = find(i);
    if (!by_root.count(r)) root_order.push_back(r);
    by_root[r].members.push_back(g.main_vars[i]);
  }
  for (const auto& u : g.disturbances) {
    auto kids = g.children(u);
    if (kids.empty()) continue;
    int r = find(*g.main_index(kids.front()));
    by_root[r].latents.push_back(u);
  }
  std::vector<District> out;
  for (int r : root_order) out.push_back(by_root[r]);
  return out;
}

}  // namespace polybound
