#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polybound/query.hpp"

namespace polybound {

enum class Rel { Eq, Le, Ge };

struct Constraint {
  Polynomial poly;
  std::optional<FactoredPoly> fact;
  Rel rel = Rel::Eq;
  Rat rhs;
  int evidence_cell = -1;  // raw-cell row (naive mode)
  bool from_evidence = false;  // any evidence-implied row (dropped on loosen)
  bool from_assumption = false;
  bool convex_quadratic = false;
  std::string label;
};

//! One estimated/population quantity of a multinomial evidence group.
struct EvidenceCell {
  std::string key;
  std::vector<Event> events;
  Rat value;          // probability
  double count = -1;  // raw count when provided
  int group = 0;
};

struct EvidenceInfo {
  std::vector<EvidenceCell> cells;
  long long n = -1;  // total sample size when counts were given
  int n_groups = 0;
};

struct VarMeta {
  std::string name;
  double lo = 0.0, hi = 1.0;
  int dist = -1;  // owning disturbance for strata parameters
};

//! Polynomial program over the functional-model parameters plus any
//! auxiliary variables (fractional estimands, region encodings).
struct PolynomialProgram {
  FunctionalModel fm;
  std::vector<VarMeta> vars;
  std::vector<char> active;                 // simplify() deactivates variables
  std::vector<std::vector<int>> simplex_groups;
  Polynomial objective;
  std::optional<FactoredPoly> objective_fact;
  std::optional<int> objective_aux;         // objective == vars[aux]
  //! Objective before identified factors were substituted from exact
  //! evidence; loosened (confidence) programs must fall back to this.
  Polynomial objective_raw;
  std::optional<FactoredPoly> objective_raw_fact;
  std::vector<Constraint> constraints;
  EvidenceInfo evidence;

  int n_vars() const { return static_cast<int>(vars.size()); }

  int add_aux(const std::string& name, double lo, double hi) {
    vars.push_back({name, lo, hi, -1});
    active.push_back(1);
    return n_vars() - 1;
  }
};

// ------------------------------------------------------------ evidence IO

//! Evidence file: JSON object mapping assignment strings to numbers, e.g.
//! {"Z=0,X=0,Y=0": 158, ..., "n": 1000}. Values are probabilities unless a
//! sample size "n" is present or any value exceeds 1, in which case they
//! are counts and get normalized.
inline EvidenceInfo parse_evidence_json(const std::string& text, const CausalGraph& g) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_object()) throw ParseError("evidence file must be a JSON object");
  EvidenceInfo ev;
  bool counts = false;
  bool all_integral = true;
  double total = 0.0;
  std::vector<std::pair<std::string, double>> raw;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "n") {
      ev.n = it.value().get<long long>();
      counts = true;
      continue;
    }
    double v = it.value().get<double>();
    if (v < 0) throw ParseError("negative evidence value for " + it.key());
    if (v != static_cast<double>(static_cast<long long>(v))) all_integral = false;
    raw.emplace_back(it.key(), v);
    total += v;
  }
  // values are counts when a sample size is given, or when they are all
  // integral and clearly not a probability vector
  if (!counts && all_integral && std::abs(total - 1.0) > 1e-9) counts = true;
  if (counts && ev.n < 0) ev.n = static_cast<long long>(total + 0.5);
  for (auto& [key, v] : raw) {
    EvidenceCell cell;
    cell.key = key;
    for (auto& item : split(key, ',')) {
      std::string s = trim(item);
      std::size_t eq = s.find('=');
      if (eq == std::string::npos) throw ParseError("bad assignment '" + s + "' in evidence");
      std::string name = trim(s.substr(0, eq));
      std::string valstr = trim(s.substr(eq + 1));
      auto vi = g.main_index(name);
      if (!vi) throw ParseError("evidence references unknown variable " + name);
      int val;
      if (valstr == "NA") {
        if (!g.has_na[*vi]) throw ParseError(name + " has no NA category");
        val = g.na_value(*vi);
      } else {
        val = std::stoi(valstr);
      }
      if (val < 0 || val >= g.card(*vi)) throw ParseError("evidence value out of range for " + name);
      cell.events.push_back(Event{*vi, {}, val});
    }
    if (counts) {
      cell.count = v;
      cell.value = Rat(static_cast<long long>(v + 0.5), ev.n);
    } else {
      if (v > 1.0) throw ParseError("evidence probability outside [0,1] for " + key);
      cell.value = rat_from_double(v);
    }
    ev.cells.push_back(std::move(cell));
  }
  // group cells by their variable set (one multinomial per observed set)
  std::map<std::vector<int>, int> group_of;
  for (auto& c : ev.cells) {
    std::vector<int> vs;
    for (const auto& e : c.events) vs.push_back(e.var);
    std::sort(vs.begin(), vs.end());
    auto [it2, fresh] = group_of.emplace(vs, ev.n_groups);
    if (fresh) ++ev.n_groups;
    c.group = it2->second;
  }
  return ev;
}

// ------------------------------------------------------------ build

struct BuildOptions {
  bool naive_evidence = false;       // keep raw joint cells instead of the
                                     // district factorization
  std::optional<std::pair<double, double>> estimand_range;
};

namespace pdetail {

//! Does the cell set of one group cover a full single-world joint over its
//! variable set (all factual, all combinations present)?
inline bool full_factual_joint(const std::vector<const EvidenceCell*>& cells,
                               const CausalGraph& g, std::vector<int>& var_set) {
  if (cells.empty()) return false;
  std::set<int> vs;
  for (const auto& e : cells[0]->events) {
    if (!e.intervention.empty()) return false;
    vs.insert(e.var);
  }
  long long prod = 1;
  for (int v : vs) prod *= g.card(v);
  if (static_cast<long long>(cells.size()) != prod) return false;
  std::set<std::vector<int>> seen;
  for (const auto* c : cells) {
    std::set<int> cvs;
    std::vector<int> tuple;
    for (const auto& e : c->events) {
      if (!e.intervention.empty()) return false;
      cvs.insert(e.var);
    }
    if (cvs != vs) return false;
    std::map<int, int> m;
    for (const auto& e : c->events) m[e.var] = e.value;
    for (int v : vs) tuple.push_back(m[v]);
    if (!seen.insert(tuple).second) return false;
  }
  var_set.assign(vs.begin(), vs.end());
  return true;
}

//! Latent projection onto the observed set: reachability through hidden
//! interiors (disturbances and unobserved main variables).
struct Projection {
  std::vector<std::vector<int>> district_members;  // observed var indices
  std::vector<std::vector<int>> district_parents;  // projected parents (observed)
};

inline Projection project_districts(const CausalGraph& g, const std::vector<int>& obs) {
  std::set<int> obs_set(obs.begin(), obs.end());
  std::set<std::string> hidden(g.disturbances.begin(), g.disturbances.end());
  for (int v = 0; v < g.n_main(); ++v)
    if (!obs_set.count(v)) hidden.insert(g.main_vars[v]);

  // reach(h): observed vars reachable from node h via hidden interiors
  auto reach_observed = [&](const std::string& start) {
    std::set<int> out;
    std::vector<std::string> stack{start};
    std::set<std::string> seen;
    while (!stack.empty()) {
      auto node = stack.back();
      stack.pop_back();
      if (!seen.insert(node).second) continue;
      for (const auto& ch : g.children(node)) {
        auto mi = g.main_index(ch);
        if (mi && obs_set.count(*mi)) {
          out.insert(*mi);
        } else if (hidden.count(ch)) {
          stack.push_back(ch);
        }
      }
    }
    return out;
  };

  // union-find over observed vars joined by a common hidden ancestor
  std::map<int, int> parent;
  for (int v : obs) parent[v] = v;
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& h : hidden) {
    auto r = reach_observed(h);
    std::vector<int> rs(r.begin(), r.end());
    for (std::size_t i = 1; i < rs.size(); ++i) parent[find(rs[0])] = find(rs[i]);
  }

  std::map<int, std::vector<int>> groups;
  for (int v : obs) groups[find(v)].push_back(v);

  Projection pr;
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end());
    // projected parents: observed p with a hidden-interior directed path to D
    std::set<int> pas;
    for (int p : obs) {
      if (std::find(members.begin(), members.end(), p) != members.end()) continue;
      std::set<int> direct;
      for (const auto& ch : g.children(g.main_vars[p])) {
        auto mi = g.main_index(ch);
        if (mi && obs_set.count(*mi))
          direct.insert(*mi);
        else if (hidden.count(ch)) {
          auto r = reach_observed(ch);
          direct.insert(r.begin(), r.end());
        }
      }
      for (int d : members)
        if (direct.count(d)) pas.insert(p);
    }
    pr.district_members.push_back(members);
    pr.district_parents.push_back(std::vector<int>(pas.begin(), pas.end()));
  }
  return pr;
}

}  // namespace pdetail

inline void build_evidence_rows(PolynomialProgram& p, const CausalGraph& g,
                                const EvidenceInfo& evidence, const BuildOptions& opts);

//! Algorithm: canonicalize, build the (determinism-reduced) functional
//! model, polynomialize the target (introducing an auxiliary variable for
//! fractional estimands), polynomialize evidence and assumption statements,
//! and attach the distribution constraints. Full single-world evidence
//! joints are replaced by their district factorization unless
//! `naive_evidence` is set.
inline PolynomialProgram build_program(const CausalGraph& g_in, const EvidenceInfo& evidence,
                                       const std::vector<std::string>& assumptions,
                                       const std::string& target,
                                       const BuildOptions& opts = {}) {
  PolynomialProgram p;
  CausalGraph g = g_in.canonical ? g_in : canonicalize(g_in);
  p.fm = reduce_deterministic(build_functional_model(g), g);
  p.evidence = evidence;

  for (int k = 0; k < p.fm.n_dists(); ++k) {
    const auto& d = p.fm.dists[k];
    std::vector<int> group;
    for (int e = 0; e < d.size(); ++e) {
      p.vars.push_back({d.name + "[" + d.names[e] + "]", 0.0, 1.0, k});
      group.push_back(p.fm.param_id(k, e));
    }
    p.simplex_groups.push_back(group);
  }
  p.active.assign(p.vars.size(), 1);

  // ---- evidence
  build_evidence_rows(p, g, evidence, opts);

  // identified single-world factors: evidence rows (and implied margins)
  // that pin one subset-sum linear form to a constant. Substituting them
  // into the objective removes other districts' parameters from the target.
  std::map<Polynomial, Rat> pinned;
  auto one_element_group = [&](const Polynomial& f) {
    auto sup = f.support();
    if (sup.size() != 1) return false;
    int k = p.vars[sup[0]].dist;
    return k >= 0 && p.fm.dists[k].size() == 1;
  };
  for (const auto& c : p.constraints) {
    if (!c.from_evidence || c.rel != Rel::Eq || !c.fact) continue;
    if (c.fact->terms.size() != 1 || c.fact->terms[0].coeff != 1) continue;
    const Polynomial* single = nullptr;
    bool ok = true;
    for (const auto& f : c.fact->terms[0].factors) {
      if (one_element_group(f)) continue;  // simplex forces this factor to 1
      if (single) {
        ok = false;
        break;
      }
      single = &f;
    }
    if (ok && single) pinned.emplace(*single, c.rhs);
  }
  auto substitute_pinned = [&](const FactoredPoly& f) {
    FactoredPoly out;
    for (const auto& t : f.terms) {
      FactorTerm nt;
      nt.coeff = t.coeff;
      for (const auto& fac : t.factors) {
        if (one_element_group(fac)) continue;
        auto it = pinned.find(fac);
        if (it != pinned.end())
          nt.coeff *= it->second;
        else
          nt.factors.push_back(fac);
      }
      if (nt.coeff != 0) out.terms.push_back(std::move(nt));
    }
    return out;
  };

  // ---- objective
  auto st = parse_query(target, g);
  if (st.is_comparison) throw ModelError("estimand must not be a comparison statement");
  auto contains_div = [&](auto&& self, const ExprPtr& e) -> bool {
    if (e->kind == Expr::Div) return true;
    if (e->lhs && self(self, e->lhs)) return true;
    if (e->rhs && self(self, e->rhs)) return true;
    return false;
  };
  if (!contains_div(contains_div, st.lhs)) {
    auto fr = fractionalize_expr(st.lhs, p.fm);
    p.objective_raw = fr.num.scaled(Rat(1) / fr.den.constant_value());
    p.objective = p.objective_raw;
    auto lf = linear_factored(st.lhs, p.fm);
    if (lf) {
      p.objective_raw_fact = lf->scaled(Rat(1) / fr.den.constant_value());
      p.objective_fact = substitute_pinned(*p.objective_raw_fact);
      p.objective = p.objective_fact->expand();
    }
  } else {
    auto fr = fractionalize_expr(st.lhs, p.fm);
    double lo, hi;
    if (opts.estimand_range) {
      lo = opts.estimand_range->first;
      hi = opts.estimand_range->second;
    } else {
      // default box from the numerator's range when the denominator is
      // probability-like; otherwise the caller must supply a range
      std::function<RatInterval(const ExprPtr&)> box = [&](const ExprPtr& e) -> RatInterval {
        if (e->kind == Expr::Div) {
          auto den = expr_interval(e->rhs);
          if (!den.lo_inf && !den.hi_inf && den.lo >= 0 && den.hi <= 1) return box(e->lhs);
          return {Rat(0), Rat(0), true, true};
        }
        if (e->kind == Expr::Const) return {e->value, e->value};
        if (e->kind == Expr::Prob) return {Rat(0), Rat(1)};
        auto a = box(e->lhs), b = box(e->rhs);
        if (a.lo_inf || a.hi_inf || b.lo_inf || b.hi_inf) return {Rat(0), Rat(0), true, true};
        if (e->kind == Expr::Add) return {a.lo + b.lo, a.hi + b.hi};
        if (e->kind == Expr::Sub) return {a.lo - b.hi, a.hi - b.lo};
        Rat c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
        return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
      };
      auto bx = box(st.lhs);
      if (bx.lo_inf || bx.hi_inf)
        throw ModelError("cannot derive a range for the fractional estimand; pass --estimand-range");
      lo = to_double(bx.lo);
      hi = to_double(bx.hi);
    }
    int s = p.add_aux("s", lo, hi);
    p.objective_aux = s;
    p.objective = Polynomial::var(s);
    p.objective_raw = p.objective;
    Constraint side;
    side.poly = fr.den * Polynomial::var(s) - fr.num;
    side.rel = Rel::Eq;
    side.rhs = Rat(0);
    side.label = "estimand fraction";
    FactoredPoly f;
    f.terms.push_back({Rat(1), {fr.den, Polynomial::var(s)}});
    f.terms.push_back({Rat(-1), {fr.num}});
    side.fact = f;
    p.constraints.push_back(std::move(side));
  }

  // ---- assumptions
  for (const auto& line : assumptions) {
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    auto ast = parse_query(s, g);
    if (!ast.is_comparison) throw ModelError("assumption must be a comparison: " + s);
    if (ast.op == CmpOp::NE)
      throw ModelError("disequality assumptions are not representable as constraints");
    ExprPtr diff = Expr::binary(Expr::Sub, ast.lhs, ast.rhs);
    // statements with fractions multiply through; denominators must be
    // provably nonnegative for inequality directions to survive
    std::function<void(const ExprPtr&)> check_dens = [&](const ExprPtr& e) {
      if (!e) return;
      if (e->kind == Expr::Div) {
        auto iv = expr_interval(e->rhs);
        if (iv.lo_inf || iv.lo < 0)
          throw ModelError("cannot orient an inequality with a sign-ambiguous denominator: " + s);
      }
      check_dens(e->lhs);
      check_dens(e->rhs);
    };
    if (ast.op != CmpOp::EQ) check_dens(diff);
    auto fr = fractionalize_expr(diff, p.fm);
    Constraint c;
    c.poly = fr.num;
    if (fr.den.is_constant() && fr.den.constant_value() < 0) c.poly = c.poly.negated();
    c.rel = ast.op == CmpOp::EQ ? Rel::Eq
            : (ast.op == CmpOp::LE || ast.op == CmpOp::LT) ? Rel::Le
                                                           : Rel::Ge;
    c.rhs = Rat(0);
    c.from_assumption = true;
    c.label = "assumption: " + s;
    if (fr.den.is_constant()) {
      auto lf = linear_factored(diff, p.fm);
      if (lf) c.fact = lf->scaled(Rat(1) / fr.den.constant_value());
    }
    p.constraints.push_back(std::move(c));
  }

  return p;
}

inline void build_evidence_rows(PolynomialProgram& p, const CausalGraph& g,
                                const EvidenceInfo& evidence, const BuildOptions& opts) {
  std::vector<std::vector<const EvidenceCell*>> groups(evidence.n_groups);
  std::vector<std::vector<int>> group_cells(evidence.n_groups);
  for (std::size_t i = 0; i < evidence.cells.size(); ++i) {
    groups[evidence.cells[i].group].push_back(&evidence.cells[i]);
    group_cells[evidence.cells[i].group].push_back(static_cast<int>(i));
  }

  auto add_naive_group = [&](int gi) {
    Rat sum = 0;
    for (int ci : group_cells[gi]) {
      const auto& cell = evidence.cells[ci];
      auto pp = polynomialize(cell.events, p.fm);
      if (pp.poly.is_zero() && cell.value != 0)
        throw ModelError("evidence cell " + cell.key + " is structurally impossible");
      Constraint c;
      c.poly = pp.poly;
      c.fact = pp.fact;
      c.rel = Rel::Eq;
      c.rhs = cell.value;
      c.evidence_cell = ci;
      c.from_evidence = true;
      c.label = "evidence " + cell.key;
      p.constraints.push_back(std::move(c));
      sum += cell.value;
    }
    return sum;
  };

  for (int gi = 0; gi < evidence.n_groups; ++gi) {
    std::vector<int> obs;
    bool fullj = pdetail::full_factual_joint(groups[gi], g, obs);
    if (fullj) {
      Rat sum = 0;
      for (const auto* c : groups[gi]) sum += c->value;
      Rat gap = sum - 1;
      if (gap < 0) gap = -gap;
      if (gap > Rat(1, 1000000000))
        throw ModelError("evidence cells over a full joint must sum to 1");
    }
    if (!fullj || opts.naive_evidence) {
      add_naive_group(gi);
      continue;
    }

    // district factorization of a full single-world joint
    auto pr = pdetail::project_districts(g, obs);
    // topological position of observed vars
    std::vector<std::string> all_nodes = g.main_vars;
    all_nodes.insert(all_nodes.end(), g.disturbances.begin(), g.disturbances.end());
    auto order = detail::topo_order(all_nodes, g.edges);
    std::map<int, int> topo_pos;
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto mi = g.main_index(order[i]);
      if (mi) topo_pos[*mi] = static_cast<int>(i);
    }
    std::vector<int> obs_sorted = obs;
    std::sort(obs_sorted.begin(), obs_sorted.end(),
              [&](int a, int b) { return topo_pos[a] < topo_pos[b]; });

    // cell lookup by full tuple
    std::map<std::vector<int>, Rat> cellval;
    for (const auto* c : groups[gi]) {
      std::map<int, int> m;
      for (const auto& e : c->events) m[e.var] = e.value;
      std::vector<int> tuple;
      for (int v : obs_sorted) tuple.push_back(m[v]);
      cellval[tuple] = c->value;
    }
    // P(prefix assignment) by summing cells, memoized per assignment
    std::map<std::map<int, int>, Rat> margin_memo;
    auto margin = [&](const std::map<int, int>& assign) -> const Rat& {
      auto it = margin_memo.find(assign);
      if (it != margin_memo.end()) return it->second;
      Rat s = 0;
      for (const auto& [tuple, val] : cellval) {
        bool ok = true;
        for (const auto& [v, x] : assign) {
          int pos = static_cast<int>(std::find(obs_sorted.begin(), obs_sorted.end(), v) -
                                     obs_sorted.begin());
          if (tuple[pos] != x) {
            ok = false;
            break;
          }
        }
        if (ok) s += val;
      }
      return margin_memo.emplace(assign, std::move(s)).first->second;
    };

    bool fallback = false;
    std::vector<Constraint> pending;
    for (std::size_t di = 0; di < pr.district_members.size() && !fallback; ++di) {
      const auto& members = pr.district_members[di];
      const auto& pas = pr.district_parents[di];
      std::vector<int> dsorted = members;
      std::sort(dsorted.begin(), dsorted.end(),
                [&](int a, int b) { return topo_pos[a] < topo_pos[b]; });

      std::vector<int> cell_vars = dsorted;
      cell_vars.insert(cell_vars.end(), pas.begin(), pas.end());
      std::vector<int> radices;
      for (int v : cell_vars) radices.push_back(g.card(v));
      long long total = 1;
      for (int r : radices) total *= r;

      for (long long t = 0; t < total && !fallback; ++t) {
        auto tuple = index_to_tuple(static_cast<std::size_t>(t), radices);
        std::vector<Event> events;
        std::vector<std::pair<int, int>> sigma;
        for (std::size_t i = dsorted.size(); i < cell_vars.size(); ++i)
          sigma.emplace_back(cell_vars[i], tuple[i]);
        std::sort(sigma.begin(), sigma.end());
        for (std::size_t i = 0; i < dsorted.size(); ++i)
          events.push_back(Event{dsorted[i], sigma, tuple[i]});

        // rhs: product of observational conditionals along the topo order
        Rat q = 1;
        bool undefined = false;
        for (std::size_t i = 0; i < dsorted.size(); ++i) {
          std::map<int, int> denom_assign;
          for (int v : obs_sorted) {
            if (topo_pos[v] >= topo_pos[dsorted[i]]) break;
            auto it = std::find(cell_vars.begin(), cell_vars.end(), v);
            if (it != cell_vars.end())
              denom_assign[v] = tuple[it - cell_vars.begin()];
          }
          std::map<int, int> num_assign = denom_assign;
          num_assign[dsorted[i]] = tuple[i];
          Rat den = margin(denom_assign);
          if (den == 0) {
            undefined = true;
            break;
          }
          q *= margin(num_assign) / den;
        }

        auto pp = polynomialize(events, p.fm);
        if (undefined) {
          if (pp.poly.is_zero()) continue;  // structurally impossible either way
          fallback = true;
          break;
        }
        if (pp.poly.is_zero()) {
          if (q != 0) throw ModelError("evidence contradicts a deterministic relation");
          continue;
        }
        Constraint c;
        c.poly = pp.poly;
        c.fact = pp.fact;
        c.rel = Rel::Eq;
        c.rhs = q;
        c.from_evidence = true;
        c.label = "district evidence";
        pending.push_back(std::move(c));

        // margin cuts: lower-degree implications of the district family
        if (t == 0 && dsorted.size() >= 2 && dsorted.size() <= 4) {
          for (std::size_t mask = 1; mask + 1 < (1ull << dsorted.size()); ++mask) {
            std::vector<int> sub;
            for (std::size_t b = 0; b < dsorted.size(); ++b)
              if (mask & (1ull << b)) sub.push_back(dsorted[b]);
            std::vector<int> sub_radices;
            for (int v : sub) sub_radices.push_back(g.card(v));
            for (int pv : pas) sub_radices.push_back(g.card(pv));
            long long stotal = 1;
            for (int r : sub_radices) stotal *= r;
            for (long long s2 = 0; s2 < stotal; ++s2) {
              auto stuple = index_to_tuple(static_cast<std::size_t>(s2), sub_radices);
              std::vector<std::pair<int, int>> ssigma;
              for (std::size_t i = sub.size(); i < sub_radices.size(); ++i)
                ssigma.emplace_back(pas[i - sub.size()], stuple[i]);
              std::sort(ssigma.begin(), ssigma.end());
              std::vector<Event> sev;
              for (std::size_t i = 0; i < sub.size(); ++i)
                sev.push_back(Event{sub[i], ssigma, stuple[i]});
              auto spp = polynomialize(sev, p.fm);
              if (spp.poly.degree() >= static_cast<int>(dsorted.size())) continue;
              // rhs = sum of full-cell q values consistent with the margin
              Rat srhs = 0;
              std::vector<int> free_vars;
              for (int v : dsorted)
                if (std::find(sub.begin(), sub.end(), v) == sub.end()) free_vars.push_back(v);
              std::vector<int> frad;
              for (int v : free_vars) frad.push_back(g.card(v));
              long long ftotal = 1;
              for (int r : frad) ftotal *= r;
              bool sub_undefined = false;
              for (long long f = 0; f < ftotal; ++f) {
                auto ftuple = index_to_tuple(static_cast<std::size_t>(f), frad);
                Rat q2 = 1;
                for (std::size_t i = 0; i < dsorted.size(); ++i) {
                  std::map<int, int> denom_assign;
                  auto value_of = [&](int v) {
                    auto iv = std::find(sub.begin(), sub.end(), v);
                    if (iv != sub.end()) return stuple[iv - sub.begin()];
                    auto fv = std::find(free_vars.begin(), free_vars.end(), v);
                    if (fv != free_vars.end()) return ftuple[fv - free_vars.begin()];
                    auto pv = std::find(pas.begin(), pas.end(), v);
                    return stuple[sub.size() + (pv - pas.begin())];
                  };
                  for (int v : obs_sorted) {
                    if (topo_pos[v] >= topo_pos[dsorted[i]]) break;
                    if (std::find(cell_vars.begin(), cell_vars.end(), v) != cell_vars.end())
                      denom_assign[v] = value_of(v);
                  }
                  std::map<int, int> num_assign = denom_assign;
                  num_assign[dsorted[i]] = value_of(dsorted[i]);
                  Rat den = margin(denom_assign);
                  if (den == 0) {
                    sub_undefined = true;
                    break;
                  }
                  q2 *= margin(num_assign) / den;
                }
                if (sub_undefined) break;
                srhs += q2;
              }
              if (sub_undefined) continue;
              Constraint mc;
              mc.poly = spp.poly;
              mc.fact = spp.fact;
              mc.rel = Rel::Eq;
              mc.rhs = srhs;
              mc.from_evidence = true;
              mc.label = "district margin";
              pending.push_back(std::move(mc));
            }
          }
        }
      }
    }
    if (fallback) {
      add_naive_group(gi);
    } else {
      for (auto& c : pending) p.constraints.push_back(std::move(c));
    }
  }
}

// ------------------------------------------------------------ simplify

//! Drop evidence constraints whose parameters do not interact (through
//! shared constraints, including simplex groups) with the objective's
//! parameters, then deactivate parameters that only appeared there.
//! Assumption rows are never dropped: a user-stated constraint may be the
//! source of an infeasibility and must stay visible to the solver.
inline PolynomialProgram simplify(const PolynomialProgram& p_in) {
  PolynomialProgram p = p_in;
  int n = p.n_vars();
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto unite_support = [&](const std::vector<ParamId>& sup) {
    for (std::size_t i = 1; i < sup.size(); ++i) parent[find(sup[0])] = find(sup[i]);
  };
  for (const auto& grp : p.simplex_groups) {
    std::vector<ParamId> s(grp.begin(), grp.end());
    unite_support(s);
  }
  for (const auto& c : p.constraints) unite_support(c.poly.support());

  std::set<int> keep_roots;
  for (ParamId v : p.objective.support()) keep_roots.insert(find(v));
  for (const auto& c : p.constraints)
    if (c.from_assumption)
      for (ParamId v : c.poly.support()) keep_roots.insert(find(v));

  if (keep_roots.empty()) return p;  // constant objective: nothing to prune

  std::vector<Constraint> kept;
  for (auto& c : p.constraints) {
    auto sup = c.poly.support();
    bool touches = sup.empty();
    for (ParamId v : sup)
      if (keep_roots.count(find(v))) {
        touches = true;
        break;
      }
    if (touches || c.from_assumption) kept.push_back(std::move(c));
  }
  p.constraints = std::move(kept);
  for (int v = 0; v < n; ++v)
    if (!keep_roots.count(find(v))) p.active[v] = 0;
  return p;
}

enum class ProgramClass { Linear, Poly };

inline ProgramClass classify(const PolynomialProgram& p) {
  int d = p.objective.degree();
  for (const auto& c : p.constraints) d = std::max(d, c.poly.degree());
  return d <= 1 ? ProgramClass::Linear : ProgramClass::Poly;
}

}  // namespace polybound
