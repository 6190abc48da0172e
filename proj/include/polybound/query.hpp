#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "polybound/polynomial.hpp"
#include "polybound/strata.hpp"

namespace polybound {

//! One counterfactual statement: variable = value under an intervention
//! (empty intervention = natural value). Intervention on the variable
//! itself is ignored when evaluating.
struct Event {
  int var = -1;
  std::vector<std::pair<int, int>> intervention;  // (var, value), sorted by var
  int value = 0;
};

enum class CmpOp { LT, LE, EQ, GE, GT, NE };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum Kind { Const, Prob, Add, Sub, Mul, Div } kind = Const;
  Rat value;                  // Const
  std::vector<Event> events;  // Prob: conjunction
  ExprPtr lhs, rhs;

  static ExprPtr constant(Rat c) {
    auto e = std::make_shared<Expr>();
    e->kind = Const;
    e->value = std::move(c);
    return e;
  }
  static ExprPtr prob(std::vector<Event> ev) {
    auto e = std::make_shared<Expr>();
    e->kind = Prob;
    e->events = std::move(ev);
    return e;
  }
  static ExprPtr binary(Kind k, ExprPtr a, ExprPtr b) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    return e;
  }
};

//! A parsed query line: either a bare estimand expression or a comparison
//! statement (assumption / evidence form).
struct Statement {
  ExprPtr lhs;
  bool is_comparison = false;
  CmpOp op = CmpOp::EQ;
  ExprPtr rhs;
};

// ---------------------------------------------------------------- lexer

namespace qdetail {

struct Token {
  enum Kind { Id, Number, LParen, RParen, Comma, Plus, Minus, Star, Slash,
              Lt, Le, Eq, Ge, Gt, Ne, End } kind;
  std::string text;
  std::size_t pos = 0;
};

inline std::vector<Token> lex(const std::string& s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto push = [&](Token::Kind k, std::string t, std::size_t p) {
    out.push_back({k, std::move(t), p});
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t p = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '*'))
        ++j;
      push(Token::Id, s.substr(i, j - i), p);
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.' ||
                              s[j] == 'e' || s[j] == 'E' ||
                              ((s[j] == '+' || s[j] == '-') && j > i &&
                               (s[j - 1] == 'e' || s[j - 1] == 'E'))))
        ++j;
      push(Token::Number, s.substr(i, j - i), p);
      i = j;
    } else {
      switch (c) {
        case '(': push(Token::LParen, "(", p); ++i; break;
        case ')': push(Token::RParen, ")", p); ++i; break;
        case ',': push(Token::Comma, ",", p); ++i; break;
        case '+': push(Token::Plus, "+", p); ++i; break;
        case '-': push(Token::Minus, "-", p); ++i; break;
        case '*': push(Token::Star, "*", p); ++i; break;
        case '/': push(Token::Slash, "/", p); ++i; break;
        case '<':
          if (i + 1 < s.size() && s[i + 1] == '=') { push(Token::Le, "<=", p); i += 2; }
          else { push(Token::Lt, "<", p); ++i; }
          break;
        case '>':
          if (i + 1 < s.size() && s[i + 1] == '=') { push(Token::Ge, ">=", p); i += 2; }
          else { push(Token::Gt, ">", p); ++i; }
          break;
        case '=':
          if (i + 1 < s.size() && s[i + 1] == '=') { push(Token::Eq, "==", p); i += 2; }
          else { push(Token::Eq, "=", p); ++i; }
          break;
        case '!':
          if (i + 1 < s.size() && s[i + 1] == '=') { push(Token::Ne, "!=", p); i += 2; }
          else throw ParseError("column " + std::to_string(p + 1) + ": stray '!'");
          break;
        default:
          throw ParseError("column " + std::to_string(p + 1) + ": unexpected character '" +
                           std::string(1, c) + "'");
      }
    }
  }
  push(Token::End, "", s.size());
  return out;
}

class Parser {
 public:
  Parser(const std::string& text, const CausalGraph& g) : g_(g), toks_(lex(text)) {}

  Statement parse_statement() {
    Statement st;
    st.lhs = parse_expr();
    auto k = peek().kind;
    if (k == Token::Lt || k == Token::Le || k == Token::Eq || k == Token::Ge ||
        k == Token::Gt || k == Token::Ne) {
      st.is_comparison = true;
      st.op = k == Token::Lt   ? CmpOp::LT
              : k == Token::Le ? CmpOp::LE
              : k == Token::Eq ? CmpOp::EQ
              : k == Token::Ge ? CmpOp::GE
              : k == Token::Gt ? CmpOp::GT
                               : CmpOp::NE;
      next();
      st.rhs = parse_expr();
    }
    expect(Token::End, "end of input");
    return st;
  }

 private:
  const CausalGraph& g_;
  std::vector<Token> toks_;
  std::size_t cur_ = 0;

  const Token& peek() const { return toks_[cur_]; }
  const Token& next() { return toks_[cur_++]; }
  void expect(Token::Kind k, const std::string& what) {
    if (peek().kind != k)
      throw ParseError("column " + std::to_string(peek().pos + 1) + ": expected " + what);
    next();
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("column " + std::to_string(peek().pos + 1) + ": " + msg);
  }

  ExprPtr parse_expr() {
    ExprPtr e = parse_term();
    while (peek().kind == Token::Plus || peek().kind == Token::Minus) {
      auto k = next().kind;
      ExprPtr r = parse_term();
      e = Expr::binary(k == Token::Plus ? Expr::Add : Expr::Sub, e, r);
    }
    return e;
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_factor();
    while (peek().kind == Token::Star || peek().kind == Token::Slash) {
      auto k = next().kind;
      ExprPtr r = parse_factor();
      e = Expr::binary(k == Token::Star ? Expr::Mul : Expr::Div, e, r);
    }
    return e;
  }

  ExprPtr parse_factor() {
    const Token& t = peek();
    if (t.kind == Token::Minus) {
      next();
      return Expr::binary(Expr::Sub, Expr::constant(Rat(0)), parse_factor());
    }
    if (t.kind == Token::Plus) {
      next();
      return parse_factor();
    }
    if (t.kind == Token::Number) {
      next();
      return Expr::constant(rat_from_decimal(t.text));
    }
    if (t.kind == Token::LParen) {
      next();
      ExprPtr e = parse_expr();
      expect(Token::RParen, "')'");
      return e;
    }
    if (t.kind == Token::Id && t.text == "P") {
      next();
      return parse_prob();
    }
    if (t.kind == Token::Id && t.text == "ATE") {
      next();
      return parse_ate();
    }
    fail("expected a number, P(...), ATE(...), or '('");
  }

  int var_index(const std::string& name) {
    auto i = g_.main_index(name);
    if (!i) fail("unknown variable '" + name + "'");
    return *i;
  }

  int parse_value(int var) {
    const Token& t = peek();
    int v;
    if (t.kind == Token::Id && t.text == "NA") {
      if (!g_.has_na[var]) fail("variable " + g_.main_vars[var] + " has no NA category");
      v = g_.na_value(var);
      next();
    } else if (t.kind == Token::Number) {
      v = std::stoi(t.text);
      next();
    } else {
      fail("expected a value");
    }
    if (v < 0 || v >= g_.card(var))
      fail("value out of range for " + g_.main_vars[var]);
    return v;
  }

  ExprPtr parse_prob() {
    expect(Token::LParen, "'('");
    std::vector<Event> events;
    while (true) {
      events.push_back(parse_event());
      if (peek().kind == Token::Comma) {
        next();
        continue;
      }
      break;
    }
    expect(Token::RParen, "')'");
    return Expr::prob(std::move(events));
  }

  Event parse_event() {
    if (peek().kind != Token::Id) fail("expected a variable name");
    Event e;
    e.var = var_index(next().text);
    if (peek().kind == Token::LParen) {
      next();
      std::map<int, int> iv;
      while (true) {
        if (peek().kind != Token::Id) fail("expected a variable name");
        int v = var_index(next().text);
        expect(Token::Eq, "'='");
        int val = parse_value(v);
        iv[v] = val;
        if (peek().kind == Token::Comma) {
          next();
          continue;
        }
        break;
      }
      expect(Token::RParen, "')'");
      e.intervention.assign(iv.begin(), iv.end());
    }
    expect(Token::Eq, "'='");
    e.value = parse_value(e.var);
    return e;
  }

  //! ATE(X,Y) expands to P(Y(X=1)=1) - P(Y(X=0)=1); Y must be binary.
  ExprPtr parse_ate() {
    expect(Token::LParen, "'('");
    if (peek().kind != Token::Id) fail("expected a variable name");
    int x = var_index(next().text);
    expect(Token::Comma, "','");
    if (peek().kind != Token::Id) fail("expected a variable name");
    int y = var_index(next().text);
    expect(Token::RParen, "')'");
    if (g_.decl_cards[y] != 2 || g_.has_na[y])
      fail("ATE sugar requires a binary outcome; write the expectation explicitly");
    Event e1{y, {{x, 1}}, 1}, e0{y, {{x, 0}}, 1};
    return Expr::binary(Expr::Sub, Expr::prob({e1}), Expr::prob({e0}));
  }
};

}  // namespace qdetail

inline Statement parse_query(const std::string& text, const CausalGraph& g) {
  return qdetail::Parser(text, g).parse_statement();
}

// ------------------------------------------------- event evaluation

//! Does the event hold when each disturbance takes the domain element given
//! in `u`? Recursive substitution through the functional model.
inline bool evaluate_event(const std::vector<int>& u, const Event& e, const FunctionalModel& fm) {
  int n = fm.graph.n_main();
  std::vector<int> sigma(n, -1), memo(n, -1);
  for (const auto& [v, val] : e.intervention)
    if (v != e.var) sigma[v] = val;  // intervention on the event variable is ignored
  return fm.value(e.var, sigma, u, memo) == e.value;
}

// ------------------------------------------------- polynomialization

struct PolyPair {
  Polynomial poly;
  FactoredPoly fact;
};

namespace qdetail {

struct World {
  std::vector<std::pair<int, int>> sigma;  // sorted interventions
  std::map<int, int> pinned;               // event values
  std::vector<int> needed;                 // non-intervened vars feeding events
  std::vector<int> free_vars;              // needed minus pinned
};

}  // namespace qdetail

//! Rewrite Pr(conjunction) as a sum over consistent assignments of the
//! relevant disturbances of products of their probabilities. Blocked
//! disturbances (no path to an event variable avoiding the intervention)
//! never enter the enumeration. Returns the canonical polynomial together
//! with its product structure (one factor per disturbance cluster and
//! consistent value profile).
inline PolyPair polynomialize(const std::vector<Event>& events, const FunctionalModel& fm) {
  const CausalGraph& g = fm.graph;
  int n = g.n_main();

  // group events into worlds by intervention (self-interventions dropped)
  std::vector<qdetail::World> worlds;
  for (const auto& e : events) {
    std::vector<std::pair<int, int>> sig;
    for (auto& [v, val] : e.intervention)
      if (v != e.var) sig.emplace_back(v, val);
    int w = -1;
    for (std::size_t i = 0; i < worlds.size(); ++i)
      if (worlds[i].sigma == sig) w = static_cast<int>(i);
    if (w < 0) {
      worlds.push_back({sig, {}, {}, {}});
      w = static_cast<int>(worlds.size()) - 1;
    }
    auto it = worlds[w].pinned.find(e.var);
    if (it != worlds[w].pinned.end() && it->second != e.value) return {};  // contradiction
    worlds[w].pinned[e.var] = e.value;
  }

  // needed-variable closure per world
  for (auto& w : worlds) {
    std::vector<char> in_sigma(n, 0), needed(n, 0);
    for (auto& [v, val] : w.sigma) in_sigma[v] = 1;
    std::vector<int> stack;
    for (auto& [v, val] : w.pinned)
      if (!in_sigma[v]) stack.push_back(v);
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      if (needed[v]) continue;
      needed[v] = 1;
      for (int p : g.main_parents(v))
        if (!in_sigma[p] && !needed[p]) stack.push_back(p);
    }
    for (int v = 0; v < n; ++v)
      if (needed[v]) w.needed.push_back(v);
    for (int v : w.needed)
      if (!w.pinned.count(v)) w.free_vars.push_back(v);
  }

  // relevant disturbances + latent-input closure
  std::set<int> relevant;
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& w : worlds) {
      for (int v : w.needed) {
        int k = fm.governor_of[v];
        if (relevant.insert(k).second) grew = true;
        const auto& sh = fm.dists[k].shapes[fm.shape_index_of[v]];
        for (int lk : sh.latent_inputs)
          if (relevant.insert(lk).second) grew = true;
      }
    }
  }

  // clusters: disturbances tied by latent response inputs
  std::map<int, int> cluster_of;
  std::vector<int> rel(relevant.begin(), relevant.end());
  for (int k : rel) cluster_of[k] = k;
  std::function<int(int)> find = [&](int x) {
    while (cluster_of[x] != x) x = cluster_of[x] = cluster_of[cluster_of[x]];
    return x;
  };
  for (const auto& w : worlds)
    for (int v : w.needed) {
      int k = fm.governor_of[v];
      const auto& sh = fm.dists[k].shapes[fm.shape_index_of[v]];
      for (int lk : sh.latent_inputs) cluster_of[find(lk)] = find(k);
    }
  std::map<int, std::vector<int>> clusters;  // root -> sorted members
  for (int k : rel) clusters[find(k)].push_back(k);

  // requirement list per cluster: (world, var) pairs, fixed across profiles
  struct Req {
    int world, var;
  };
  std::map<int, std::vector<Req>> reqs;
  for (std::size_t wi = 0; wi < worlds.size(); ++wi)
    for (int v : worlds[wi].needed) reqs[find(fm.governor_of[v])].push_back({static_cast<int>(wi), v});

  // profile enumeration across worlds' free variables
  std::vector<std::pair<int, int>> free_list;  // (world, var)
  std::vector<int> free_cards;
  long long n_profiles = 1;
  for (std::size_t wi = 0; wi < worlds.size(); ++wi)
    for (int v : worlds[wi].free_vars) {
      free_list.emplace_back(static_cast<int>(wi), v);
      free_cards.push_back(g.card(v));
      n_profiles *= g.card(v);
      if (n_profiles > 2'000'000) throw ModelError("profile enumeration too large");
    }

  // memoized cluster factors, keyed by the requirements' resolved inputs
  std::map<std::vector<int>, Polynomial> factor_memo;

  PolyPair out;
  std::vector<std::map<int, int>> wvals(worlds.size());
  for (long long pi = 0; pi < n_profiles; ++pi) {
    auto digits = index_to_tuple(static_cast<std::size_t>(pi), free_cards);
    for (std::size_t wi = 0; wi < worlds.size(); ++wi) wvals[wi] = worlds[wi].pinned;
    for (std::size_t fi = 0; fi < free_list.size(); ++fi)
      wvals[free_list[fi].first][free_list[fi].second] = digits[fi];

    FactorTerm term;
    term.coeff = Rat(1);
    bool dead = false;
    for (auto& [root, members] : clusters) {
      // key: cluster root + per requirement (var, main inputs, required value)
      std::vector<int> key{root};
      for (const auto& r : reqs[root]) {
        const auto& w = worlds[r.world];
        const auto& sh = fm.dists[fm.governor_of[r.var]].shapes[fm.shape_index_of[r.var]];
        key.push_back(r.var);
        for (int p : sh.main_inputs) {
          int val = -1;
          for (auto& [sv, sval] : w.sigma)
            if (sv == p) val = sval;
          if (val < 0) val = wvals[r.world].at(p);
          key.push_back(val);
        }
        key.push_back(wvals[r.world].at(r.var));
      }
      auto it = factor_memo.find(key);
      if (it == factor_memo.end()) {
        // enumerate the cluster's joint domain, keep consistent tuples
        std::vector<int> radix;
        for (int k : members) radix.push_back(fm.dists[k].size());
        long long total = 1;
        for (int r2 : radix) {
          total *= r2;
          if (total > 8'000'000) throw ModelError("cluster enumeration too large");
        }
        std::map<int, int> member_pos;
        for (std::size_t mi = 0; mi < members.size(); ++mi) member_pos[members[mi]] = static_cast<int>(mi);
        std::vector<std::pair<Monomial, Rat>> raw_terms;
        for (long long t = 0; t < total; ++t) {
          auto tup = index_to_tuple(static_cast<std::size_t>(t), radix);
          bool okall = true;
          for (const auto& r : reqs[root]) {
            const auto& w = worlds[r.world];
            int k = fm.governor_of[r.var];
            const auto& sh = fm.dists[k].shapes[fm.shape_index_of[r.var]];
            std::vector<int> cell;
            cell.reserve(sh.radices.size());
            for (int p : sh.main_inputs) {
              int val = -1;
              for (auto& [sv, sval] : w.sigma)
                if (sv == p) val = sval;
              if (val < 0) val = wvals[r.world].at(p);
              cell.push_back(val);
            }
            for (int lk : sh.latent_inputs) cell.push_back(tup[member_pos.at(lk)]);
            std::size_t ci = tuple_to_index(cell, sh.radices);
            int got = fm.dists[k].domain[tup[member_pos.at(k)]][sh.table_offset + ci];
            if (got != wvals[r.world].at(r.var)) {
              okall = false;
              break;
            }
          }
          if (!okall) continue;
          std::vector<ParamId> mono;
          for (std::size_t mi = 0; mi < members.size(); ++mi)
            mono.push_back(fm.param_id(members[mi], tup[mi]));
          raw_terms.emplace_back(Monomial(std::move(mono)), Rat(1));
        }
        it = factor_memo.emplace(std::move(key), Polynomial::from_terms(std::move(raw_terms))).first;
      }
      if (it->second.is_zero()) {
        dead = true;
        break;
      }
      term.factors.push_back(it->second);
    }
    if (dead) continue;
    out.fact.terms.push_back(std::move(term));
  }
  out.poly = out.fact.expand();
  return out;
}

// ------------------------------------------------- fractional rewriting

//! Rational interval for range-bounding expressions; probabilities are
//! bounded by [0,1].
struct RatInterval {
  Rat lo, hi;
  bool lo_inf = false, hi_inf = false;
};

inline RatInterval expr_interval(const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Const:
      return {e->value, e->value};
    case Expr::Prob:
      return {Rat(0), Rat(1)};
    case Expr::Add: {
      auto a = expr_interval(e->lhs), b = expr_interval(e->rhs);
      return {a.lo + b.lo, a.hi + b.hi, a.lo_inf || b.lo_inf, a.hi_inf || b.hi_inf};
    }
    case Expr::Sub: {
      auto a = expr_interval(e->lhs), b = expr_interval(e->rhs);
      return {a.lo - b.hi, a.hi - b.lo, a.lo_inf || b.hi_inf, a.hi_inf || b.lo_inf};
    }
    case Expr::Mul: {
      auto a = expr_interval(e->lhs), b = expr_interval(e->rhs);
      if (a.lo_inf || a.hi_inf || b.lo_inf || b.hi_inf) return {Rat(0), Rat(0), true, true};
      Rat c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
      return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
    }
    case Expr::Div: {
      auto b = expr_interval(e->rhs);
      if (!b.lo_inf && !b.hi_inf && b.lo > 0) {
        auto a = expr_interval(e->lhs);
        if (a.lo_inf || a.hi_inf) return {Rat(0), Rat(0), true, true};
        Rat c[4] = {a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi};
        return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
      }
      return {Rat(0), Rat(0), true, true};  // denominator range touches zero
    }
  }
  return {Rat(0), Rat(0), true, true};
}

//! Numerator/denominator pair of exact polynomials.
struct PolyFraction {
  Polynomial num;
  Polynomial den = Polynomial::constant(Rat(1));
};

inline PolyFraction fractionalize_expr(const ExprPtr& e, const FunctionalModel& fm) {
  switch (e->kind) {
    case Expr::Const:
      return {Polynomial::constant(e->value)};
    case Expr::Prob:
      return {polynomialize(e->events, fm).poly};
    case Expr::Add: {
      auto a = fractionalize_expr(e->lhs, fm), b = fractionalize_expr(e->rhs, fm);
      return {a.num * b.den + b.num * a.den, a.den * b.den};
    }
    case Expr::Sub: {
      auto a = fractionalize_expr(e->lhs, fm), b = fractionalize_expr(e->rhs, fm);
      return {a.num * b.den - b.num * a.den, a.den * b.den};
    }
    case Expr::Mul: {
      auto a = fractionalize_expr(e->lhs, fm), b = fractionalize_expr(e->rhs, fm);
      return {a.num * b.num, a.den * b.den};
    }
    case Expr::Div: {
      auto a = fractionalize_expr(e->lhs, fm), b = fractionalize_expr(e->rhs, fm);
      if (b.num.is_zero()) throw ModelError("division by a vanishing expression");
      return {a.num * b.den, a.den * b.num};
    }
  }
  throw ModelError("unreachable expression kind");
}

//! Factored form for plain linear combinations of probabilities and
//! constants (the common shape of evidence and assumption statements).
inline std::optional<FactoredPoly> linear_factored(const ExprPtr& e, const FunctionalModel& fm) {
  switch (e->kind) {
    case Expr::Const: {
      FactoredPoly f;
      if (e->value != 0) f.terms.push_back({e->value, {}});
      return f;
    }
    case Expr::Prob:
      return polynomialize(e->events, fm).fact;
    case Expr::Add:
    case Expr::Sub: {
      auto a = linear_factored(e->lhs, fm), b = linear_factored(e->rhs, fm);
      if (!a || !b) return std::nullopt;
      FactoredPoly f = *a;
      f.append(e->kind == Expr::Add ? *b : b->scaled(Rat(-1)));
      return f;
    }
    case Expr::Mul: {
      if (e->lhs->kind == Expr::Const) {
        auto b = linear_factored(e->rhs, fm);
        if (b) return b->scaled(e->lhs->value);
      }
      if (e->rhs->kind == Expr::Const) {
        auto a = linear_factored(e->lhs, fm);
        if (a) return a->scaled(e->rhs->value);
      }
      return std::nullopt;
    }
    case Expr::Div: {
      if (e->rhs->kind == Expr::Const && e->rhs->value != 0) {
        auto a = linear_factored(e->lhs, fm);
        if (a) return a->scaled(Rat(1) / e->rhs->value);
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace polybound
