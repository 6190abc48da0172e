#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>

#include "polybound/rational.hpp"

namespace polybound {

using ParamId = std::int32_t;

//! Multiset of parameter ids, kept sorted. In well-formed programs a
//! disturbance contributes at most one factor per monomial.
struct Monomial {
  std::vector<ParamId> vars;

  Monomial() = default;
  explicit Monomial(std::vector<ParamId> v) : vars(std::move(v)) {
    std::sort(vars.begin(), vars.end());
  }
  int degree() const { return static_cast<int>(vars.size()); }
  bool operator==(const Monomial& o) const { return vars == o.vars; }
  bool operator<(const Monomial& o) const { return vars < o.vars; }

  Monomial times(const Monomial& o) const {
    Monomial m;
    m.vars.resize(vars.size() + o.vars.size());
    std::merge(vars.begin(), vars.end(), o.vars.begin(), o.vars.end(), m.vars.begin());
    return m;
  }
};

//! Sparse polynomial with exact rational coefficients in canonical form
//! (terms sorted by monomial, zero coefficients dropped).
class Polynomial {
 public:
  std::vector<std::pair<Monomial, Rat>> terms;

  Polynomial() = default;

  static Polynomial constant(const Rat& c) {
    Polynomial p;
    if (c != 0) p.terms.push_back({Monomial{}, c});
    return p;
  }

  //! Canonicalize a raw term list in one pass (sort, merge, drop zeros).
  static Polynomial from_terms(std::vector<std::pair<Monomial, Rat>> raw) {
    std::sort(raw.begin(), raw.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    Polynomial p;
    p.terms.reserve(raw.size());
    for (auto& t : raw) {
      if (!p.terms.empty() && p.terms.back().first == t.first)
        p.terms.back().second += t.second;
      else
        p.terms.push_back(std::move(t));
    }
    std::erase_if(p.terms, [](const auto& t) { return t.second == 0; });
    return p;
  }
  static Polynomial var(ParamId id) {
    Polynomial p;
    p.terms.push_back({Monomial{{id}}, Rat(1)});
    return p;
  }

  bool is_zero() const { return terms.empty(); }
  bool is_constant() const {
    return terms.empty() || (terms.size() == 1 && terms[0].first.degree() == 0);
  }
  Rat constant_value() const {
    return terms.empty() ? Rat(0) : terms[0].second;
  }
  int degree() const {
    int d = 0;
    for (const auto& [m, c] : terms) d = std::max(d, m.degree());
    return d;
  }

  void add_term(const Monomial& m, const Rat& c) {
    if (c == 0) return;
    auto it = std::lower_bound(terms.begin(), terms.end(), m,
                               [](const auto& t, const Monomial& key) { return t.first < key; });
    if (it != terms.end() && it->first == m) {
      it->second += c;
      if (it->second == 0) terms.erase(it);
    } else {
      terms.insert(it, {m, c});
    }
  }

  Polynomial& operator+=(const Polynomial& o) {
    for (const auto& [m, c] : o.terms) add_term(m, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    for (const auto& [m, c] : o.terms) add_term(m, -c);
    return *this;
  }
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    std::vector<std::pair<Monomial, Rat>> raw;
    raw.reserve(a.terms.size() * b.terms.size());
    for (const auto& [ma, ca] : a.terms)
      for (const auto& [mb, cb] : b.terms) raw.emplace_back(ma.times(mb), ca * cb);
    return from_terms(std::move(raw));
  }
  Polynomial scaled(const Rat& c) const {
    Polynomial out;
    if (c == 0) return out;
    out.terms = terms;
    for (auto& t : out.terms) t.second *= c;
    return out;
  }
  Polynomial negated() const { return scaled(Rat(-1)); }

  double eval(const std::vector<double>& x) const {
    double s = 0.0;
    for (const auto& [m, c] : terms) {
      double t = to_double(c);
      for (ParamId v : m.vars) t *= x[v];
      s += t;
    }
    return s;
  }
  Rat eval_exact(const std::vector<Rat>& x) const {
    Rat s = 0;
    for (const auto& [m, c] : terms) {
      Rat t = c;
      for (ParamId v : m.vars) t *= x[v];
      s += t;
    }
    return s;
  }

  std::vector<ParamId> support() const {
    std::vector<ParamId> out;
    for (const auto& [m, c] : terms)
      for (ParamId v : m.vars) out.push_back(v);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool operator==(const Polynomial& o) const { return terms == o.terms; }
  bool operator<(const Polynomial& o) const { return terms < o.terms; }
};

//! Sum of coefficiented products of factor polynomials over disjoint
//! disturbance clusters. Mirrors how probabilities arise (one factor per
//! cluster per consistent value profile) and drives tight relaxations.
struct FactorTerm {
  Rat coeff;
  std::vector<Polynomial> factors;  // each over one cluster's parameters
};

struct FactoredPoly {
  std::vector<FactorTerm> terms;

  bool empty() const { return terms.empty(); }

  Polynomial expand() const {
    std::vector<std::pair<Monomial, Rat>> raw;
    for (const auto& t : terms) {
      Polynomial prod = Polynomial::constant(t.coeff);
      for (const auto& f : t.factors) prod = prod * f;
      raw.insert(raw.end(), prod.terms.begin(), prod.terms.end());
    }
    return Polynomial::from_terms(std::move(raw));
  }

  FactoredPoly scaled(const Rat& c) const {
    FactoredPoly out = *this;
    for (auto& t : out.terms) t.coeff *= c;
    return out;
  }

  void append(const FactoredPoly& o) {
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
  }
};

}  // namespace polybound
