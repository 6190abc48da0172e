#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace polybound {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t p = s.find(sep, start);
    if (p == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, p - start));
    start = p + 1;
  }
  return out;
}

inline std::string strip_comment(const std::string& line) {
  std::size_t p = line.find('#');
  return p == std::string::npos ? line : line.substr(0, p);
}

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

//! Mixed-radix indexing: tuple (t0..tk-1) with radices (r0..rk-1), t0 most
//! significant. Used for response-table cells and joint sample spaces.
inline std::size_t tuple_to_index(const std::vector<int>& tuple,
                                  const std::vector<int>& radices) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < tuple.size(); ++i) idx = idx * radices[i] + tuple[i];
  return idx;
}

inline std::vector<int> index_to_tuple(std::size_t idx, const std::vector<int>& radices) {
  std::vector<int> t(radices.size());
  for (std::size_t i = radices.size(); i-- > 0;) {
    t[i] = static_cast<int>(idx % radices[i]);
    idx /= radices[i];
  }
  return t;
}

//! Seedable RNG with a fixed, documented mapping to [0,1): mt19937_64 output
//! shifted to 53 bits. Identical streams across platforms for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform01() { return (gen_() >> 11) * 0x1.0p-53; }

  std::uint64_t next() { return gen_(); }

  //! Index into a cumulative partition of [0,1) by weights (need not sum to
  //! exactly 1; the last bucket absorbs slack).
  std::size_t categorical(const std::vector<double>& weights) {
    double u = uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

  //! n independent categorical draws tallied into counts.
  std::vector<std::int64_t> multinomial(std::int64_t n, const std::vector<double>& weights) {
    std::vector<std::int64_t> counts(weights.size(), 0);
    for (std::int64_t i = 0; i < n; ++i) ++counts[categorical(weights)];
    return counts;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace polybound
