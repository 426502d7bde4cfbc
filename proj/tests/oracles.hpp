#pragma once

// Slow, independent reference computations shared by the unit tests and the
// acceptance suite. Nothing here calls into the library's loss code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "ace/core.hpp"

namespace oracle {

using LD = long double;

inline std::vector<LD> softmax_row(const std::vector<double>& a) {
  std::vector<LD> e(a.size());
  LD z = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    e[i] = std::exp(static_cast<LD>(a[i]));
    z += e[i];
  }
  for (LD& v : e) v /= z;
  return e;
}

// Dense K x K Jacobian J_ij = y_i (delta_ij - y_j), applied as J^T u.
inline std::vector<double> dense_jacobian_apply(const std::vector<double>& y,
                                                const std::vector<double>& u) {
  const std::size_t k = y.size();
  std::vector<std::vector<LD>> jac(k, std::vector<LD>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      jac[i][j] = static_cast<LD>(y[i]) * ((i == j ? 1.0L : 0.0L) - static_cast<LD>(y[j]));
    }
  }
  std::vector<double> v(k);
  for (std::size_t j = 0; j < k; ++j) {
    LD acc = 0;
    for (std::size_t i = 0; i < k; ++i) acc += static_cast<LD>(u[i]) * jac[i][j];
    v[j] = static_cast<double>(acc);
  }
  return v;
}

inline std::vector<LD> column_sums(const ace::Matrix& m) {
  std::vector<LD> s(m.cols(), 0);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    for (std::size_t r = 0; r < m.rows(); ++r) s[c] += m(r, c);
  }
  return s;
}

inline std::vector<std::int64_t> histogram(const std::vector<int>& labels, std::size_t classes,
                                           std::size_t steps) {
  std::map<int, std::int64_t> seen;
  for (int l : labels) ++seen[l];
  std::vector<std::int64_t> out(classes, 0);
  for (auto [l, n] : seen) out[static_cast<std::size_t>(l)] = n;
  out[0] = static_cast<std::int64_t>(steps - labels.size());
  return out;
}

// Recursive edit distance with memoization, written independently of the
// two-row implementation under test.
inline std::size_t edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min({best, go(i + 1, j) + 1, go(i, j + 1) + 1});
    return memo[key] = best;
  };
  return go(0, 0);
}

// Every length-T path over K classes whose CTC collapse equals `labels`,
// enumerated by recursion on the path prefix.
inline LD ctc_path_sum(const ace::Matrix& probs, const std::vector<int>& labels) {
  const std::size_t steps = probs.rows();
  const std::size_t classes = probs.cols();
  std::vector<int> path;
  LD total = 0;
  std::function<void(LD)> rec = [&](LD prod) {
    if (path.size() == steps) {
      std::vector<int> out;
      for (std::size_t i = 0; i < path.size(); ++i) {
        if (path[i] != 0 && (i == 0 || path[i] != path[i - 1])) out.push_back(path[i]);
      }
      if (out == labels) total += prod;
      return;
    }
    for (std::size_t k = 0; k < classes; ++k) {
      path.push_back(static_cast<int>(k));
      rec(prod * probs(path.size() - 1, k));
      path.pop_back();
    }
  };
  rec(1);
  return total;
}

inline ace::Matrix random_logits(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                 double lo = -3.0, double hi = 3.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  ace::Matrix m(rows, cols);
  for (double& v : m.data()) v = d(rng);
  return m;
}

inline ace::ProbGrid random_probs(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                  double spread = 3.0) {
  return ace::softmax(ace::LogitGrid(random_logits(rng, rows, cols, -spread, spread)));
}

inline std::vector<int> random_labels(std::mt19937_64& rng, std::size_t len,
                                      std::size_t classes) {
  std::uniform_int_distribution<int> d(1, static_cast<int>(classes) - 1);
  std::vector<int> out(len);
  for (int& v : out) v = d(rng);
  return out;
}

}  // namespace oracle
