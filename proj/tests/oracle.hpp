#pragma once

// Test-side reference computations. Nothing here calls into the library's
// solvers: plain vectors, Gaussian elimination and exhaustive enumeration.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mdpgeo/core.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

// Solves a x = b with partial pivoting.
inline Vec solve(Mat a, Vec b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < 1e-300) throw std::runtime_error("singular system");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
    x[i] = acc / a[i][i];
  }
  return x;
}

inline Vec to_vec(const Eigen::VectorXd& v) { return Vec(v.data(), v.data() + v.size()); }

inline double span(const Vec& v) {
  double lo = v[0], hi = v[0];
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return hi - lo;
}

// Value of the policy picking choice[s] at every state.
inline Vec evaluate(const mdpgeo::Mdp& m, const std::vector<std::size_t>& choice) {
  const std::size_t n = m.n_states();
  Mat a(n, Vec(n, 0.0));
  Vec b(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& act = m.actions()[choice[s]];
    for (std::size_t j = 0; j < n; ++j) a[s][j] = (s == j ? 1.0 : 0.0) - m.gamma() * act.probs[static_cast<long>(j)];
    b[s] = act.reward;
  }
  return solve(a, b);
}

// r + gamma p.v - v(s)
inline double adv(const mdpgeo::Mdp& m, std::size_t a, const Vec& v) {
  const auto& act = m.actions()[a];
  double acc = act.reward - v[act.state];
  for (std::size_t j = 0; j < v.size(); ++j) acc += m.gamma() * act.probs[static_cast<long>(j)] * v[j];
  return acc;
}

struct Optimum {
  std::vector<std::size_t> policy;
  Vec values;
  double delta = std::numeric_limits<double>::infinity();
};

// Enumerates every deterministic policy; keeps the componentwise best.
inline Optimum brute_force(const mdpgeo::Mdp& m) {
  const std::size_t n = m.n_states();
  std::vector<std::vector<std::size_t>> per_state(n);
  for (std::size_t a = 0; a < m.n_actions(); ++a) per_state[m.actions()[a].state].push_back(a);
  std::vector<std::size_t> digit(n, 0), choice(n);
  Optimum best;
  double best_sum = -std::numeric_limits<double>::infinity();
  for (;;) {
    for (std::size_t s = 0; s < n; ++s) choice[s] = per_state[s][digit[s]];
    const Vec v = evaluate(m, choice);
    double sum = 0;
    for (double x : v) sum += x;
    if (sum > best_sum + 1e-12) {
      best_sum = sum;
      best.policy = choice;
      best.values = v;
    }
    std::size_t s = 0;
    while (s < n && ++digit[s] == per_state[s].size()) digit[s++] = 0;
    if (s == n) break;
  }
  for (std::size_t a = 0; a < m.n_actions(); ++a) {
    if (best.policy[m.actions()[a].state] == a) continue;
    best.delta = std::min(best.delta, -adv(m, a, best.values));
  }
  return best;
}

// Boolean primitivity exponent by repeated squaring-free powers; 0 if none
// within the given limit.
inline std::size_t primitivity_exponent(const Mat& p, std::size_t limit) {
  const std::size_t n = p.size();
  std::vector<std::vector<bool>> base(n, std::vector<bool>(n)), cur;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) base[i][j] = p[i][j] > 0;
  cur = base;
  for (std::size_t k = 1; k <= limit; ++k) {
    bool full = true;
    for (auto& row : cur)
      for (bool b : row) full = full && b;
    if (full) return k;
    std::vector<std::vector<bool>> next(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t m = 0; m < n; ++m)
        if (cur[i][m])
          for (std::size_t j = 0; j < n; ++j) next[i][j] = next[i][j] || base[m][j];
    cur = next;
  }
  return 0;
}

inline Mat policy_matrix(const mdpgeo::Mdp& m, const std::vector<std::size_t>& choice) {
  Mat p;
  for (std::size_t a : choice) p.push_back(to_vec(m.actions()[a].probs));
  return p;
}

// Fixtures from the glossary.
inline mdpgeo::Mdp m2() {
  using mdpgeo::Action;
  auto row = [](double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
  };
  return mdpgeo::Mdp(2, 0.9,
                     {Action{"a1", 0, row(1, 0), 0.0}, Action{"a2", 0, row(0, 1), 0.5},
                      Action{"b1", 1, row(1, 0), 0.2}, Action{"b2", 1, row(0, 1), 0.0}});
}

inline mdpgeo::Mdp m2_mix() {
  using mdpgeo::Action;
  auto row = [](double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
  };
  return mdpgeo::Mdp(2, 0.9,
                     {Action{"a1", 0, row(0.5, 0.5), 1.0}, Action{"a2", 0, row(1, 0), 0.9},
                      Action{"b1", 1, row(0.5, 0.5), 0.8}, Action{"b2", 1, row(0, 1), 0.0}});
}

}  // namespace oracle
