#pragma once

#include <random>

#include "sdprlt/sdprlt.hpp"

namespace sdprlt::testing {

inline Mat gaussian(int r, int c, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> N01;
  Mat M(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) M(i, j) = N01(g);
  return M;
}

inline SymMat random_sym(int n, std::uint64_t seed) { return symmetrize(gaussian(n, n, seed)); }

// Random MBQP with m equalities, l inequalities and the first p variables binary.
// Positive constraint rows keep the feasible set bounded; a hidden point keeps it nonempty.
inline MbqpInstance random_mixed(int n, int m, int l, int p, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  MbqpInstance inst = make_instance(n, "mixed" + std::to_string(seed));
  const SymMat F = gaussian(n, n, seed + 1);
  inst.Q = symmetrize(F) * 5.0;
  inst.c = gaussian(n, 1, seed + 2) * 3.0;
  Vec x0(n);
  for (int i = 0; i < n; ++i) x0(i) = i < p ? coin(g) : U(g);
  for (int i = 0; i < p; ++i) inst.B.push_back(i);
  inst.A = Mat(m, n);
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < n; ++j) inst.A(k, j) = 0.5 + U(g);
  inst.b = inst.A * x0;
  inst.G = Mat(l, n);
  for (int k = 0; k < l; ++k)
    for (int j = 0; j < n; ++j) inst.G(k, j) = 0.5 + U(g);
  inst.d = inst.G * x0 + Vec::Constant(l, 0.5);
  return inst;
}

}  // namespace sdprlt::testing
