#pragma once

#include "tracemin/linalg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <random>
#include <vector>

namespace testutil {

using tracemin::CMatrix;
using tracemin::CVector;
using tracemin::cplx;

inline std::mt19937_64& rng(std::uint64_t seed) {
  thread_local std::mt19937_64 g;
  g.seed(seed);
  return g;
}

inline CMatrix random_matrix(std::mt19937_64& g, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n;
  CMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = cplx(n(g), n(g));
  }
  return m;
}

inline CVector random_vector(std::mt19937_64& g, Eigen::Index n) {
  return random_matrix(g, n, 1).col(0);
}

inline CMatrix random_hermitian(std::mt19937_64& g, Eigen::Index n) {
  const CMatrix a = random_matrix(g, n, n);
  return (a + a.adjoint()) / 2.0;
}

// Gram matrix of n random vectors in C^(n+2), well conditioned.
inline CMatrix random_spd(std::mt19937_64& g, Eigen::Index n) {
  const CMatrix a = random_matrix(g, n + 2, n);
  CMatrix s = a.adjoint() * a;
  s = (s + s.adjoint()).eval() / 2.0;
  return s;
}

inline std::vector<double> sorted_real(const Eigen::VectorXcd& v) {
  std::vector<double> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v(i).real();
  std::sort(out.begin(), out.end());
  return out;
}

// Reference Pauli matrices and Kronecker products, site 0 leftmost.
inline CMatrix pauli(char op) {
  CMatrix m = CMatrix::Zero(2, 2);
  const cplx i(0.0, 1.0);
  switch (op) {
    case 'I': m(0, 0) = 1.0; m(1, 1) = 1.0; break;
    case 'X': m(0, 1) = 1.0; m(1, 0) = 1.0; break;
    case 'Y': m(0, 1) = -i; m(1, 0) = i; break;
    case 'Z': m(0, 0) = 1.0; m(1, 1) = -1.0; break;
  }
  return m;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline CMatrix pauli_word(const std::string& word) {
  CMatrix m = CMatrix::Identity(1, 1);
  for (char c : word) m = kron(m, pauli(c));
  return m;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace testutil
