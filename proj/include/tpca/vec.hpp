#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tpca/errors.hpp"

namespace tpca {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(const Vec& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(norm_sq(a)); }

inline Vec scaled(const Vec& a, double c) {
  Vec r(a);
  for (double& x : r) x *= c;
  return r;
}

inline void scale_inplace(Vec& a, double c) {
  for (double& x : a) x *= c;
}

/// r = a + c*b
inline Vec axpy(const Vec& a, double c, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("axpy: size mismatch");
  Vec r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += c * b[i];
  return r;
}

inline void axpy_inplace(Vec& a, double c, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("axpy: size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += c * b[i];
}

inline double dist(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dist: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline Vec normalized(const Vec& a, double tiny = 1e-300) {
  const double nrm = norm(a);
  if (!(nrm > tiny)) throw DegenerateInputError("normalized: vector has (near-)zero norm");
  return scaled(a, 1.0 / nrm);
}

inline bool all_finite(const Vec& a) {
  for (double x : a) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

/// Dense square matrix, row-major. Symmetric producers write both triangles
/// so M(i,j) == M(j,i) holds bit-exactly.
struct Mat {
  std::int64_t n = 0;
  std::vector<double> a;

  Mat() = default;
  explicit Mat(std::int64_t dim) : n(dim), a(static_cast<std::size_t>(dim) * dim, 0.0) {}

  double& operator()(std::int64_t i, std::int64_t j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double operator()(std::int64_t i, std::int64_t j) const {
    return a[static_cast<std::size_t>(i) * n + j];
  }

  bool exactly_symmetric() const {
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = i + 1; j < n; ++j)
        if ((*this)(i, j) != (*this)(j, i)) return false;
    return true;
  }
};

inline Vec matvec(const Mat& m, const Vec& x) {
  if (static_cast<std::int64_t>(x.size()) != m.n) throw std::invalid_argument("matvec: size mismatch");
  Vec r(x.size(), 0.0);
  for (std::int64_t i = 0; i < m.n; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < m.n; ++j) s += m(i, j) * x[j];
    r[i] = s;
  }
  return r;
}

}  // namespace tpca
