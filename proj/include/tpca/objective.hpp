#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include "tpca/model.hpp"
#include "tpca/tensor.hpp"
#include "tpca/vec.hpp"

namespace tpca {

// Objectives built from an observed tensor T of dimension n:
//
//   f(x)        = T(x,x,x)
//   g(x,t)      = f(x) + t^2 <z, x>, the Gaussian-blur of f at radius t,
//                 where z_j = sum_i (T_iij + T_iji + T_jii)
//   g_r(x,t)    = g(x,t) - (3 tau_hat / 4) (|x|^4 + 2 t^2 (n+2) |x|^2
//                                           + t^4 (n^2 + 2n))
//                 the blur of the quartic-penalized objective
//                 f(x) - (3 tau_hat / 4) |x|^4.
//
// Everything is expressed in observables (contractions of T); no ground
// truth is needed. The Hessian of f is 2 * sym_contract_matrix(T, x); the
// factor 2 is pinned by the finite-difference checks in the test suite.

/// Value/gradient(/Hessian) bundle of g_r at one point.
struct SmoothedEval {
  double value = 0.0;
  Vec gradient;
  std::optional<Mat> hessian;  // exactly symmetric when present
  double t = 0.0;
  double tau_hat = 0.0;
};

template <typename Scalar>
double f_eval(const Tensor3T<Scalar>& t, const Vec& x) {
  return trilinear(t, x, x, x);
}

namespace detail {
inline void check_smoothing_args(double t, double tau_hat, bool need_tau) {
  if (t < 0.0) throw std::invalid_argument("smoothing radius t must be >= 0");
  if (need_tau && tau_hat <= 0.0) throw std::invalid_argument("tau_hat must be > 0");
}

inline double penalty_value(double t, double tau_hat, double n, double xsq) {
  const double t2 = t * t;
  return 0.75 * tau_hat * (xsq * xsq + 2.0 * t2 * (n + 2.0) * xsq + t2 * t2 * (n * n + 2.0 * n));
}
}  // namespace detail

template <typename Scalar>
double g_eval(const Tensor3T<Scalar>& ten, const Vec& x, double t) {
  detail::check_smoothing_args(t, 1.0, false);
  return f_eval(ten, x) + t * t * dot(mode_diag_sum(ten), x);
}

template <typename Scalar>
double g_r_eval(const Tensor3T<Scalar>& ten, const Vec& x, double t, double tau_hat) {
  detail::check_smoothing_args(t, tau_hat, true);
  return g_eval(ten, x, t) -
         detail::penalty_value(t, tau_hat, static_cast<double>(ten.dim()), norm_sq(x));
}

/// grad g_r = sym_contract_vec(T,x) + t^2 z - 3 tau_hat (|x|^2 + t^2 (n+2)) x
template <typename Scalar>
Vec g_r_grad(const Tensor3T<Scalar>& ten, const Vec& x, double t, double tau_hat) {
  detail::check_smoothing_args(t, tau_hat, true);
  const double n = static_cast<double>(ten.dim());
  Vec g = sym_contract_vec(ten, x);
  const double t2 = t * t;
  axpy_inplace(g, t2, mode_diag_sum(ten));
  axpy_inplace(g, -3.0 * tau_hat * (norm_sq(x) + t2 * (n + 2.0)), x);
  return g;
}

/// hess g_r = 2 sym_contract_matrix(T,x)
///            - 3 tau_hat ((|x|^2 + t^2 (n+2)) I + 2 x x^T)
template <typename Scalar>
Mat g_r_hess(const Tensor3T<Scalar>& ten, const Vec& x, double t, double tau_hat) {
  detail::check_smoothing_args(t, tau_hat, true);
  const std::int64_t n = ten.dim();
  Mat h = sym_contract_matrix(ten, x);
  const double shift = 3.0 * tau_hat * (norm_sq(x) + t * t * (static_cast<double>(n) + 2.0));
  for (std::int64_t i = 0; i < n; ++i) {
    h(i, i) = 2.0 * h(i, i) - shift - 6.0 * tau_hat * x[i] * x[i];
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double v = 2.0 * h(i, j) - 6.0 * tau_hat * x[i] * x[j];
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  return h;
}

template <typename Scalar>
SmoothedEval evaluate_g_r(const Tensor3T<Scalar>& ten, const Vec& x, double t, double tau_hat,
                          bool with_hessian = false) {
  SmoothedEval e;
  e.value = g_r_eval(ten, x, t, tau_hat);
  e.gradient = g_r_grad(ten, x, t, tau_hat);
  if (with_hessian) e.hessian = g_r_hess(ten, x, t, tau_hat);
  e.t = t;
  e.tau_hat = tau_hat;
  return e;
}

/// Unit-norm z, the maximizer direction of g(., t) as t -> infinity.
template <typename Scalar>
Vec x_dagger_unit(const Tensor3T<Scalar>& ten) {
  Vec z = mode_diag_sum(ten);
  const double nz = norm(z);
  if (nz <= 1e-14) throw DegenerateInputError("x_dagger_unit: mode-diagonal sum is (near-)zero");
  scale_inplace(z, 1.0 / nz);
  return z;
}

/// z / (3 tau_hat (n+2)): the exact maximizer of the t^2-dominant quadratic
/// part of g_r. A zero z yields the zero vector.
template <typename Scalar>
Vec x_dagger_scaled(const Tensor3T<Scalar>& ten, double tau_hat) {
  if (tau_hat <= 0.0) throw std::invalid_argument("x_dagger_scaled: tau_hat must be > 0");
  Vec z = mode_diag_sum(ten);
  scale_inplace(z, 1.0 / (3.0 * tau_hat * (static_cast<double>(ten.dim()) + 2.0)));
  return z;
}

/// Penalty coefficient estimate when the spike strength is unknown: the max
/// of f over a few short power-iteration probes, floored at 1. The solution
/// of the penalized problem only changes scale with this coefficient, so a
/// rough value is enough.
template <typename Scalar>
double estimate_tau_hat(const Tensor3T<Scalar>& ten, std::uint64_t seed, int probes = 20,
                        int steps_per_probe = 2) {
  CounterRng root(seed, 7);
  double best = 1.0;
  for (int p = 0; p < probes; ++p) {
    CounterRng rng = root.substream(static_cast<std::uint64_t>(p));
    Vec x = detail::random_unit_vec(ten.dim(), rng);
    for (int s = 0; s < steps_per_probe; ++s) {
      Vec y = sym_contract_vec(ten, x);
      const double ny = norm(y);
      if (ny <= 1e-14) break;
      scale_inplace(y, 1.0 / ny);
      x = std::move(y);
    }
    // <sym_contract_vec(T,x), x> = 3 T(x,x,x)
    const double f = dot(sym_contract_vec(ten, x), x) / 3.0;
    if (f > best) best = f;
  }
  return best;
}

}  // namespace tpca
