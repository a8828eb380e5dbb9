#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include "tpca/rng.hpp"
#include "tpca/tensor.hpp"
#include "tpca/vec.hpp"

namespace tpca {

/// Planted-signal instance: tensor = tau * v(x)v(x)v + sigma * (iid standard
/// Gaussian noise), with unit signal v. Keeping the ground truth alongside
/// the observation lets benchmarks score recovered vectors.
struct SpikedInstance {
  std::int64_t n;
  double tau;
  double sigma;
  Vec v;
  std::uint64_t seed;
  Tensor3 tensor;
};

struct Score {
  double correlation;  // <x,v> / (|x||v|), sign preserved
  bool success;        // correlation >= 0.8
};

inline constexpr double kSuccessThreshold = 0.8;

namespace detail {
inline Vec random_unit_vec(std::int64_t n, CounterRng& rng) {
  Vec v(static_cast<std::size_t>(n));
  while (true) {
    rng.fill_gaussian(v.data(), v.size(), 1.0);
    const double nrm = norm(v);
    if (nrm > 1e-12) {
      scale_inplace(v, 1.0 / nrm);
      return v;
    }
  }
}
}  // namespace detail

/// Draws an instance deterministically from `seed`. The signal direction
/// comes from stream 0 (or `v_opt`, normalized) and the noise from a
/// disjoint stream, so regenerating with the same seed is bit-identical and
/// supplying v_opt does not perturb the noise.
inline SpikedInstance generate(std::int64_t n, double tau, double sigma, std::uint64_t seed,
                               const std::optional<Vec>& v_opt = std::nullopt,
                               std::int64_t max_dim = kTensorMaxDim) {
  if (n < 2) throw std::invalid_argument("generate: n must be >= 2");
  if (tau < 0.0) throw std::invalid_argument("generate: tau must be >= 0");
  if (sigma <= 0.0) throw std::invalid_argument("generate: sigma must be > 0");

  Vec v;
  if (v_opt) {
    if (static_cast<std::int64_t>(v_opt->size()) != n)
      throw std::invalid_argument("generate: v has wrong length");
    if (norm(*v_opt) <= 0.0) throw std::invalid_argument("generate: v must be nonzero");
    v = normalized(*v_opt);
  } else {
    CounterRng rng(seed, 0);
    v = detail::random_unit_vec(n, rng);
  }

  Tensor3 noise = sample_gaussian(n, 1.0, CounterRng(seed, 1), max_dim);
  Tensor3 tensor = rank_one(v, tau, max_dim);
  add_scaled_inplace(tensor, sigma, noise);
  return SpikedInstance{n, tau, sigma, std::move(v), seed, std::move(tensor)};
}

/// Noise-variance estimate ||T||_F^2 / n^3. The rank-one part contributes
/// only tau^2/n^3, negligible in the regimes of interest.
template <typename Scalar>
double estimate_sigma_sq(const Tensor3T<Scalar>& t) {
  const double n = static_cast<double>(t.dim());
  return frobenius_sq(t) / (n * n * n);
}

/// Cosine of the angle between x and v, sign preserved; success at >= 0.8.
inline Score score(const Vec& x, const Vec& v) {
  const double nx = norm(x);
  const double nv = norm(v);
  if (nx <= 0.0 || nv <= 0.0) throw std::invalid_argument("score: zero vector");
  const double corr = dot(x, v) / (nx * nv);
  return Score{corr, corr >= kSuccessThreshold};
}

}  // namespace tpca
