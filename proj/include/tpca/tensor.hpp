#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "tpca/rng.hpp"
#include "tpca/vec.hpp"

namespace tpca {

/// Soft size warning and hard refusal for cubic storage. A dense double
/// tensor at n = 512 is already 1 GiB; anything larger must opt in through
/// a caller-supplied cap (see the harness's max-n override).
inline constexpr std::int64_t kTensorWarnDim = 320;
inline constexpr std::int64_t kTensorMaxDim = 512;

namespace detail {
inline void warn_large_tensor_once(std::int64_t n) {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::fprintf(stderr, "tpca: warning: dense order-3 tensor with n = %lld exceeds %lld; memory grows as n^3\n",
                 static_cast<long long>(n), static_cast<long long>(kTensorWarnDim));
  }
}
}  // namespace detail

/// Dense real n x n x n tensor, row-major with the last index fastest.
/// Entries are stored independently: T(i,j,k), T(j,i,k), ... are distinct
/// slots and no symmetrization is implied. Immutable by convention after it
/// is filled; all kernels below are pure functions and safe to call
/// concurrently on a shared tensor.
template <typename Scalar>
class Tensor3T {
 public:
  explicit Tensor3T(std::int64_t n, std::int64_t max_dim = kTensorMaxDim) : n_(n) {
    if (n < 1) throw std::invalid_argument("Tensor3: dimension must be >= 1");
    if (n > max_dim) throw std::invalid_argument("Tensor3: dimension exceeds the configured cap");
    if (n > kTensorWarnDim) detail::warn_large_tensor_once(n);
    a_.assign(static_cast<std::size_t>(n) * n * n, Scalar(0));
  }

  std::int64_t dim() const { return n_; }
  std::size_t size() const { return a_.size(); }
  Scalar* data() { return a_.data(); }
  const Scalar* data() const { return a_.data(); }

  Scalar& operator()(std::int64_t i, std::int64_t j, std::int64_t k) {
    return a_[index(i, j, k)];
  }
  Scalar operator()(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return a_[index(i, j, k)];
  }

  std::size_t index(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return (static_cast<std::size_t>(i) * n_ + j) * n_ + k;
  }

  bool all_finite() const {
    for (Scalar x : a_) {
      if (!std::isfinite(static_cast<double>(x))) return false;
    }
    return true;
  }

 private:
  std::int64_t n_;
  std::vector<Scalar> a_;
};

using Tensor3 = Tensor3T<double>;
using Tensor3f = Tensor3T<float>;

namespace detail {
template <typename Scalar>
void check_dim(const Tensor3T<Scalar>& t, const Vec& x, const char* op) {
  if (static_cast<std::int64_t>(x.size()) != t.dim())
    throw std::invalid_argument(std::string(op) + ": vector length does not match tensor dimension");
}
}  // namespace detail

/// Tensor with iid N(0, variance) entries, reproducible from the seed.
template <typename Scalar = double>
Tensor3T<Scalar> sample_gaussian(std::int64_t n, double variance, CounterRng rng,
                                 std::int64_t max_dim = kTensorMaxDim) {
  if (variance <= 0.0) throw std::invalid_argument("sample_gaussian: variance must be positive");
  Tensor3T<Scalar> t(n, max_dim);
  rng.fill_gaussian(t.data(), t.size(), std::sqrt(variance));
  return t;
}

template <typename Scalar = double>
Tensor3T<Scalar> sample_gaussian(std::int64_t n, double variance, std::uint64_t seed,
                                 std::int64_t max_dim = kTensorMaxDim) {
  return sample_gaussian<Scalar>(n, variance, CounterRng(seed), max_dim);
}

/// scale * v (x) v (x) v
template <typename Scalar = double>
Tensor3T<Scalar> rank_one(const Vec& v, double scale, std::int64_t max_dim = kTensorMaxDim) {
  if (!all_finite(v)) throw std::invalid_argument("rank_one: non-finite vector");
  const std::int64_t n = static_cast<std::int64_t>(v.size());
  Tensor3T<Scalar> t(n, max_dim);
  Scalar* out = t.data();
  for (std::int64_t i = 0; i < n; ++i) {
    const double si = scale * v[i];
    for (std::int64_t j = 0; j < n; ++j) {
      const double sij = si * v[j];
      for (std::int64_t k = 0; k < n; ++k) *out++ = static_cast<Scalar>(sij * v[k]);
    }
  }
  return t;
}

/// Trilinear form sum_{ijk} T_ijk x_i y_j z_k. Plain sequential accumulation.
template <typename Scalar>
double trilinear(const Tensor3T<Scalar>& t, const Vec& x, const Vec& y, const Vec& z) {
  detail::check_dim(t, x, "trilinear");
  detail::check_dim(t, y, "trilinear");
  detail::check_dim(t, z, "trilinear");
  const std::int64_t n = t.dim();
  const Scalar* a = t.data();
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double row_i = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      double inner = 0.0;
      for (std::int64_t k = 0; k < n; ++k) inner += static_cast<double>(a[k]) * z[k];
      row_i += y[j] * inner;
      a += n;
    }
    total += x[i] * row_i;
  }
  return total;
}

/// Vector l |-> sum_{ij} (T_ijl + T_ilj + T_lij) x_i x_j: the gradient of
/// x |-> T(x,x,x), and the tensor power-method update direction.
template <typename Scalar>
Vec sym_contract_vec(const Tensor3T<Scalar>& t, const Vec& x) {
  detail::check_dim(t, x, "sym_contract_vec");
  const std::int64_t n = t.dim();
  const Scalar* a = t.data();
  Vec out(x.size(), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    const double xi = x[i];
    for (std::int64_t j = 0; j < n; ++j) {
      const double w = xi * x[j];
      double row_dot = 0.0;
      for (std::int64_t k = 0; k < n; ++k) {
        const double tv = static_cast<double>(a[k]);
        out[k] += w * tv;
        row_dot += tv * x[k];
      }
      out[j] += xi * row_dot;
      out[i] += x[j] * row_dot;
      a += n;
    }
  }
  return out;
}

/// Symmetrized one-slot contraction: P_sym[M] with
/// M_jk = sum_i x_i (T_ijk + T_jik + T_jki). The result is exactly symmetric.
template <typename Scalar>
Mat sym_contract_matrix(const Tensor3T<Scalar>& t, const Vec& x) {
  detail::check_dim(t, x, "sym_contract_matrix");
  const std::int64_t n = t.dim();
  Mat m(n);
  const Scalar* p = t.data();
  for (std::int64_t a = 0; a < n; ++a) {
    for (std::int64_t b = 0; b < n; ++b) {
      for (std::int64_t c = 0; c < n; ++c) {
        const double tv = static_cast<double>(*p++);
        m(b, c) += x[a] * tv;  // sum_i x_i T_ijk
        m(a, c) += x[b] * tv;  // sum_i x_i T_jik
        m(a, b) += x[c] * tv;  // sum_i x_i T_jki
      }
    }
  }
  Mat out(n);
  for (std::int64_t i = 0; i < n; ++i) {
    out(i, i) = m(i, i);
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (m(i, j) + m(j, i));
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return out;
}

/// z_j = sum_i (T_iij + T_iji + T_jii). Touches only the 3n^2 entries with a
/// repeated index.
template <typename Scalar>
Vec mode_diag_sum(const Tensor3T<Scalar>& t) {
  const std::int64_t n = t.dim();
  Vec z(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
      s += static_cast<double>(t(i, i, j)) + static_cast<double>(t(i, j, i)) +
           static_cast<double>(t(j, i, i));
    z[j] = s;
  }
  return z;
}

template <typename Scalar>
double frobenius_sq(const Tensor3T<Scalar>& t) {
  const Scalar* a = t.data();
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = static_cast<double>(a[i]);
    s += v * v;
  }
  return s;
}

/// (M M^T) w for the n x n^2 mode-1 flattening M_{i,(j,k)} = T_ijk, computed
/// as two passes over the tensor without materializing M M^T.
template <typename Scalar>
Vec flatten_gram_matvec(const Tensor3T<Scalar>& t, const Vec& w) {
  detail::check_dim(t, w, "flatten_gram_matvec");
  const std::int64_t n = t.dim();
  const std::size_t slab = static_cast<std::size_t>(n) * n;
  std::vector<double> mtw(slab, 0.0);  // (M^T w)_{jk}
  const Scalar* a = t.data();
  for (std::int64_t i = 0; i < n; ++i) {
    const double wi = w[i];
    for (std::size_t s = 0; s < slab; ++s) mtw[s] += wi * static_cast<double>(a[s]);
    a += slab;
  }
  Vec out(w.size(), 0.0);
  a = t.data();
  for (std::int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t q = 0; q < slab; ++q) s += static_cast<double>(a[q]) * mtw[q];
    out[i] = s;
    a += slab;
  }
  return out;
}

/// Entrywise a*T + b*U.
template <typename Scalar>
Tensor3T<Scalar> combine(const Tensor3T<Scalar>& t, const Tensor3T<Scalar>& u, double a, double b,
                         std::int64_t max_dim = kTensorMaxDim) {
  if (t.dim() != u.dim()) throw std::invalid_argument("combine: dimension mismatch");
  Tensor3T<Scalar> out(t.dim(), max_dim);
  const Scalar* pt = t.data();
  const Scalar* pu = u.data();
  Scalar* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    po[i] = static_cast<Scalar>(a * static_cast<double>(pt[i]) + b * static_cast<double>(pu[i]));
  return out;
}

/// In-place out += c * src, used by streaming accumulation.
template <typename Scalar>
void add_scaled_inplace(Tensor3T<Scalar>& out, double c, const Tensor3T<Scalar>& src) {
  if (out.dim() != src.dim()) throw std::invalid_argument("add_scaled_inplace: dimension mismatch");
  Scalar* po = out.data();
  const Scalar* ps = src.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    po[i] = static_cast<Scalar>(static_cast<double>(po[i]) + c * static_cast<double>(ps[i]));
}

}  // namespace tpca
