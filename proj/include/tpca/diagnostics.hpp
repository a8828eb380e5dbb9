#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tpca/algorithms.hpp"
#include "tpca/model.hpp"
#include "tpca/objective.hpp"
#include "tpca/parallel.hpp"
#include "tpca/rng.hpp"
#include "tpca/tensor.hpp"
#include "tpca/vec.hpp"

namespace tpca {

/// One empirical-vs-theoretical comparison. When `theoretical` is nonzero,
/// `bound` is relative and pass means |empirical - theoretical| <= bound *
/// |theoretical|; when the theoretical value is 0 (covariance checks),
/// `bound` is the absolute threshold. Bracket-style checks encode the
/// bracket as midpoint +- bound*midpoint with `empirical` the worst trial.
struct MomentReport {
  std::string statistic;
  double empirical = 0.0;
  double theoretical = 0.0;
  std::int64_t trials = 0;
  double deviation = 0.0;  // relative if theoretical != 0, else absolute
  double bound = 0.0;
  bool pass = false;
};

inline MomentReport make_report(std::string name, double empirical, double theoretical,
                                std::int64_t trials, double bound) {
  MomentReport r;
  r.statistic = std::move(name);
  r.empirical = empirical;
  r.theoretical = theoretical;
  r.trials = trials;
  r.bound = bound;
  if (theoretical != 0.0) {
    r.deviation = std::abs(empirical - theoretical) / std::abs(theoretical);
    r.pass = std::abs(empirical - theoretical) <= bound * std::abs(theoretical);
  } else {
    r.deviation = std::abs(empirical);
    r.pass = r.deviation <= bound;
  }
  return r;
}

/// Moments of the mode-diagonal sum u of a pure noise tensor with entry
/// variance m: E|u|^2 = 3n(n-1)m + 9nm and E<u,v>^2 = (9 + 3(n-1)) m for a
/// fixed unit v. Fresh noise every trial.
inline std::pair<MomentReport, MomentReport> u_moments(std::int64_t n, double m_var,
                                                       std::int64_t trials, std::uint64_t seed,
                                                       int threads = 1) {
  if (trials < 1) throw std::invalid_argument("u_moments: trials must be >= 1");
  CounterRng vrng(seed, 0xFEED);
  const Vec v = detail::random_unit_vec(n, vrng);

  std::vector<double> norm_sq_slot(static_cast<std::size_t>(trials));
  std::vector<double> corr_sq_slot(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](std::int64_t i) {
    Tensor3 a = sample_gaussian(n, m_var, CounterRng(derive_seed(seed, 1u, static_cast<std::uint64_t>(i))));
    const Vec u = mode_diag_sum(a);
    norm_sq_slot[static_cast<std::size_t>(i)] = norm_sq(u);
    const double c = dot(u, v);
    corr_sq_slot[static_cast<std::size_t>(i)] = c * c;
  });

  double mean_norm = 0.0, mean_corr = 0.0;
  for (std::int64_t i = 0; i < trials; ++i) {
    mean_norm += norm_sq_slot[static_cast<std::size_t>(i)];
    mean_corr += corr_sq_slot[static_cast<std::size_t>(i)];
  }
  mean_norm /= static_cast<double>(trials);
  mean_corr /= static_cast<double>(trials);

  const double dn = static_cast<double>(n);
  const double theo_norm = (3.0 * dn * (dn - 1.0) + 9.0 * dn) * m_var;
  const double theo_corr = (9.0 + 3.0 * (dn - 1.0)) * m_var;
  return {make_report("E|u|^2", mean_norm, theo_norm, trials, 0.05),
          make_report("E<u,v>^2", mean_corr, theo_corr, trials, 0.10)};
}

/// Moments of the symmetric noise contraction delta(x) against fresh noise
/// of entry variance m, for fixed x and v: E<delta(x),v>^2 =
/// 3m|x|^4 + 6m|x|^2 <v,x>^2, and E|delta(x)|^2 = c * n m |x|^4 with the
/// overlap constant c measured and required to sit in [1, 9].
inline std::pair<MomentReport, MomentReport> delta_moments(std::int64_t n, double m_var,
                                                           const Vec& x, const Vec& v,
                                                           std::int64_t trials, std::uint64_t seed,
                                                           int threads = 1) {
  if (norm(x) <= 0.0) throw std::invalid_argument("delta_moments: x must be nonzero");
  if (static_cast<std::int64_t>(x.size()) != n || static_cast<std::int64_t>(v.size()) != n)
    throw std::invalid_argument("delta_moments: dimension mismatch");

  std::vector<double> norm_sq_slot(static_cast<std::size_t>(trials));
  std::vector<double> corr_sq_slot(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](std::int64_t i) {
    Tensor3 a = sample_gaussian(n, m_var, CounterRng(derive_seed(seed, 2u, static_cast<std::uint64_t>(i))));
    const Vec d = sym_contract_vec(a, x);
    norm_sq_slot[static_cast<std::size_t>(i)] = norm_sq(d);
    const double c = dot(d, v);
    corr_sq_slot[static_cast<std::size_t>(i)] = c * c;
  });

  double mean_norm = 0.0, mean_corr = 0.0;
  for (std::int64_t i = 0; i < trials; ++i) {
    mean_norm += norm_sq_slot[static_cast<std::size_t>(i)];
    mean_corr += corr_sq_slot[static_cast<std::size_t>(i)];
  }
  mean_norm /= static_cast<double>(trials);
  mean_corr /= static_cast<double>(trials);

  const double x2 = norm_sq(x);
  const double vx = dot(v, x);
  // Bracket [1, 9] * n m |x|^4 as midpoint 5 with relative half-width 4/5.
  const double unit = static_cast<double>(n) * m_var * x2 * x2;
  const double theo_corr = 3.0 * m_var * x2 * x2 + 6.0 * m_var * x2 * vx * vx;
  return {make_report("E|delta(x)|^2 / (n m |x|^4)", mean_norm / unit, 5.0, trials, 0.8),
          make_report("E<delta(x),v>^2", mean_corr, theo_corr, trials, 0.10)};
}

namespace detail {

/// The injected-tensor sequence T^p = T - mean(B) + B^p shared by the
/// recovery algorithm and the moment checks below.
template <typename Scalar>
class InjectionSequence {
 public:
  InjectionSequence(const Tensor3T<Scalar>& t, int m, std::uint64_t seed)
      : m_(m), seed_(seed), base_(t.dim()) {
    base_ = regen(0);
    for (int p = 1; p < m_; ++p) add_scaled_inplace(base_, 1.0, regen(p));
    Scalar* pb = base_.data();
    const Scalar* pt = t.data();
    const double inv_m = 1.0 / static_cast<double>(m_);
    for (std::size_t i = 0; i < base_.size(); ++i)
      pb[i] = static_cast<Scalar>(static_cast<double>(pt[i]) - inv_m * static_cast<double>(pb[i]));
  }

  int m() const { return m_; }
  Tensor3T<Scalar> tensor_at(int p) const { return combine(base_, regen(p), 1.0, 1.0); }

 private:
  Tensor3T<Scalar> regen(int p) const {
    return sample_gaussian<Scalar>(base_.dim(), static_cast<double>(m_),
                                   CounterRng(derive_seed(seed_, 0xB0057EDu, static_cast<std::uint64_t>(p))));
  }

  int m_;
  std::uint64_t seed_;
  Tensor3T<Scalar> base_;
};

}  // namespace detail

/// Second-moment identities of the injection sequence, measured on real
/// (small) tensors through the same construction the recovery algorithm
/// uses: per-entry variance m, zero covariance across steps at a fixed
/// entry, zero covariance across distinct entries. Returns
/// {variance, cross-step covariance, cross-entry covariance}; the
/// covariance reports use a 4-standard-error absolute threshold.
inline std::array<MomentReport, 3> injection_moments(int m, std::int64_t trials, std::uint64_t seed,
                                                     int threads = 1) {
  if (m < 2) throw std::invalid_argument("injection_moments: m must be >= 2");
  if (trials < 2) throw std::invalid_argument("injection_moments: trials must be >= 2");

  constexpr std::int64_t n = 2;
  const Vec v = {1.0, 0.0};

  // Entries (0,0,0) and (1,0,1) of T^p for every p, one row per trial.
  const std::size_t stride = 2 * static_cast<std::size_t>(m);
  std::vector<double> slots(static_cast<std::size_t>(trials) * stride);
  parallel_for(trials, threads, [&](std::int64_t i) {
    const std::uint64_t trial_seed = derive_seed(seed, 3u, static_cast<std::uint64_t>(i));
    const SpikedInstance inst = generate(n, 1.0, 1.0, trial_seed, v);
    detail::InjectionSequence<double> seq(inst.tensor, m, derive_seed(trial_seed, 4u));
    double* row = slots.data() + static_cast<std::size_t>(i) * stride;
    for (int p = 0; p < m; ++p) {
      const Tensor3 tp = seq.tensor_at(p);
      row[2 * p] = tp(0, 0, 0);
      row[2 * p + 1] = tp(1, 0, 1);
    }
  });

  const double nt = static_cast<double>(trials);
  auto column_mean = [&](std::size_t c) {
    double s = 0.0;
    for (std::int64_t i = 0; i < trials; ++i) s += slots[static_cast<std::size_t>(i) * stride + c];
    return s / nt;
  };
  std::vector<double> mean(stride);
  for (std::size_t c = 0; c < stride; ++c) mean[c] = column_mean(c);
  auto covariance = [&](std::size_t c1, std::size_t c2) {
    double s = 0.0;
    for (std::int64_t i = 0; i < trials; ++i) {
      const double* row = slots.data() + static_cast<std::size_t>(i) * stride;
      s += (row[c1] - mean[c1]) * (row[c2] - mean[c2]);
    }
    return s / (nt - 1.0);
  };

  double var_mean = 0.0;
  for (int p = 0; p < m; ++p) var_mean += covariance(2 * static_cast<std::size_t>(p), 2 * static_cast<std::size_t>(p));
  var_mean /= static_cast<double>(m);

  // 4 standard errors for a covariance of two variance-m variables.
  const double se = static_cast<double>(m) / std::sqrt(nt);
  double worst_cross_step = 0.0;
  for (int p = 0; p < m; ++p)
    for (int q = p + 1; q < m; ++q) {
      const double c = covariance(2 * static_cast<std::size_t>(p), 2 * static_cast<std::size_t>(q));
      if (std::abs(c) > std::abs(worst_cross_step)) worst_cross_step = c;
    }
  double worst_cross_entry = 0.0;
  for (int p = 0; p < m; ++p)
    for (int q = 0; q < m; ++q) {
      const double c = covariance(2 * static_cast<std::size_t>(p), 2 * static_cast<std::size_t>(q) + 1);
      if (std::abs(c) > std::abs(worst_cross_entry)) worst_cross_entry = c;
    }

  return {make_report("Var(T^p_ijk)", var_mean, static_cast<double>(m), trials, 0.03),
          make_report("Cov(T^p_ijk, T^q_ijk), p != q", worst_cross_step, 0.0, trials, 4.0 * se),
          make_report("Cov(T^p_ijk, T^q_i'j'k')", worst_cross_entry, 0.0, trials, 4.0 * se)};
}

/// Dominant eigenpair of a symmetric matrix by power iteration on
/// H + s I, with s a Gershgorin shift making the operator PSD so the
/// iteration targets the algebraically largest eigenvalue. Stops when
/// |H b - lambda b| <= tol.
inline std::pair<double, Vec> hessian_top_eig(const Mat& h, int iters = 20000, double tol = 1e-9) {
  if (!h.exactly_symmetric()) throw std::invalid_argument("hessian_top_eig: matrix is not symmetric");
  const std::int64_t n = h.n;

  double gershgorin_low = 0.0;
  bool all_zero = true;
  for (std::int64_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      if (h(i, j) != 0.0) all_zero = false;
      if (j != i) off += std::abs(h(i, j));
    }
    const double low = h(i, i) - off;
    if (i == 0 || low < gershgorin_low) gershgorin_low = low;
  }
  if (all_zero) {
    Vec e(static_cast<std::size_t>(n), 0.0);
    e[0] = 1.0;
    return {0.0, e};
  }
  const double shift = std::max(0.0, -gershgorin_low);

  CounterRng rng(0x70B1u ^ static_cast<std::uint64_t>(n), 11);
  Vec b = detail::random_unit_vec(n, rng);
  for (int it = 0; it < iters; ++it) {
    Vec hb = matvec(h, b);
    const double lambda = dot(b, hb);
    double resid_sq = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double r = hb[i] - lambda * b[i];
      resid_sq += r * r;
    }
    if (std::sqrt(resid_sq) <= tol) return {lambda, b};
    axpy_inplace(hb, shift, b);  // (H + sI) b
    const double nb = norm(hb);
    if (nb <= 1e-300) throw std::runtime_error("hessian_top_eig: iterate vanished");
    scale_inplace(hb, 1.0 / nb);
    b = std::move(hb);
  }
  throw std::runtime_error("hessian_top_eig: did not reach the requested residual");
}

/// lambda_max(sym_contract_matrix(A, x)) / sqrt(n) for fresh standard noise
/// and random unit x, one value per trial.
inline std::vector<double> goe_top_eig_ratios(std::int64_t n, std::int64_t trials,
                                              std::uint64_t seed, int threads = 1) {
  std::vector<double> ratios(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](std::int64_t i) {
    CounterRng rng(derive_seed(seed, 5u, static_cast<std::uint64_t>(i)));
    Tensor3 a = sample_gaussian(n, 1.0, rng.substream(0));
    CounterRng xr = rng.substream(1);
    const Vec x = detail::random_unit_vec(n, xr);
    const Mat h = sym_contract_matrix(a, x);
    const auto [lambda, b] = hessian_top_eig(h, 50000, 1e-7 * std::sqrt(static_cast<double>(n)));
    ratios[static_cast<std::size_t>(i)] = lambda / std::sqrt(static_cast<double>(n));
  });
  return ratios;
}

/// Checks that the top-eigenvalue ratio above stays inside the frozen
/// bracket [0.5, 6] on every trial. The scale is square-root in n with an
/// unspecified constant, so the bracket is deliberately loose; it was fixed
/// from pilot runs and must not be retuned per run.
inline MomentReport goe_spectrum_check(std::int64_t n, std::int64_t trials, std::uint64_t seed,
                                       int threads = 1, double lo = 0.5, double hi = 6.0) {
  if (trials < 1) throw std::invalid_argument("goe_spectrum_check: trials must be >= 1");
  const std::vector<double> ratios = goe_top_eig_ratios(n, trials, seed, threads);
  const double mid = 0.5 * (lo + hi);
  double worst = ratios[0];
  for (double r : ratios)
    if (std::abs(r - mid) > std::abs(worst - mid)) worst = r;
  MomentReport rep = make_report("lambda_max/sqrt(n) within [" + std::to_string(lo) + ", " +
                                     std::to_string(hi) + "], worst trial",
                                 worst, mid, trials, (hi - lo) / (hi + lo));
  return rep;
}

enum class PointClass { Good, Bad, Unclassified, NearDagger, SaddleLike };

inline const char* to_string(PointClass c) {
  switch (c) {
    case PointClass::Good: return "good";
    case PointClass::Bad: return "bad";
    case PointClass::NearDagger: return "near_dagger";
    case PointClass::SaddleLike: return "saddle_like";
    default: return "unclassified";
  }
}

inline constexpr double kGoodMinNorm = 0.2;
inline constexpr double kGoodMinCorr = 0.2;

/// Coarse two-class test for continuation endpoints: "good" points have
/// order-one norm and correlation, "bad" ones have norm below 3 n^{-1/4}
/// and negligible correlation. Ambiguous points are left unclassified
/// rather than forced; the thresholds separate the two regimes for n >= 32
/// at the spike strengths the benchmarks use.
inline PointClass classify_point(const Vec& x, const Vec& v, std::int64_t n) {
  const double nx = norm(x);
  const double corr = nx > 0.0 ? dot(x, v) / (nx * norm(v)) : 0.0;
  if (nx >= kGoodMinNorm && corr >= kGoodMinCorr) return PointClass::Good;
  if (nx <= 3.0 * std::pow(static_cast<double>(n), -0.25) && std::abs(corr) <= kGoodMinCorr)
    return PointClass::Bad;
  return PointClass::Unclassified;
}

/// One continuation stage as seen by the path tracer.
struct PathPoint {
  double t = 0.0;
  Vec x;                   // converged (or best) point of g_r(., t)
  double value = 0.0;      // g_r at x
  double grad_norm = 0.0;
  double lambda_max = 0.0;  // top eigenvalue of hess g_r at x
  Vec top_eigvec;           // unit b
  double sin_theta_b_v = 1.0;
  double lambda_max_at_dagger = 0.0;      // same, with the Hessian taken at x-dagger
  double sin_theta_b_v_at_dagger = 1.0;
  double dist_to_dagger = 0.0;
  PointClass cls = PointClass::Unclassified;
  double delta_norm_ratio = 0.0;  // |delta(x)| / |x|^2
  double delta_corr_ratio = 0.0;  // |<delta(x), v>| / |x|^2
  bool stalled = false;
  bool monotone = true;  // inner ascent values nondecreasing (fp slack)
};

struct PathOptions {
  AscentOptions ascent;
  double saddle_pos_tol = 1e-6;  // top-curvature threshold for saddle_like
  int eig_iters = 50000;
};

namespace detail {
inline double sin_theta(const Vec& a, const Vec& b) {
  const double c = dot(a, b) / (norm(a) * norm(b));
  const double clamped = std::min(1.0, std::max(-1.0, c));
  return std::sqrt(std::max(0.0, 1.0 - clamped * clamped));
}

inline bool values_nondecreasing(const std::vector<double>& vals) {
  for (std::size_t i = 1; i < vals.size(); ++i) {
    const double slack = 1e-9 * (1.0 + std::abs(vals[i - 1]));
    if (vals[i] < vals[i - 1] - slack) return false;
  }
  return true;
}
}  // namespace detail

/// Runs the continuation stage by stage and records, at every radius, the
/// converged point, its gradient norm, the top Hessian eigenpair both at the
/// point and at the scaled closed-form start x-dagger, the angle of that
/// eigenvector to the signal, a class tag, and the noise-contraction ratios
/// |delta(x)|/|x|^2 and |<delta(x),v>|/|x|^2. The ratios are emitted for
/// inspection only; nothing here assumes a particular scaling for them.
/// Stalled inner solves are recorded on the stage, not fatal. `tau_hat` is
/// also used as the spike coefficient when splitting off the noise part for
/// the delta ratios, so pass the true strength when it is known.
template <typename Scalar>
std::vector<PathPoint> trace_path(const Tensor3T<Scalar>& ten, const Vec& v,
                                  const HomotopySchedule& schedule, double tau_hat,
                                  const PathOptions& opts = {}) {
  schedule.validate();
  const std::int64_t n = ten.dim();
  const Vec dagger = x_dagger_scaled(ten, tau_hat);
  const double dagger_norm = norm(dagger);
  const Tensor3T<Scalar> noise_part = combine(ten, rank_one<Scalar>(v, tau_hat), 1.0, -1.0);

  std::vector<PathPoint> path;
  path.reserve(schedule.t_values.size());
  Vec x = dagger;

  for (double t : schedule.t_values) {
    PathPoint pt;
    pt.t = t;
    AscentResult stage;
    try {
      stage = local_maximize_gr(ten, x, t, tau_hat, opts.ascent);
      pt.monotone = detail::values_nondecreasing(stage.values);
    } catch (const StalledError& e) {
      stage.x = e.best_point;
      stage.value = e.best_value;
      stage.grad_norm = norm(g_r_grad(ten, e.best_point, t, tau_hat));
      pt.stalled = true;
    }
    x = stage.x;
    pt.x = x;
    pt.value = stage.value;
    pt.grad_norm = stage.grad_norm;

    {
      const Mat h = g_r_hess(ten, x, t, tau_hat);
      const double scale = 1.0 + std::abs(h(0, 0));
      auto [lambda, b] = hessian_top_eig(h, opts.eig_iters, 1e-8 * scale * static_cast<double>(n));
      pt.lambda_max = lambda;
      pt.sin_theta_b_v = detail::sin_theta(b, v);
      pt.top_eigvec = std::move(b);
    }
    {
      const Mat hd = g_r_hess(ten, dagger, t, tau_hat);
      const double scale = 1.0 + std::abs(hd(0, 0));
      auto [lambda, b] = hessian_top_eig(hd, opts.eig_iters, 1e-8 * scale * static_cast<double>(n));
      pt.lambda_max_at_dagger = lambda;
      pt.sin_theta_b_v_at_dagger = detail::sin_theta(b, v);
    }

    pt.dist_to_dagger = dist(x, dagger);
    if (dagger_norm > 0.0 && pt.dist_to_dagger <= 0.5 * dagger_norm) {
      pt.cls = PointClass::NearDagger;
    } else {
      pt.cls = classify_point(x, v, n);
      if (pt.cls == PointClass::Unclassified && pt.lambda_max > opts.saddle_pos_tol)
        pt.cls = PointClass::SaddleLike;
    }

    const double xsq = norm_sq(x);
    if (xsq > 0.0) {
      const Vec d = sym_contract_vec(noise_part, x);
      pt.delta_norm_ratio = norm(d) / xsq;
      pt.delta_corr_ratio = std::abs(dot(d, v)) / xsq;
    }
    path.push_back(std::move(pt));
  }
  return path;
}

}  // namespace tpca
