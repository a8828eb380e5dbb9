#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "tpca/errors.hpp"
#include "tpca/objective.hpp"
#include "tpca/rng.hpp"
#include "tpca/tensor.hpp"
#include "tpca/vec.hpp"

namespace tpca {

/// One recovery run: all unit-norm iterates in order, optional per-iterate
/// correlations with the ground truth (filled by with_correlations), and
/// convergence bookkeeping.
struct RecoveryTrace {
  std::vector<Vec> iterates;
  std::vector<double> correlations;
  bool converged = false;
  int iterations_used = 0;
  std::string algorithm;
  double wall_time = 0.0;  // seconds; informational, not part of determinism
};

inline RecoveryTrace with_correlations(RecoveryTrace trace, const Vec& v) {
  trace.correlations.clear();
  trace.correlations.reserve(trace.iterates.size());
  for (const Vec& x : trace.iterates) trace.correlations.push_back(score(x, v).correlation);
  return trace;
}

/// Default iteration budget for the power-style methods; the doubly
/// logarithmic growth keeps it tiny at any realistic n.
inline int default_power_iters(std::int64_t n) {
  const double ll = std::log2(std::max(2.0, std::log2(std::max<double>(4.0, static_cast<double>(n)))));
  return std::max(8, static_cast<int>(std::ceil(3.0 * ll)));
}

inline constexpr double kDefaultTol = 1e-8;

/// One normalized tensor power-method step:
/// x -> normalize( T(x,x,:) + T(x,:,x) + T(:,x,x) ).
template <typename Scalar>
Vec power_step(const Tensor3T<Scalar>& t, const Vec& x) {
  if (norm(x) <= 0.0) throw std::invalid_argument("power_step: zero input");
  Vec y = sym_contract_vec(t, x);
  const double ny = norm(y);
  if (ny <= 1e-14) throw DegenerateStepError("power_step: contraction is (near-)zero");
  scale_inplace(y, 1.0 / ny);
  return y;
}

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

template <typename Scalar>
RecoveryTrace run_power_iteration(const Tensor3T<Scalar>& t, Vec x0, int max_iter, double tol,
                                  std::string tag) {
  Stopwatch timer;
  RecoveryTrace trace;
  trace.algorithm = std::move(tag);
  trace.iterates.push_back(std::move(x0));
  for (int k = 0; k < max_iter; ++k) {
    Vec next = power_step(t, trace.iterates.back());
    const double delta = dist(next, trace.iterates.back());
    trace.iterates.push_back(std::move(next));
    ++trace.iterations_used;
    if (delta <= tol) {
      trace.converged = true;
      break;
    }
  }
  trace.wall_time = timer.seconds();
  return trace;
}

template <typename Scalar>
Vec init_from_diag_or_random(const Tensor3T<Scalar>& t, std::uint64_t fallback_seed,
                             const char* who) {
  Vec z = mode_diag_sum(t);
  const double nz = norm(z);
  if (nz > 1e-14) {
    scale_inplace(z, 1.0 / nz);
    return z;
  }
  // Probability-zero under the noise model, but must not crash.
  std::fprintf(stderr, "tpca: %s: mode-diagonal sum is zero, falling back to a random start\n", who);
  CounterRng rng(fallback_seed, 0xFA11);
  return detail::random_unit_vec(t.dim(), rng);
}

}  // namespace detail

/// Power method started from the closed-form maximizer of the infinitely
/// blurred objective, z/|z| with z the mode-diagonal sum. With max_iter = 0
/// this returns exactly that starting point.
template <typename Scalar>
RecoveryTrace homotopy_pca(const Tensor3T<Scalar>& t, int max_iter, double tol = kDefaultTol,
                           std::uint64_t fallback_seed = 0) {
  if (max_iter < 0) throw std::invalid_argument("homotopy_pca: max_iter must be >= 0");
  Vec x0 = detail::init_from_diag_or_random(t, fallback_seed, "homotopy_pca");
  return detail::run_power_iteration(t, std::move(x0), max_iter, tol, "homotopy");
}

/// Power method from a uniformly random unit start.
template <typename Scalar>
RecoveryTrace power_random(const Tensor3T<Scalar>& t, std::uint64_t seed, int max_iter,
                           double tol = kDefaultTol) {
  if (max_iter < 1) throw std::invalid_argument("power_random: max_iter must be >= 1");
  CounterRng rng(seed, 2);
  Vec x0 = detail::random_unit_vec(t.dim(), rng);
  return detail::run_power_iteration(t, std::move(x0), max_iter, tol, "power");
}

struct NoiseInjectOptions {
  /// Regenerate each injected tensor from its per-step stream instead of
  /// holding all m of them. Costs one extra generation pass per tensor and
  /// is bit-identical to the materialized variant.
  bool streaming = true;
  std::size_t memory_budget_bytes = std::size_t(2) << 30;
  double conv_tol = kDefaultTol;
};

/// Power method where step p sees T - mean(B) + B^p for fresh Gaussian
/// tensors B^0..B^{m-1} with entry variance m. Each step's effective noise
/// is then distributed like a fresh draw, at the price of variance m.
/// Runs exactly m-1 steps from the mode-diagonal start of the first
/// injected tensor.
template <typename Scalar>
RecoveryTrace noise_injected_pca(const Tensor3T<Scalar>& t, int m, std::uint64_t seed,
                                 const NoiseInjectOptions& opts = {}) {
  if (m < 2) throw std::invalid_argument("noise_injected_pca: m must be >= 2");
  const std::int64_t n = t.dim();
  const std::size_t bytes_per_tensor = static_cast<std::size_t>(n) * n * n * sizeof(Scalar);
  if (!opts.streaming && (static_cast<std::size_t>(m) + 3) * bytes_per_tensor > opts.memory_budget_bytes)
    throw ResourceGuardError("noise_injected_pca: materializing all injected tensors exceeds the memory budget; enable streaming");

  detail::Stopwatch timer;
  const double var = static_cast<double>(m);
  auto injected = [&](int p) {
    return sample_gaussian<Scalar>(n, var, CounterRng(derive_seed(seed, 0xB0057EDu, static_cast<std::uint64_t>(p))));
  };

  std::vector<Tensor3T<Scalar>> stored;
  if (!opts.streaming) {
    stored.reserve(static_cast<std::size_t>(m));
    for (int p = 0; p < m; ++p) stored.push_back(injected(p));
  }
  auto b_of = [&](int p) { return opts.streaming ? injected(p) : stored[static_cast<std::size_t>(p)]; };

  // base = T - mean(B); accumulate in a fixed order so streaming and
  // materialized runs agree bit-exactly.
  Tensor3T<Scalar> base = b_of(0);
  for (int p = 1; p < m; ++p) add_scaled_inplace(base, 1.0, b_of(p));
  {
    Scalar* pb = base.data();
    const Scalar* pt = t.data();
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < base.size(); ++i)
      pb[i] = static_cast<Scalar>(static_cast<double>(pt[i]) - inv_m * static_cast<double>(pb[i]));
  }

  RecoveryTrace trace;
  trace.algorithm = "noise-inject";
  {
    Tensor3T<Scalar> t0 = combine(base, b_of(0), 1.0, 1.0);
    trace.iterates.push_back(detail::init_from_diag_or_random(t0, seed, "noise_injected_pca"));
  }
  for (int k = 0; k + 1 <= m - 1; ++k) {
    Tensor3T<Scalar> tk = combine(base, b_of(k + 1), 1.0, 1.0);
    Vec next = power_step(tk, trace.iterates.back());
    const double delta = dist(next, trace.iterates.back());
    trace.iterates.push_back(std::move(next));
    ++trace.iterations_used;
    if (k + 1 == m - 1) trace.converged = delta <= opts.conv_tol;
  }
  trace.wall_time = timer.seconds();
  return trace;
}

/// Baseline: power iteration on the Gram matrix of the n x n^2 mode-1
/// flattening, i.e. toward its top left singular vector. The final sign is
/// chosen so that T(w,w,w) >= 0.
template <typename Scalar>
RecoveryTrace flatten_method(const Tensor3T<Scalar>& t, std::uint64_t seed, int max_iter,
                             double tol = kDefaultTol) {
  if (max_iter < 1) throw std::invalid_argument("flatten_method: max_iter must be >= 1");
  detail::Stopwatch timer;
  RecoveryTrace trace;
  trace.algorithm = "flatten";
  CounterRng rng(seed, 3);
  trace.iterates.push_back(detail::random_unit_vec(t.dim(), rng));
  for (int k = 0; k < max_iter; ++k) {
    Vec y = flatten_gram_matvec(t, trace.iterates.back());
    const double ny = norm(y);
    if (ny <= 1e-14) throw DegenerateStepError("flatten_method: Gram matvec is (near-)zero");
    scale_inplace(y, 1.0 / ny);
    const double delta = dist(y, trace.iterates.back());
    trace.iterates.push_back(std::move(y));
    ++trace.iterations_used;
    if (delta <= tol) {
      trace.converged = true;
      break;
    }
  }
  // The Gram matrix fixes the singular vector only up to sign.
  if (f_eval(t, trace.iterates.back()) < 0.0) scale_inplace(trace.iterates.back(), -1.0);
  trace.wall_time = timer.seconds();
  return trace;
}

struct AscentOptions {
  double grad_tol = 1e-8;
  int max_iter = 2000;
  double init_step = 1.0;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 70;
  int max_stalls = 20;
};

struct AscentResult {
  Vec x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> values;  // objective value at each visited point
};

namespace detail {

/// g_r restricted to a line x + alpha d, as an exact degree-4 polynomial.
/// Built from two contraction passes; every evaluation afterwards is O(1).
/// The increment g_r(x + a d) - g_r(x) is evaluated in difference form (no
/// constant term), so tiny line-search gains are not lost to cancellation
/// against the absolute objective value.
struct GrLinePoly {
  // cubic part of T(x+ad, ., .) minus its value at a = 0, plus t^2 <z, ad>
  double c1, c2, c3, l1;
  // |x+ad|^2 = q0 + q1 a + q2 a^2, feeding the quartic penalty
  double q0, q1, q2;
  double n_dim, t2, tau_hat;

  double gain(double a) const {
    const double cubic = ((c3 * a + c2) * a + c1 + l1) * a;
    const double dq = (q2 * a + q1) * a;  // q(a) - q0
    const double pen_gain = 0.75 * tau_hat * dq * (dq + 2.0 * q0 + 2.0 * t2 * (n_dim + 2.0));
    return cubic - pen_gain;
  }
};

template <typename Scalar>
GrLinePoly make_line_poly(const Tensor3T<Scalar>& ten, const Vec& z, const Vec& x, const Vec& d,
                          const Vec& contraction_at_x, double t, double tau_hat) {
  GrLinePoly p{};
  const Vec gd = sym_contract_vec(ten, d);
  p.c1 = dot(contraction_at_x, d);
  p.c2 = dot(gd, x);
  p.c3 = dot(gd, d) / 3.0;
  p.l1 = t * t * dot(z, d);
  p.q0 = norm_sq(x);
  p.q1 = 2.0 * dot(x, d);
  p.q2 = norm_sq(d);
  p.n_dim = static_cast<double>(ten.dim());
  p.t2 = t * t;
  p.tau_hat = tau_hat;
  return p;
}

}  // namespace detail

/// Gradient ascent with Armijo backtracking on g_r(., t), from x0 until the
/// gradient norm drops below grad_tol or the budget runs out. The returned
/// point never has a smaller g_r value than x0. Twenty consecutive
/// line-search failures raise StalledError carrying the best point.
template <typename Scalar>
AscentResult local_maximize_gr(const Tensor3T<Scalar>& ten, const Vec& x0, double t, double tau_hat,
                               const AscentOptions& opts = {}) {
  if (!all_finite(x0)) throw std::invalid_argument("local_maximize_gr: non-finite start");
  detail::check_smoothing_args(t, tau_hat, true);

  const Vec z = mode_diag_sum(ten);
  const double n = static_cast<double>(ten.dim());
  const double t2 = t * t;

  AscentResult res;
  res.x = x0;
  double step = opts.init_step;
  int stalls = 0;

  for (int it = 0; it < opts.max_iter; ++it) {
    // One contraction yields both the value and the gradient.
    const Vec cx = sym_contract_vec(ten, res.x);
    const double xsq = norm_sq(res.x);
    const double value = dot(cx, res.x) / 3.0 + t2 * dot(z, res.x) -
                         detail::penalty_value(t, tau_hat, n, xsq);
    Vec grad = cx;
    axpy_inplace(grad, t2, z);
    axpy_inplace(grad, -3.0 * tau_hat * (xsq + t2 * (n + 2.0)), res.x);

    res.value = value;
    res.grad_norm = norm(grad);
    res.values.push_back(value);
    res.iterations = it;
    if (res.grad_norm <= opts.grad_tol) {
      res.converged = true;
      return res;
    }

    const auto line = detail::make_line_poly(ten, z, res.x, grad, cx, t, tau_hat);
    const double slope = res.grad_norm * res.grad_norm;
    double alpha = step;
    bool accepted = false;
    double best_alpha = 0.0;
    double best_gain = 0.0;
    for (int b = 0; b < opts.max_backtracks; ++b) {
      const double gain = line.gain(alpha);
      if (gain >= opts.armijo_c * alpha * slope) {
        accepted = true;
        break;
      }
      if (gain > best_gain) {
        best_gain = gain;
        best_alpha = alpha;
      }
      alpha *= opts.shrink;
    }

    if (accepted) {
      axpy_inplace(res.x, alpha, grad);
      step = alpha * 2.0;
      stalls = 0;
    } else if (best_gain > 0.0) {
      // No Armijo acceptance but some uphill point was seen; take it.
      axpy_inplace(res.x, best_alpha, grad);
      step = std::max(best_alpha, 1e-12);
      stalls = 0;
    } else {
      ++stalls;
      step *= 0.25;
      if (stalls >= opts.max_stalls)
        throw StalledError("local_maximize_gr: no line-search progress", res.x, res.value);
    }
  }

  // Budget exhausted: refresh the bookkeeping at the final point.
  res.grad_norm = norm(g_r_grad(ten, res.x, t, tau_hat));
  res.value = g_r_eval(ten, res.x, t, tau_hat);
  res.values.push_back(res.value);
  res.iterations = opts.max_iter;
  res.converged = res.grad_norm <= opts.grad_tol;
  return res;
}

/// Strictly decreasing blur radii ending at zero.
struct HomotopySchedule {
  std::vector<double> t_values;

  void validate() const {
    if (t_values.empty()) throw std::invalid_argument("HomotopySchedule: empty");
    for (std::size_t i = 1; i < t_values.size(); ++i)
      if (!(t_values[i - 1] > t_values[i]))
        throw std::invalid_argument("HomotopySchedule: values must be strictly decreasing");
    if (t_values.back() != 0.0) throw std::invalid_argument("HomotopySchedule: must end at 0");
  }

  /// `count` geometric radii from t_max down to t_min, then 0.
  static HomotopySchedule geometric(double t_max, double t_min, int count) {
    if (!(t_max > t_min) || t_min <= 0.0 || count < 1)
      throw std::invalid_argument("HomotopySchedule::geometric: bad parameters");
    HomotopySchedule s;
    const double ratio = std::pow(t_min / t_max, 1.0 / std::max(1, count - 1));
    double t = t_max;
    for (int i = 0; i < count; ++i) {
      s.t_values.push_back(count == 1 ? t_max : t);
      t *= ratio;
    }
    s.t_values.push_back(0.0);
    return s;
  }

  /// Default radii bracketing the 1/n transition scale: 12 geometric values
  /// from 10/n down to 1/(100 n), then 0.
  static HomotopySchedule default_for(std::int64_t n) {
    return geometric(10.0 / static_cast<double>(n), 0.01 / static_cast<double>(n), 12);
  }
};

/// Full continuation: start at the closed-form large-blur maximizer
/// x = z / (3 tau_hat (n+2)) and locally maximize g_r(., t_k) at each radius
/// in the schedule, warm-starting each stage from the previous solution.
/// Iterates in the trace are the per-stage solutions normalized to unit
/// length; the last one (the t = 0 stage) is the answer.
template <typename Scalar>
RecoveryTrace homotopy_full(const Tensor3T<Scalar>& ten, const HomotopySchedule& schedule,
                            double tau_hat, const AscentOptions& opts = {},
                            std::uint64_t fallback_seed = 0) {
  schedule.validate();
  detail::Stopwatch timer;
  RecoveryTrace trace;
  trace.algorithm = "full-homotopy";

  Vec x = x_dagger_scaled(ten, tau_hat);
  if (norm(x) <= 1e-300) {
    std::fprintf(stderr, "tpca: homotopy_full: zero start, falling back to a random one\n");
    CounterRng rng(fallback_seed, 0xFA11);
    x = scaled(detail::random_unit_vec(ten.dim(), rng), 1e-3);
  }

  bool all_converged = true;
  for (std::size_t k = 0; k < schedule.t_values.size(); ++k) {
    AscentResult stage;
    try {
      stage = local_maximize_gr(ten, x, schedule.t_values[k], tau_hat, opts);
    } catch (const StalledError& e) {
      throw StalledError(e.what(), e.best_point, e.best_value, static_cast<int>(k));
    }
    x = stage.x;
    all_converged = all_converged && stage.converged;
    if (norm(x) <= 1e-300)
      throw DegenerateStepError("homotopy_full: stage solution collapsed to zero");
    trace.iterates.push_back(normalized(x));
    ++trace.iterations_used;
  }
  trace.converged = all_converged;
  trace.wall_time = timer.seconds();
  return trace;
}

}  // namespace tpca
