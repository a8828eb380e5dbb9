#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <type_traits>
#include <vector>

#include "tpca/algorithms.hpp"
#include "tpca/errors.hpp"
#include "tpca/model.hpp"
#include "tpca/parallel.hpp"
#include "tpca/rng.hpp"

#include "json.hpp"

namespace tpca {

inline const std::vector<std::string> kKnownAlgorithms = {"homotopy", "noise-inject", "power",
                                                          "flatten", "full-homotopy"};

/// Batch experiment description. tau_values are multipliers of n^{3/4} when
/// tau_is_alpha is set (scaled by sigma), absolute spike strengths
/// otherwise.
struct GridSpec {
  std::vector<std::int64_t> n_values{32, 64, 96, 128};
  std::vector<double> tau_values{0.5, 1.0, 2.0, 4.0};
  bool tau_is_alpha = true;
  int trials = 50;
  std::vector<std::string> algorithms{"homotopy", "power"};
  std::uint64_t master_seed = 0;
  int max_iter = 100;
  double tol = kDefaultTol;
  double sigma = 1.0;
  int noise_inject_m = 5;
  int threads = 1;
  std::int64_t max_n_override = 0;  // 0: default cap; >512 requires f32 storage
  std::string storage = "f64";      // "f64" | "f32"

  void validate() const {
    if (n_values.empty() || tau_values.empty() || algorithms.empty())
      throw std::invalid_argument("GridSpec: n_values, tau_values, algorithms must be nonempty");
    if (trials < 1) throw std::invalid_argument("GridSpec: trials must be >= 1");
    if (max_iter < 1) throw std::invalid_argument("GridSpec: max_iter must be >= 1");
    if (sigma <= 0.0) throw std::invalid_argument("GridSpec: sigma must be > 0");
    if (storage != "f64" && storage != "f32")
      throw std::invalid_argument("GridSpec: storage must be f64 or f32");
    for (const auto& a : algorithms)
      if (std::find(kKnownAlgorithms.begin(), kKnownAlgorithms.end(), a) == kKnownAlgorithms.end())
        throw std::invalid_argument("GridSpec: unknown algorithm tag '" + a + "'");
  }

  double resolve_tau(std::int64_t n, double tau_value) const {
    return tau_is_alpha ? tau_value * std::pow(static_cast<double>(n), 0.75) * sigma : tau_value;
  }

  std::int64_t allowed_max_n() const { return max_n_override > 0 ? max_n_override : kTensorMaxDim; }
};

struct GridCell {
  std::int64_t n = 0;
  double tau = 0.0;
  std::string algorithm;
  int success_count = 0;
  int trials = 0;
  double mean_iterations = 0.0;
  double mean_final_correlation = 0.0;
};

struct ConvergenceCurve {
  std::int64_t n = 0;
  double alpha = 0.0;
  std::string algorithm;
  std::vector<double> mean_correlation;  // index = iteration, starting at 0
  std::vector<double> variance;
  int trials = 0;
};

namespace detail {

/// Seed for the instance of (cell, trial): shared by all algorithms so the
/// comparison is paired; regenerating from it is bit-identical.
inline std::uint64_t instance_seed(std::uint64_t master, std::size_t n_idx, std::size_t tau_idx,
                                   int trial) {
  return derive_seed(master, 0x9107Du, n_idx, tau_idx, static_cast<std::uint64_t>(trial));
}

inline std::uint64_t algo_seed(std::uint64_t master, std::size_t n_idx, std::size_t tau_idx,
                               int trial, std::size_t algo_idx) {
  return derive_seed(master, 0xA19u, n_idx, tau_idx, static_cast<std::uint64_t>(trial), algo_idx);
}

template <typename Scalar>
RecoveryTrace dispatch_algorithm(const std::string& algo, const Tensor3T<Scalar>& tensor,
                                 double tau, const GridSpec& spec, std::uint64_t aseed) {
  if (algo == "homotopy") return homotopy_pca(tensor, spec.max_iter, spec.tol, aseed);
  if (algo == "power") return power_random(tensor, aseed, spec.max_iter, spec.tol);
  if (algo == "flatten") return flatten_method(tensor, aseed, spec.max_iter, spec.tol);
  if (algo == "noise-inject") return noise_injected_pca(tensor, spec.noise_inject_m, aseed);
  if (algo == "full-homotopy") {
    const double tau_hat = tau > 0.0 ? tau : estimate_tau_hat(tensor, aseed);
    try {
      return homotopy_full(tensor, HomotopySchedule::default_for(tensor.dim()), tau_hat, {}, aseed);
    } catch (const StalledError& e) {
      RecoveryTrace trace;
      trace.algorithm = "full-homotopy";
      trace.converged = false;
      trace.iterations_used = spec.max_iter;  // counts as a budget failure
      trace.iterates.push_back(normalized(e.best_point));
      return trace;
    }
  }
  throw std::invalid_argument("unknown algorithm tag '" + algo + "'");
}

struct TrialOutcome {
  bool success = false;
  int iterations = 0;
  double final_correlation = 0.0;
  std::vector<double> correlations;  // per iterate, for convergence curves
};

template <typename Scalar>
TrialOutcome run_trial(const GridSpec& spec, std::size_t n_idx, std::size_t tau_idx, int trial,
                       std::size_t algo_idx) {
  const std::int64_t n = spec.n_values[n_idx];
  const double tau = spec.resolve_tau(n, spec.tau_values[tau_idx]);
  const SpikedInstance inst = [&] {
    // f32 runs sample into narrow storage through the same streams.
    return generate(n, tau, spec.sigma, instance_seed(spec.master_seed, n_idx, tau_idx, trial),
                    std::nullopt, spec.allowed_max_n());
  }();

  TrialOutcome out;
  RecoveryTrace trace;
  if constexpr (std::is_same_v<Scalar, double>) {
    trace = dispatch_algorithm(spec.algorithms[algo_idx], inst.tensor, tau, spec,
                               algo_seed(spec.master_seed, n_idx, tau_idx, trial, algo_idx));
  } else {
    Tensor3T<Scalar> narrow(inst.tensor.dim(), spec.allowed_max_n());
    for (std::size_t i = 0; i < narrow.size(); ++i)
      narrow.data()[i] = static_cast<Scalar>(inst.tensor.data()[i]);
    trace = dispatch_algorithm(spec.algorithms[algo_idx], narrow, tau, spec,
                               algo_seed(spec.master_seed, n_idx, tau_idx, trial, algo_idx));
  }

  out.iterations = trace.iterations_used;
  out.correlations.reserve(trace.iterates.size());
  for (const Vec& x : trace.iterates) out.correlations.push_back(score(x, inst.v).correlation);
  out.final_correlation = out.correlations.back();
  // Failure rule, uniform for all algorithms: correlation below 0.8 at
  // convergence, or needing more than min(max_iter, 100) iterations to
  // converge at all.
  out.success = trace.converged && out.final_correlation >= kSuccessThreshold &&
                out.iterations <= std::min(spec.max_iter, 100);
  return out;
}

}  // namespace detail

/// Runs trials x cells x algorithms with paired instance seeds and
/// aggregates success counts. Rows come back sorted by (n, tau, algorithm);
/// aggregation order is fixed, so output bytes do not depend on the thread
/// count. Each worker materializes only its own trial's tensor.
inline std::vector<GridCell> run_grid(const GridSpec& spec) {
  spec.validate();
  for (std::int64_t n : spec.n_values) {
    if (n > spec.allowed_max_n())
      throw ResourceGuardError("run_grid: n exceeds the allowed maximum; raise max_n_override");
    if (n > kTensorMaxDim && spec.storage != "f32")
      throw ResourceGuardError("run_grid: n beyond " + std::to_string(kTensorMaxDim) +
                               " requires the f32 storage mode");
  }

  const std::size_t n_cells = spec.n_values.size() * spec.tau_values.size() * spec.algorithms.size();
  const std::int64_t n_tasks = static_cast<std::int64_t>(n_cells) * spec.trials;
  std::vector<detail::TrialOutcome> outcomes(static_cast<std::size_t>(n_tasks));

  auto task_of = [&](std::int64_t idx) {
    const std::size_t per_cell = static_cast<std::size_t>(spec.trials);
    const std::size_t cell = static_cast<std::size_t>(idx) / per_cell;
    const int trial = static_cast<int>(static_cast<std::size_t>(idx) % per_cell);
    const std::size_t algo_idx = cell % spec.algorithms.size();
    const std::size_t tau_idx = (cell / spec.algorithms.size()) % spec.tau_values.size();
    const std::size_t n_idx = cell / (spec.algorithms.size() * spec.tau_values.size());
    return std::tuple{n_idx, tau_idx, trial, algo_idx};
  };

  parallel_for(n_tasks, spec.threads, [&](std::int64_t idx) {
    const auto [n_idx, tau_idx, trial, algo_idx] = task_of(idx);
    if (spec.storage == "f32")
      outcomes[static_cast<std::size_t>(idx)] =
          detail::run_trial<float>(spec, n_idx, tau_idx, trial, algo_idx);
    else
      outcomes[static_cast<std::size_t>(idx)] =
          detail::run_trial<double>(spec, n_idx, tau_idx, trial, algo_idx);
  });

  std::vector<GridCell> cells;
  cells.reserve(n_cells);
  for (std::size_t n_idx = 0; n_idx < spec.n_values.size(); ++n_idx) {
    // taus sorted ascending per n for stable output rows
    std::vector<std::size_t> tau_order(spec.tau_values.size());
    for (std::size_t i = 0; i < tau_order.size(); ++i) tau_order[i] = i;
    std::sort(tau_order.begin(), tau_order.end(), [&](std::size_t a, std::size_t b) {
      return spec.resolve_tau(spec.n_values[n_idx], spec.tau_values[a]) <
             spec.resolve_tau(spec.n_values[n_idx], spec.tau_values[b]);
    });
    std::vector<std::size_t> algo_order(spec.algorithms.size());
    for (std::size_t i = 0; i < algo_order.size(); ++i) algo_order[i] = i;
    std::sort(algo_order.begin(), algo_order.end(),
              [&](std::size_t a, std::size_t b) { return spec.algorithms[a] < spec.algorithms[b]; });

    for (std::size_t tidx : tau_order) {
      for (std::size_t aidx : algo_order) {
        GridCell cell;
        cell.n = spec.n_values[n_idx];
        cell.tau = spec.resolve_tau(cell.n, spec.tau_values[tidx]);
        cell.algorithm = spec.algorithms[aidx];
        cell.trials = spec.trials;
        double iter_sum = 0.0, corr_sum = 0.0;
        for (int trial = 0; trial < spec.trials; ++trial) {
          const std::size_t cell_linear =
              (n_idx * spec.tau_values.size() + tidx) * spec.algorithms.size() + aidx;
          const auto& o = outcomes[cell_linear * static_cast<std::size_t>(spec.trials) +
                                   static_cast<std::size_t>(trial)];
          cell.success_count += o.success ? 1 : 0;
          iter_sum += o.iterations;
          corr_sum += o.final_correlation;
        }
        cell.mean_iterations = iter_sum / spec.trials;
        cell.mean_final_correlation = corr_sum / spec.trials;
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

/// Per-iteration correlation statistics at tau = alpha n^{3/4}. Trials are
/// paired across algorithms; traces shorter than the longest one in their
/// curve are padded with their converged value.
inline std::vector<ConvergenceCurve> run_convergence(std::int64_t n, const std::vector<double>& alphas,
                                                     int trials,
                                                     const std::vector<std::string>& algorithms,
                                                     std::uint64_t seed, int max_iter,
                                                     double tol = kDefaultTol, int threads = 1,
                                                     std::int64_t max_n_override = 0) {
  GridSpec spec;
  spec.n_values = {n};
  spec.tau_values = alphas;
  spec.tau_is_alpha = true;
  spec.trials = trials;
  spec.algorithms = algorithms;
  spec.master_seed = seed;
  spec.max_iter = max_iter;
  spec.tol = tol;
  spec.threads = threads;
  spec.max_n_override = max_n_override;
  spec.validate();
  if (n > spec.allowed_max_n())
    throw ResourceGuardError("run_convergence: n exceeds the allowed maximum; raise max_n_override");

  const std::int64_t n_tasks =
      static_cast<std::int64_t>(alphas.size()) * algorithms.size() * trials;
  std::vector<detail::TrialOutcome> outcomes(static_cast<std::size_t>(n_tasks));
  parallel_for(n_tasks, threads, [&](std::int64_t idx) {
    const std::size_t per_cell = static_cast<std::size_t>(trials);
    const std::size_t cell = static_cast<std::size_t>(idx) / per_cell;
    const int trial = static_cast<int>(static_cast<std::size_t>(idx) % per_cell);
    const std::size_t algo_idx = cell % algorithms.size();
    const std::size_t tau_idx = cell / algorithms.size();
    outcomes[static_cast<std::size_t>(idx)] = detail::run_trial<double>(spec, 0, tau_idx, trial, algo_idx);
  });

  std::vector<ConvergenceCurve> curves;
  for (std::size_t tau_idx = 0; tau_idx < alphas.size(); ++tau_idx) {
    for (std::size_t algo_idx = 0; algo_idx < algorithms.size(); ++algo_idx) {
      ConvergenceCurve curve;
      curve.n = n;
      curve.alpha = alphas[tau_idx];
      curve.algorithm = algorithms[algo_idx];
      curve.trials = trials;

      std::size_t longest = 0;
      const std::size_t cell = tau_idx * algorithms.size() + algo_idx;
      for (int trial = 0; trial < trials; ++trial) {
        const auto& o = outcomes[cell * static_cast<std::size_t>(trials) + static_cast<std::size_t>(trial)];
        longest = std::max(longest, o.correlations.size());
      }
      curve.mean_correlation.assign(longest, 0.0);
      curve.variance.assign(longest, 0.0);
      for (std::size_t it = 0; it < longest; ++it) {
        double s = 0.0, s2 = 0.0;
        for (int trial = 0; trial < trials; ++trial) {
          const auto& o =
              outcomes[cell * static_cast<std::size_t>(trials) + static_cast<std::size_t>(trial)];
          const double c = it < o.correlations.size() ? o.correlations[it] : o.correlations.back();
          s += c;
          s2 += c * c;
        }
        const double mean = s / trials;
        curve.mean_correlation[it] = mean;
        curve.variance[it] = std::max(0.0, s2 / trials - mean * mean);
      }
      curves.push_back(std::move(curve));
    }
  }
  return curves;
}

// ---------------------------------------------------------------------------
// Emission

namespace detail {
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline nlohmann::json to_json(const GridCell& c) {
  return nlohmann::json{{"n", c.n},
                        {"tau", c.tau},
                        {"algorithm", c.algorithm},
                        {"success_count", c.success_count},
                        {"success_rate", static_cast<double>(c.success_count) / c.trials},
                        {"trials", c.trials},
                        {"mean_iterations", c.mean_iterations},
                        {"mean_final_correlation", c.mean_final_correlation}};
}

inline nlohmann::json to_json(const ConvergenceCurve& c) {
  return nlohmann::json{{"n", c.n},
                        {"alpha", c.alpha},
                        {"algorithm", c.algorithm},
                        {"mean_correlation", c.mean_correlation},
                        {"variance", c.variance},
                        {"trials", c.trials}};
}

/// Writes grid cells as CSV (or a JSON mirror of the same fields). Rows are
/// already sorted; numbers carry 17 significant digits so parsing them back
/// is bit-exact.
inline void emit(const std::vector<GridCell>& cells, const std::string& format,
                 const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("emit: cannot open '" + path + "' for writing");
  if (format == "csv") {
    f << "n,tau,algorithm,success_rate,mean_iterations,mean_final_correlation,trials\n";
    for (const auto& c : cells)
      f << c.n << ',' << detail::fmt17(c.tau) << ',' << c.algorithm << ','
        << detail::fmt17(static_cast<double>(c.success_count) / c.trials) << ','
        << detail::fmt17(c.mean_iterations) << ',' << detail::fmt17(c.mean_final_correlation) << ','
        << c.trials << '\n';
  } else if (format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : cells) arr.push_back(to_json(c));
    f << arr.dump(2) << '\n';
  } else {
    throw std::invalid_argument("emit: format must be csv or json");
  }
  if (!f) throw std::runtime_error("emit: write failed for '" + path + "'");
}

inline void emit(const std::vector<ConvergenceCurve>& curves, const std::string& format,
                 const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("emit: cannot open '" + path + "' for writing");
  if (format == "csv") {
    f << "n,alpha,algorithm,iteration,mean_correlation,variance,trials\n";
    for (const auto& c : curves)
      for (std::size_t it = 0; it < c.mean_correlation.size(); ++it)
        f << c.n << ',' << detail::fmt17(c.alpha) << ',' << c.algorithm << ',' << it << ','
          << detail::fmt17(c.mean_correlation[it]) << ',' << detail::fmt17(c.variance[it]) << ','
          << c.trials << '\n';
  } else if (format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : curves) arr.push_back(to_json(c));
    f << arr.dump(2) << '\n';
  } else {
    throw std::invalid_argument("emit: format must be csv or json");
  }
  if (!f) throw std::runtime_error("emit: write failed for '" + path + "'");
}

inline GridSpec grid_spec_from_json(const nlohmann::json& j) {
  GridSpec s;
  if (j.contains("n_values")) s.n_values = j.at("n_values").get<std::vector<std::int64_t>>();
  if (j.contains("tau_values")) s.tau_values = j.at("tau_values").get<std::vector<double>>();
  if (j.contains("tau_is_alpha")) s.tau_is_alpha = j.at("tau_is_alpha").get<bool>();
  if (j.contains("trials")) s.trials = j.at("trials").get<int>();
  if (j.contains("algorithms")) s.algorithms = j.at("algorithms").get<std::vector<std::string>>();
  if (j.contains("master_seed")) s.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("max_iter")) s.max_iter = j.at("max_iter").get<int>();
  if (j.contains("tol")) s.tol = j.at("tol").get<double>();
  if (j.contains("sigma")) s.sigma = j.at("sigma").get<double>();
  if (j.contains("noise_inject_m")) s.noise_inject_m = j.at("noise_inject_m").get<int>();
  if (j.contains("threads")) s.threads = j.at("threads").get<int>();
  if (j.contains("max_n_override")) s.max_n_override = j.at("max_n_override").get<std::int64_t>();
  if (j.contains("storage")) s.storage = j.at("storage").get<std::string>();
  return s;
}

}  // namespace tpca
