// Command-line front end: instance generation, recovery runs, diagnostic
// suites, and the benchmark grid/convergence drivers. Exit codes: 0 on
// success, 2 on invalid arguments, 3 when a resource guard refuses the run.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tpca/diagnostics.hpp"
#include "tpca/harness.hpp"
#include "tpca/json_io.hpp"
#include "tpca/tensor_io.hpp"

namespace {

using nlohmann::json;

struct GenArgs {
  std::int64_t n = 32;
  double tau = 0.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string sidecar;
};

int run_gen(const GenArgs& a) {
  const tpca::SpikedInstance inst = tpca::generate(a.n, a.tau, a.sigma, a.seed);
  tpca::write_tpc3(inst.tensor, a.out);
  const std::string sidecar = a.sidecar.empty() ? a.out + ".json" : a.sidecar;
  std::ofstream f(sidecar, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + sidecar + "' for writing");
  f << tpca::sidecar_json(inst).dump(2) << '\n';
  std::printf("wrote %s and %s\n", a.out.c_str(), sidecar.c_str());
  return 0;
}

struct RecoverArgs {
  std::string algo = "homotopy";
  std::string in;
  std::string sidecar;
  std::uint64_t seed = 0;
  int max_iter = 100;
  double tol = tpca::kDefaultTol;
  int inject_m = 5;
  double tau_hat = 0.0;  // 0: estimate (or take tau from the sidecar)
  std::string out;
};

int run_recover(const RecoverArgs& a) {
  const tpca::Tensor3 tensor = tpca::read_tpc3(a.in);

  std::optional<tpca::Vec> v;
  double sidecar_tau = 0.0;
  if (!a.sidecar.empty()) {
    std::ifstream f(a.sidecar);
    if (!f) throw std::runtime_error("cannot open sidecar '" + a.sidecar + "'");
    json meta = json::parse(f);
    v = meta.at("v").get<tpca::Vec>();
    sidecar_tau = meta.value("tau", 0.0);
  }

  tpca::RecoveryTrace trace;
  if (a.algo == "homotopy") {
    trace = tpca::homotopy_pca(tensor, a.max_iter, a.tol, a.seed);
  } else if (a.algo == "power") {
    trace = tpca::power_random(tensor, a.seed, a.max_iter, a.tol);
  } else if (a.algo == "flatten") {
    trace = tpca::flatten_method(tensor, a.seed, a.max_iter, a.tol);
  } else if (a.algo == "noise-inject") {
    trace = tpca::noise_injected_pca(tensor, a.inject_m, a.seed);
  } else if (a.algo == "full-homotopy") {
    double tau_hat = a.tau_hat;
    if (tau_hat <= 0.0) tau_hat = sidecar_tau;
    if (tau_hat <= 0.0) tau_hat = tpca::estimate_tau_hat(tensor, a.seed);
    trace = tpca::homotopy_full(tensor, tpca::HomotopySchedule::default_for(tensor.dim()), tau_hat,
                                {}, a.seed);
  } else {
    throw CLI::ValidationError("--algo", "unknown algorithm '" + a.algo + "'");
  }

  if (v) trace = tpca::with_correlations(std::move(trace), *v);
  json out = tpca::to_json(trace);
  if (v) {
    const tpca::Score s = tpca::score(trace.iterates.back(), *v);
    out["final_correlation"] = s.correlation;
    out["success"] = s.success;
  }
  std::ofstream f(a.out, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + a.out + "' for writing");
  f << out.dump(2) << '\n';
  std::printf("%s: %d iterations, converged=%d\n", trace.algorithm.c_str(), trace.iterations_used,
              trace.converged ? 1 : 0);
  return 0;
}

struct CheckArgs {
  std::string suite = "moments";
  std::int64_t n = 50;
  std::int64_t trials = 0;  // 0: per-suite default
  std::uint64_t seed = 0;
  int m = 5;
  int threads = 1;
  std::string out;
};

int run_check(CheckArgs a) {
  if (a.trials <= 0) {
    if (a.suite == "injection") a.trials = 100000;
    else if (a.suite == "goe") a.trials = 50;
    else if (a.suite == "path") a.trials = 30;  // full continuation per trial
    else a.trials = 2000;
  }
  std::vector<tpca::MomentReport> reports;
  json extra;

  if (a.suite == "moments") {
    auto [r1, r2] = tpca::u_moments(a.n, 1.0, a.trials, a.seed, a.threads);
    reports.push_back(r1);
    reports.push_back(r2);
    tpca::CounterRng rng(a.seed, 0xC0DE);
    const tpca::Vec v = tpca::detail::random_unit_vec(a.n, rng);
    tpca::Vec w = tpca::detail::random_unit_vec(a.n, rng);
    tpca::axpy_inplace(w, -tpca::dot(w, v), v);  // w orthogonal to v
    w = tpca::normalized(w);
    auto [d1, d2] = tpca::delta_moments(a.n, 1.0, w, v, a.trials, tpca::derive_seed(a.seed, 1u), a.threads);
    reports.push_back(d1);
    reports.push_back(d2);
    auto [d3, d4] = tpca::delta_moments(a.n, 1.0, v, v, a.trials, tpca::derive_seed(a.seed, 2u), a.threads);
    reports.push_back(d3);
    reports.push_back(d4);
  } else if (a.suite == "injection") {
    for (const auto& r : tpca::injection_moments(a.m, a.trials, a.seed, a.threads))
      reports.push_back(r);
  } else if (a.suite == "goe") {
    reports.push_back(tpca::goe_spectrum_check(a.n, a.trials, a.seed, a.threads));
  } else if (a.suite == "path") {
    const double tau = std::pow(static_cast<double>(a.n), 0.75) * std::log(static_cast<double>(a.n));
    json paths = json::array();
    int near_at_first = 0, good_at_end = 0;
    for (std::int64_t s = 0; s < a.trials; ++s) {
      const auto inst = tpca::generate(a.n, tau, 1.0, tpca::derive_seed(a.seed, 6u, static_cast<std::uint64_t>(s)));
      const auto path = tpca::trace_path(inst.tensor, inst.v,
                                         tpca::HomotopySchedule::default_for(a.n), tau);
      json jp = json::array();
      for (const auto& pt : path) {
        json o = tpca::to_json(pt);
        o.erase("x");  // keep the report compact
        jp.push_back(o);
      }
      paths.push_back(jp);
      if (path.front().cls == tpca::PointClass::NearDagger) ++near_at_first;
      if (path.back().cls == tpca::PointClass::Good) ++good_at_end;
    }
    extra["paths"] = paths;
    reports.push_back(tpca::make_report("fraction near x-dagger at largest t",
                                        static_cast<double>(near_at_first) / a.trials, 1.0,
                                        a.trials, 0.2));
    reports.push_back(tpca::make_report("fraction classified good at t = 0",
                                        static_cast<double>(good_at_end) / a.trials, 1.0, a.trials,
                                        0.3));
  } else {
    throw CLI::ValidationError("--suite", "unknown suite '" + a.suite + "'");
  }

  bool all_pass = true;
  json jr = json::array();
  for (const auto& r : reports) {
    all_pass = all_pass && r.pass;
    jr.push_back(tpca::to_json(r));
  }
  json out{{"suite", a.suite},
           {"n", a.n},
           {"trials", a.trials},
           {"seed", a.seed},
           {"reports", jr},
           {"pass", all_pass}};
  if (!extra.is_null()) out.update(extra);
  std::ofstream f(a.out, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + a.out + "' for writing");
  f << out.dump(2) << '\n';
  for (const auto& r : reports)
    std::printf("[%s] %s: empirical=%.6g theoretical=%.6g\n", r.pass ? "PASS" : "FAIL",
                r.statistic.c_str(), r.empirical, r.theoretical);
  return all_pass ? 0 : 1;
}

struct PathArgs {
  std::int64_t n = 64;
  double tau = 0.0;  // 0: n^{3/4} log n
  double tau_hat = 0.0;
  std::uint64_t seed = 0;
  int stages = 12;
  std::string out;
};

int run_path(const PathArgs& a) {
  const double tau =
      a.tau > 0.0 ? a.tau : std::pow(static_cast<double>(a.n), 0.75) * std::log(static_cast<double>(a.n));
  const auto inst = tpca::generate(a.n, tau, 1.0, a.seed);
  const auto schedule = tpca::HomotopySchedule::geometric(10.0 / static_cast<double>(a.n),
                                                          0.01 / static_cast<double>(a.n), a.stages);
  const double tau_hat = a.tau_hat > 0.0 ? a.tau_hat : tau;
  const auto path = tpca::trace_path(inst.tensor, inst.v, schedule, tau_hat);
  json jp = json::array();
  for (const auto& pt : path) jp.push_back(tpca::to_json(pt));
  json out{{"n", a.n}, {"tau", tau}, {"tau_hat", tau_hat}, {"seed", a.seed}, {"path", jp}};
  std::ofstream f(a.out, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + a.out + "' for writing");
  f << out.dump(2) << '\n';
  for (const auto& pt : path)
    std::printf("t=%-12.6g |x|=%-10.4g grad=%-10.3g class=%s\n", pt.t, tpca::norm(pt.x),
                pt.grad_norm, tpca::to_string(pt.cls));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiked tensor recovery benchmarks and diagnostics"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* cmd_gen = app.add_subcommand("gen", "Generate a spiked tensor instance");
  cmd_gen->add_option("--n", gen.n, "dimension")->required();
  cmd_gen->add_option("--tau", gen.tau, "spike strength");
  cmd_gen->add_option("--sigma", gen.sigma, "noise standard deviation");
  cmd_gen->add_option("--seed", gen.seed, "rng seed");
  cmd_gen->add_option("--out", gen.out, "output tensor path (.tpc3)")->required();
  cmd_gen->add_option("--sidecar", gen.sidecar, "metadata path (default: <out>.json)");

  RecoverArgs rec;
  auto* cmd_rec = app.add_subcommand("recover", "Run a recovery algorithm on a tensor file");
  cmd_rec->add_option("--algo", rec.algo, "homotopy|noise-inject|power|flatten|full-homotopy");
  cmd_rec->add_option("--in", rec.in, "input tensor (.tpc3)")->required();
  cmd_rec->add_option("--sidecar", rec.sidecar, "instance metadata for scoring");
  cmd_rec->add_option("--seed", rec.seed, "rng seed");
  cmd_rec->add_option("--max-iter", rec.max_iter, "iteration cap");
  cmd_rec->add_option("--tol", rec.tol, "convergence tolerance");
  cmd_rec->add_option("--m", rec.inject_m, "noise-injection tensor count");
  cmd_rec->add_option("--tau-hat", rec.tau_hat, "penalty coefficient for full-homotopy");
  cmd_rec->add_option("--out", rec.out, "trace output (json)")->required();

  CheckArgs chk;
  auto* cmd_chk = app.add_subcommand("check", "Statistical diagnostics suites");
  cmd_chk->add_option("--suite", chk.suite, "moments|injection|goe|path")->required();
  cmd_chk->add_option("--n", chk.n, "dimension");
  cmd_chk->add_option("--trials", chk.trials, "trial count (default depends on the suite)");
  cmd_chk->add_option("--seed", chk.seed, "rng seed");
  cmd_chk->add_option("--m", chk.m, "injection tensor count");
  cmd_chk->add_option("--threads", chk.threads, "worker threads");
  cmd_chk->add_option("--out", chk.out, "report output (json)")->required();

  tpca::GridSpec grid;
  std::string grid_spec_path, grid_out, grid_format = "csv";
  std::vector<double> grid_taus;
  bool grid_absolute = false;
  auto* cmd_grid = app.add_subcommand("grid", "Success-probability grid over (n, tau)");
  cmd_grid->add_option("--spec", grid_spec_path, "full GridSpec as json");
  cmd_grid->add_option("--n", grid.n_values, "dimensions");
  cmd_grid->add_option("--tau", grid_taus, "tau values (multipliers of n^{3/4} unless --absolute)");
  cmd_grid->add_flag("--absolute", grid_absolute, "treat --tau as absolute spike strengths");
  cmd_grid->add_option("--trials", grid.trials, "trials per cell");
  cmd_grid->add_option("--algos", grid.algorithms, "algorithm tags");
  cmd_grid->add_option("--seed", grid.master_seed, "master seed");
  cmd_grid->add_option("--max-iter", grid.max_iter, "iteration cap");
  cmd_grid->add_option("--tol", grid.tol, "convergence tolerance");
  cmd_grid->add_option("--threads", grid.threads, "worker threads");
  cmd_grid->add_option("--max-n-override", grid.max_n_override,
                       "raise the dimension cap (n > 512 needs --storage f32)");
  cmd_grid->add_option("--storage", grid.storage, "f64|f32 tensor storage");
  cmd_grid->add_option("--format", grid_format, "csv|json");
  cmd_grid->add_option("--out", grid_out, "output path")->required();

  std::int64_t conv_n = 128;
  std::vector<double> conv_alphas{1.1, 1.5, 2.0};
  int conv_trials = 50, conv_max_iter = 100, conv_threads = 1;
  std::int64_t conv_max_n = 0;
  std::vector<std::string> conv_algos{"homotopy", "power", "flatten"};
  std::uint64_t conv_seed = 0;
  std::string conv_out, conv_format = "csv";
  auto* cmd_conv = app.add_subcommand("converge", "Per-iteration correlation curves");
  cmd_conv->add_option("--n", conv_n, "dimension");
  cmd_conv->add_option("--alphas", conv_alphas, "tau = alpha n^{3/4}");
  cmd_conv->add_option("--trials", conv_trials, "trials per curve");
  cmd_conv->add_option("--algos", conv_algos, "algorithm tags");
  cmd_conv->add_option("--seed", conv_seed, "master seed");
  cmd_conv->add_option("--max-iter", conv_max_iter, "iteration cap");
  cmd_conv->add_option("--threads", conv_threads, "worker threads");
  cmd_conv->add_option("--max-n-override", conv_max_n, "raise the dimension cap");
  cmd_conv->add_option("--format", conv_format, "csv|json");
  cmd_conv->add_option("--out", conv_out, "output path")->required();

  PathArgs path;
  auto* cmd_path = app.add_subcommand("path", "Trace the continuation path of one instance");
  cmd_path->add_option("--n", path.n, "dimension");
  cmd_path->add_option("--tau", path.tau, "spike strength (default n^{3/4} log n)");
  cmd_path->add_option("--tau-hat", path.tau_hat, "penalty coefficient (default tau)");
  cmd_path->add_option("--seed", path.seed, "rng seed");
  cmd_path->add_option("--stages", path.stages, "geometric stages before t = 0");
  cmd_path->add_option("--out", path.out, "output path (json)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_gen->parsed()) return run_gen(gen);
    if (cmd_rec->parsed()) return run_recover(rec);
    if (cmd_chk->parsed()) return run_check(chk);
    if (cmd_path->parsed()) return run_path(path);
    if (cmd_grid->parsed()) {
      if (!grid_spec_path.empty()) {
        std::ifstream f(grid_spec_path);
        if (!f) throw std::runtime_error("cannot open spec '" + grid_spec_path + "'");
        grid = tpca::grid_spec_from_json(nlohmann::json::parse(f));
      } else if (!grid_taus.empty()) {
        grid.tau_values = grid_taus;
        grid.tau_is_alpha = !grid_absolute;
      }
      const auto cells = tpca::run_grid(grid);
      tpca::emit(cells, grid_format, grid_out);
      std::printf("wrote %zu cells to %s\n", cells.size(), grid_out.c_str());
      return 0;
    }
    if (cmd_conv->parsed()) {
      const auto curves = tpca::run_convergence(conv_n, conv_alphas, conv_trials, conv_algos,
                                                conv_seed, conv_max_iter, tpca::kDefaultTol,
                                                conv_threads, conv_max_n);
      tpca::emit(curves, conv_format, conv_out);
      std::printf("wrote %zu curves to %s\n", curves.size(), conv_out.c_str());
      return 0;
    }
  } catch (const tpca::ResourceGuardError& e) {
    std::fprintf(stderr, "resource guard: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid arguments: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
