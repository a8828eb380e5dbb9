#pragma once

#include <string>

#include "tpca/algorithms.hpp"
#include "tpca/diagnostics.hpp"
#include "tpca/model.hpp"

#include "json.hpp"

namespace tpca {

// JSON views of the result records the CLI writes. Kept out of the core
// headers so the library itself does not pull in the JSON dependency.

inline nlohmann::json to_json(const RecoveryTrace& t) {
  nlohmann::json j{{"algorithm", t.algorithm},
                   {"converged", t.converged},
                   {"iterations_used", t.iterations_used},
                   {"wall_time_seconds", t.wall_time},
                   {"iterates", t.iterates}};
  if (!t.correlations.empty()) j["correlations"] = t.correlations;
  return j;
}

inline nlohmann::json to_json(const MomentReport& r) {
  return nlohmann::json{{"statistic", r.statistic}, {"empirical", r.empirical},
                        {"theoretical", r.theoretical}, {"trials", r.trials},
                        {"deviation", r.deviation},   {"bound", r.bound},
                        {"pass", r.pass}};
}

inline nlohmann::json to_json(const PathPoint& p) {
  return nlohmann::json{{"t", p.t},
                        {"x", p.x},
                        {"value", p.value},
                        {"grad_norm", p.grad_norm},
                        {"lambda_max", p.lambda_max},
                        {"sin_theta_b_v", p.sin_theta_b_v},
                        {"lambda_max_at_dagger", p.lambda_max_at_dagger},
                        {"sin_theta_b_v_at_dagger", p.sin_theta_b_v_at_dagger},
                        {"dist_to_dagger", p.dist_to_dagger},
                        {"class", to_string(p.cls)},
                        {"delta_norm_ratio", p.delta_norm_ratio},
                        {"delta_corr_ratio", p.delta_corr_ratio},
                        {"stalled", p.stalled},
                        {"monotone", p.monotone}};
}

/// Sidecar describing a generated instance; enough to score recoveries.
inline nlohmann::json sidecar_json(const SpikedInstance& inst) {
  return nlohmann::json{{"n", inst.n},   {"tau", inst.tau},   {"sigma", inst.sigma},
                        {"seed", inst.seed}, {"v", inst.v}};
}

}  // namespace tpca
