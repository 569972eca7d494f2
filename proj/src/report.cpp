#include "swdecay/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace swdecay {

namespace {

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(round_sig10(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(round_sig10(v(i)));
  return out;
}

const char* method_name(Adjustment a) {
  return a == Adjustment::QLS ? "qls" : "maqls";
}

}  // namespace

double round_sig10(double x) {
  if (!std::isfinite(x)) return x;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return std::strtod(buf, nullptr);
}

Json fit_result_to_json(const FitResult& result) {
  Json j;
  j["adjustment"] = method_name(result.adjustment);
  j["clusters"] = result.clusters;
  j["periods"] = result.periods;
  j["theta"] = vector_to_json(result.theta);
  j["delta"] = round_sig10(result.delta());
  j["alpha0"] = round_sig10(result.alpha0);
  j["alpha1"] = round_sig10(result.alpha1);
  j["tau"] = round_sig10(result.tau);
  j["rho"] = round_sig10(result.rho);
  j["phi"] = round_sig10(result.phi);
  j["cov_mb"] = matrix_to_json(result.cov.model_based);
  j["cov_bc0"] = matrix_to_json(result.cov.bc0);
  j["cov_bc1"] = result.cov.bc1 ? matrix_to_json(*result.cov.bc1) : Json();
  j["cov_bc2"] = result.cov.bc2 ? matrix_to_json(*result.cov.bc2) : Json();
  j["cov_bc3"] = matrix_to_json(result.cov.bc3);
  if (!result.cov.bc_error.empty()) j["cov_error"] = result.cov.bc_error;
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  j["clamped"] = result.clamped;
  return j;
}

namespace {

Json method_summary_to_json(const MethodSummary& ms, int reps) {
  Json j;
  j["method"] = method_name(ms.method);
  j["reps"] = reps;
  j["converged"] = ms.converged;
  j["failed"] = ms.failed;
  j["convergence_rate"] = round_sig10(ms.convergence_rate);
  j["tau_mean"] = round_sig10(ms.tau_mean);
  j["rho_mean"] = round_sig10(ms.rho_mean);
  j["tau_bias_pct"] = round_sig10(ms.tau_bias.value);
  j["rho_bias_pct"] = round_sig10(ms.rho_bias.value);
  j["bias_absolute_fallback"] =
      ms.tau_bias.absolute_fallback || ms.rho_bias.absolute_fallback;
  return j;
}

}  // namespace

Json summary_to_json(const SimSummary& summary) {
  const auto& sc = summary.scenario;
  Json j;
  j["scenario"] = {{"id", sc.id},
                   {"clusters", sc.clusters},
                   {"periods", sc.periods},
                   {"cohort_size", sc.cohort_size},
                   {"tau", round_sig10(sc.tau)},
                   {"rho", round_sig10(sc.rho)},
                   {"delta", round_sig10(sc.delta)},
                   {"phi", round_sig10(sc.phi)},
                   {"reps", sc.reps},
                   {"base_seed", sc.base_seed}};
  j["true_variance"] = round_sig10(summary.true_variance);
  j["qls"] = method_summary_to_json(summary.qls, sc.reps);
  j["maqls"] = method_summary_to_json(summary.maqls, sc.reps);
  Json cells = Json::array();
  for (const auto& cell : summary.cells) {
    Json c;
    c["method"] = method_name(cell.method);
    c["test"] = cell.test == TestKind::Z ? "z" : "t";
    c["dof"] = cell.test == TestKind::Z
                   ? "-"
                   : (cell.dof_rule == DofRule::ClustersMinusTwo ? "i-2" : "i-p");
    c["flavor"] = cov_flavor_name(cell.flavor);
    c["defined"] = cell.defined;
    if (cell.defined) {
      c["used"] = cell.used;
      c["rejections"] = cell.rejections;
      c["rate"] = round_sig10(cell.rate);
      c["mcse"] = cell.mcse_defined ? Json(round_sig10(cell.mcse)) : Json();
      c["mcse_defined"] = cell.mcse_defined;
      c["predicted"] = round_sig10(cell.predicted);
    }
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);
  return j;
}

}  // namespace swdecay
