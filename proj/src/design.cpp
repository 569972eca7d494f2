#include "swdecay/design.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "swdecay/errors.hpp"
#include "swdecay/stats.hpp"

namespace swdecay {

namespace {

void require_phi(double phi) {
  if (!(phi > 0.0)) throw ValidationError("marginal variance phi must be positive");
}

void require_cohort(int n) {
  if (n < 1) throw ValidationError("cohort size must be >= 1");
}

void write_csv_row(std::ostream& os, double a, double b, double c) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g\n", a, b, c);
  os << buf;
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw ValidationError("grid resolution must be >= 1");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  return out;
}

}  // namespace

DesignLayout make_layout(const Eigen::MatrixXi& X) {
  if (X.rows() < 1 || X.cols() < 1) {
    throw ValidationError("layout must have at least one cluster and one period");
  }
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    bool treated = false;
    for (Eigen::Index t = 0; t < X.cols(); ++t) {
      const int v = X(i, t);
      if (v != 0 && v != 1) {
        throw ValidationError("layout entries must be 0 or 1");
      }
      if (treated && v == 0) {
        std::ostringstream msg;
        msg << "cluster " << i + 1
            << " violates staggered rollout (treatment switches back to control)";
        throw ValidationError(msg.str());
      }
      treated = treated || v == 1;
    }
  }
  return DesignLayout{X};
}

DesignLayout standard_layout(int clusters, int periods) {
  if (periods < 3) throw ValidationError("standard design requires T >= 3");
  const int steps = periods - 1;
  if (clusters < steps || clusters % steps != 0) {
    std::ostringstream msg;
    msg << "standard design requires the cluster count (" << clusters
        << ") to be divisible by the number of steps (" << steps << ")";
    throw ValidationError(msg.str());
  }
  const int per_step = clusters / steps;
  std::vector<int> m(steps, per_step), c(steps, 1);
  return general_layout(m, 1, c);
}

DesignLayout general_layout(const std::vector<int>& clusters_per_step,
                            int baseline_periods,
                            const std::vector<int>& measurements_per_step) {
  if (clusters_per_step.empty() ||
      clusters_per_step.size() != measurements_per_step.size()) {
    throw ValidationError(
        "clusters-per-step and measurements-per-step lists must be nonempty and "
        "of equal length");
  }
  if (baseline_periods < 1) {
    throw ValidationError("at least one baseline period is required");
  }
  for (int m : clusters_per_step) {
    if (m < 1) throw ValidationError("each step must switch at least one cluster");
  }
  for (int c : measurements_per_step) {
    if (c < 1) throw ValidationError("each step must be followed by >= 1 measurement");
  }
  const int clusters = std::accumulate(clusters_per_step.begin(),
                                       clusters_per_step.end(), 0);
  const int periods = baseline_periods +
                      std::accumulate(measurements_per_step.begin(),
                                      measurements_per_step.end(), 0);
  Eigen::MatrixXi X = Eigen::MatrixXi::Zero(clusters, periods);
  int row = 0;
  int start = baseline_periods;  // 0-based first treated period for step 1
  for (std::size_t s = 0; s < clusters_per_step.size(); ++s) {
    for (int k = 0; k < clusters_per_step[s]; ++k, ++row) {
      for (int t = start; t < periods; ++t) X(row, t) = 1;
    }
    start += measurements_per_step[s];
  }
  return DesignLayout{std::move(X)};
}

DesignConstants design_constants(const DesignLayout& layout) {
  const auto& X = layout.X;
  const int I = layout.clusters();
  const int T = layout.periods();
  DesignConstants dc;
  std::vector<long long> treated_per_period(T, 0);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < I; ++i) treated_per_period[t] += X(i, t);
    dc.U += treated_per_period[t];
    dc.W += treated_per_period[t] * treated_per_period[t];
  }
  for (int i = 0; i < I; ++i) {
    for (int t = 0; t + 1 < T; ++t) dc.V += X(i, t) * X(i, t + 1);
  }
  for (int t = 0; t + 1 < T; ++t) {
    dc.Q += treated_per_period[t] * treated_per_period[t + 1];
  }
  return dc;
}

double variance_delta(const DesignLayout& layout, int cohort_size,
                      const CorrelationParams& params, double phi) {
  require_cohort(cohort_size);
  require_phi(phi);
  require_valid(params, cohort_size);
  const auto dc = design_constants(layout);
  const double I = layout.clusters();
  const double rho = params.rho;
  const double denom = (I * dc.U - dc.W) * (1.0 + rho * rho) -
                       2.0 * (I * dc.V - dc.Q) * rho;
  if (!(denom > 0.0)) {
    throw ValidationError(
        "non-identifiable design: the intervention effect is not estimable "
        "given period effects");
  }
  const double numer = (phi * I / cohort_size) * (1.0 - rho * rho) *
                       (1.0 + (cohort_size - 1) * params.tau);
  return numer / denom;
}

double variance_delta_standard(int clusters, int periods, int cohort_size,
                               const CorrelationParams& params, double phi) {
  if (periods < 3) throw ValidationError("standard design requires T >= 3");
  if (clusters < 1) throw ValidationError("cluster count must be >= 1");
  require_cohort(cohort_size);
  require_phi(phi);
  require_valid(params, cohort_size);
  const double T = periods;
  const double rho = params.rho;
  const double numer = 6.0 * (phi / cohort_size) * (T - 1.0) * (1.0 - rho * rho) *
                       (1.0 + (cohort_size - 1) * params.tau);
  const double denom = clusters * (T - 2.0) *
                       (T * (1.0 - rho) * (1.0 - rho) + 6.0 * rho);
  return numer / denom;
}

double variance_limit(const DesignLayout& layout, const CorrelationParams& params,
                      double phi) {
  require_phi(phi);
  if (!(params.tau > 0.0)) {
    throw ValidationError("the large-cohort variance limit requires tau > 0");
  }
  const auto dc = design_constants(layout);
  const double I = layout.clusters();
  const double rho = params.rho;
  const double denom = (I * dc.U - dc.W) * (1.0 + rho * rho) -
                       2.0 * (I * dc.V - dc.Q) * rho;
  if (!(denom > 0.0)) {
    throw ValidationError("non-identifiable design");
  }
  return phi * I * (1.0 - rho * rho) * params.tau / denom;
}

double design_effect(int steps, int measurements_per_step, int cohort_size,
                     const CorrelationParams& params) {
  if (steps < 2) throw ValidationError("design effect requires S >= 2 steps");
  if (measurements_per_step < 1) {
    throw ValidationError("design effect requires c >= 1 measurements per step");
  }
  require_cohort(cohort_size);
  const double S = steps;
  const double c = measurements_per_step;
  const double rho = params.rho;
  return (3.0 * S / (2.0 * (S - 1.0))) * (1.0 - rho * rho) /
         ((S + 1.0) * c * (1.0 - rho) * (1.0 - rho) + 6.0 * rho) *
         (1.0 + (cohort_size - 1) * params.tau);
}

double de_maximizer(int steps, int measurements_per_step) {
  if (steps < 2 || measurements_per_step < 1) {
    throw ValidationError("de_maximizer requires S >= 2 and c >= 1");
  }
  const double K = static_cast<double>(steps + 1) * measurements_per_step;
  // Stationarity of (1-rho^2)/[K(1-rho)^2 + 6 rho] reduces to
  // (K-3) rho^2 - 2K rho + (K-3) = 0; at K = 3 the root is rho = 0.
  if (steps + 1 == 3 && measurements_per_step == 1) return 0.0;
  return (K - std::sqrt(3.0) * std::sqrt(2.0 * K - 3.0)) / (K - 3.0);
}

double resolve_dof(const PowerQuery& query, int clusters, int periods) {
  double dof = 0.0;
  switch (query.dof_rule) {
    case DofRule::ClustersMinusParams:
      dof = clusters - (periods + 1);
      if (dof < 1.0) {
        std::ostringstream msg;
        msg << "insufficient clusters for DoF = I - (T+1): need at least "
            << periods + 2 << " clusters, got " << clusters;
        throw ValidationError(msg.str());
      }
      break;
    case DofRule::ClustersMinusTwo:
      dof = clusters - 2;
      if (dof < 1.0) {
        throw ValidationError("insufficient clusters for DoF = I - 2: need >= 3");
      }
      break;
    case DofRule::Explicit:
      dof = query.explicit_dof;
      if (dof < 1.0) throw ValidationError("explicit DoF must be >= 1");
      break;
  }
  return dof;
}

double power_from_variance(double variance, const PowerQuery& query, int clusters,
                           int periods) {
  if (!(variance > 0.0)) throw ValidationError("variance must be positive");
  if (!(query.alpha > 0.0 && query.alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  const double lambda = std::abs(query.delta) / std::sqrt(variance);
  if (query.test == TestKind::Z) {
    const double q = stats::norm_quantile(1.0 - query.alpha / 2.0);
    return stats::norm_cdf(lambda - q) + stats::norm_cdf(-lambda - q);
  }
  const double dof = resolve_dof(query, clusters, periods);
  const double q = stats::t_quantile(1.0 - query.alpha / 2.0, dof);
  return stats::t_cdf(lambda - q, dof) + stats::t_cdf(-lambda - q, dof);
}

CohortSizeResult required_cohort_size(const DesignLayout& layout,
                                      const PowerQuery& query,
                                      const CorrelationParams& params) {
  if (!(query.target_power > 0.0 && query.target_power < 1.0)) {
    throw ValidationError("target power must lie in (0, 1)");
  }
  const int I = layout.clusters();
  const int T = layout.periods();
  CohortSizeResult result;

  // Surfaces non-identifiable layouts up front (tau is always valid at N = 1).
  (void)variance_delta(layout, 1, params, query.phi);

  int n_max = std::numeric_limits<int>::max();
  if (params.tau > 0.0) {
    result.limit_power =
        power_from_variance(variance_limit(layout, params, query.phi), query, I, T);
    if (result.limit_power < query.target_power) return result;
  } else if (params.tau == 0.0) {
    result.limit_power = 1.0;
  } else {
    // Negative tau is only admissible while tau > -1/(N-1).
    n_max = static_cast<int>(std::floor(1.0 - 1.0 / params.tau - 1e-12));
  }

  constexpr int kScanCap = 10'000'000;
  for (int n = 1; n <= std::min(n_max, kScanCap); ++n) {
    double power = 0.0;
    try {
      power = power_from_variance(variance_delta(layout, n, params, query.phi),
                                  query, I, T);
    } catch (const ValidationError&) {
      break;  // negative tau hit the boundary guard just below n_max
    }
    if (power >= query.target_power) {
      result.attainable = true;
      result.cohort_size = n;
      result.power = power;
      if (params.tau <= 0.0) result.limit_power = std::max(result.limit_power, power);
      return result;
    }
    result.limit_power = std::max(result.limit_power, power);
  }
  return result;  // unattainable within the admissible cohort sizes
}

CohortSizeResult required_cohort_size_standard(int clusters, int periods,
                                               const PowerQuery& query,
                                               const CorrelationParams& params) {
  if (periods < 3) throw ValidationError("standard design requires T >= 3");
  if (!(query.target_power > 0.0 && query.target_power < 1.0)) {
    throw ValidationError("target power must lie in (0, 1)");
  }
  CohortSizeResult result;
  int n_max = std::numeric_limits<int>::max();
  if (params.tau > 0.0) {
    const double T = periods;
    const double rho = params.rho;
    const double limit_var =
        6.0 * query.phi * (T - 1.0) * (1.0 - rho * rho) * params.tau /
        (clusters * (T - 2.0) * (T * (1.0 - rho) * (1.0 - rho) + 6.0 * rho));
    result.limit_power = power_from_variance(limit_var, query, clusters, periods);
    if (result.limit_power < query.target_power) return result;
  } else if (params.tau == 0.0) {
    result.limit_power = 1.0;
  } else {
    n_max = static_cast<int>(std::floor(1.0 - 1.0 / params.tau - 1e-12));
  }

  constexpr int kScanCap = 10'000'000;
  for (int n = 1; n <= std::min(n_max, kScanCap); ++n) {
    double power = 0.0;
    try {
      power = power_from_variance(
          variance_delta_standard(clusters, periods, n, params, query.phi), query,
          clusters, periods);
    } catch (const ValidationError&) {
      break;
    }
    if (power >= query.target_power) {
      result.attainable = true;
      result.cohort_size = n;
      result.power = power;
      if (params.tau <= 0.0) result.limit_power = std::max(result.limit_power, power);
      return result;
    }
    result.limit_power = std::max(result.limit_power, power);
  }
  return result;
}

ClusterCountResult required_clusters(int cohort_size, int periods,
                                     const PowerQuery& query,
                                     const CorrelationParams& params) {
  if (periods < 3) throw ValidationError("standard design requires T >= 3");
  if (!(query.target_power > 0.0 && query.target_power < 1.0)) {
    throw ValidationError("target power must lie in (0, 1)");
  }
  const int steps = periods - 1;
  constexpr int kClusterCap = 1'000'000;
  for (int clusters = steps; clusters <= kClusterCap; clusters += steps) {
    if (query.test == TestKind::T) {
      // Skip cluster counts that leave the t reference without a valid DoF.
      try {
        resolve_dof(query, clusters, periods);
      } catch (const ValidationError&) {
        continue;
      }
    }
    const double var =
        variance_delta_standard(clusters, periods, cohort_size, params, query.phi);
    const double power = power_from_variance(var, query, clusters, periods);
    if (power >= query.target_power) return {clusters, power};
  }
  throw NumericalError("no admissible cluster count reaches the target power");
}

DesignEffectRoute design_effect_route(long long individual_rct_n, int steps,
                                      int measurements_per_step, int cohort_size,
                                      const CorrelationParams& params) {
  if (individual_rct_n < 1) {
    throw ValidationError("individual-RCT sample size must be >= 1");
  }
  DesignEffectRoute route;
  route.de = design_effect(steps, measurements_per_step, cohort_size, params);
  const double raw = individual_rct_n * route.de;
  const long long rounded = std::llround(raw);
  route.required_total = (std::abs(raw - rounded) < 1e-9 * (std::abs(raw) + 1.0))
                             ? rounded
                             : static_cast<long long>(std::ceil(raw));
  route.implied_clusters = static_cast<double>(route.required_total) / cohort_size;
  return route;
}

double variance_block_exchangeable(int clusters, int periods, int cohort_size,
                                   const BlockExchangeableParams& be, double phi) {
  if (periods < 3) throw ValidationError("standard design requires T >= 3");
  if (clusters < 1) throw ValidationError("cluster count must be >= 1");
  require_cohort(cohort_size);
  require_phi(phi);
  const double N = cohort_size;
  const double T = periods;
  const double lambda3 = 1.0 + (N - 1) * (be.tau - be.alpha1) - be.alpha2;
  const double lambda4 =
      1.0 + (N - 1) * be.tau + (T - 1) * (N - 1) * be.alpha1 + (T - 1) * be.alpha2;
  if (!(lambda3 > 0.0 && lambda4 > 0.0)) {
    std::ostringstream msg;
    msg << "invalid block-exchangeable correlations: eigenvalues lambda3 = "
        << lambda3 << ", lambda4 = " << lambda4 << " must be positive";
    throw ValidationError(msg.str());
  }
  return 12.0 * (phi / N) * (T - 1.0) * lambda3 * lambda4 /
         (clusters * (T - 2.0) * ((T - 1.0) * lambda3 + (T + 1.0) * lambda4));
}

double relative_variance(int clusters, int periods, int cohort_size,
                         const CorrelationParams& pd,
                         const BlockExchangeableParams& be, double phi) {
  if (clusters < 1) throw ValidationError("cluster count must be >= 1");
  require_phi(phi);
  require_valid(pd, cohort_size);
  // Validates the block-exchangeable eigenvalues.
  (void)variance_block_exchangeable(clusters, periods, cohort_size, be, phi);
  const double N = cohort_size;
  const double T = periods;
  const double rho = pd.rho;
  const double a = 1.0 + (N - 1) * pd.tau;
  const double h = (N - 1) * be.alpha1 + be.alpha2;
  const double k =
      (1.0 - rho * rho) / (2.0 * (T * (1.0 - rho) * (1.0 - rho) + 6.0 * rho));
  return k * ((T - 1.0) * a / (a + (T - 1.0) * h) + (T + 1.0) * a / (a - h));
}

std::vector<double> equal_variance_line(int periods, int cohort_size, double tau,
                                        double rho) {
  if (periods < 3) throw ValidationError("standard design requires T >= 3");
  require_cohort(cohort_size);
  require_valid({tau, rho}, cohort_size);
  const double T = periods;
  const double a = 1.0 + (cohort_size - 1) * tau;
  const double k =
      (1.0 - rho * rho) / (2.0 * (T * (1.0 - rho) * (1.0 - rho) + 6.0 * rho));
  // ratio(h) = 1 is quadratic in h:
  //   (T-1) h^2 + a [k T (T-1) - (T-2)] h + a^2 (2 k T - 1) = 0
  const double qa = T - 1.0;
  const double qb = a * (k * T * (T - 1.0) - (T - 2.0));
  const double qc = a * a * (2.0 * k * T - 1.0);
  const double disc = qb * qb - 4.0 * qa * qc;
  std::vector<double> roots;
  if (disc < 0.0) return roots;
  const double sq = std::sqrt(disc);
  for (double h : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
    if (h > -a / (T - 1.0) && h < a) roots.push_back(h);
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  return roots;
}

double variance_exponential_decay(const DesignLayout& layout, int cohort_size,
                                  const CorrelationParams& params, double phi) {
  require_cohort(cohort_size);
  require_phi(phi);
  const int T = layout.periods();
  const int I = layout.clusters();
  const auto L = build_exponential_decay(params, cohort_size, T);
  const Eigen::LLT<Eigen::MatrixXd> llt(L.dense);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("exponential decay working covariance factorization failed");
  }
  // Z_i = 1_N (x) D_i, so Z_i' L^{-1} Z_i = D_i' Msum D_i with Msum the sum
  // of all T x T blocks of L^{-1}.
  Eigen::MatrixXd stacked(cohort_size * T, T);
  for (int j = 0; j < cohort_size; ++j) {
    stacked.block(j * T, 0, T, T).setIdentity();
  }
  const Eigen::MatrixXd solved = llt.solve(stacked);
  Eigen::MatrixXd msum = Eigen::MatrixXd::Zero(T, T);
  for (int j = 0; j < cohort_size; ++j) msum += solved.block(j * T, 0, T, T);

  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(T + 1, T + 1);
  for (int i = 0; i < I; ++i) {
    Eigen::MatrixXd D(T, T + 1);
    D.leftCols(T).setIdentity();
    D.col(T) = layout.X.row(i).transpose().cast<double>();
    info += D.transpose() * msum * D;
  }
  const Eigen::LLT<Eigen::MatrixXd> info_llt(info);
  if (info_llt.info() != Eigen::Success) {
    throw ValidationError("non-identifiable design under exponential decay");
  }
  Eigen::VectorXd e = Eigen::VectorXd::Zero(T + 1);
  e(T) = 1.0;
  return phi * info_llt.solve(e)(T);
}

SensitivityGrid sensitivity_grid(const DesignLayout& layout, int cohort_size,
                                 const PowerQuery& query, double tau_lo,
                                 double tau_hi, int n_tau, double d_lo, double d_hi,
                                 int n_d) {
  SensitivityGrid grid;
  grid.tau_values = linspace(tau_lo, tau_hi, n_tau);
  grid.d_values = linspace(d_lo, d_hi, n_d);
  for (double tau : {tau_lo, tau_hi}) {
    for (double d : {d_lo, d_hi}) {
      require_valid({tau, 1.0 - d}, cohort_size);
    }
  }
  grid.power.resize(n_tau, n_d);
  for (int a = 0; a < n_tau; ++a) {
    for (int b = 0; b < n_d; ++b) {
      const CorrelationParams p{grid.tau_values[a], 1.0 - grid.d_values[b]};
      const double var = variance_delta(layout, cohort_size, p, query.phi);
      grid.power(a, b) =
          power_from_variance(var, query, layout.clusters(), layout.periods());
    }
  }
  return grid;
}

void write_sensitivity_csv(const SensitivityGrid& grid, std::ostream& os) {
  os << "tau,d,power\n";
  for (std::size_t a = 0; a < grid.tau_values.size(); ++a) {
    for (std::size_t b = 0; b < grid.d_values.size(); ++b) {
      write_csv_row(os, grid.tau_values[a], grid.d_values[b],
                    grid.power(a, b));
    }
  }
}

CompareGrid relative_variance_grid(int periods, int cohort_size,
                                   const CorrelationParams& pd, double a1_lo,
                                   double a1_hi, int n_a1, double a2_lo,
                                   double a2_hi, int n_a2) {
  require_valid(pd, cohort_size);
  CompareGrid grid;
  grid.alpha1_values = linspace(a1_lo, a1_hi, n_a1);
  grid.alpha2_values = linspace(a2_lo, a2_hi, n_a2);
  grid.ratio.resize(n_a1, n_a2);
  for (int a = 0; a < n_a1; ++a) {
    for (int b = 0; b < n_a2; ++b) {
      const BlockExchangeableParams be{pd.tau, grid.alpha1_values[a],
                                       grid.alpha2_values[b]};
      try {
        grid.ratio(a, b) = relative_variance(1, periods, cohort_size, pd, be, 1.0);
      } catch (const ValidationError&) {
        grid.ratio(a, b) = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return grid;
}

void write_compare_csv(const CompareGrid& grid, std::ostream& os) {
  os << "alpha1_be,alpha2_be,ratio\n";
  for (std::size_t a = 0; a < grid.alpha1_values.size(); ++a) {
    for (std::size_t b = 0; b < grid.alpha2_values.size(); ++b) {
      write_csv_row(os, grid.alpha1_values[a], grid.alpha2_values[b],
                    grid.ratio(a, b));
    }
  }
}

long long attrition_inflate(long long total, double gamma) {
  if (total < 0) throw ValidationError("total sample size must be nonnegative");
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ValidationError("attrition rate gamma must lie in [0, 1)");
  }
  const double q = total / (1.0 - gamma);
  const long long rounded = std::llround(q);
  if (std::abs(q - rounded) < 1e-9 * (std::abs(q) + 1.0)) return rounded;
  return static_cast<long long>(std::ceil(q));
}

}  // namespace swdecay
