#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "swdecay/correlation.hpp"

namespace swdecay {

// I x T binary treatment matrix; X(i,t) = 1 iff cluster i is treated in
// period t. Every row is a run of zeros followed by a run of ones.
struct DesignLayout {
  Eigen::MatrixXi X;

  int clusters() const { return static_cast<int>(X.rows()); }
  int periods() const { return static_cast<int>(X.cols()); }
};

// Validates the staggered-rollout shape and wraps the matrix.
DesignLayout make_layout(const Eigen::MatrixXi& X);

// Standard stepped wedge: one baseline period, I/(T-1) clusters crossing at
// each of T-1 steps. Requires T >= 3 and I divisible by T-1.
DesignLayout standard_layout(int clusters, int periods);

// General staggered rollout: clusters_per_step[s] clusters cross at step s,
// after `baseline_periods` control periods and measurements_per_step[s']
// periods between consecutive steps. Rows sorted by crossover step.
DesignLayout general_layout(const std::vector<int>& clusters_per_step,
                            int baseline_periods,
                            const std::vector<int>& measurements_per_step);

struct DesignConstants {
  long long U = 0;  // treated cluster-periods
  long long W = 0;  // sum over periods of squared treated-cluster counts
  long long V = 0;  // within-cluster adjacent-period treated cross-products
  long long Q = 0;  // between-period adjacent treated-count cross-products
};

DesignConstants design_constants(const DesignLayout& layout);

// Closed-form variance of the intervention-effect estimator under the
// proportional decay structure:
//   (phi I / N)(1-rho^2){1+(N-1)tau} / [(IU-W)(1+rho^2) - 2(IV-Q) rho]
double variance_delta(const DesignLayout& layout, int cohort_size,
                      const CorrelationParams& params, double phi);

// Simplified form for the standard design:
//   6 (phi/N)(T-1)(1-rho^2){1+(N-1)tau} / [I(T-2){T(1-rho)^2 + 6 rho}]
double variance_delta_standard(int clusters, int periods, int cohort_size,
                               const CorrelationParams& params, double phi);

// Large-cohort limit (requires tau > 0):
//   phi I (1-rho^2) tau / [(IU-W)(1+rho^2) - 2(IV-Q) rho]
double variance_limit(const DesignLayout& layout, const CorrelationParams& params,
                      double phi);

// Design effect relative to a two-arm individually randomized trial, for a
// rollout with S steps, c measurements between steps and cohort size N:
//   [3S / (2(S-1))] (1-rho^2) / [(S+1)c(1-rho)^2 + 6 rho] {1+(N-1)tau}
// Free of the number of baseline periods.
double design_effect(int steps, int measurements_per_step, int cohort_size,
                     const CorrelationParams& params);

// The rho value in (0,1) maximizing the design effect for fixed resources.
double de_maximizer(int steps, int measurements_per_step);

enum class TestKind { Z, T };
enum class DofRule { ClustersMinusParams, ClustersMinusTwo, Explicit };

struct PowerQuery {
  double delta = 0.0;        // effect size, outcome units
  double phi = 1.0;          // marginal variance
  double alpha = 0.05;       // two-sided type I error rate
  TestKind test = TestKind::T;
  DofRule dof_rule = DofRule::ClustersMinusTwo;
  double explicit_dof = 0.0;  // used when dof_rule == Explicit
  double target_power = 0.8;
};

// Degrees of freedom implied by the rule; throws if < 1.
double resolve_dof(const PowerQuery& query, int clusters, int periods);

// Two-sided rejection probability of H0: delta = 0 given var(delta_hat).
// Exactly alpha at delta = 0.
double power_from_variance(double variance, const PowerQuery& query, int clusters,
                           int periods);

struct CohortSizeResult {
  bool attainable = false;
  int cohort_size = 0;   // smallest N meeting the target, when attainable
  double power = 0.0;    // power at that N
  double limit_power = 0.0;  // N -> infinity power bound (tau > 0), or best achievable
};

// Smallest integer N with power >= target on the given layout.
CohortSizeResult required_cohort_size(const DesignLayout& layout,
                                      const PowerQuery& query,
                                      const CorrelationParams& params);

// Same search using the simplified standard-design variance formula, which
// needs no divisibility of I by T-1.
CohortSizeResult required_cohort_size_standard(int clusters, int periods,
                                               const PowerQuery& query,
                                               const CorrelationParams& params);

struct ClusterCountResult {
  int clusters = 0;
  double power = 0.0;
};

// Smallest I divisible by T-1 (standard family) achieving the target power
// with the given cohort size.
ClusterCountResult required_clusters(int cohort_size, int periods,
                                     const PowerQuery& query,
                                     const CorrelationParams& params);

// Cluster count implied by the design-effect route: the individual-RCT
// sample size is an explicit input (ceil(n DE) individuals, / N clusters).
struct DesignEffectRoute {
  double de = 0.0;
  long long required_total = 0;
  double implied_clusters = 0.0;
};
DesignEffectRoute design_effect_route(long long individual_rct_n, int steps,
                                      int measurements_per_step, int cohort_size,
                                      const CorrelationParams& params);

// Block exchangeable structure: constant within-period (tau), between-period
// (alpha1) and within-individual (alpha2) correlations.
struct BlockExchangeableParams {
  double tau = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
};

// lambda3 = 1+(N-1)(tau-alpha1)-alpha2, lambda4 = 1+(N-1)tau+(T-1)(N-1)alpha1
// +(T-1)alpha2; both must be positive.
double variance_block_exchangeable(int clusters, int periods, int cohort_size,
                                   const BlockExchangeableParams& be, double phi);

// var_PD / var_BE on the standard design; depends on (tau, rho, T, N) and the
// block-exchangeable parameters only through h = (N-1) alpha1 + alpha2.
double relative_variance(int clusters, int periods, int cohort_size,
                         const CorrelationParams& pd,
                         const BlockExchangeableParams& be, double phi);

// Values eta of h at which the two variances coincide, within the admissible
// range (-a/(T-1), a) with a = 1+(N-1)tau. Empty when no admissible root.
std::vector<double> equal_variance_line(int periods, int cohort_size, double tau,
                                        double rho);

// Design-stage variance under the exponential decay structure; the working
// matrix is inverted numerically (no separable closed form).
double variance_exponential_decay(const DesignLayout& layout, int cohort_size,
                                  const CorrelationParams& params, double phi);

// Rectangular power grid over (tau, d = 1-rho); tau-major storage.
struct SensitivityGrid {
  std::vector<double> tau_values;
  std::vector<double> d_values;
  Eigen::MatrixXd power;  // tau_values.size() x d_values.size()
};

SensitivityGrid sensitivity_grid(const DesignLayout& layout, int cohort_size,
                                 const PowerQuery& query, double tau_lo,
                                 double tau_hi, int n_tau, double d_lo, double d_hi,
                                 int n_d);

// Header `tau,d,power`, row-major, 6 significant digits.
void write_sensitivity_csv(const SensitivityGrid& grid, std::ostream& os);

// Relative-variance grid over the block-exchangeable correlations for fixed
// proportional decay parameters; cells with an invalid block-exchangeable
// matrix are NaN.
struct CompareGrid {
  std::vector<double> alpha1_values;
  std::vector<double> alpha2_values;
  Eigen::MatrixXd ratio;  // alpha1_values.size() x alpha2_values.size()
};

CompareGrid relative_variance_grid(int periods, int cohort_size,
                                   const CorrelationParams& pd, double a1_lo,
                                   double a1_hi, int n_a1, double a2_lo,
                                   double a2_hi, int n_a2);

// Header `alpha1_be,alpha2_be,ratio`, row-major, 6 significant digits.
void write_compare_csv(const CompareGrid& grid, std::ostream& os);

// ceil(total / (1 - gamma)) for an anticipated attrition rate gamma in [0,1).
long long attrition_inflate(long long total, double gamma);

}  // namespace swdecay
