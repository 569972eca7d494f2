#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "swdecay/dataset.hpp"
#include "swdecay/design.hpp"

namespace swdecay {

enum class Adjustment { QLS, MAQLS };

enum class CovFlavor { ModelBased, BC0, BC1, BC2, BC3 };

inline const char* cov_flavor_name(CovFlavor f) {
  switch (f) {
    case CovFlavor::ModelBased: return "mb";
    case CovFlavor::BC0: return "bc0";
    case CovFlavor::BC1: return "bc1";
    case CovFlavor::BC2: return "bc2";
    case CovFlavor::BC3: return "bc3";
  }
  return "?";
}

struct FitOptions {
  Adjustment adjustment = Adjustment::MAQLS;
  double tol = 1e-8;
  int max_iter = 200;
  double init_alpha0 = 0.01;
  double init_alpha1 = 0.01;
  double zeta = 0.75;  // Fay-Graubard bound for BC3
};

// All five covariance flavors for theta_hat. BC1/BC2 are absent when some
// (I - H_i) is not invertible (or lacks a positive-definite symmetrization).
struct CovarianceSet {
  Eigen::MatrixXd model_based;
  Eigen::MatrixXd bc0;
  std::optional<Eigen::MatrixXd> bc1;
  std::optional<Eigen::MatrixXd> bc2;
  Eigen::MatrixXd bc3;
  std::string bc_error;  // reason BC1/BC2 are unavailable, when they are

  const Eigen::MatrixXd& get(CovFlavor flavor) const;
};

struct FitResult {
  Eigen::VectorXd theta;  // beta_1..beta_T, delta
  double alpha0 = 0.0;    // first-stage correlations
  double alpha1 = 0.0;
  double tau = 0.0;  // second-stage correlations
  double rho = 0.0;
  double phi = 1.0;  // dispersion
  CovarianceSet cov;
  bool converged = false;
  int iterations = 0;
  bool clamped = false;  // correlation estimates clamped into the valid region
  Adjustment adjustment = Adjustment::MAQLS;
  int clusters = 0;
  int periods = 0;

  double delta() const { return theta(theta.size() - 1); }
  double se(CovFlavor flavor) const;
};

// Alternates the mean, correlation and dispersion updates until the maximum
// parameter change drops below options.tol, then applies the second-stage
// transform and evaluates all covariance flavors at (theta, tau, rho).
FitResult fit(const TrialDataset& dataset, const FitOptions& options = {});

// GLS solution of the mean estimating equation at a fixed working
// correlation (identity link, unit variance function).
Eigen::VectorXd update_theta(const TrialDataset& dataset, double alpha0,
                             double alpha1);

struct Stage1Result {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  bool clamped = false;  // some update had no interior root and was clamped
};

// Solves the two scalar stationarity equations of sum_i tr{R^{-1}(a0,a1) M_i}
// by alternating safeguarded 1-D root finding; M_i is the residual
// cross-product (QLS) or its leverage-adjusted version (MAQLS).
Stage1Result update_alpha_stage1(const TrialDataset& dataset,
                                 const Eigen::VectorXd& theta, Adjustment adjustment,
                                 double alpha0_init = 0.01,
                                 double alpha1_init = 0.01);

// Closed-form second-stage transform removing the large-sample bias of the
// first-stage correlations. Clusters of size 1 contribute nothing to tau.
std::pair<double, double> stage2_transform(double alpha0, double alpha1,
                                           const std::vector<int>& cluster_sizes);

// Dense per-cluster leverage H_i = D_i (sum_j D_j' V_j^{-1} D_j)^{-1} D_i' V_i^{-1};
// sum_i tr(H_i) = T + 1.
std::vector<Eigen::MatrixXd> cluster_leverage(const TrialDataset& dataset,
                                              double alpha0, double alpha1);

// phi_new = phi * adjusted_trace_sum / (total_obs - n_params), where
// adjusted_trace_sum = sum_i tr(R~_i). Throws on degenerate data.
double dispersion_update(double phi, double adjusted_trace_sum,
                         long long total_obs, int n_params);

// All covariance flavors at the given parameter values.
CovarianceSet compute_covariances(const TrialDataset& dataset,
                                  const Eigen::VectorXd& theta, double tau,
                                  double rho, double phi, double zeta = 0.75);

struct WaldTest {
  double statistic = 0.0;
  double p_value = 1.0;
  double dof = 0.0;  // 0 for z tests
  bool reject = false;
  TestKind test = TestKind::T;
  CovFlavor flavor = CovFlavor::BC1;
};

// Two-sided test of H0: delta = 0 using the requested covariance flavor.
WaldTest wald_test(const FitResult& fit, CovFlavor flavor, TestKind test,
                   DofRule dof_rule, double alpha = 0.05, double explicit_dof = 0.0);

// Internal pieces with the residual matrices collapsed to the per-cluster
// trace statistics the scalar estimating equations need. Exposed for tests.
namespace detail {

// tr(M), tr(C1 M) and tr(C2 M) for a T x T block sum M, where C1 is the
// tridiagonal ones matrix and C2 = diag(0,1,...,1,0).
struct BlockStats {
  double tr = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

struct ClusterBlocks {
  BlockStats diag;  // sum of diagonal T x T blocks of M_i
  BlockStats all;   // sum of all T x T blocks of M_i
  int n = 0;        // cluster size
};

BlockStats block_stats(const Eigen::MatrixXd& m);

// M_i = r_i r_i' collapsed to block sums: diag = Rm Rm', all = rsum rsum'.
ClusterBlocks blocks_from_residuals(const Eigen::MatrixXd& resid);

// M_i = (I - H_i)^{-1} r_i r_i' with H_i = g J_n (x) K; `w_inverse` is
// (I_T - g n K)^{-1}. Passing the identity reproduces the QLS blocks.
ClusterBlocks blocks_adjusted(const Eigen::MatrixXd& resid,
                              const Eigen::MatrixXd& w_inverse);

// tr(F^{-1}(alpha1) M) and its alpha1 derivative from block stats.
double finv_trace(const BlockStats& m, double alpha1);
double finv_trace_deriv(const BlockStats& m, double alpha1);

// Scalar estimating equations over collapsed blocks.
double stage1_eq_alpha0(const std::vector<ClusterBlocks>& blocks, double alpha0,
                        double alpha1);
double stage1_eq_alpha1(const std::vector<ClusterBlocks>& blocks, double alpha0,
                        double alpha1);
double stage1_objective(const std::vector<ClusterBlocks>& blocks, double alpha0,
                        double alpha1);

Stage1Result solve_stage1(const std::vector<ClusterBlocks>& blocks,
                          double alpha0_init, double alpha1_init);

}  // namespace detail

}  // namespace swdecay
