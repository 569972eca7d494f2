#pragma once

#include <Eigen/Dense>
#include <string>

namespace swdecay {

// Within-period correlation tau and autoregressive correlation rho
// (decay parameter d = 1 - rho).
struct CorrelationParams {
  double tau = 0.0;
  double rho = 0.0;
};

// Parameters within this distance of a validity boundary are rejected:
// the closed-form inverse denominators vanish at the boundary.
inline constexpr double kBoundaryGuard = 1e-9;

// Lower admissible bound for tau given the largest cluster size.
// For max_cluster_size == 1 the exchangeable block is 1x1 and tau is
// unconstrained below; we return -1 so tau stays a correlation.
double tau_lower_bound(int max_cluster_size);

struct RegionCheck {
  bool valid = false;
  std::string violation;  // empty when valid; names the failing bound otherwise
};

// Triangular validity region: tau in (-1/(maxN-1), 1), rho in (-1, 1).
// Equivalent to positive definiteness of the proportional decay matrix.
RegionCheck check_validity(const CorrelationParams& params, int max_cluster_size);

// Throws ValidationError naming the offending bound. `strict` additionally
// rejects parameters within kBoundaryGuard of a boundary.
void require_valid(const CorrelationParams& params, int max_cluster_size,
                   bool strict = true);

enum class MatrixKind { Exchangeable, Ar1, ProportionalDecay, ExponentialDecay };

struct StructuredMatrix {
  MatrixKind kind = MatrixKind::ProportionalDecay;
  CorrelationParams params;
  int cluster_size = 1;  // n
  int periods = 1;       // t
  Eigen::MatrixXd dense;
};

// Building blocks.
Eigen::MatrixXd exchangeable(double tau, int n);
Eigen::MatrixXd exchangeable_inverse(double tau, int n);
Eigen::MatrixXd ar1(double rho, int t);
Eigen::MatrixXd ar1_inverse(double rho, int t);

// Proportional decay structure for closed cohorts, individual-major layout
// (each individual's t measurements contiguous):
//   corr(y_jt, y_j't)  = tau          (j != j')
//   corr(y_jt, y_jt')  = rho^|t-t'|
//   corr(y_jt, y_j't') = tau rho^|t-t'|
// Entrywise equal to exchangeable(tau, n) (x) ar1(rho, t).
StructuredMatrix build_proportional_decay(const CorrelationParams& params, int n, int t);

// Closed-form inverse: exchangeable_inverse (x) ar1_inverse.
StructuredMatrix invert_proportional_decay(const CorrelationParams& params, int n, int t);

// t(n-1) log(1-tau) + t log(1+(n-1)tau) + (t-1) n log(1-rho^2)
double log_determinant_proportional_decay(const CorrelationParams& params, int n, int t);

// Exponential decay structure for cross-sectional designs:
//   (1-tau) I + tau (J_n (x) ar1(rho, t))
// All between-measurement correlations equal tau rho^|t-t'|, including
// within the same sampling slot. Positive definiteness is checked by dense
// factorization (no separable closed form exists here).
StructuredMatrix build_exponential_decay(const CorrelationParams& params, int n, int t);

// Dense Kronecker product, row-major block convention: (A (x) B) has block
// (i,j) equal to A(i,j) * B.
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace swdecay
