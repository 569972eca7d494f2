#include "swdecay/correlation.hpp"

#include <cmath>
#include <sstream>

#include "swdecay/errors.hpp"

namespace swdecay {

namespace {

void require_dims(int n, int t) {
  if (n < 1 || t < 1) {
    throw ValidationError("matrix dimensions must satisfy n >= 1 and t >= 1");
  }
}

}  // namespace

double tau_lower_bound(int max_cluster_size) {
  if (max_cluster_size < 1) {
    throw ValidationError("max cluster size must be >= 1");
  }
  if (max_cluster_size == 1) return -1.0;
  return -1.0 / (max_cluster_size - 1);
}

RegionCheck check_validity(const CorrelationParams& params, int max_cluster_size) {
  const double lb = tau_lower_bound(max_cluster_size);
  std::ostringstream msg;
  if (!(params.tau > lb)) {
    msg << "tau = " << params.tau << " violates lower bound " << lb
        << " for max cluster size " << max_cluster_size;
    return {false, msg.str()};
  }
  if (!(params.tau < 1.0)) {
    msg << "tau = " << params.tau << " violates upper bound 1";
    return {false, msg.str()};
  }
  if (!(params.rho > -1.0 && params.rho < 1.0)) {
    msg << "rho = " << params.rho << " violates bound (-1, 1)";
    return {false, msg.str()};
  }
  return {true, {}};
}

void require_valid(const CorrelationParams& params, int max_cluster_size, bool strict) {
  const RegionCheck check = check_validity(params, max_cluster_size);
  if (!check.valid) {
    throw ValidationError("correlation parameters outside validity region: " +
                          check.violation);
  }
  if (strict) {
    const double lb = tau_lower_bound(max_cluster_size);
    if (params.tau - lb < kBoundaryGuard || 1.0 - params.tau < kBoundaryGuard ||
        1.0 - std::abs(params.rho) < kBoundaryGuard) {
      std::ostringstream msg;
      msg << "correlation parameters (tau = " << params.tau
          << ", rho = " << params.rho << ") within " << kBoundaryGuard
          << " of a validity boundary";
      throw ValidationError(msg.str());
    }
  }
}

Eigen::MatrixXd exchangeable(double tau, int n) {
  require_dims(n, 1);
  Eigen::MatrixXd g = Eigen::MatrixXd::Constant(n, n, tau);
  g.diagonal().setOnes();
  return g;
}

Eigen::MatrixXd exchangeable_inverse(double tau, int n) {
  require_dims(n, 1);
  const double denom = (1.0 - tau) * (1.0 + (n - 1) * tau);
  if (std::abs(1.0 - tau) < kBoundaryGuard || std::abs(denom) < kBoundaryGuard) {
    throw NumericalError("exchangeable matrix is singular at or near tau boundary");
  }
  const double a = 1.0 / (1.0 - tau);
  const double b = -tau / denom;
  Eigen::MatrixXd ginv = Eigen::MatrixXd::Constant(n, n, b);
  ginv.diagonal().array() += a;
  return ginv;
}

Eigen::MatrixXd ar1(double rho, int t) {
  require_dims(1, t);
  Eigen::MatrixXd f(t, t);
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < t; ++j) {
      f(i, j) = std::pow(rho, std::abs(i - j));
    }
  }
  return f;
}

Eigen::MatrixXd ar1_inverse(double rho, int t) {
  require_dims(1, t);
  if (1.0 - rho * rho < kBoundaryGuard) {
    throw NumericalError("AR(1) matrix is singular at or near |rho| = 1");
  }
  // (I + rho^2 C2 - rho C1) / (1 - rho^2), with C2 = diag(0,1,...,1,0) and
  // C1 tridiagonal with ones on the two sub-diagonals.
  Eigen::MatrixXd finv = Eigen::MatrixXd::Zero(t, t);
  const double scale = 1.0 / (1.0 - rho * rho);
  for (int i = 0; i < t; ++i) {
    finv(i, i) = (i == 0 || i == t - 1) ? scale : (1.0 + rho * rho) * scale;
  }
  if (t == 1) finv(0, 0) = 1.0;
  for (int i = 0; i + 1 < t; ++i) {
    finv(i, i + 1) = -rho * scale;
    finv(i + 1, i) = -rho * scale;
  }
  return finv;
}

StructuredMatrix build_proportional_decay(const CorrelationParams& params, int n, int t) {
  require_dims(n, t);
  require_valid(params, n);
  const int dim = n * t;
  Eigen::MatrixXd r(dim, dim);
  for (int j = 0; j < n; ++j) {
    for (int jp = 0; jp < n; ++jp) {
      const double between = (j == jp) ? 1.0 : params.tau;
      for (int s = 0; s < t; ++s) {
        for (int sp = 0; sp < t; ++sp) {
          const double decay = (s == sp) ? 1.0 : std::pow(params.rho, std::abs(s - sp));
          r(j * t + s, jp * t + sp) = between * decay;
        }
      }
    }
  }
  return {MatrixKind::ProportionalDecay, params, n, t, std::move(r)};
}

StructuredMatrix invert_proportional_decay(const CorrelationParams& params, int n, int t) {
  require_dims(n, t);
  require_valid(params, n);
  Eigen::MatrixXd rinv = kron(exchangeable_inverse(params.tau, n),
                              ar1_inverse(params.rho, t));
  return {MatrixKind::ProportionalDecay, params, n, t, std::move(rinv)};
}

double log_determinant_proportional_decay(const CorrelationParams& params, int n, int t) {
  require_dims(n, t);
  require_valid(params, n);
  return t * (n - 1) * std::log1p(-params.tau) +
         t * std::log1p((n - 1) * params.tau) +
         (t - 1) * n * std::log1p(-params.rho * params.rho);
}

StructuredMatrix build_exponential_decay(const CorrelationParams& params, int n, int t) {
  require_dims(n, t);
  const int dim = n * t;
  Eigen::MatrixXd l(dim, dim);
  for (int j = 0; j < n; ++j) {
    for (int jp = 0; jp < n; ++jp) {
      for (int s = 0; s < t; ++s) {
        for (int sp = 0; sp < t; ++sp) {
          double value = params.tau * std::pow(params.rho, std::abs(s - sp));
          if (j == jp && s == sp) value = 1.0;
          l(j * t + s, jp * t + sp) = value;
        }
      }
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(l);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "exponential decay matrix (tau = " << params.tau << ", rho = " << params.rho
        << ", n = " << n << ", t = " << t << ") is not positive definite";
    throw NumericalError(msg.str());
  }
  return {MatrixKind::ExponentialDecay, params, n, t, std::move(l)};
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace swdecay
