#include "swdecay/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "swdecay/correlation.hpp"
#include "swdecay/errors.hpp"
#include "swdecay/stats.hpp"

namespace swdecay {

namespace {

constexpr double kRegionMargin = 1e-6;   // clamp region shrinkage
constexpr double kRootTol = 1e-13;       // stage-1 bracket width tolerance
constexpr double kInnerTol = 1e-11;      // stage-1 alternation tolerance

struct ClusterWork {
  Eigen::MatrixXd Y;     // T x N, column per individual
  Eigen::MatrixXd D;     // T x (T+1) = [I_T | X_i]
  Eigen::VectorXd ysum;  // Y 1_N
  int n = 0;
};

struct Prepared {
  std::vector<ClusterWork> work;
  int T = 0;
  int I = 0;
  int max_n = 0;
  long long total_obs = 0;
  double outcome_msq = 1.0;  // centered mean square, dispersion degeneracy scale
};

Prepared prepare(const TrialDataset& ds) {
  if (ds.periods < 1 || ds.clusters.empty()) {
    throw ValidationError("dataset must contain at least one cluster and period");
  }
  Prepared prep;
  prep.T = ds.periods;
  prep.I = ds.n_clusters();
  double sum = 0.0, sumsq = 0.0;
  for (const auto& cluster : ds.clusters) {
    if (cluster.individuals.empty()) {
      throw ValidationError("cluster " + cluster.id + " has no individuals");
    }
    ClusterWork w;
    w.n = cluster.size();
    w.Y.resize(prep.T, w.n);
    for (int j = 0; j < w.n; ++j) w.Y.col(j) = cluster.individuals[j].outcomes;
    w.D.resize(prep.T, prep.T + 1);
    w.D.leftCols(prep.T).setIdentity();
    w.D.col(prep.T) = cluster.treatment.cast<double>();
    w.ysum = w.Y.rowwise().sum();
    sum += w.Y.sum();
    sumsq += w.Y.squaredNorm();
    prep.max_n = std::max(prep.max_n, w.n);
    prep.total_obs += static_cast<long long>(w.n) * prep.T;
    prep.work.push_back(std::move(w));
  }
  const double mean = sum / prep.total_obs;
  prep.outcome_msq = std::max(sumsq / prep.total_obs - mean * mean, 0.0);
  return prep;
}

// Exchangeable inverse as a I + b J, with alpha0 derivatives.
struct GCoef {
  double a, b, da, db;
};

GCoef g_coef(double alpha0, int n) {
  const double one_m = 1.0 - alpha0;
  const double trail = 1.0 + (n - 1) * alpha0;
  const double denom = one_m * trail;
  GCoef gc;
  gc.a = 1.0 / one_m;
  gc.da = 1.0 / (one_m * one_m);
  gc.b = -alpha0 / denom;
  gc.db = -(1.0 + (n - 1) * alpha0 * alpha0) / (denom * denom);
  return gc;
}

// 1' G^{-1} 1 / n: the exchangeable GLS weight per individual.
double g_weight(double alpha0, int n) { return 1.0 / (1.0 + (n - 1) * alpha0); }

struct GlsSolve {
  Eigen::MatrixXd Finv;
  Eigen::MatrixXd info;  // sum_i omega_i D_i' F^{-1} D_i
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  Eigen::VectorXd theta;
};

GlsSolve solve_gls(const Prepared& prep, double alpha0, double alpha1) {
  GlsSolve s;
  s.Finv = ar1_inverse(alpha1, prep.T);
  const int p = prep.T + 1;
  s.info = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  for (const auto& w : prep.work) {
    const double g = g_weight(alpha0, w.n);
    const Eigen::MatrixXd DtF = w.D.transpose() * s.Finv;  // p x T
    s.info.noalias() += (w.n * g) * (DtF * w.D);
    rhs.noalias() += g * (DtF * w.ysum);
  }
  s.ldlt.compute(s.info);
  s.theta = s.ldlt.solve(rhs);
  if ((s.info * s.theta - rhs).norm() > 1e-8 * (rhs.norm() + 1.0)) {
    throw ValidationError(
        "singular normal equations: the mean model is rank deficient on this "
        "design");
  }
  return s;
}

Eigen::MatrixXd residual_matrix(const ClusterWork& w, const Eigen::VectorXd& theta) {
  return w.Y.colwise() - (w.D * theta).eval();
}

// (I_T - g n K_i)^{-1} with K_i = D_i B D_i' F^{-1}; the T x T core of
// (I - H_i)^{-1} on the individual-average subspace.
Eigen::MatrixXd leverage_core_inverse(const ClusterWork& w, const GlsSolve& gls,
                                      double alpha0) {
  const Eigen::MatrixXd K = w.D * gls.ldlt.solve(w.D.transpose() * gls.Finv);
  const double g = g_weight(alpha0, w.n);
  const Eigen::MatrixXd W =
      Eigen::MatrixXd::Identity(w.D.rows(), w.D.rows()) - (g * w.n) * K;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(W);
  if (!lu.isInvertible()) {
    throw NumericalError("(I - H_i) is singular: leverage adjustment unavailable");
  }
  return lu.inverse();
}

std::vector<detail::ClusterBlocks> build_blocks(const Prepared& prep,
                                                const Eigen::VectorXd& theta,
                                                double alpha0, Adjustment adjustment,
                                                const GlsSolve& gls) {
  std::vector<detail::ClusterBlocks> blocks;
  blocks.reserve(prep.work.size());
  for (const auto& w : prep.work) {
    const Eigen::MatrixXd resid = residual_matrix(w, theta);
    detail::ClusterBlocks b;
    if (adjustment == Adjustment::MAQLS) {
      b = detail::blocks_adjusted(resid, leverage_core_inverse(w, gls, alpha0));
    } else {
      b = detail::blocks_from_residuals(resid);
    }
    b.n = w.n;
    blocks.push_back(b);
  }
  return blocks;
}

struct ScalarSolve {
  double x = 0.0;
  bool clamped = false;  // no interior root; clamped to the better endpoint
};

// Bracketing scan followed by a bisection/secant hybrid. Multiple roots are
// disambiguated by the objective value.
ScalarSolve scalar_root(const std::function<double(double)>& f,
                        const std::function<double(double)>& objective, double lo,
                        double hi) {
  constexpr int kScan = 128;
  double prev_x = lo, prev_f = f(lo);
  std::vector<std::pair<double, double>> brackets;  // (lo, hi)
  std::vector<std::pair<double, double>> values;    // (f(lo), f(hi))
  std::vector<double> exact_roots;
  if (prev_f == 0.0) exact_roots.push_back(prev_x);
  for (int k = 1; k <= kScan; ++k) {
    const double x = lo + (hi - lo) * k / kScan;
    const double fx = f(x);
    if (fx == 0.0) {
      exact_roots.push_back(x);
    } else if (prev_f != 0.0 && (prev_f < 0.0) != (fx < 0.0)) {
      brackets.emplace_back(prev_x, x);
      values.emplace_back(prev_f, fx);
    }
    prev_x = x;
    prev_f = fx;
  }

  std::vector<double> roots = exact_roots;
  for (std::size_t i = 0; i < brackets.size(); ++i) {
    double a = brackets[i].first, b = brackets[i].second;
    double fa = values[i].first, fb = values[i].second;
    for (int it = 0; b - a > kRootTol && it < 200; ++it) {
      double mid;
      if (it % 2 == 0 && fb != fa) {
        mid = b - fb * (b - a) / (fb - fa);  // secant step
        if (!(mid > a && mid < b)) mid = 0.5 * (a + b);
      } else {
        mid = 0.5 * (a + b);
      }
      const double fm = f(mid);
      if (fm == 0.0) {
        a = b = mid;
        break;
      }
      if ((fa < 0.0) == (fm < 0.0)) {
        a = mid;
        fa = fm;
      } else {
        b = mid;
        fb = fm;
      }
    }
    roots.push_back(0.5 * (a + b));
  }

  if (roots.empty()) {
    return {objective(lo) <= objective(hi) ? lo : hi, true};
  }
  double best = roots.front();
  double best_obj = objective(best);
  for (double r : roots) {
    const double obj = objective(r);
    if (obj < best_obj) {
      best = r;
      best_obj = obj;
    }
  }
  return {best, false};
}

}  // namespace

namespace detail {

BlockStats block_stats(const Eigen::MatrixXd& m) {
  const int T = static_cast<int>(m.rows());
  BlockStats s;
  s.tr = m.trace();
  for (int t = 0; t + 1 < T; ++t) s.c1 += m(t, t + 1) + m(t + 1, t);
  for (int t = 1; t + 1 < T; ++t) s.c2 += m(t, t);
  return s;
}

ClusterBlocks blocks_from_residuals(const Eigen::MatrixXd& resid) {
  ClusterBlocks b;
  const Eigen::VectorXd rsum = resid.rowwise().sum();
  b.diag = block_stats(resid * resid.transpose());
  b.all = block_stats(rsum * rsum.transpose());
  b.n = static_cast<int>(resid.cols());
  return b;
}

ClusterBlocks blocks_adjusted(const Eigen::MatrixXd& resid,
                              const Eigen::MatrixXd& w_inverse) {
  ClusterBlocks b;
  const int n = static_cast<int>(resid.cols());
  const Eigen::VectorXd rsum = resid.rowwise().sum();
  const Eigen::VectorXd rbar = rsum / n;
  const Eigen::VectorXd extra =
      (w_inverse - Eigen::MatrixXd::Identity(resid.rows(), resid.rows())) * rbar;
  b.diag = block_stats(resid * resid.transpose() + extra * rsum.transpose());
  b.all = block_stats((w_inverse * rsum) * rsum.transpose());
  b.n = n;
  return b;
}

double finv_trace(const BlockStats& m, double alpha1) {
  return (m.tr + alpha1 * alpha1 * m.c2 - alpha1 * m.c1) /
         (1.0 - alpha1 * alpha1);
}

double finv_trace_deriv(const BlockStats& m, double alpha1) {
  const double one_m = 1.0 - alpha1 * alpha1;
  const double core = m.tr + alpha1 * alpha1 * m.c2 - alpha1 * m.c1;
  return ((2.0 * alpha1 * m.c2 - m.c1) * one_m + 2.0 * alpha1 * core) /
         (one_m * one_m);
}

double stage1_eq_alpha0(const std::vector<ClusterBlocks>& blocks, double alpha0,
                        double alpha1) {
  double sum = 0.0;
  for (const auto& b : blocks) {
    const GCoef gc = g_coef(alpha0, b.n);
    sum += gc.da * finv_trace(b.diag, alpha1) + gc.db * finv_trace(b.all, alpha1);
  }
  return sum;
}

double stage1_eq_alpha1(const std::vector<ClusterBlocks>& blocks, double alpha0,
                        double alpha1) {
  double sum = 0.0;
  for (const auto& b : blocks) {
    const GCoef gc = g_coef(alpha0, b.n);
    sum += gc.a * finv_trace_deriv(b.diag, alpha1) +
           gc.b * finv_trace_deriv(b.all, alpha1);
  }
  return sum;
}

double stage1_objective(const std::vector<ClusterBlocks>& blocks, double alpha0,
                        double alpha1) {
  double sum = 0.0;
  for (const auto& b : blocks) {
    const GCoef gc = g_coef(alpha0, b.n);
    sum += gc.a * finv_trace(b.diag, alpha1) + gc.b * finv_trace(b.all, alpha1);
  }
  return sum;
}

Stage1Result solve_stage1(const std::vector<ClusterBlocks>& blocks,
                          double alpha0_init, double alpha1_init) {
  int max_n = 1;
  for (const auto& b : blocks) max_n = std::max(max_n, b.n);
  const double lo0 = tau_lower_bound(max_n) + kRegionMargin;
  const double hi0 = 1.0 - kRegionMargin;
  const double lo1 = -1.0 + kRegionMargin;
  const double hi1 = 1.0 - kRegionMargin;

  double a0 = std::clamp(alpha0_init, lo0, hi0);
  double a1 = std::clamp(alpha1_init, lo1, hi1);
  bool clamped = false;
  for (int iter = 0; iter < 60; ++iter) {
    const ScalarSolve s0 = scalar_root(
        [&](double x) { return stage1_eq_alpha0(blocks, x, a1); },
        [&](double x) { return stage1_objective(blocks, x, a1); }, lo0, hi0);
    const ScalarSolve s1 = scalar_root(
        [&](double x) { return stage1_eq_alpha1(blocks, s0.x, x); },
        [&](double x) { return stage1_objective(blocks, s0.x, x); }, lo1, hi1);
    const double change = std::max(std::abs(s0.x - a0), std::abs(s1.x - a1));
    a0 = s0.x;
    a1 = s1.x;
    clamped = s0.clamped || s1.clamped;
    if (change < kInnerTol) break;
  }
  return {a0, a1, clamped};
}

}  // namespace detail

const Eigen::MatrixXd& CovarianceSet::get(CovFlavor flavor) const {
  switch (flavor) {
    case CovFlavor::ModelBased: return model_based;
    case CovFlavor::BC0: return bc0;
    case CovFlavor::BC1:
      if (!bc1) throw NumericalError("BC1 unavailable: " + bc_error);
      return *bc1;
    case CovFlavor::BC2:
      if (!bc2) throw NumericalError("BC2 unavailable: " + bc_error);
      return *bc2;
    case CovFlavor::BC3: return bc3;
  }
  throw NumericalError("unknown covariance flavor");
}

double FitResult::se(CovFlavor flavor) const {
  const auto& c = cov.get(flavor);
  const Eigen::Index last = c.rows() - 1;
  const double var = c(last, last);
  if (!(var > 0.0)) throw NumericalError("nonpositive variance for delta");
  return std::sqrt(var);
}

Eigen::VectorXd update_theta(const TrialDataset& dataset, double alpha0,
                             double alpha1) {
  const Prepared prep = prepare(dataset);
  require_valid({alpha0, alpha1}, prep.max_n);
  return solve_gls(prep, alpha0, alpha1).theta;
}

Stage1Result update_alpha_stage1(const TrialDataset& dataset,
                                 const Eigen::VectorXd& theta, Adjustment adjustment,
                                 double alpha0_init, double alpha1_init) {
  const Prepared prep = prepare(dataset);
  require_valid({alpha0_init, alpha1_init}, prep.max_n);
  const GlsSolve gls = solve_gls(prep, alpha0_init, alpha1_init);
  const auto blocks = build_blocks(prep, theta, alpha0_init, adjustment, gls);
  return detail::solve_stage1(blocks, alpha0_init, alpha1_init);
}

std::pair<double, double> stage2_transform(double alpha0, double alpha1,
                                           const std::vector<int>& cluster_sizes) {
  double num = 0.0, den = 0.0;
  for (int n : cluster_sizes) {
    if (n < 2) continue;  // size-1 clusters carry no within-period information
    const double d = 1.0 + (n - 1) * alpha0;
    num += n * (n - 1) * alpha0 * (2.0 + (n - 2) * alpha0) / (d * d);
    den += n * (n - 1) * (1.0 + (n - 1) * alpha0 * alpha0) / (d * d);
  }
  if (den == 0.0) {
    throw ValidationError("tau is undefined: every cluster has size 1");
  }
  return {num / den, 2.0 * alpha1 / (1.0 + alpha1 * alpha1)};
}

std::vector<Eigen::MatrixXd> cluster_leverage(const TrialDataset& dataset,
                                              double alpha0, double alpha1) {
  const Prepared prep = prepare(dataset);
  require_valid({alpha0, alpha1}, prep.max_n);
  const GlsSolve gls = solve_gls(prep, alpha0, alpha1);
  std::vector<Eigen::MatrixXd> leverages;
  leverages.reserve(prep.work.size());
  for (const auto& w : prep.work) {
    const Eigen::MatrixXd K = w.D * gls.ldlt.solve(w.D.transpose() * gls.Finv);
    const double g = g_weight(alpha0, w.n);
    leverages.push_back(g * kron(Eigen::MatrixXd::Ones(w.n, w.n), K));
  }
  return leverages;
}

double dispersion_update(double phi, double adjusted_trace_sum, long long total_obs,
                         int n_params) {
  if (total_obs <= n_params) {
    throw ValidationError("dispersion requires more observations than parameters");
  }
  const double updated = phi * adjusted_trace_sum / (total_obs - n_params);
  if (!(updated > 0.0) || !std::isfinite(updated)) {
    throw NumericalError("degenerate data: nonpositive dispersion update");
  }
  return updated;
}

CovarianceSet compute_covariances(const TrialDataset& dataset,
                                  const Eigen::VectorXd& theta, double tau,
                                  double rho, double phi, double zeta) {
  const Prepared prep = prepare(dataset);
  require_valid({tau, rho}, prep.max_n);
  if (!(phi > 0.0)) throw ValidationError("dispersion must be positive");
  const GlsSolve gls = solve_gls(prep, tau, rho);
  const int p = prep.T + 1;
  const Eigen::MatrixXd bread = gls.ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  if ((gls.info * bread - Eigen::MatrixXd::Identity(p, p)).norm() > 1e-6) {
    throw NumericalError("working information matrix is numerically singular");
  }

  CovarianceSet out;
  out.model_based = phi * 0.5 * (bread + bread.transpose());

  Eigen::MatrixXd meat0 = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd meat1 = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd meat2 = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd meat3 = Eigen::MatrixXd::Zero(p, p);
  bool bc12_ok = true;

  for (const auto& w : prep.work) {
    const double g = g_weight(tau, w.n);
    const double omega = g * w.n;
    const Eigen::VectorXd rbar =
        residual_matrix(w, theta).rowwise().sum() / w.n;
    const Eigen::MatrixXd base = omega * (w.D.transpose() * gls.Finv);  // p x T
    const Eigen::VectorXd w0 = base * rbar;
    meat0.noalias() += w0 * w0.transpose();

    // Fay-Graubard: scale rows by (1 - min(zeta, leverage_jj))^{-1/2}.
    const Eigen::MatrixXd lev = omega * (w.D.transpose() * gls.Finv * w.D) * bread;
    Eigen::VectorXd scale(p);
    for (int j = 0; j < p; ++j) {
      scale(j) = 1.0 / std::sqrt(1.0 - std::min(zeta, lev(j, j)));
    }
    const Eigen::VectorXd w3 = scale.asDiagonal() * w0;
    meat3.noalias() += w3 * w3.transpose();

    if (!bc12_ok) continue;
    const Eigen::MatrixXd K = w.D * gls.ldlt.solve(w.D.transpose() * gls.Finv);
    const Eigen::MatrixXd W =
        Eigen::MatrixXd::Identity(prep.T, prep.T) - (g * w.n) * K;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(W);
    if (!lu.isInvertible()) {
      bc12_ok = false;
      out.bc_error = "(I - H_i) is singular for some cluster";
      continue;
    }
    const Eigen::VectorXd w2 = base * lu.solve(rbar);
    meat2.noalias() += w2 * w2.transpose();

    // Kauermann-Carroll uses the inverse square root of the symmetrized
    // I - (H_i + H_i')/2.
    const Eigen::MatrixXd Ws = Eigen::MatrixXd::Identity(prep.T, prep.T) -
                               (g * w.n) * 0.5 * (K + K.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ws);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
      bc12_ok = false;
      out.bc_error = "symmetrized (I - H_i) is not positive definite";
      continue;
    }
    const Eigen::VectorXd v1 =
        es.eigenvectors() *
        (es.eigenvalues().array().rsqrt().matrix().asDiagonal() *
         (es.eigenvectors().transpose() * rbar));
    const Eigen::VectorXd w1 = base * v1;
    meat1.noalias() += w1 * w1.transpose();
  }

  auto sandwich = [&](const Eigen::MatrixXd& meat) {
    const Eigen::MatrixXd cov = bread * meat * bread;
    return (0.5 * (cov + cov.transpose())).eval();
  };
  out.bc0 = sandwich(meat0);
  out.bc3 = sandwich(meat3);
  if (bc12_ok) {
    out.bc1 = sandwich(meat1);
    out.bc2 = sandwich(meat2);
  }
  return out;
}

FitResult fit(const TrialDataset& dataset, const FitOptions& options) {
  const Prepared prep = prepare(dataset);
  if (prep.max_n < 2) {
    throw ValidationError("tau is not estimable: every cluster has size 1");
  }
  const int p = prep.T + 1;
  const double lo0 = tau_lower_bound(prep.max_n) + kRegionMargin;
  const double margin = 1.0 - kRegionMargin;

  FitResult result;
  result.adjustment = options.adjustment;
  result.clusters = prep.I;
  result.periods = prep.T;

  // OLS start, dispersion from the residual mean square.
  GlsSolve gls = solve_gls(prep, 0.0, 0.0);
  Eigen::VectorXd theta = gls.theta;
  double rss = 0.0;
  for (const auto& w : prep.work) rss += residual_matrix(w, theta).squaredNorm();
  const double degenerate_floor = 1e-10 * prep.outcome_msq + 1e-300;
  double phi = rss / (prep.total_obs - p);
  if (!(phi > degenerate_floor)) {
    throw NumericalError("degenerate data: residual dispersion is zero");
  }
  double a0 = std::clamp(options.init_alpha0, lo0, margin);
  double a1 = std::clamp(options.init_alpha1, -margin, margin);

  bool converged = false;
  bool last_clamped = false;
  int tol_iteration = options.max_iter;
  int iter = 0;
  while (true) {
    ++iter;
    gls = solve_gls(prep, a0, a1);
    const auto blocks =
        build_blocks(prep, gls.theta, a0, options.adjustment, gls);
    double trace_sum = 0.0;
    for (const auto& b : blocks) trace_sum += b.diag.tr;
    const double phi_new = dispersion_update(phi, trace_sum / phi, prep.total_obs, p);
    if (!(phi_new > degenerate_floor)) {
      throw NumericalError("degenerate data: residual dispersion collapsed");
    }
    const Stage1Result s1 = detail::solve_stage1(blocks, a0, a1);

    const double change =
        std::max({(gls.theta - theta).cwiseAbs().maxCoeff(), std::abs(s1.alpha0 - a0),
                  std::abs(s1.alpha1 - a1), std::abs(phi_new - phi)});
    theta = gls.theta;
    a0 = s1.alpha0;
    a1 = s1.alpha1;
    phi = phi_new;
    last_clamped = s1.clamped;

    if (!converged && change < options.tol) {
      converged = true;
      tol_iteration = iter;
    }
    if (change < 1e-12) break;
    if (!converged && iter >= options.max_iter) break;
    if (converged && iter >= tol_iteration + 30) break;
  }
  // Leave the mean equation exactly solved at the final correlations.
  theta = solve_gls(prep, a0, a1).theta;

  if (last_clamped) converged = false;
  result.converged = converged;
  result.iterations = converged ? tol_iteration : options.max_iter;
  result.alpha0 = a0;
  result.alpha1 = a1;
  result.phi = phi;
  result.theta = theta;

  auto [tau, rho] = stage2_transform(a0, a1, dataset.cluster_sizes());
  result.clamped = last_clamped;
  const double tau_lo = tau_lower_bound(prep.max_n) + kRegionMargin;
  if (tau < tau_lo || tau > margin) {
    tau = std::clamp(tau, tau_lo, margin);
    result.clamped = true;
  }
  if (std::abs(rho) > margin) {
    rho = std::clamp(rho, -margin, margin);
    result.clamped = true;
  }
  result.tau = tau;
  result.rho = rho;
  result.cov = compute_covariances(dataset, theta, tau, rho, phi, options.zeta);
  return result;
}

WaldTest wald_test(const FitResult& fit, CovFlavor flavor, TestKind test,
                   DofRule dof_rule, double alpha, double explicit_dof) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  WaldTest out;
  out.test = test;
  out.flavor = flavor;
  out.statistic = fit.delta() / fit.se(flavor);
  if (test == TestKind::Z) {
    out.dof = 0.0;
    out.p_value = 2.0 * (1.0 - stats::norm_cdf(std::abs(out.statistic)));
  } else {
    PowerQuery query;
    query.dof_rule = dof_rule;
    query.explicit_dof = explicit_dof;
    out.dof = resolve_dof(query, fit.clusters, fit.periods);
    out.p_value = 2.0 * (1.0 - stats::t_cdf(std::abs(out.statistic), out.dof));
  }
  out.reject = out.p_value < alpha;
  return out;
}

}  // namespace swdecay
