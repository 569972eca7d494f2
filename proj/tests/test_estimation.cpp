#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "swdecay/correlation.hpp"
#include "swdecay/errors.hpp"
#include "swdecay/estimation.hpp"
#include "swdecay/simulation.hpp"

using namespace swdecay;

namespace {

SimScenario small_scenario() {
  SimScenario s;
  s.id = "estimation-unit";
  s.clusters = 9;
  s.periods = 4;
  s.cohort_size = 5;
  s.tau = 0.08;
  s.rho = 0.5;
  s.delta = 0.3;
  s.base_seed = 7001;
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("estimation");

TEST_CASE("update_theta") {
  const TrialDataset ds = generate_dataset(small_scenario(), 0);
  SUBCASE("identity working correlation gives ordinary least squares") {
    const Eigen::VectorXd theta = update_theta(ds, 0.0, 0.0);
    const Eigen::VectorXd ols = oracle::dense_gls_theta(ds, 0.0, 0.0);
    CHECK((theta - ols).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("matches the dense weighted-least-squares oracle") {
    const Eigen::VectorXd theta = update_theta(ds, 0.12, 0.45);
    const Eigen::VectorXd dense = oracle::dense_gls_theta(ds, 0.12, 0.45);
    CHECK((theta - dense).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("large-sample consistency") {
    SimScenario big = small_scenario();
    big.clusters = 201;  // divisible by the step count
    big.id = "estimation-bigI";
    const TrialDataset data = generate_dataset(big, 3);
    const Eigen::VectorXd theta = update_theta(data, big.tau, big.rho);
    const auto betas = default_period_effects(big.periods);
    for (int t = 0; t < big.periods; ++t) {
      CHECK(std::abs(theta(t) - betas[t]) < 0.05);
    }
    CHECK(std::abs(theta(big.periods) - big.delta) < 0.05);
  }
}

TEST_CASE("stage-1 correlation updates") {
  const TrialDataset ds = generate_dataset(small_scenario(), 1);
  const Eigen::VectorXd theta = update_theta(ds, 0.01, 0.01);

  SUBCASE("QLS solution minimizes the dense quadratic-form objective") {
    const Stage1Result got =
        update_alpha_stage1(ds, theta, Adjustment::QLS, 0.01, 0.01);
    CHECK_FALSE(got.clamped);
    const auto [a0, a1] = oracle::grid_refine_minimize(
        [&](double x0, double x1) { return oracle::qls_objective(ds, theta, x0, x1); },
        -1.0 / (5 - 1) + 1e-3, 0.97, -0.97, 0.97);
    CHECK(std::abs(got.alpha0 - a0) < 1e-6);
    CHECK(std::abs(got.alpha1 - a1) < 1e-6);
  }
  SUBCASE("MAQLS with zero leverage equals QLS exactly") {
    std::vector<detail::ClusterBlocks> qls_blocks, forced;
    for (const auto& cluster : ds.clusters) {
      Eigen::MatrixXd resid(ds.periods, cluster.size());
      const Eigen::VectorXd fitted =
          oracle::cluster_design(cluster.treatment.cast<double>(), 1) * theta;
      for (int j = 0; j < cluster.size(); ++j) {
        resid.col(j) = cluster.individuals[j].outcomes - fitted;
      }
      qls_blocks.push_back(detail::blocks_from_residuals(resid));
      // Zero leverage: (I - H)^{-1} = I.
      forced.push_back(detail::blocks_adjusted(
          resid, Eigen::MatrixXd::Identity(ds.periods, ds.periods)));
    }
    const auto a = detail::solve_stage1(qls_blocks, 0.01, 0.01);
    const auto b = detail::solve_stage1(forced, 0.01, 0.01);
    CHECK(a.alpha0 == b.alpha0);
    CHECK(a.alpha1 == b.alpha1);
  }
  SUBCASE("independence recovery at large I") {
    SimScenario indep = small_scenario();
    indep.id = "estimation-indep";
    indep.clusters = 150;
    indep.tau = 0.0;
    indep.rho = 0.0;
    indep.delta = 0.0;
    const TrialDataset data = generate_dataset(indep, 0);
    const Eigen::VectorXd th = update_theta(data, 0.01, 0.01);
    const Stage1Result got = update_alpha_stage1(data, th, Adjustment::QLS);
    CHECK(std::abs(got.alpha0) < 0.03);
    CHECK(std::abs(got.alpha1) < 0.03);
  }
}

TEST_CASE("stage-2 transform") {
  SUBCASE("endpoint behavior of the rho map") {
    CHECK(stage2_transform(0.1, 0.0, {4, 4}).second == 0.0);
    CHECK(stage2_transform(0.1, 1.0 - 1e-9, {4, 4}).second ==
          doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("equal cluster sizes of two simplify") {
    const double a0 = 0.37;
    const auto [tau, rho] = stage2_transform(a0, 0.2, {2, 2, 2});
    CHECK(tau == doctest::Approx(2.0 * a0 / (1.0 + a0 * a0)).epsilon(1e-12));
  }
  SUBCASE("size-one clusters contribute nothing") {
    const auto with = stage2_transform(0.2, 0.3, {5, 1, 7, 1});
    const auto without = stage2_transform(0.2, 0.3, {5, 7});
    CHECK(with.first == without.first);
    CHECK_THROWS_AS(stage2_transform(0.2, 0.3, {1, 1, 1}), ValidationError);
  }
  SUBCASE("outputs satisfy the second-stage trace equations") {
    const double a0 = 0.23, a1 = 0.57;
    const std::vector<int> sizes{3, 5, 8, 2};
    const auto [tau, rho] = stage2_transform(a0, a1, sizes);
    // Numeric derivative of the closed-form inverses against the dense
    // correlation blocks.
    const double eps = 1e-6;
    double tau_residual = 0.0;
    for (int n : sizes) {
      const Eigen::MatrixXd dginv =
          (exchangeable_inverse(a0 + eps, n) - exchangeable_inverse(a0 - eps, n)) /
          (2.0 * eps);
      tau_residual += (dginv * oracle::exchangeable(tau, n)).trace();
    }
    CHECK(std::abs(tau_residual) < 1e-4);  // scaled by the numeric differentiation
    const int t = 6;
    const Eigen::MatrixXd dfinv =
        (ar1_inverse(a1 + eps, t) - ar1_inverse(a1 - eps, t)) / (2.0 * eps);
    CHECK(std::abs((dfinv * oracle::ar1(rho, t)).trace()) < 1e-6);
  }
}

TEST_CASE("cluster leverage") {
  const TrialDataset ds = generate_dataset(small_scenario(), 2);
  SUBCASE("matches the dense definition and the trace identity") {
    const auto structured = cluster_leverage(ds, 0.1, 0.4);
    const auto dense = oracle::dense_leverage(ds, 0.1, 0.4);
    REQUIRE(structured.size() == dense.size());
    double trace_sum = 0.0;
    for (std::size_t i = 0; i < dense.size(); ++i) {
      CHECK((structured[i] - dense[i]).cwiseAbs().maxCoeff() < 1e-10);
      trace_sum += structured[i].trace();
    }
    CHECK(trace_sum == doctest::Approx(ds.periods + 1).epsilon(1e-10));
  }
  SUBCASE("identity working correlation reduces to the OLS hat blocks") {
    const auto structured = cluster_leverage(ds, 0.0, 0.0);
    // OLS hat matrix blocks: Z_i (sum Z'Z)^{-1} Z_i'.
    const int p = ds.periods + 1;
    Eigen::MatrixXd ztz = Eigen::MatrixXd::Zero(p, p);
    for (const auto& cluster : ds.clusters) {
      const Eigen::MatrixXd z =
          oracle::cluster_design(cluster.treatment.cast<double>(), cluster.size());
      ztz += z.transpose() * z;
    }
    const Eigen::MatrixXd inv = oracle::dense_inverse(ztz);
    for (std::size_t i = 0; i < structured.size(); ++i) {
      const auto& cluster = ds.clusters[i];
      const Eigen::MatrixXd z =
          oracle::cluster_design(cluster.treatment.cast<double>(), cluster.size());
      CHECK((structured[i] - z * inv * z.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("(I - H_i) is well conditioned on simulation-sized fixtures") {
    for (int k = 0; k < 10; ++k) {
      SimScenario s = small_scenario();
      s.id = "leverage-fixture";
      s.base_seed = 9000 + k;
      const TrialDataset data = generate_dataset(s, 0);
      const auto hs = cluster_leverage(data, 0.05, 0.3);
      for (const auto& h : hs) {
        const Eigen::MatrixXd w =
            Eigen::MatrixXd::Identity(h.rows(), h.cols()) - h;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(w);
        CHECK(lu.isInvertible());
      }
    }
  }
}

TEST_CASE("dispersion update") {
  SUBCASE("scale equivariance") {
    const TrialDataset ds = generate_dataset(small_scenario(), 3);
    TrialDataset scaled = ds;
    for (auto& cluster : scaled.clusters) {
      for (auto& ind : cluster.individuals) ind.outcomes *= 3.0;
    }
    const FitResult a = fit(ds);
    const FitResult b = fit(scaled);
    CHECK(b.phi == doctest::Approx(9.0 * a.phi).epsilon(1e-8));
  }
  SUBCASE("stationarity at convergence") {
    const TrialDataset ds = generate_dataset(small_scenario(), 4);
    for (Adjustment adj : {Adjustment::QLS, Adjustment::MAQLS}) {
      FitOptions options;
      options.adjustment = adj;
      const FitResult res = fit(ds, options);
      REQUIRE(res.converged);
      // Rebuild the adjusted residual trace at the fitted parameters.
      const auto blocks = [&] {
        std::vector<detail::ClusterBlocks> out;
        const auto hs = cluster_leverage(ds, res.alpha0, res.alpha1);
        for (std::size_t i = 0; i < ds.clusters.size(); ++i) {
          const auto& cluster = ds.clusters[i];
          Eigen::MatrixXd resid(ds.periods, cluster.size());
          for (int j = 0; j < cluster.size(); ++j) {
            Eigen::VectorXd mu = res.theta.head(ds.periods);
            mu += res.theta(ds.periods) * cluster.treatment.cast<double>();
            resid.col(j) = cluster.individuals[j].outcomes - mu;
          }
          if (adj == Adjustment::MAQLS) {
            const int dim = ds.periods * cluster.size();
            const Eigen::MatrixXd winv = oracle::dense_inverse(
                Eigen::MatrixXd::Identity(dim, dim) - hs[i]);
            // Collapse the dense (I-H)^{-1} r r' to its diagonal block trace.
            Eigen::VectorXd r(dim);
            for (int j = 0; j < cluster.size(); ++j) {
              r.segment(j * ds.periods, ds.periods) = resid.col(j);
            }
            const Eigen::VectorXd u = winv * r;
            detail::ClusterBlocks b;
            b.diag.tr = u.dot(r);
            out.push_back(b);
          } else {
            out.push_back(detail::blocks_from_residuals(resid));
          }
        }
        return out;
      }();
      double trace_sum = 0.0;
      for (const auto& b : blocks) trace_sum += b.diag.tr;
      const double dof = ds.total_observations() - (ds.periods + 1);
      CHECK(trace_sum / res.phi == doctest::Approx(dof).epsilon(1e-6));
    }
  }
  SUBCASE("degenerate data is rejected") {
    // Outcomes exactly at the fitted mean: zero residual dispersion.
    SimScenario s = small_scenario();
    TrialDataset ds = generate_dataset(s, 5);
    const auto betas = default_period_effects(s.periods);
    for (auto& cluster : ds.clusters) {
      for (auto& ind : cluster.individuals) {
        for (int t = 0; t < s.periods; ++t) {
          ind.outcomes(t) = betas[t] + cluster.treatment(t) * s.delta;
        }
      }
    }
    CHECK_THROWS_AS(fit(ds), NumericalError);
    CHECK_THROWS_AS(dispersion_update(1.0, 0.0, 180, 5), NumericalError);
  }
}

TEST_CASE("covariance flavors match the dense definitions") {
  const TrialDataset ds = generate_dataset(small_scenario(), 6);
  const Eigen::VectorXd theta = update_theta(ds, 0.07, 0.35);
  const CovarianceSet cov = compute_covariances(ds, theta, 0.07, 0.35, 1.3, 0.75);
  const auto dense = oracle::dense_covariances(ds, theta, 0.07, 0.35, 1.3, 0.75);
  CHECK((cov.model_based - dense.mb).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((cov.bc0 - dense.bc0).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(cov.bc1.has_value());
  REQUIRE(cov.bc2.has_value());
  CHECK((*cov.bc1 - dense.bc1).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((*cov.bc2 - dense.bc2).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((cov.bc3 - dense.bc3).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("full fit") {
  const TrialDataset ds = generate_dataset(small_scenario(), 7);
  SUBCASE("estimating-equation residuals vanish at the converged fit") {
    for (Adjustment adj : {Adjustment::QLS, Adjustment::MAQLS}) {
      FitOptions options;
      options.adjustment = adj;
      const FitResult res = fit(ds, options);
      REQUIRE(res.converged);
      // Mean equation at the working correlations.
      const Eigen::VectorXd refit = update_theta(ds, res.alpha0, res.alpha1);
      CHECK((refit - res.theta).cwiseAbs().maxCoeff() < 1e-8);
      // Stage-1 scalar equations at the reported iterate.
      const Stage1Result again =
          update_alpha_stage1(ds, res.theta, adj, res.alpha0, res.alpha1);
      CHECK(std::abs(again.alpha0 - res.alpha0) < 1e-8);
      CHECK(std::abs(again.alpha1 - res.alpha1) < 1e-8);
    }
  }
  SUBCASE("covariances are symmetric with nonnegative spectra") {
    const FitResult res = fit(ds);
    for (CovFlavor flavor : {CovFlavor::ModelBased, CovFlavor::BC0, CovFlavor::BC1,
                             CovFlavor::BC2, CovFlavor::BC3}) {
      const Eigen::MatrixXd& c = res.cov.get(flavor);
      CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
      CHECK(es.eigenvalues().minCoeff() > -1e-10);
    }
  }
  SUBCASE("identical theta maps for QLS and MAQLS at a fixed correlation") {
    FitOptions one_step;
    one_step.max_iter = 1;
    one_step.adjustment = Adjustment::QLS;
    const FitResult a = fit(ds, one_step);
    one_step.adjustment = Adjustment::MAQLS;
    const FitResult b = fit(ds, one_step);
    CHECK((a.theta - b.theta).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("location invariance") {
    const FitResult base = fit(ds);
    TrialDataset shifted = ds;
    for (auto& cluster : shifted.clusters) {
      for (auto& ind : cluster.individuals) ind.outcomes.array() += 5.0;
    }
    const FitResult moved = fit(shifted);
    for (int t = 0; t < ds.periods; ++t) {
      CHECK(moved.theta(t) == doctest::Approx(base.theta(t) + 5.0).epsilon(1e-12));
    }
    CHECK(moved.delta() == doctest::Approx(base.delta()).epsilon(1e-12));
    CHECK(moved.tau == doctest::Approx(base.tau).epsilon(1e-12));
    CHECK(moved.rho == doctest::Approx(base.rho).epsilon(1e-12));
    CHECK(moved.phi == doctest::Approx(base.phi).epsilon(1e-12));
  }
  SUBCASE("desk-scale bias ordering") {
    SimScenario s;
    s.id = "bias-smoke";
    s.clusters = 9;
    s.periods = 4;
    s.cohort_size = 7;
    s.tau = 0.1;
    s.rho = 0.8;
    s.delta = 0.0;
    s.base_seed = 20260810;
    std::vector<double> qls_tau, maqls_tau;
    for (int rep = 0; rep < 300; ++rep) {
      const TrialDataset data = generate_dataset(s, rep);
      FitOptions options;
      options.adjustment = Adjustment::QLS;
      const FitResult q = fit(data, options);
      options.adjustment = Adjustment::MAQLS;
      const FitResult m = fit(data, options);
      if (q.converged) qls_tau.push_back(q.tau);
      if (m.converged) maqls_tau.push_back(m.tau);
    }
    REQUIRE(qls_tau.size() > 250);
    REQUIRE(maqls_tau.size() > 250);
    const double qls_bias = percent_relative_bias(qls_tau, s.tau).value;
    const double maqls_bias = percent_relative_bias(maqls_tau, s.tau).value;
    CHECK(qls_bias < -10.0);
    CHECK(std::abs(maqls_bias) < std::abs(qls_bias));
  }
}

TEST_CASE("robustness to correlation misspecification") {
  // Block-exchangeable truth analyzed with the proportional decay working
  // structure: the intervention-effect estimate stays consistent.
  std::mt19937 rng(321);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int I = 201, T = 4, N = 6;
  const double delta = 0.3;
  const auto layout = standard_layout(I, T);
  const Eigen::MatrixXd be = oracle::block_exchangeable(0.1, 0.05, 0.4, N, T);
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(be).matrixL();
  std::vector<double> deltas;
  for (int rep = 0; rep < 20; ++rep) {
    TrialDataset ds;
    ds.periods = T;
    for (int i = 0; i < I; ++i) {
      ClusterData cluster;
      cluster.id = "c" + std::to_string(i);
      cluster.treatment = layout.X.row(i).transpose();
      Eigen::VectorXd z(N * T);
      for (int k = 0; k < N * T; ++k) z(k) = normal(rng);
      const Eigen::VectorXd y = chol * z;
      for (int j = 0; j < N; ++j) {
        IndividualSeries ind;
        ind.id = "p" + std::to_string(j);
        ind.outcomes = y.segment(j * T, T);
        for (int t = 0; t < T; ++t) {
          ind.outcomes(t) += 0.1 * t + layout.X(i, t) * delta;
        }
        cluster.individuals.push_back(std::move(ind));
      }
      ds.clusters.push_back(std::move(cluster));
    }
    const FitResult res = fit(ds);
    deltas.push_back(res.delta());
  }
  double mean = 0.0;
  for (double d : deltas) mean += d;
  mean /= deltas.size();
  CHECK(std::abs(mean - delta) < 0.02);
}

TEST_CASE("wald tests") {
  SUBCASE("zero effect gives statistic zero and p = 1") {
    const TrialDataset ds = generate_dataset(small_scenario(), 8);
    FitResult res = fit(ds);
    res.theta(ds.periods) = 0.0;  // force a null point estimate
    const WaldTest z = wald_test(res, CovFlavor::BC0, TestKind::Z,
                                 DofRule::ClustersMinusTwo);
    CHECK(z.statistic == 0.0);
    CHECK(z.p_value == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_FALSE(z.reject);
  }
  SUBCASE("insufficient clusters for the I - (T+1) rule") {
    SimScenario s;
    s.id = "tiny";
    s.clusters = 5;
    s.periods = 6;  // I - (T+1) = -2
    s.cohort_size = 4;
    s.tau = 0.05;
    s.rho = 0.3;
    s.base_seed = 11;
    const TrialDataset ds = generate_dataset(s, 0);
    const FitResult res = fit(ds);
    CHECK_THROWS_AS(
        wald_test(res, CovFlavor::BC1, TestKind::T, DofRule::ClustersMinusParams),
        ValidationError);
  }
}

TEST_SUITE_END();
