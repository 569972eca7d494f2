#include "swdecay/simulation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

#include "swdecay/correlation.hpp"
#include "swdecay/errors.hpp"

namespace swdecay {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  a ^= b + 0x9e3779b97f4a7c15ULL + (a << 12) + (a >> 4);
  return a;
}

// Box-Muller on mt19937_64 uniforms; pinned algorithm so datasets are
// reproducible independent of the standard library's normal_distribution.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : eng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = ((eng_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = (eng_() >> 11) * 0x1.0p-53;        // [0, 1)
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

void validate_scenario(const SimScenario& s) {
  if (s.reps < 1) throw ValidationError("scenario requires reps >= 1");
  if (!(s.phi > 0.0)) throw ValidationError("scenario requires phi > 0");
  if (s.cohort_size < 1) throw ValidationError("scenario requires cohort_size >= 1");
  require_valid({s.tau, s.rho}, s.cohort_size);
  if (!s.period_effects.empty() &&
      static_cast<int>(s.period_effects.size()) != s.periods) {
    throw ValidationError("period_effects must have one entry per period");
  }
}

const char* method_name(Adjustment a) {
  return a == Adjustment::QLS ? "qls" : "maqls";
}

const char* test_name(TestKind t) { return t == TestKind::Z ? "z" : "t"; }

const char* dof_name(TestKind t, DofRule r) {
  if (t == TestKind::Z) return "-";
  return r == DofRule::ClustersMinusTwo ? "i-2" : "i-p";
}

}  // namespace

std::vector<double> default_period_effects(int periods) {
  std::vector<double> betas(periods, 0.0);
  for (int t = 1; t < periods; ++t) {
    betas[t] = betas[t - 1] + 0.1 * std::pow(0.5, t - 1);
  }
  return betas;
}

TrialDataset generate_dataset(const SimScenario& scenario, int replicate_index) {
  validate_scenario(scenario);
  if (replicate_index < 0) throw ValidationError("replicate index must be >= 0");
  const DesignLayout layout = standard_layout(scenario.clusters, scenario.periods);
  const int T = scenario.periods;
  const int N = scenario.cohort_size;
  const std::vector<double> betas = scenario.period_effects.empty()
                                        ? default_period_effects(T)
                                        : scenario.period_effects;

  const Eigen::MatrixXd chol_g =
      Eigen::LLT<Eigen::MatrixXd>(exchangeable(scenario.tau, N)).matrixL();
  const Eigen::MatrixXd chol_f =
      Eigen::LLT<Eigen::MatrixXd>(ar1(scenario.rho, T)).matrixL();
  const double sd = std::sqrt(scenario.phi);

  NormalSampler normals(mix(mix(scenario.base_seed, fnv1a(scenario.id)),
                            static_cast<std::uint64_t>(replicate_index)));

  TrialDataset ds;
  ds.periods = T;
  ds.clusters.reserve(scenario.clusters);
  char name[32];
  for (int i = 0; i < scenario.clusters; ++i) {
    ClusterData cluster;
    std::snprintf(name, sizeof(name), "c%03d", i + 1);
    cluster.id = name;
    cluster.treatment = layout.X.row(i).transpose();

    Eigen::MatrixXd z(T, N);
    for (int j = 0; j < N; ++j) {
      for (int t = 0; t < T; ++t) z(t, j) = normals.next();
    }
    // chol(G (x) F) = chol(G) (x) chol(F) applied to vec-ordered noise.
    Eigen::MatrixXd y = sd * (chol_f * z * chol_g.transpose());
    for (int t = 0; t < T; ++t) {
      y.row(t).array() += betas[t] + layout.X(i, t) * scenario.delta;
    }
    cluster.individuals.reserve(N);
    for (int j = 0; j < N; ++j) {
      std::snprintf(name, sizeof(name), "c%03d-p%03d", i + 1, j + 1);
      cluster.individuals.push_back(IndividualSeries{name, y.col(j)});
    }
    ds.clusters.push_back(std::move(cluster));
  }
  return ds;
}

BiasResult percent_relative_bias(const std::vector<double>& estimates, double truth) {
  if (estimates.empty()) {
    throw ValidationError("percent_relative_bias requires at least one estimate");
  }
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= estimates.size();
  if (truth == 0.0) return {mean, true};
  return {100.0 * (mean - truth) / truth, false};
}

RejectionRate empirical_rejection_rate(const std::vector<bool>& outcomes) {
  if (outcomes.empty()) {
    throw ValidationError("rejection rate requires at least one converged replicate");
  }
  RejectionRate r;
  r.n = static_cast<int>(outcomes.size());
  for (bool b : outcomes) r.rejections += b ? 1 : 0;
  r.proportion = static_cast<double>(r.rejections) / r.n;
  r.mcse = std::sqrt(r.proportion * (1.0 - r.proportion) / r.n);
  return r;
}

namespace {

struct CellSpec {
  TestKind test;
  DofRule dof_rule;
  CovFlavor flavor;
  bool defined;
};

std::vector<CellSpec> enumerate_cells(int clusters, int periods) {
  const bool has_ip = clusters - (periods + 1) >= 1;
  const bool has_i2 = clusters - 2 >= 1;
  std::vector<CellSpec> cells;
  const CovFlavor flavors[] = {CovFlavor::ModelBased, CovFlavor::BC0, CovFlavor::BC1,
                               CovFlavor::BC2, CovFlavor::BC3};
  for (CovFlavor f : flavors) {
    cells.push_back({TestKind::Z, DofRule::ClustersMinusTwo, f, true});
  }
  for (CovFlavor f : flavors) {
    cells.push_back({TestKind::T, DofRule::ClustersMinusTwo, f, has_i2});
  }
  for (CovFlavor f : flavors) {
    cells.push_back({TestKind::T, DofRule::ClustersMinusParams, f, has_ip});
  }
  return cells;
}

struct RepOutcome {
  bool attempted = false;
  bool converged = false;
  double tau_hat = 0.0;
  double rho_hat = 0.0;
  std::vector<signed char> reject;  // -1 unavailable, 0/1 otherwise
};

}  // namespace

SimSummary run_scenario(const SimScenario& scenario, const AnalysisOptions& options) {
  validate_scenario(scenario);
  const DesignLayout layout = standard_layout(scenario.clusters, scenario.periods);
  const CorrelationParams truth{scenario.tau, scenario.rho};

  SimSummary summary;
  summary.scenario = scenario;
  summary.true_variance =
      variance_delta(layout, scenario.cohort_size, truth, scenario.phi);

  const auto cell_specs = enumerate_cells(scenario.clusters, scenario.periods);
  const int n_cells = static_cast<int>(cell_specs.size());
  const Adjustment methods[] = {Adjustment::QLS, Adjustment::MAQLS};

  std::vector<std::array<RepOutcome, 2>> outcomes(scenario.reps);

  auto run_replicate = [&](int rep) {
    TrialDataset ds;
    try {
      ds = generate_dataset(scenario, rep);
    } catch (const std::exception&) {
      return;  // recorded as failure for both methods
    }
    for (int m = 0; m < 2; ++m) {
      RepOutcome& out = outcomes[rep][m];
      FitOptions fit_options = options.fit;
      fit_options.adjustment = methods[m];
      try {
        const FitResult fit_result = fit(ds, fit_options);
        out.attempted = true;
        out.converged = fit_result.converged;
        out.tau_hat = fit_result.tau;
        out.rho_hat = fit_result.rho;
        out.reject.assign(n_cells, -1);
        for (int c = 0; c < n_cells; ++c) {
          if (!cell_specs[c].defined) continue;
          try {
            const WaldTest test =
                wald_test(fit_result, cell_specs[c].flavor, cell_specs[c].test,
                          cell_specs[c].dof_rule, options.alpha);
            out.reject[c] = test.reject ? 1 : 0;
          } catch (const std::exception&) {
            // flavor unavailable for this replicate
          }
        }
      } catch (const std::exception&) {
        out.attempted = false;
      }
    }
  };

  int threads = options.threads > 0
                    ? options.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, scenario.reps));
  if (threads == 1) {
    for (int rep = 0; rep < scenario.reps; ++rep) run_replicate(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int rep = next.fetch_add(1); rep < scenario.reps;
             rep = next.fetch_add(1)) {
          run_replicate(rep);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  // Sequential aggregation in replicate order keeps the summary independent
  // of the thread schedule.
  for (int m = 0; m < 2; ++m) {
    MethodSummary& ms = (m == 0) ? summary.qls : summary.maqls;
    ms.method = methods[m];
    std::vector<double> taus, rhos;
    for (int rep = 0; rep < scenario.reps; ++rep) {
      const RepOutcome& out = outcomes[rep][m];
      if (!out.attempted) {
        ++ms.failed;
        continue;
      }
      if (!out.converged) continue;
      ++ms.converged;
      taus.push_back(out.tau_hat);
      rhos.push_back(out.rho_hat);
    }
    ms.convergence_rate = static_cast<double>(ms.converged) / scenario.reps;
    if (!taus.empty()) {
      double tsum = 0.0, rsum = 0.0;
      for (double v : taus) tsum += v;
      for (double v : rhos) rsum += v;
      ms.tau_mean = tsum / taus.size();
      ms.rho_mean = rsum / rhos.size();
      ms.tau_bias = percent_relative_bias(taus, scenario.tau);
      ms.rho_bias = percent_relative_bias(rhos, scenario.rho);
    }
  }

  for (int m = 0; m < 2; ++m) {
    for (int c = 0; c < n_cells; ++c) {
      RejectionCell cell;
      cell.method = methods[m];
      cell.test = cell_specs[c].test;
      cell.dof_rule = cell_specs[c].dof_rule;
      cell.flavor = cell_specs[c].flavor;
      cell.defined = cell_specs[c].defined;
      if (cell.defined) {
        for (int rep = 0; rep < scenario.reps; ++rep) {
          const RepOutcome& out = outcomes[rep][m];
          if (!out.attempted || !out.converged || out.reject[c] < 0) continue;
          ++cell.used;
          cell.rejections += out.reject[c];
        }
        if (cell.used > 0) {
          cell.rate = static_cast<double>(cell.rejections) / cell.used;
          cell.mcse = std::sqrt(cell.rate * (1.0 - cell.rate) / cell.used);
          cell.mcse_defined = cell.used >= 2;
        }
        PowerQuery query;
        query.delta = scenario.delta;
        query.phi = scenario.phi;
        query.alpha = options.alpha;
        query.test = cell.test;
        query.dof_rule = cell.dof_rule;
        cell.predicted = power_from_variance(summary.true_variance, query,
                                             scenario.clusters, scenario.periods);
      }
      summary.cells.push_back(cell);
    }
  }
  return summary;
}

void write_summary_csv(const SimSummary& summary, std::ostream& os) {
  os << "method,test,dof,flavor,defined,used,rejections,rate,mcse,predicted\n";
  char buf[128];
  for (const auto& cell : summary.cells) {
    if (cell.defined) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.6g,%.6g,%.6g", cell.used,
                    cell.rejections, cell.rate, cell.mcse, cell.predicted);
    } else {
      std::snprintf(buf, sizeof(buf), "0,0,,,");
    }
    os << method_name(cell.method) << ',' << test_name(cell.test) << ','
       << dof_name(cell.test, cell.dof_rule) << ',' << cov_flavor_name(cell.flavor)
       << ',' << (cell.defined ? 1 : 0) << ',' << buf << '\n';
  }
}

}  // namespace swdecay
