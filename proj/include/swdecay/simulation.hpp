#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "swdecay/dataset.hpp"
#include "swdecay/design.hpp"
#include "swdecay/estimation.hpp"

namespace swdecay {

// Monte Carlo scenario: a standard stepped wedge layout with multivariate
// normal outcomes under the proportional decay structure.
struct SimScenario {
  std::string id = "scenario";
  int clusters = 0;
  int periods = 0;
  int cohort_size = 0;
  double tau = 0.0;
  double rho = 0.0;
  double delta = 0.0;
  double phi = 1.0;
  std::vector<double> period_effects;  // empty -> default rule
  int reps = 2000;
  std::uint64_t base_seed = 12345;
};

// beta_1 = 0 and beta_{t+1} - beta_t = 0.1 * 0.5^{t-1}.
std::vector<double> default_period_effects(int periods);

// Cluster outcome vectors drawn as mu + sqrt(phi) (chol G (x) chol F) z.
// Deterministic given (base_seed, id, replicate_index).
TrialDataset generate_dataset(const SimScenario& scenario, int replicate_index);

struct AnalysisOptions {
  FitOptions fit;      // adjustment is ignored; QLS and MAQLS both run
  double alpha = 0.05;
  int threads = 0;     // 0 -> hardware concurrency
};

struct BiasResult {
  double value = 0.0;
  bool absolute_fallback = false;  // truth was zero; value is the absolute bias
};

// 100 (mean(estimates) - truth) / truth.
BiasResult percent_relative_bias(const std::vector<double>& estimates, double truth);

struct RejectionRate {
  int n = 0;
  int rejections = 0;
  double proportion = 0.0;
  double mcse = 0.0;  // sqrt(p(1-p)/n)
};

RejectionRate empirical_rejection_rate(const std::vector<bool>& outcomes);

struct MethodSummary {
  Adjustment method = Adjustment::QLS;
  int converged = 0;
  int failed = 0;  // replicate-level estimation failures
  double convergence_rate = 0.0;
  double tau_mean = 0.0;
  double rho_mean = 0.0;
  BiasResult tau_bias;
  BiasResult rho_bias;
};

struct RejectionCell {
  Adjustment method = Adjustment::QLS;
  TestKind test = TestKind::Z;
  DofRule dof_rule = DofRule::ClustersMinusTwo;
  CovFlavor flavor = CovFlavor::BC0;
  bool defined = false;  // false when the DoF rule is infeasible for this design
  int used = 0;          // converged replicates with this cell computable
  int rejections = 0;
  double rate = 0.0;
  double mcse = 0.0;
  bool mcse_defined = false;  // needs at least two usable replicates
  double predicted = 0.0;     // formula power (or alpha when delta = 0)
};

struct SimSummary {
  SimScenario scenario;
  double true_variance = 0.0;  // closed-form var(delta_hat) at the true correlations
  MethodSummary qls;
  MethodSummary maqls;
  std::vector<RejectionCell> cells;
};

// Fits every replicate with QLS and MAQLS and accumulates correlation bias,
// rejection rates at all test/DoF/flavor combinations, and convergence.
// Replicate failures are tallied, never fatal. Deterministic for a given
// base_seed regardless of thread count.
SimSummary run_scenario(const SimScenario& scenario,
                        const AnalysisOptions& options = {});

// One row per method x test x DoF x flavor combination, stable order.
void write_summary_csv(const SimSummary& summary, std::ostream& os);

}  // namespace swdecay
