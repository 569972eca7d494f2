// Command-line front end: design-stage calculations, sensitivity grids,
// Monte Carlo scenario runs, and dataset analysis.
//
// Exit codes: 0 success, 2 validation error, 3 numerical/convergence error.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "swdecay/correlation.hpp"
#include "swdecay/dataset.hpp"
#include "swdecay/design.hpp"
#include "swdecay/errors.hpp"
#include "swdecay/estimation.hpp"
#include "swdecay/report.hpp"
#include "swdecay/simulation.hpp"

namespace {

using swdecay::Json;

struct DesignFlags {
  int clusters = 0;
  int periods = 0;
  int cohort = 0;
  double tau = 0.0;
  double rho = 0.0;
  double phi = 1.0;
  double delta = 0.0;
  double alpha = 0.05;
  std::string test = "t";
  std::string dof = "i-2";
  std::vector<int> steps_clusters;   // general layout: clusters per step
  std::vector<int> steps_measures;   // general layout: measurements per step
  int baseline = 1;
  std::string variance_formula = "auto";  // auto | exact | standard
};

swdecay::PowerQuery make_query(const DesignFlags& f) {
  swdecay::PowerQuery q;
  q.delta = f.delta;
  q.phi = f.phi;
  q.alpha = f.alpha;
  if (f.test == "t") {
    q.test = swdecay::TestKind::T;
  } else if (f.test == "z") {
    q.test = swdecay::TestKind::Z;
  } else {
    throw swdecay::ValidationError("--test must be `t` or `z`");
  }
  if (f.dof == "i-2") {
    q.dof_rule = swdecay::DofRule::ClustersMinusTwo;
  } else if (f.dof == "i-p") {
    q.dof_rule = swdecay::DofRule::ClustersMinusParams;
  } else {
    q.dof_rule = swdecay::DofRule::Explicit;
    try {
      q.explicit_dof = std::stod(f.dof);
    } catch (const std::exception&) {
      throw swdecay::ValidationError("--dof must be `i-2`, `i-p` or a number");
    }
  }
  return q;
}

bool has_general_layout(const DesignFlags& f) { return !f.steps_clusters.empty(); }

swdecay::DesignLayout build_layout(const DesignFlags& f) {
  if (has_general_layout(f)) {
    std::vector<int> measures = f.steps_measures;
    if (measures.empty()) measures.assign(f.steps_clusters.size(), 1);
    return swdecay::general_layout(f.steps_clusters, f.baseline, measures);
  }
  return swdecay::standard_layout(f.clusters, f.periods);
}

// The exact layout is preferred; `standard` uses the simplified closed-form
// variance, which also covers cluster counts not divisible by the step count.
bool use_standard_formula(const DesignFlags& f) {
  if (f.variance_formula == "standard") return true;
  if (f.variance_formula == "exact") return false;
  if (f.variance_formula != "auto") {
    throw swdecay::ValidationError(
        "--variance-formula must be `auto`, `exact` or `standard`");
  }
  if (has_general_layout(f)) return false;
  return f.periods >= 3 && f.clusters % (f.periods - 1) != 0;
}

void add_design_flags(CLI::App* cmd, DesignFlags& f, bool need_delta) {
  cmd->add_option("--clusters,-I", f.clusters, "number of clusters I");
  cmd->add_option("--periods,-T", f.periods, "number of periods T");
  cmd->add_option("--cohort,-N", f.cohort, "cohort size per cluster N");
  cmd->add_option("--tau", f.tau, "within-period correlation")->required();
  cmd->add_option("--rho", f.rho, "autoregressive correlation (d = 1 - rho)")
      ->required();
  cmd->add_option("--phi", f.phi, "marginal variance (default 1)");
  auto* delta = cmd->add_option("--delta", f.delta, "effect size, outcome units");
  if (need_delta) delta->required();
  cmd->add_option("--alpha", f.alpha, "two-sided type I error rate (default 0.05)");
  cmd->add_option("--test", f.test, "reference distribution: t or z (default t)");
  cmd->add_option("--dof", f.dof, "t DoF rule: i-2, i-p, or a number (default i-2)");
  cmd->add_option("--steps-clusters", f.steps_clusters,
                  "general layout: clusters crossing at each step, e.g. 4,4,3")
      ->delimiter(',');
  cmd->add_option("--steps-measures", f.steps_measures,
                  "general layout: measurement periods after each step (default 1s)")
      ->delimiter(',');
  cmd->add_option("--baseline", f.baseline, "baseline periods (default 1)");
  cmd->add_option("--variance-formula", f.variance_formula,
                  "variance route: auto, exact, standard (default auto)");
}

void finalize_design_flags(DesignFlags& f) {
  if (has_general_layout(f)) {
    const swdecay::DesignLayout layout = build_layout(f);
    f.clusters = layout.clusters();
    f.periods = layout.periods();
  } else if (f.clusters < 1 || f.periods < 1) {
    throw swdecay::ValidationError(
        "either --clusters/--periods or --steps-clusters must be given");
  }
}

void emit(const Json& report, const std::string& out_path) {
  const std::string text = report.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path);
    if (!out) throw swdecay::ValidationError("cannot write " + out_path);
    out << text;
    std::cout << "wrote " << out_path << "\n";
  }
}

Json echo_inputs(const DesignFlags& f) {
  Json j;
  j["clusters"] = f.clusters;
  j["periods"] = f.periods;
  if (f.cohort > 0) j["cohort_size"] = f.cohort;
  j["tau"] = swdecay::round_sig10(f.tau);
  j["rho"] = swdecay::round_sig10(f.rho);
  j["phi"] = swdecay::round_sig10(f.phi);
  j["delta"] = swdecay::round_sig10(f.delta);
  j["alpha"] = swdecay::round_sig10(f.alpha);
  j["test"] = f.test;
  j["dof"] = f.dof;
  if (has_general_layout(f)) {
    j["steps_clusters"] = f.steps_clusters;
    j["baseline"] = f.baseline;
  }
  return j;
}

int cmd_design_power(const DesignFlags& flags_in, const std::string& out_path) {
  DesignFlags f = flags_in;
  finalize_design_flags(f);
  if (f.cohort < 1) throw swdecay::ValidationError("--cohort is required");
  const swdecay::PowerQuery query = make_query(f);
  const swdecay::CorrelationParams params{f.tau, f.rho};

  double variance = 0.0;
  Json report;
  report["command"] = "design power";
  report["inputs"] = echo_inputs(f);
  if (use_standard_formula(f)) {
    variance =
        swdecay::variance_delta_standard(f.clusters, f.periods, f.cohort, params, f.phi);
    report["variance_formula"] = "standard";
  } else {
    const swdecay::DesignLayout layout = build_layout(f);
    variance = swdecay::variance_delta(layout, f.cohort, params, f.phi);
    const auto dc = swdecay::design_constants(layout);
    report["design_constants"] = {{"U", dc.U}, {"W", dc.W}, {"V", dc.V}, {"Q", dc.Q}};
    report["variance_formula"] = "exact";
  }
  report["variance"] = swdecay::round_sig10(variance);
  report["power"] = swdecay::round_sig10(
      swdecay::power_from_variance(variance, query, f.clusters, f.periods));
  if (query.test == swdecay::TestKind::T) {
    report["dof_value"] = swdecay::resolve_dof(query, f.clusters, f.periods);
  }
  emit(report, out_path);
  return 0;
}

int cmd_design_samplesize(const DesignFlags& flags_in, double target, double gamma,
                          const std::string& solve, const std::string& out_path) {
  DesignFlags f = flags_in;
  finalize_design_flags(f);
  swdecay::PowerQuery query = make_query(f);
  query.target_power = target;
  const swdecay::CorrelationParams params{f.tau, f.rho};

  Json report;
  report["command"] = "design samplesize";
  report["inputs"] = echo_inputs(f);
  report["target_power"] = swdecay::round_sig10(target);

  if (solve == "clusters") {
    if (f.cohort < 1) {
      throw swdecay::ValidationError("--solve clusters requires --cohort");
    }
    const auto res =
        swdecay::required_clusters(f.cohort, f.periods, query, params);
    report["clusters"] = res.clusters;
    report["power"] = swdecay::round_sig10(res.power);
    const long long total = static_cast<long long>(res.clusters) * f.cohort;
    report["total"] = total;
    if (gamma > 0.0) {
      report["gamma"] = swdecay::round_sig10(gamma);
      report["total_with_attrition"] = swdecay::attrition_inflate(total, gamma);
    }
  } else if (solve == "cohort") {
    swdecay::CohortSizeResult res;
    if (use_standard_formula(f)) {
      res = swdecay::required_cohort_size_standard(f.clusters, f.periods, query,
                                                   params);
      report["variance_formula"] = "standard";
    } else {
      res = swdecay::required_cohort_size(build_layout(f), query, params);
      report["variance_formula"] = "exact";
    }
    report["attainable"] = res.attainable;
    report["limit_power"] = swdecay::round_sig10(res.limit_power);
    if (res.attainable) {
      report["cohort_size"] = res.cohort_size;
      report["power"] = swdecay::round_sig10(res.power);
      const long long total =
          static_cast<long long>(res.cohort_size) * f.clusters;
      report["total"] = total;
      if (gamma > 0.0) {
        report["gamma"] = swdecay::round_sig10(gamma);
        report["total_with_attrition"] = swdecay::attrition_inflate(total, gamma);
      }
    }
  } else {
    throw swdecay::ValidationError("--solve must be `cohort` or `clusters`");
  }
  emit(report, out_path);
  return 0;
}

int cmd_design_de(int steps, int measures, int cohort, double tau, double rho,
                  long long baseline_n, double gamma, const std::string& out_path) {
  const swdecay::CorrelationParams params{tau, rho};
  Json report;
  report["command"] = "design de";
  report["inputs"] = {{"steps", steps},
                      {"measures_per_step", measures},
                      {"cohort_size", cohort},
                      {"tau", swdecay::round_sig10(tau)},
                      {"rho", swdecay::round_sig10(rho)}};
  report["de"] =
      swdecay::round_sig10(swdecay::design_effect(steps, measures, cohort, params));
  report["de_maximizing_rho"] =
      swdecay::round_sig10(swdecay::de_maximizer(steps, measures));
  if (baseline_n > 0) {
    const auto route =
        swdecay::design_effect_route(baseline_n, steps, measures, cohort, params);
    report["individual_rct_n"] = baseline_n;
    report["required_total"] = route.required_total;
    report["implied_clusters"] = swdecay::round_sig10(route.implied_clusters);
    if (gamma > 0.0) {
      report["gamma"] = swdecay::round_sig10(gamma);
      report["total_with_attrition"] =
          swdecay::attrition_inflate(route.required_total, gamma);
    }
  }
  emit(report, out_path);
  return 0;
}

int cmd_design_sensitivity(const DesignFlags& flags_in, double tau_lo, double tau_hi,
                           int tau_steps, double d_lo, double d_hi, int d_steps,
                           const std::string& out_csv) {
  DesignFlags f = flags_in;
  finalize_design_flags(f);
  if (f.cohort < 1) throw swdecay::ValidationError("--cohort is required");
  const swdecay::PowerQuery query = make_query(f);
  const swdecay::DesignLayout layout = build_layout(f);
  const auto grid = swdecay::sensitivity_grid(layout, f.cohort, query, tau_lo,
                                              tau_hi, tau_steps, d_lo, d_hi, d_steps);
  std::ofstream out(out_csv);
  if (!out) throw swdecay::ValidationError("cannot write " + out_csv);
  swdecay::write_sensitivity_csv(grid, out);

  Json report;
  report["command"] = "design sensitivity";
  report["inputs"] = echo_inputs(f);
  report["grid"] = {{"tau", {tau_lo, tau_hi, tau_steps}},
                    {"d", {d_lo, d_hi, d_steps}},
                    {"path", out_csv}};
  report["min_power"] = swdecay::round_sig10(grid.power.minCoeff());
  report["max_power"] = swdecay::round_sig10(grid.power.maxCoeff());
  emit(report, "");
  return 0;
}

int cmd_design_compare(const DesignFlags& flags_in, double a1_lo, double a1_hi,
                       int a1_steps, double a2_lo, double a2_hi, int a2_steps,
                       const std::string& grid_csv, const std::string& out_path) {
  DesignFlags f = flags_in;
  finalize_design_flags(f);
  if (f.cohort < 1) throw swdecay::ValidationError("--cohort is required");
  const swdecay::CorrelationParams params{f.tau, f.rho};

  Json report;
  report["command"] = "design compare";
  report["inputs"] = echo_inputs(f);

  const double var_pd = swdecay::variance_delta_standard(f.clusters, f.periods,
                                                         f.cohort, params, f.phi);
  report["variance_pd"] = swdecay::round_sig10(var_pd);

  const swdecay::DesignLayout layout = build_layout(f);
  const double var_ed =
      swdecay::variance_exponential_decay(layout, f.cohort, params, f.phi);
  report["variance_exponential_decay"] = swdecay::round_sig10(var_ed);
  report["ratio_pd_over_ed"] = swdecay::round_sig10(var_pd / var_ed);

  const auto roots =
      swdecay::equal_variance_line(f.periods, f.cohort, f.tau, f.rho);
  Json line;
  line["exists"] = !roots.empty();
  Json values = Json::array();
  for (double h : roots) values.push_back(swdecay::round_sig10(h));
  line["h_values"] = std::move(values);
  report["equal_variance_line"] = std::move(line);

  if (!grid_csv.empty()) {
    const auto grid = swdecay::relative_variance_grid(
        f.periods, f.cohort, params, a1_lo, a1_hi, a1_steps, a2_lo, a2_hi, a2_steps);
    std::ofstream out(grid_csv);
    if (!out) throw swdecay::ValidationError("cannot write " + grid_csv);
    swdecay::write_compare_csv(grid, out);
    report["grid"] = {{"alpha1_be", {a1_lo, a1_hi, a1_steps}},
                      {"alpha2_be", {a2_lo, a2_hi, a2_steps}},
                      {"path", grid_csv}};
  }
  emit(report, out_path);
  return 0;
}

swdecay::SimScenario parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw swdecay::ValidationError("cannot open scenario file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw swdecay::ValidationError("malformed scenario JSON in " + path + ": " +
                                   e.what());
  }
  swdecay::SimScenario s;
  try {
    s.clusters = j.at("clusters").get<int>();
    s.periods = j.at("periods").get<int>();
    s.cohort_size = j.at("cohort_size").get<int>();
    s.tau = j.at("tau").get<double>();
    s.rho = j.at("rho").get<double>();
    s.delta = j.value("delta", 0.0);
    s.phi = j.value("phi", 1.0);
    s.reps = j.value("reps", 2000);
    s.base_seed = j.value("base_seed", static_cast<std::uint64_t>(12345));
    s.id = j.value("id", std::string("scenario"));
    if (j.contains("period_effects") && j["period_effects"].is_array()) {
      s.period_effects = j["period_effects"].get<std::vector<double>>();
    }
  } catch (const swdecay::ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw swdecay::ValidationError("bad scenario field in " + path + ": " + e.what());
  }
  return s;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_prefix,
                 int threads, double alpha) {
  const swdecay::SimScenario scenario = parse_scenario_file(scenario_path);
  swdecay::AnalysisOptions options;
  options.threads = threads;
  options.alpha = alpha;
  const swdecay::SimSummary summary = swdecay::run_scenario(scenario, options);

  const std::string csv_path = out_prefix + ".csv";
  const std::string json_path = out_prefix + ".json";
  std::ofstream csv(csv_path);
  if (!csv) throw swdecay::ValidationError("cannot write " + csv_path);
  swdecay::write_summary_csv(summary, csv);
  std::ofstream js(json_path);
  if (!js) throw swdecay::ValidationError("cannot write " + json_path);
  js << swdecay::summary_to_json(summary).dump(2) << "\n";

  std::cout << "scenario " << scenario.id << ": " << scenario.reps
            << " replicates\n"
            << "  qls   converged " << summary.qls.converged << ", tau bias "
            << summary.qls.tau_bias.value << "%\n"
            << "  maqls converged " << summary.maqls.converged << ", tau bias "
            << summary.maqls.tau_bias.value << "%\n"
            << "wrote " << csv_path << " and " << json_path << "\n";
  return 0;
}

int cmd_analyze(const std::string& data_path, const std::string& adjustment,
                double alpha, double zeta, const std::string& dof,
                const std::string& out_path) {
  const swdecay::TrialDataset dataset = swdecay::parse_dataset_csv(data_path);

  swdecay::DofRule requested;
  if (dof == "i-2") {
    requested = swdecay::DofRule::ClustersMinusTwo;
  } else if (dof == "i-p") {
    requested = swdecay::DofRule::ClustersMinusParams;
  } else {
    throw swdecay::ValidationError("--dof must be `i-2` or `i-p`");
  }
  {
    // The requested rule must be feasible for this dataset.
    swdecay::PowerQuery probe;
    probe.dof_rule = requested;
    swdecay::resolve_dof(probe, dataset.n_clusters(), dataset.periods);
  }

  std::vector<swdecay::Adjustment> methods;
  if (adjustment == "qls") {
    methods = {swdecay::Adjustment::QLS};
  } else if (adjustment == "maqls") {
    methods = {swdecay::Adjustment::MAQLS};
  } else if (adjustment == "both") {
    methods = {swdecay::Adjustment::QLS, swdecay::Adjustment::MAQLS};
  } else {
    throw swdecay::ValidationError("--adjustment must be `qls`, `maqls` or `both`");
  }

  Json report;
  report["command"] = "analyze";
  report["dataset"] = {{"path", data_path},
                       {"clusters", dataset.n_clusters()},
                       {"periods", dataset.periods},
                       {"cluster_sizes", dataset.cluster_sizes()}};
  report["alpha"] = swdecay::round_sig10(alpha);
  report["requested_dof"] = dof;

  const swdecay::CovFlavor flavors[] = {
      swdecay::CovFlavor::ModelBased, swdecay::CovFlavor::BC0,
      swdecay::CovFlavor::BC1, swdecay::CovFlavor::BC2, swdecay::CovFlavor::BC3};

  for (swdecay::Adjustment method : methods) {
    swdecay::FitOptions options;
    options.adjustment = method;
    options.zeta = zeta;
    const swdecay::FitResult result = swdecay::fit(dataset, options);
    Json block = swdecay::fit_result_to_json(result);

    Json tests = Json::array();
    for (swdecay::CovFlavor flavor : flavors) {
      double se = 0.0;
      try {
        se = result.se(flavor);
      } catch (const std::exception& e) {
        Json t;
        t["flavor"] = swdecay::cov_flavor_name(flavor);
        t["error"] = e.what();
        tests.push_back(std::move(t));
        continue;
      }
      for (swdecay::TestKind kind : {swdecay::TestKind::Z, swdecay::TestKind::T}) {
        const std::vector<swdecay::DofRule> rules =
            kind == swdecay::TestKind::Z
                ? std::vector<swdecay::DofRule>{swdecay::DofRule::ClustersMinusTwo}
                : std::vector<swdecay::DofRule>{
                      swdecay::DofRule::ClustersMinusTwo,
                      swdecay::DofRule::ClustersMinusParams};
        for (swdecay::DofRule rule : rules) {
          if (kind == swdecay::TestKind::T) {
            swdecay::PowerQuery probe;
            probe.dof_rule = rule;
            try {
              swdecay::resolve_dof(probe, dataset.n_clusters(), dataset.periods);
            } catch (const swdecay::ValidationError&) {
              continue;  // infeasible non-requested rule: omitted
            }
          }
          const swdecay::WaldTest wt =
              swdecay::wald_test(result, flavor, kind, rule, alpha);
          Json t;
          t["flavor"] = swdecay::cov_flavor_name(flavor);
          t["test"] = kind == swdecay::TestKind::Z ? "z" : "t";
          if (kind == swdecay::TestKind::T) {
            t["dof_rule"] =
                rule == swdecay::DofRule::ClustersMinusTwo ? "i-2" : "i-p";
            t["dof"] = wt.dof;
          }
          t["se"] = swdecay::round_sig10(se);
          t["statistic"] = swdecay::round_sig10(wt.statistic);
          t["p_value"] = swdecay::round_sig10(wt.p_value);
          t["reject"] = wt.reject;
          tests.push_back(std::move(t));
        }
      }
    }
    block["tests"] = std::move(tests);
    report[method == swdecay::Adjustment::QLS ? "qls" : "maqls"] = std::move(block);
  }

  if (report.contains("qls") && report.contains("maqls")) {
    report["correlation_comparison"] = {
        {"qls", {{"tau", report["qls"]["tau"]}, {"rho", report["qls"]["rho"]}}},
        {"maqls",
         {{"tau", report["maqls"]["tau"]}, {"rho", report["maqls"]["rho"]}}}};
  }
  emit(report, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stepped wedge design and analysis under decaying correlations"};
  app.require_subcommand(1);

  // design
  auto* design = app.add_subcommand("design", "design-stage calculations");
  design->require_subcommand(1);

  DesignFlags pf;
  std::string power_out;
  auto* power_cmd = design->add_subcommand("power", "power at a given cohort size");
  add_design_flags(power_cmd, pf, /*need_delta=*/true);
  power_cmd->add_option("--out", power_out, "write the JSON report here");

  DesignFlags sf;
  double target = 0.8, ss_gamma = 0.0;
  std::string solve = "cohort", ss_out;
  auto* ss_cmd =
      design->add_subcommand("samplesize", "smallest cohort size or cluster count");
  add_design_flags(ss_cmd, sf, /*need_delta=*/true);
  ss_cmd->add_option("--target", target, "target power (default 0.8)");
  ss_cmd->add_option("--gamma", ss_gamma, "attrition rate for total inflation");
  ss_cmd->add_option("--solve", solve, "solve for `cohort` (default) or `clusters`");
  ss_cmd->add_option("--out", ss_out, "write the JSON report here");

  int de_steps = 0, de_measures = 1, de_cohort = 0;
  double de_tau = 0.0, de_rho = 0.0, de_gamma = 0.0;
  long long de_baseline_n = 0;
  std::string de_out;
  auto* de_cmd = design->add_subcommand("de", "design effect and DE-route sizing");
  de_cmd->add_option("--steps,-S", de_steps, "number of steps")->required();
  de_cmd->add_option("--measures,-c", de_measures, "measurements between steps");
  de_cmd->add_option("--cohort,-N", de_cohort, "cohort size")->required();
  de_cmd->add_option("--tau", de_tau, "within-period correlation")->required();
  de_cmd->add_option("--rho", de_rho, "autoregressive correlation")->required();
  de_cmd->add_option("--baseline-n", de_baseline_n,
                     "individual-RCT sample size for the DE route");
  de_cmd->add_option("--gamma", de_gamma, "attrition rate for total inflation");
  de_cmd->add_option("--out", de_out, "write the JSON report here");

  DesignFlags gf;
  double tau_lo = 0.0, tau_hi = 0.0, d_lo = 0.0, d_hi = 0.0;
  int tau_steps = 13, d_steps = 21;
  std::string grid_out;
  auto* grid_cmd =
      design->add_subcommand("sensitivity", "power grid over (tau, d = 1 - rho)");
  add_design_flags(grid_cmd, gf, /*need_delta=*/true);
  grid_cmd->add_option("--tau-min", tau_lo)->required();
  grid_cmd->add_option("--tau-max", tau_hi)->required();
  grid_cmd->add_option("--tau-steps", tau_steps, "grid points (default 13)");
  grid_cmd->add_option("--d-min", d_lo)->required();
  grid_cmd->add_option("--d-max", d_hi)->required();
  grid_cmd->add_option("--d-steps", d_steps, "grid points (default 21)");
  grid_cmd->add_option("--out", grid_out, "CSV output path")->required();

  DesignFlags cf;
  double a1_lo = 0.0, a1_hi = 0.05, a2_lo = 0.0, a2_hi = 0.9;
  int a1_steps = 11, a2_steps = 11;
  std::string cmp_grid_out, cmp_out;
  auto* cmp_cmd = design->add_subcommand(
      "compare", "variance vs block-exchangeable and exponential decay");
  add_design_flags(cmp_cmd, cf, /*need_delta=*/false);
  cmp_cmd->add_option("--a1-min", a1_lo, "between-period correlation grid start");
  cmp_cmd->add_option("--a1-max", a1_hi, "between-period correlation grid end");
  cmp_cmd->add_option("--a1-steps", a1_steps);
  cmp_cmd->add_option("--a2-min", a2_lo, "within-individual correlation grid start");
  cmp_cmd->add_option("--a2-max", a2_hi, "within-individual correlation grid end");
  cmp_cmd->add_option("--a2-steps", a2_steps);
  cmp_cmd->add_option("--grid-out", cmp_grid_out, "relative-variance grid CSV path");
  cmp_cmd->add_option("--out", cmp_out, "write the JSON report here");

  // simulate
  std::string scenario_path, sim_out = "summary";
  int sim_threads = 0;
  double sim_alpha = 0.05;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo scenario run");
  sim_cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  sim_cmd->add_option("--out", sim_out, "output prefix (default `summary`)");
  sim_cmd->add_option("--threads", sim_threads, "worker threads (default: all)");
  sim_cmd->add_option("--alpha", sim_alpha, "test size (default 0.05)");

  // analyze
  std::string data_path, adj = "both", an_dof = "i-2", an_out;
  double an_alpha = 0.05, an_zeta = 0.75;
  auto* an_cmd = app.add_subcommand("analyze", "fit a trial dataset");
  an_cmd->add_option("--data", data_path, "dataset CSV")->required();
  an_cmd->add_option("--adjustment", adj, "qls, maqls or both (default both)");
  an_cmd->add_option("--alpha", an_alpha, "test size (default 0.05)");
  an_cmd->add_option("--zeta", an_zeta, "Fay-Graubard bound (default 0.75)");
  an_cmd->add_option("--dof", an_dof, "requested t DoF rule: i-2 or i-p");
  an_cmd->add_option("--out", an_out, "write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (power_cmd->parsed()) return cmd_design_power(pf, power_out);
    if (ss_cmd->parsed()) {
      return cmd_design_samplesize(sf, target, ss_gamma, solve, ss_out);
    }
    if (de_cmd->parsed()) {
      return cmd_design_de(de_steps, de_measures, de_cohort, de_tau, de_rho,
                           de_baseline_n, de_gamma, de_out);
    }
    if (grid_cmd->parsed()) {
      return cmd_design_sensitivity(gf, tau_lo, tau_hi, tau_steps, d_lo, d_hi,
                                    d_steps, grid_out);
    }
    if (cmp_cmd->parsed()) {
      return cmd_design_compare(cf, a1_lo, a1_hi, a1_steps, a2_lo, a2_hi, a2_steps,
                                cmp_grid_out, cmp_out);
    }
    if (sim_cmd->parsed()) {
      return cmd_simulate(scenario_path, sim_out, sim_threads, sim_alpha);
    }
    if (an_cmd->parsed()) {
      return cmd_analyze(data_path, adj, an_alpha, an_zeta, an_dof, an_out);
    }
  } catch (const swdecay::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const swdecay::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
