#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "swdecay/dataset.hpp"
#include "swdecay/errors.hpp"
#include "swdecay/simulation.hpp"

using namespace swdecay;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "swdecay-tests";
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

fs::path write_text(const std::string& name, const std::string& text) {
  const fs::path path = temp_dir() / name;
  std::ofstream out(path);
  out << text;
  return path;
}

std::string happy_csv() {
  std::ostringstream os;
  os << "cluster,individual,period,treatment,outcome\n";
  for (int i = 1; i <= 6; ++i) {
    const int cross = 1 + (i + 1) / 2;  // first treated period, 1-based
    for (int j = 1; j <= 2; ++j) {
      for (int t = 1; t <= 4; ++t) {
        os << "c" << i << ",p" << j << "," << t << "," << (t > cross ? 1 : 0) << ","
           << 0.1 * i + 0.01 * j + 0.001 * t << "\n";
      }
    }
  }
  return os.str();
}

#ifdef SWDECAY_CLI_PATH
int run_cli(const std::string& args, std::string* stdout_text = nullptr) {
  const fs::path out = temp_dir() / "cli-stdout.txt";
  const std::string cmd =
      std::string(SWDECAY_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (stdout_text) {
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    *stdout_text = ss.str();
  }
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
#endif

}  // namespace

TEST_SUITE_BEGIN("dataset_cli");

TEST_CASE("dataset parsing") {
  SUBCASE("happy path") {
    const auto path = write_text("happy.csv", happy_csv());
    const TrialDataset ds = parse_dataset_csv(path.string());
    CHECK(ds.n_clusters() == 6);
    CHECK(ds.periods == 4);
    CHECK(ds.max_cluster_size() == 2);
    CHECK(ds.total_observations() == 48);
  }
  SUBCASE("missing period names the individual and period") {
    std::string text = happy_csv();
    const std::string needle = "c3,p2,3,";
    const auto pos = text.find(needle);
    REQUIRE(pos != std::string::npos);
    const auto line_end = text.find('\n', pos);
    text.erase(pos, line_end - pos + 1);
    const auto path = write_text("missing.csv", text);
    try {
      parse_dataset_csv(path.string());
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("p2") != std::string::npos);
      CHECK(msg.find("period 3") != std::string::npos);
    }
  }
  SUBCASE("non-monotone treatment path") {
    std::string text = "cluster,individual,period,treatment,outcome\n";
    for (int t = 1; t <= 4; ++t) {
      text += "c1,p1," + std::to_string(t) + "," + ((t % 2 == 0) ? "1" : "0") + ",0.5\n";
    }
    const auto path = write_text("zigzag.csv", text);
    CHECK_THROWS_WITH_AS(parse_dataset_csv(path.string()),
                         doctest::Contains("staggered"), ValidationError);
  }
  SUBCASE("inconsistent treatment within a cluster-period") {
    std::string text =
        "cluster,individual,period,treatment,outcome\n"
        "c1,p1,1,0,0.1\nc1,p1,2,1,0.2\n"
        "c1,p2,1,0,0.3\nc1,p2,2,0,0.4\n";
    const auto path = write_text("inconsistent.csv", text);
    CHECK_THROWS_WITH_AS(parse_dataset_csv(path.string()),
                         doctest::Contains("inconsistent treatment"), ValidationError);
  }
  SUBCASE("bad header and malformed rows name the location") {
    const auto bad_header = write_text("badheader.csv", "a,b,c\n1,2,3\n");
    CHECK_THROWS_WITH_AS(parse_dataset_csv(bad_header.string()),
                         doctest::Contains("header"), ValidationError);
    const auto bad_row = write_text(
        "badrow.csv", "cluster,individual,period,treatment,outcome\nc1,p1,1,0\n");
    CHECK_THROWS_WITH_AS(parse_dataset_csv(bad_row.string()), doctest::Contains(":2"),
                         ValidationError);
    CHECK_THROWS_AS(parse_dataset_csv((temp_dir() / "nope.csv").string()),
                    ValidationError);
  }
}

TEST_CASE("dataset round trip") {
  SimScenario s;
  s.id = "roundtrip";
  s.clusters = 6;
  s.periods = 4;
  s.cohort_size = 3;
  s.tau = 0.06;
  s.rho = 0.35;
  s.delta = 0.25;
  s.base_seed = 616;
  const TrialDataset ds = generate_dataset(s, 0);
  const auto path = temp_dir() / "roundtrip.csv";
  write_dataset_csv(ds, path.string());
  const TrialDataset parsed = parse_dataset_csv(path.string());
  CHECK(parsed == ds);
}

#ifdef SWDECAY_CLI_PATH

TEST_CASE("cli design workflows") {
  SUBCASE("AEP sample size") {
    const fs::path out = temp_dir() / "aep.json";
    const int code = run_cli(
        "design samplesize --clusters 15 --periods 4 --delta 0.325 --tau 0.03 "
        "--rho 0.2 --test t --dof i-2 --target 0.8 --out " +
        out.string());
    CHECK(code == 0);
    const auto report = nlohmann::json::parse(slurp(out));
    CHECK(report.at("cohort_size").get<int>() == 22);
    CHECK(report.at("attainable").get<bool>());
    CHECK(report.at("power").get<double>() > 0.8);
  }
  SUBCASE("CORE sample size on the exact 4/4/3 layout") {
    const fs::path out = temp_dir() / "core.json";
    const int code = run_cli(
        "design samplesize --steps-clusters 4,4,3 --baseline 1 --delta 0.35 "
        "--tau 0.1 --rho 0.8 --target 0.8 --out " +
        out.string());
    CHECK(code == 0);
    const auto report = nlohmann::json::parse(slurp(out));
    CHECK(report.at("cohort_size").get<int>() == 9);
  }
  SUBCASE("attrition inflates the reported total") {
    std::string text;
    const int code = run_cli(
        "design samplesize --clusters 15 --periods 4 --delta 0.325 --tau 0.03 "
        "--rho 0.2 --gamma 0.2",
        &text);
    CHECK(code == 0);
    const auto report = nlohmann::json::parse(text);
    CHECK(report.at("total").get<long long>() == 330);
    CHECK(report.at("total_with_attrition").get<long long>() == 413);
  }
  SUBCASE("sensitivity grid file") {
    const fs::path grid = temp_dir() / "grid.csv";
    const int code = run_cli(
        "design sensitivity --clusters 15 --periods 4 --cohort 22 --delta 0.325 "
        "--tau 0.03 --rho 0.2 --tau-min 0.03 --tau-max 0.06 --tau-steps 4 "
        "--d-min 0.05 --d-max 0.95 --d-steps 5 --out " +
        grid.string());
    CHECK(code == 0);
    const std::string text = slurp(grid);
    CHECK(text.rfind("tau,d,power\n", 0) == 0);
  }
  SUBCASE("compare report") {
    std::string text;
    const int code = run_cli(
        "design compare --clusters 15 --periods 4 --cohort 20 --tau 0.03 --rho "
        "0.6",
        &text);
    CHECK(code == 0);
    const auto report = nlohmann::json::parse(text);
    CHECK(report.contains("variance_pd"));
    CHECK(report.contains("variance_exponential_decay"));
    CHECK(report.contains("equal_variance_line"));
  }
  SUBCASE("invalid correlations exit with code 2") {
    const int code = run_cli(
        "design power --clusters 15 --periods 4 --cohort 22 --delta 0.3 --tau "
        "1.4 --rho 0.2");
    CHECK(code == 2);
  }
}

TEST_CASE("cli simulate") {
  const std::string scenario = R"({
    "id": "cli-sim",
    "clusters": 6, "periods": 4, "cohort_size": 4,
    "tau": 0.05, "rho": 0.4, "delta": 0.0,
    "reps": 40, "base_seed": 321
  })";
  const auto path = write_text("scenario.json", scenario);
  const fs::path prefix_a = temp_dir() / "sum-a";
  const fs::path prefix_b = temp_dir() / "sum-b";
  CHECK(run_cli("simulate --scenario " + path.string() + " --out " +
                prefix_a.string()) == 0);
  CHECK(run_cli("simulate --scenario " + path.string() + " --out " +
                prefix_b.string() + " --threads 2") == 0);
  SUBCASE("byte-identical outputs for the same seed") {
    CHECK(slurp(prefix_a.string() + ".csv") == slurp(prefix_b.string() + ".csv"));
    CHECK(slurp(prefix_a.string() + ".json") == slurp(prefix_b.string() + ".json"));
  }
  SUBCASE("malformed scenario exits with code 2") {
    const auto bad = write_text("bad.json", "{ not json");
    CHECK(run_cli("simulate --scenario " + bad.string()) == 2);
  }
}

TEST_CASE("cli analyze") {
  SimScenario s;
  s.id = "cli-analyze";
  s.clusters = 201;
  s.periods = 4;
  s.cohort_size = 6;
  s.tau = 0.08;
  s.rho = 0.5;
  s.delta = 0.3;
  s.base_seed = 5555;
  const TrialDataset ds = generate_dataset(s, 0);
  const fs::path data = temp_dir() / "analyze.csv";
  write_dataset_csv(ds, data.string());

  SUBCASE("round-trip estimate near the truth") {
    const fs::path out = temp_dir() / "analyze.json";
    const int code =
        run_cli("analyze --data " + data.string() + " --out " + out.string());
    CHECK(code == 0);
    const auto report = nlohmann::json::parse(slurp(out));
    const double delta = report.at("maqls").at("delta").get<double>();
    CHECK(delta > 0.25);
    CHECK(delta < 0.35);
    CHECK(report.contains("correlation_comparison"));
    CHECK(report.at("qls").at("tests").size() >= 15);
  }
  SUBCASE("infeasible requested DoF rule exits with code 2") {
    SimScenario tiny;
    tiny.id = "cli-tiny";
    tiny.clusters = 5;
    tiny.periods = 6;
    tiny.cohort_size = 4;
    tiny.tau = 0.05;
    tiny.rho = 0.3;
    tiny.base_seed = 9;
    const TrialDataset small = generate_dataset(tiny, 0);
    const fs::path small_path = temp_dir() / "tiny.csv";
    write_dataset_csv(small, small_path.string());
    CHECK(run_cli("analyze --data " + small_path.string() + " --dof i-p") == 2);
  }
  SUBCASE("degenerate data exits with code 3") {
    TrialDataset flat = ds;
    for (auto& cluster : flat.clusters) {
      for (auto& ind : cluster.individuals) ind.outcomes.setZero();
    }
    const fs::path flat_path = temp_dir() / "flat.csv";
    write_dataset_csv(flat, flat_path.string());
    CHECK(run_cli("analyze --data " + flat_path.string()) == 3);
  }
}

#endif  // SWDECAY_CLI_PATH

TEST_SUITE_END();
