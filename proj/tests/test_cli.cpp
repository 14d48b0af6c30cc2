#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "mixopt/io.hpp"
#include "mixopt/planner.hpp"
#include "mixopt/simulator.hpp"

namespace fs = std::filesystem;
using namespace mixopt;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliFixture {
 public:
  CliFixture() {
    dir_ = fs::temp_directory_path() / ("mixopt_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter_++));
    fs::create_directories(dir_);
  }
  ~CliFixture() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  const fs::path& dir() const { return dir_; }

  RunResult run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = std::string(MIXOPT_CLI_PATH) + " " + args + " > " + out.string() +
                            " 2> " + err.string();
    const int raw = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    result.out = slurp(out);
    result.err = slurp(err);
    return result;
  }

  void write(const std::string& name, const std::string& content) const {
    io::write_file((dir_ / name).string(), content);
  }

 private:
  fs::path dir_;
  static int counter_;
};

int CliFixture::counter_ = 0;

MixPlan demo_config(std::size_t domains = 3) {
  MixPlan config;
  config.domains = {{"IF", "hf://instruct", 50000000},
                    {"Math", "hf://math", 30000000},
                    {"Code", "hf://code", 40000000}};
  config.domains.resize(domains);
  config.unit_sample_n = 1980000;
  config.budget_n0 = 20000000;
  config.seed = 7;
  return config;
}

GroundTruth demo_truth(std::size_t domains = 3) {
  GroundTruth truth;
  truth.params = testutil::reference_params();
  truth.params.resize(domains);
  truth.noise_sigma = 0.0;
  truth.seed = 7;
  return truth;
}

int count_csv_rows(const std::string& text) {
  int rows = -1;  // discount the header
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty()) ++rows;
  return rows;
}

}  // namespace

TEST_CASE("plan emits 4K+1 manifests") {
  CliFixture fx;
  fx.write("config.json", io::plan_to_json(demo_config()));
  const auto result =
      fx.run("plan --config " + (fx.dir() / "config.json").string() + " --out-dir " +
             (fx.dir() / "work").string());
  CHECK(result.exit_code == 0);
  CHECK(fs::exists(fx.dir() / "work" / "plan.json"));
  int manifests = 0;
  for ([[maybe_unused]] const auto& entry :
       fs::directory_iterator(fx.dir() / "work" / "manifests"))
    ++manifests;
  CHECK(manifests == 13);
}

TEST_CASE("plan rejects a missing source uri naming the domain") {
  CliFixture fx;
  auto config = demo_config();
  config.domains[1].source_uri.clear();
  fx.write("config.json", io::plan_to_json(config));
  const auto result = fx.run("plan --config " + (fx.dir() / "config.json").string() +
                             " --out-dir " + (fx.dir() / "work").string());
  CHECK(result.exit_code == 2);
  CHECK(result.err.find("Math") != std::string::npos);
}

TEST_CASE("plan with two domains and overridden ratios emits 5 manifests") {
  CliFixture fx;
  fx.write("config.json", io::plan_to_json(demo_config(2)));
  const auto result =
      fx.run("plan --config " + (fx.dir() / "config.json").string() + " --ratios 0.5,2" +
             " --out-dir " + (fx.dir() / "work").string());
  CHECK(result.exit_code == 0);
  int manifests = 0;
  for ([[maybe_unused]] const auto& entry :
       fs::directory_iterator(fx.dir() / "work" / "manifests"))
    ++manifests;
  CHECK(manifests == 5);
}

TEST_CASE("simulate + fit + optimize round trip") {
  CliFixture fx;
  const std::string work = (fx.dir() / "work").string();
  fx.write("config.json", io::plan_to_json(demo_config()));
  fx.write("truth.json", io::truth_to_json(demo_truth()));
  REQUIRE(fx.run("plan --config " + (fx.dir() / "config.json").string() + " --out-dir " + work)
              .exit_code == 0);
  REQUIRE(fx.run("simulate --truth " + (fx.dir() / "truth.json").string() + " --plan " + work +
                 "/plan.json --out-dir " + work)
              .exit_code == 0);

  SUBCASE("fit writes converged params and echoes delta") {
    const auto result = fx.run("fit --plan " + work + "/plan.json --losses " + work +
                               "/losses.csv --out-dir " + work);
    CHECK(result.exit_code == 0);
    const std::string params_text = slurp(fs::path(work) / "params.json");
    const auto params = io::params_from_json(params_text);
    CHECK(params.size() == 3);
    CHECK(params_text.find("\"delta\": 0.001") != std::string::npos);
    CHECK(params_text.find("\"converged\": true") != std::string::npos);

    SUBCASE("optimize writes weights.json with a small kkt residual") {
      const auto opt = fx.run("optimize --params " + work + "/params.json" +
                              " --budget 20000000 --out-dir " + work);
      CHECK(opt.exit_code == 0);
      const std::string weights = slurp(fs::path(work) / "weights.json");
      CHECK(weights.find("budget_tokens") != std::string::npos);
      CHECK(weights.find("kkt_residual") != std::string::npos);
    }

    SUBCASE("grid emits 21 mixtures") {
      const auto grid = fx.run("grid --params " + work + "/params.json" +
                               " --budget 20000000 --out-dir " + work);
      CHECK(grid.exit_code == 0);
      CHECK(count_csv_rows(slurp(fs::path(work) / "grid.csv")) == 21);
    }

    SUBCASE("sweep emits one row per budget plus the plot") {
      const auto sweep = fx.run("sweep --params " + work + "/params.json" +
                                " --budgets 5000000,20000000,200000000 --out-dir " + work);
      CHECK(sweep.exit_code == 0);
      CHECK(count_csv_rows(slurp(fs::path(work) / "sweep.csv")) == 3);
      CHECK(fs::exists(fs::path(work) / "weights_vs_budget.svg"));
    }

    SUBCASE("report emits the surface for K = 3") {
      const auto report = fx.run("report --params " + work + "/params.json" +
                                 " --budgets 5000000,20000000 --out-dir " + work);
      CHECK(report.exit_code == 0);
      CHECK(fs::exists(fs::path(work) / "surface.svg"));
      CHECK(fs::exists(fs::path(work) / "grid.csv"));
    }
  }

  SUBCASE("fit with budgets writes the pipeline report") {
    const auto result = fx.run("fit --plan " + work + "/plan.json --losses " + work +
                               "/losses.csv --budgets 5000000,20000000 --out-dir " + work);
    CHECK(result.exit_code == 0);
    const std::string report = slurp(fs::path(work) / "pipeline_report.json");
    CHECK(report.find("\"sweep\"") != std::string::npos);
    CHECK(report.find("\"final\"") != std::string::npos);
    CHECK(report.find("\"loss_units\": \"as ingested\"") != std::string::npos);
  }

  SUBCASE("fit fails with exit 2 when a run is missing") {
    std::string losses = slurp(fs::path(work) / "losses.csv");
    std::string filtered = "run_id,domain,loss\n";
    std::stringstream in(losses);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line))
      if (line.rfind("perturb_Math_2,", 0) != 0) filtered += line + "\n";
    fx.write("losses_missing.csv", filtered);
    const auto result = fx.run("fit --plan " + work + "/plan.json --losses " +
                               (fx.dir() / "losses_missing.csv").string() + " --out-dir " + work);
    CHECK(result.exit_code == 2);
    CHECK(result.err.find("perturb_Math_2") != std::string::npos);
  }
}

TEST_CASE("optimize validation failures exit 2") {
  CliFixture fx;
  std::vector<DomainFitOutcome> outcomes;
  for (const auto& p : testutil::reference_params())
    outcomes.push_back({p.name, FitResult{p, 0.0, 1.0, 0, true}, ""});
  fx.write("params.json", io::params_json(outcomes, 1e-3));
  CHECK(fx.run("optimize --params " + (fx.dir() / "params.json").string() +
               " --budget 0 --out-dir " + fx.dir().string())
            .exit_code == 2);
  CHECK(fx.run("optimize --params " + (fx.dir() / "params.json").string() +
               " --budget 20000000 --gamma 1,0 --out-dir " + fx.dir().string())
            .exit_code == 2);  // wrong gamma arity
}

TEST_CASE("gamma-weighted two-domain optimize emits feasible weights") {
  CliFixture fx;
  std::vector<DomainFitOutcome> outcomes;
  auto table = testutil::reference_params();
  for (std::size_t i = 0; i < 2; ++i)
    outcomes.push_back({table[i].name, FitResult{table[i], 0.0, 1.0, 0, true}, ""});
  fx.write("params.json", io::params_json(outcomes, 1e-3));
  const auto result = fx.run("optimize --params " + (fx.dir() / "params.json").string() +
                             " --budget 10000000 --gamma 1,0 --out-dir " + fx.dir().string());
  CHECK(result.exit_code == 0);
  const auto weights_doc = slurp(fx.dir() / "weights.json");
  // The emitted weights parse back onto the simplex.
  double w0 = -1, w1 = -1;
  std::stringstream ss(weights_doc);
  std::string line;
  std::vector<double> values;
  while (std::getline(ss, line)) {
    const auto pos = line.find("\"weight\": ");
    if (pos != std::string::npos)
      values.push_back(std::stod(line.substr(pos + 10)));
  }
  REQUIRE(values.size() == 2);
  w0 = values[0];
  w1 = values[1];
  CHECK(w0 + w1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w0 > 0.5);  // the kept domain dominates
}

TEST_CASE("report with two domains skips the surface with a notice") {
  CliFixture fx;
  std::vector<DomainFitOutcome> outcomes;
  auto table = testutil::reference_params();
  for (std::size_t i = 0; i < 2; ++i)
    outcomes.push_back({table[i].name, FitResult{table[i], 0.0, 1.0, 0, true}, ""});
  fx.write("params.json", io::params_json(outcomes, 1e-3));
  const auto result = fx.run("report --params " + (fx.dir() / "params.json").string() +
                             " --budgets 10000000 --grid-step 0.25 --out-dir " +
                             (fx.dir() / "w").string());
  CHECK(result.exit_code == 0);
  CHECK(!fs::exists(fx.dir() / "w" / "surface.svg"));
  CHECK(fs::exists(fx.dir() / "w" / "grid.csv"));
  CHECK(result.out.find("notice") != std::string::npos);
}

TEST_CASE("identical-domain report yields a symmetric (flat) objective surface") {
  CliFixture fx;
  std::vector<DomainFitOutcome> outcomes;
  const DomainParams same{"", 1.1, 0.15, 0.5, 0.05, 1.2};
  for (const char* name : {"a", "b", "c"}) {
    DomainParams p = same;
    p.name = name;
    outcomes.push_back({name, FitResult{p, 0.0, 1.0, 0, true}, ""});
  }
  fx.write("params.json", io::params_json(outcomes, 1e-3));
  const auto result = fx.run("report --params " + (fx.dir() / "params.json").string() +
                             " --budgets 20000000 --out-dir " + (fx.dir() / "w").string());
  REQUIRE(result.exit_code == 0);

  // Group grid rows by weight multiset; within each symmetry class the
  // objective spread must vanish.
  std::stringstream ss(slurp(fx.dir() / "w" / "grid.csv"));
  std::string line;
  std::getline(ss, line);  // header
  std::map<std::vector<double>, std::pair<double, double>> classes;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    std::vector<double> values;
    while (std::getline(row, field, ',')) values.push_back(std::stod(field));
    REQUIRE(values.size() == 4);
    std::vector<double> key(values.begin(), values.begin() + 3);
    std::sort(key.begin(), key.end());
    const double objective = values[3];
    auto it = classes.find(key);
    if (it == classes.end())
      classes.emplace(key, std::make_pair(objective, objective));
    else {
      it->second.first = std::min(it->second.first, objective);
      it->second.second = std::max(it->second.second, objective);
    }
  }
  CHECK(!classes.empty());
  for (const auto& [key, range] : classes) CHECK(range.second - range.first <= 1e-9);
}

TEST_CASE("subcommands are idempotent byte for byte") {
  CliFixture fx;
  const std::string work_a = (fx.dir() / "a").string();
  const std::string work_b = (fx.dir() / "b").string();
  fx.write("config.json", io::plan_to_json(demo_config()));
  GroundTruth truth = demo_truth();
  truth.noise_sigma = 0.01;
  fx.write("truth.json", io::truth_to_json(truth));

  for (const std::string& work : {work_a, work_b}) {
    REQUIRE(fx.run("plan --config " + (fx.dir() / "config.json").string() + " --out-dir " +
                   work).exit_code == 0);
    REQUIRE(fx.run("simulate --truth " + (fx.dir() / "truth.json").string() + " --plan " + work +
                   "/plan.json --seed 123 --out-dir " + work).exit_code == 0);
    REQUIRE(fx.run("fit --plan " + work + "/plan.json --losses " + work +
                   "/losses.csv --out-dir " + work).exit_code == 0);
    REQUIRE(fx.run("optimize --params " + work + "/params.json --budget 20000000 --out-dir " +
                   work).exit_code == 0);
  }
  CHECK(slurp(fs::path(work_a) / "plan.json") == slurp(fs::path(work_b) / "plan.json"));
  CHECK(slurp(fs::path(work_a) / "losses.csv") == slurp(fs::path(work_b) / "losses.csv"));
  CHECK(slurp(fs::path(work_a) / "params.json") == slurp(fs::path(work_b) / "params.json"));
  CHECK(slurp(fs::path(work_a) / "weights.json") == slurp(fs::path(work_b) / "weights.json"));
  CHECK(slurp(fs::path(work_a) / "manifests" / "base.json") ==
        slurp(fs::path(work_b) / "manifests" / "base.json"));
}
