// subdyn: batch runner for online submodular minimization experiments.
//
//   subdyn run   --config PATH [--rounds N] [--seed N] [--delta X] [--alpha X] [--out DIR]
//   subdyn sweep --config PATH --seeds A..B [--rounds N] [--delta X] [--alpha X] [--out DIR]
//   subdyn audit FIXTURE
//
// Exit codes: 0 success, 2 invalid configuration (nothing written),
// 3 runtime failure (nothing written), 1 usage error.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "subdyn/cli/config.hpp"
#include "subdyn/cli/runner.hpp"
#include "subdyn/log.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Flags {
  std::string config;
  std::string seeds;
  std::string fixture;
  subdyn::cli::Overrides overrides;
};

void add_common(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config, "experiment config (JSON)")->required();
  cmd->add_option_function<std::size_t>("--rounds", [&](const std::size_t& v) { flags.overrides.rounds = v; },
                                        "number of rounds T");
  cmd->add_option_function<double>("--delta", [&](const double& v) { flags.overrides.delta = v; }, "OSPGD step scale");
  cmd->add_option_function<double>("--alpha", [&](const double& v) { flags.overrides.alpha = v; }, "regret factor");
  cmd->add_option_function<std::string>("--out", [&](const std::string& v) { flags.overrides.out = v; },
                                        "output directory");
}

int run_single(const Flags& flags) {
  subdyn::cli::Prepared prepared;
  try {
    prepared = subdyn::cli::prepare(subdyn::cli::load_config(flags.config, flags.overrides));
  } catch (const subdyn::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    const auto out = subdyn::cli::execute(prepared);
    subdyn::cli::write_outputs(prepared.cfg.out, out);
    subdyn::logger().info("wrote {}/trace.csv ({} rounds)", prepared.cfg.out, prepared.cfg.T);
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

int run_sweep(const Flags& flags) {
  std::vector<subdyn::cli::Prepared> jobs;
  std::vector<std::uint64_t> seeds;
  std::string root;
  try {
    seeds = subdyn::cli::parse_seed_range(flags.seeds);
    const auto base = subdyn::cli::load_config(flags.config, flags.overrides);
    root = base.out;
    for (auto s : seeds) {
      auto cfg = base;
      cfg.seed = s;
      cfg.out = (std::filesystem::path(root) / ("seed_" + std::to_string(s))).string();
      jobs.push_back(subdyn::cli::prepare(cfg));
    }
  } catch (const subdyn::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    std::vector<std::uint64_t> index(jobs.size());
    std::iota(index.begin(), index.end(), std::uint64_t{0});
    const auto outputs = subdyn::parallel_map_seeds(
        std::span<const std::uint64_t>(index), [&](std::uint64_t i) { return subdyn::cli::execute(jobs[i]); });
    nlohmann::json all = nlohmann::json::array();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      subdyn::cli::write_outputs(jobs[i].cfg.out, outputs[i]);
      all.push_back(outputs[i].summary);
    }
    std::ofstream f(std::filesystem::path(root) / "sweep_summary.json");
    f << all.dump(2) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

int run_audit(const Flags& flags) {
  std::optional<subdyn::cli::AuditFixture> fx;
  try {
    fx.emplace(subdyn::cli::load_audit_fixture(flags.fixture));
  } catch (const subdyn::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    const int failed = subdyn::cli::run_audit(*fx, std::cout);
    std::cout << (failed == 0 ? "audit: all checks passed" : "audit: " + std::to_string(failed) + " check(s) failed")
              << "\n";
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online submodular minimization experiments"};
  app.require_subcommand(1);
  Flags flags;

  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run, flags);
  run->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { flags.overrides.seed = v; },
                                          "experiment seed");

  auto* sweep = app.add_subcommand("sweep", "run one experiment per seed in parallel");
  add_common(sweep, flags);
  sweep->add_option("--seeds", flags.seeds, "inclusive seed range A..B")->required();

  auto* audit = app.add_subcommand("audit", "exhaustive oracle audit of a set-function fixture");
  audit->add_option("fixture", flags.fixture, "fixture (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (run->parsed()) return run_single(flags);
  if (sweep->parsed()) return run_sweep(flags);
  return run_audit(flags);
}
