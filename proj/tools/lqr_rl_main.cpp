// lqr-rl: train and evaluate the regulator-embedded reinforcement learners.
//
//   lqr-rl run --config FILE [--env NAME] [--agent NAME] [--runs N]
//              [--episodes N] [--seed S] [--workers W] [--out DIR]
//              [--dump-lqr]
//   lqr-rl metrics --curves FILE --threshold X [--agent NAME] [--env NAME]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "lqrrl/harness.hpp"

namespace {

struct RunOptions {
  std::string config_path;
  std::string env, agent, out;
  int runs = 0, episodes = 0, workers = 0;
  long seed = -1;
  bool dump_lqr = false;
};

int do_run(const RunOptions& opt) {
  lqrrl::ConfigMap map = lqrrl::ConfigMap::parse_file(opt.config_path);
  if (!opt.env.empty()) map.set("run.env", opt.env);
  if (!opt.agent.empty()) map.set("run.agent", opt.agent);
  if (opt.runs > 0) map.set("run.runs", std::to_string(opt.runs));
  if (opt.episodes > 0) map.set("run.episodes", std::to_string(opt.episodes));
  if (opt.seed >= 0) map.set("run.seed", std::to_string(opt.seed));
  if (opt.workers > 0) map.set("run.workers", std::to_string(opt.workers));
  if (!opt.out.empty()) map.set("run.out", opt.out);
  if (opt.dump_lqr) map.set("run.dump_lqr", "true");

  const lqrrl::ExperimentConfig cfg = lqrrl::experiment_from_config(map);
  {
    // Touch every key the experiment would read, then reject leftovers
    // before any training starts.
    const auto env = lqrrl::build_environment(cfg);
    lqrrl::build_agent_config(cfg, *env, cfg.base_seed);
    cfg.overrides.require_all_used();
  }

  const lqrrl::ExperimentResult result = lqrrl::run_experiment(cfg);
  lqrrl::emit_outputs(result.curves, result.stats, cfg.agent_name,
                      cfg.env_name, cfg.out_dir);

  std::cout << cfg.agent_name << " on " << cfg.env_name << ": rise "
            << result.stats.rise_mean << " +/- " << result.stats.rise_halfwidth
            << " s, end " << result.stats.end_mean << " +/- "
            << result.stats.end_halfwidth;
  if (result.stats.censored_count > 0)
    std::cout << " (" << result.stats.censored_count << " censored)";
  if (!result.failed_runs.empty())
    std::cout << " [" << result.failed_runs.size() << " runs failed]";
  std::cout << "\noutputs written to " << cfg.out_dir << "\n";
  return 0;
}

struct MetricsOptions {
  std::string curves_path;
  double threshold = 0.0;
  std::string agent = "-", env = "-";
};

int do_metrics(const MetricsOptions& opt) {
  std::ifstream in(opt.curves_path);
  if (!in) throw lqrrl::IoError("cannot open curves file: " + opt.curves_path);
  const auto curves = lqrrl::parse_curves(in);
  const lqrrl::SummaryStats stats =
      lqrrl::compute_summary(curves, opt.threshold);
  std::cout << lqrrl::summary_csv(stats, opt.agent, opt.env);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement learning with embedded LQR control"};
  app.require_subcommand(1);

  RunOptions run_opt;
  CLI::App* run = app.add_subcommand("run", "Train agents and write curves");
  run->add_option("--config", run_opt.config_path, "Configuration file")
      ->required();
  run->add_option("--env", run_opt.env, "Environment name");
  run->add_option("--agent", run_opt.agent, "Agent name (e.g. dqn-lqr-ia)");
  run->add_option("--runs", run_opt.runs, "Independent runs");
  run->add_option("--episodes", run_opt.episodes, "Episodes per run");
  run->add_option("--seed", run_opt.seed, "Base seed");
  run->add_option("--workers", run_opt.workers, "Parallel workers");
  run->add_option("--out", run_opt.out, "Output directory");
  run->add_flag("--dump-lqr", run_opt.dump_lqr,
                "Dump linear models and controllers per refit");

  MetricsOptions metrics_opt;
  CLI::App* metrics =
      app.add_subcommand("metrics", "Recompute summary from a curves file");
  metrics->add_option("--curves", metrics_opt.curves_path, "curves.csv path")
      ->required();
  metrics->add_option("--threshold", metrics_opt.threshold, "Rise threshold")
      ->required();
  metrics->add_option("--agent", metrics_opt.agent, "Agent label");
  metrics->add_option("--env", metrics_opt.env, "Environment label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return do_run(run_opt);
    return do_metrics(metrics_opt);
  } catch (const lqrrl::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
