#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <thread>

#include "lqrrl/agents.hpp"
#include "lqrrl/config.hpp"
#include "lqrrl/environments.hpp"
#include "lqrrl/metrics.hpp"

// Experiment orchestration: multi-run training with per-run seeds, curve
// capture, summary statistics and the CSV outputs.

namespace lqrrl {

struct ExperimentConfig {
  std::string env_name = "pendulum";
  std::string agent_name = "dqn";
  int episodes = 100;
  int runs = 1;
  uint32_t base_seed = 1;
  int workers = 1;
  double rise_threshold = std::nan("");  // nan: per-environment default
  std::string out_dir = "out";
  bool dump_lqr = false;
  ConfigMap overrides;  // env.* / agent.* / lqr.* keys
};

// Thresholds the rise-time metric crosses between typical initial and
// converged returns at desk scale. Not taken from any published table;
// override with run.threshold.
inline double default_rise_threshold(const std::string& env_name) {
  if (env_name == "pendulum") return -900.0;
  if (env_name == "cartpole") return -300.0;
  if (env_name == "flyer") return -10.0;
  throw ConfigError("unknown environment: " + env_name);
}

inline ExperimentConfig experiment_from_config(const ConfigMap& map) {
  ExperimentConfig cfg;
  cfg.overrides = map;
  const ConfigMap& m = cfg.overrides;
  cfg.env_name = m.get_string("run.env", cfg.env_name);
  cfg.agent_name = m.get_string("run.agent", cfg.agent_name);
  cfg.episodes = m.get_int("run.episodes", cfg.episodes);
  cfg.runs = m.get_int("run.runs", cfg.runs);
  cfg.base_seed = uint32_t(m.get_int("run.seed", int(cfg.base_seed)));
  cfg.workers = m.get_int("run.workers", cfg.workers);
  cfg.out_dir = m.get_string("run.out", cfg.out_dir);
  cfg.dump_lqr = m.get_bool("run.dump_lqr", cfg.dump_lqr);
  cfg.rise_threshold =
      m.get_double("run.threshold", default_rise_threshold(cfg.env_name));
  if (cfg.runs < 1 || cfg.episodes < 1)
    throw ConfigError("runs and episodes must be >= 1");
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  return cfg;
}

inline std::unique_ptr<Environment> build_environment(
    const ExperimentConfig& cfg) {
  const ConfigMap& m = cfg.overrides;
  if (cfg.env_name == "pendulum") {
    PendulumParams p;
    p.inertia = m.get_double("env.inertia", p.inertia);
    p.mass = m.get_double("env.mass", p.mass);
    p.gravity = m.get_double("env.gravity", p.gravity);
    p.length = m.get_double("env.length", p.length);
    p.damping = m.get_double("env.damping", p.damping);
    p.torque_constant = m.get_double("env.torque_constant", p.torque_constant);
    p.resistance = m.get_double("env.resistance", p.resistance);
    p.voltage_max = m.get_double("env.voltage_max", p.voltage_max);
    p.tau = m.get_double("env.tau", p.tau);
    p.timeout = m.get_double("env.timeout", p.timeout);
    p.reward_scale = m.get_double("env.reward_scale", p.reward_scale);
    p.discretization = m.get_int("env.discretization", p.discretization);
    return std::make_unique<PendulumEnv>(p);
  }
  if (cfg.env_name == "cartpole") {
    CartPoleParams p;
    p.cart_mass = m.get_double("env.cart_mass", p.cart_mass);
    p.pole_mass = m.get_double("env.pole_mass", p.pole_mass);
    p.pole_half_length =
        m.get_double("env.pole_half_length", p.pole_half_length);
    p.gravity = m.get_double("env.gravity", p.gravity);
    p.force_max = m.get_double("env.force_max", p.force_max);
    p.tau = m.get_double("env.tau", p.tau);
    p.timeout = m.get_double("env.timeout", p.timeout);
    p.reward_scale = m.get_double("env.reward_scale", p.reward_scale);
    p.discretization = m.get_int("env.discretization", p.discretization);
    return std::make_unique<CartPoleEnv>(p);
  }
  if (cfg.env_name == "flyer") {
    FlyerParams p;
    p.mass = m.get_double("env.mass", p.mass);
    p.length = m.get_double("env.length", p.length);
    p.gravity = m.get_double("env.gravity", p.gravity);
    p.force_max = m.get_double("env.force_max", p.force_max);
    p.tau = m.get_double("env.tau", p.tau);
    p.timeout = m.get_double("env.timeout", p.timeout);
    p.reward_scale = m.get_double("env.reward_scale", p.reward_scale);
    p.discretization = m.get_int("env.discretization", p.discretization);
    return std::make_unique<FlyerEnv>(p);
  }
  throw ConfigError("unknown environment: " + cfg.env_name);
}

inline AgentConfig build_agent_config(const ExperimentConfig& cfg,
                                      const Environment& env, uint32_t seed) {
  AgentConfig agent = parse_agent_name(cfg.agent_name);
  const EnvTrainingDefaults defaults = env_training_defaults(env.spec().name);
  const ConfigMap& m = cfg.overrides;
  agent.epsilon = m.get_double("agent.epsilon", agent.epsilon);
  agent.epsilon_choice =
      m.get_double("agent.epsilon_choice", agent.epsilon_choice);
  agent.gamma = m.get_double("agent.gamma", defaults.gamma);
  agent.batch_size = m.get_int("agent.batch", agent.batch_size);
  agent.lr_q = m.get_double("agent.lr_q", agent.lr_q);
  agent.lr_actor = m.get_double("agent.lr_actor", agent.lr_actor);
  agent.target_period = m.get_int("agent.target_period", agent.target_period);
  agent.polyak_mix = m.get_double("agent.polyak", agent.polyak_mix);
  agent.warmup = m.get_int("agent.warmup", agent.warmup);
  agent.train_frequency =
      m.get_int("agent.train_frequency", agent.train_frequency);
  agent.hidden_sizes = m.get_int_list("agent.hidden", agent.hidden_sizes);
  agent.sigma = m.get_double("agent.sigma", defaults.sigma);
  agent.ou_friction = m.get_double("agent.ou_friction", agent.ou_friction);
  agent.capture_rho = m.get_double("agent.capture_rho", agent.capture_rho);
  agent.llr_neighbors = m.get_int("agent.llr_k", agent.llr_neighbors);
  agent.llr_capacity =
      size_t(m.get_int("agent.llr_capacity", int(agent.llr_capacity)));
  agent.llr_ridge_rel = m.get_double("agent.llr_ridge", agent.llr_ridge_rel);
  agent.llr_distance_weights =
      m.get_double_list("agent.llr_weights", agent.llr_distance_weights);
  if (!agent.llr_distance_weights.empty() &&
      int(agent.llr_distance_weights.size()) != env.spec().state_dim)
    throw ConfigError("agent.llr_weights must have one entry per state dim");
  agent.literal_feedforward =
      m.get_bool("lqr.literal_feedforward", agent.literal_feedforward);
  const int replay_cap = m.get_int("agent.replay_capacity", 0);
  if (replay_cap > 0) agent.replay_capacity = size_t(replay_cap);
  agent.seed = seed;
  return agent;
}

struct SummaryStats {
  double rise_mean = 0.0, rise_halfwidth = 0.0;
  double end_mean = 0.0, end_halfwidth = 0.0;
  int censored_count = 0;
  std::vector<double> rise_times;  // per run, censored entries at total time
  std::vector<double> end_values;
};

inline SummaryStats compute_summary(const std::vector<LearningCurve>& curves,
                                    double threshold) {
  if (curves.empty())
    throw StatisticsError("compute_summary: no learning curves");
  SummaryStats stats;
  for (const auto& curve : curves) {
    const RiseTime rise = rise_time(curve, threshold);
    stats.rise_times.push_back(rise.seconds);
    stats.censored_count += rise.censored ? 1 : 0;
    stats.end_values.push_back(end_performance(curve));
  }
  if (curves.size() == 1) {
    stats.rise_mean = stats.rise_times[0];
    stats.end_mean = stats.end_values[0];
  } else {
    const Interval rise = confidence_interval(stats.rise_times);
    const Interval end = confidence_interval(stats.end_values);
    stats.rise_mean = rise.mean;
    stats.rise_halfwidth = rise.halfwidth;
    stats.end_mean = end.mean;
    stats.end_halfwidth = end.halfwidth;
  }
  return stats;
}

struct ExperimentResult {
  std::vector<LearningCurve> curves;  // successful runs, ordered by run id
  SummaryStats stats;
  std::vector<int> failed_runs;
  std::vector<std::string> failure_reasons;
};

// Called from the worker thread when its run finishes, before the agent is
// destroyed; lets callers evaluate or checkpoint the trained policy.
using RunHook = std::function<void(int run, Agent& agent,
                                   const Environment& env)>;

// Trains one run: `episodes` episodes of environment interaction with
// per-step learning. Returns the unscaled learning curve.
inline LearningCurve train_run(const ExperimentConfig& cfg, int run_index,
                               const RunHook& hook = {}) {
  const auto env = build_environment(cfg);
  const AgentConfig agent_cfg =
      build_agent_config(cfg, *env, cfg.base_seed + uint32_t(run_index));
  const auto agent = make_agent(agent_cfg, *env);

  std::ofstream dump_stream;
  if (cfg.dump_lqr) {
    std::filesystem::create_directories(cfg.out_dir);
    dump_stream.open(std::filesystem::path(cfg.out_dir) /
                     ("lqr_run" + std::to_string(run_index) + ".csv"));
    dump_stream << "refit,matrix,row,values\n";
    agent->set_lqr_dump(&dump_stream);
  }

  LearningCurve curve;
  double sim_time = 0.0;
  for (int episode = 0; episode < cfg.episodes; ++episode) {
    agent->begin_episode(*env);
    Vector state = env->reset();
    double episode_return = 0.0;
    int steps = 0;
    while (true) {
      const ActionInfo info = agent->act(*env, state, /*greedy=*/false);
      const StepResult result = env->step(state, info.action, steps);
      agent->record(*env, state, info, result.reward, result);
      episode_return += result.reward;
      ++steps;
      state = result.next_state;
      if (result.status != StepStatus::running) break;
    }
    if (!agent->parameters_ok())
      throw SimulationDiverged("network parameters became non-finite");
    sim_time += double(steps) * env->spec().control_step;
    curve.episodes.push_back(
        {run_index, episode, sim_time, episode_return, steps});
  }
  if (hook) hook(run_index, *agent, *env);
  return curve;
}

// Runs `cfg.runs` independent trainings with seeds base_seed + run index,
// up to `cfg.workers` in parallel. Per-run results are deterministic and
// independent of the worker count; runs that diverge numerically are
// excluded from the statistics with a warning.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const RunHook& hook = {}) {
  struct Slot {
    LearningCurve curve;
    bool failed = false;
    std::string error;
  };
  std::vector<Slot> slots(size_t(cfg.runs));
  std::atomic<int> next_run{0};

  auto worker = [&]() {
    while (true) {
      const int run = next_run.fetch_add(1);
      if (run >= cfg.runs) return;
      try {
        slots[size_t(run)].curve = train_run(cfg, run, hook);
      } catch (const std::exception& e) {
        slots[size_t(run)].failed = true;
        slots[size_t(run)].error = e.what();
      }
    }
  };

  const int thread_count = std::min(cfg.workers, cfg.runs);
  if (thread_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(size_t(thread_count));
    for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentResult result;
  for (int run = 0; run < cfg.runs; ++run) {
    if (slots[size_t(run)].failed) {
      result.failed_runs.push_back(run);
      result.failure_reasons.push_back(slots[size_t(run)].error);
      std::cerr << "warning: run " << run
                << " failed and is excluded from statistics: "
                << slots[size_t(run)].error << "\n";
    } else {
      result.curves.push_back(std::move(slots[size_t(run)].curve));
    }
  }
  if (result.curves.empty())
    throw SimulationDiverged("all runs failed: " +
                             (result.failure_reasons.empty()
                                  ? std::string("no detail")
                                  : result.failure_reasons.front()));
  result.stats = compute_summary(result.curves, cfg.rise_threshold);
  return result;
}

// --- CSV outputs ------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string summary_csv(const SummaryStats& stats,
                               const std::string& agent_name,
                               const std::string& env_name) {
  std::string out =
      "agent,env,rise_mean,rise_hw,end_mean,end_hw,censored_count\n";
  out += agent_name + "," + env_name + "," +
         detail::format_double(stats.rise_mean) + "," +
         detail::format_double(stats.rise_halfwidth) + "," +
         detail::format_double(stats.end_mean) + "," +
         detail::format_double(stats.end_halfwidth) + "," +
         std::to_string(stats.censored_count) + "\n";
  return out;
}

inline void write_curves_csv(const std::vector<LearningCurve>& curves,
                             std::ostream& out) {
  out << "run,episode,sim_time_s,return,steps\n";
  for (const auto& curve : curves)
    for (const auto& e : curve.episodes)
      out << e.run << "," << e.episode << ","
          << detail::format_double(e.sim_time_s) << ","
          << detail::format_double(e.episode_return) << "," << e.steps << "\n";
}

// Trailing 10-episode moving average per run, plus the cross-run mean and
// its 95% band per episode.
inline void write_smoothed_csv(const std::vector<LearningCurve>& curves,
                               std::ostream& out) {
  std::vector<std::vector<double>> smoothed;
  size_t episodes = 0;
  for (const auto& curve : curves) {
    std::vector<double> returns;
    for (const auto& e : curve.episodes) returns.push_back(e.episode_return);
    smoothed.push_back(trailing_moving_average(returns, 10));
    episodes = std::max(episodes, returns.size());
  }
  out << "episode";
  for (size_t r = 0; r < curves.size(); ++r)
    out << ",run" << curves[r].episodes.front().run;
  out << ",mean,lo95,hi95\n";
  for (size_t e = 0; e < episodes; ++e) {
    out << e;
    std::vector<double> values;
    for (const auto& s : smoothed) {
      if (e < s.size()) {
        out << "," << detail::format_double(s[e]);
        values.push_back(s[e]);
      } else {
        out << ",";
      }
    }
    double mean = 0.0, halfwidth = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    if (values.size() >= 2) halfwidth = confidence_interval(values).halfwidth;
    out << "," << detail::format_double(mean) << ","
        << detail::format_double(mean - halfwidth) << ","
        << detail::format_double(mean + halfwidth) << "\n";
  }
}

inline void emit_outputs(const std::vector<LearningCurve>& curves,
                         const SummaryStats& stats,
                         const std::string& agent_name,
                         const std::string& env_name,
                         const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(directory) / name, std::ios::binary);
    if (!out)
      throw IoError(std::string("cannot write ") +
                    (fs::path(directory) / name).string());
    return out;
  };
  {
    auto out = open("curves.csv");
    write_curves_csv(curves, out);
    if (!out) throw IoError("write failed: curves.csv");
  }
  {
    auto out = open("summary.csv");
    out << summary_csv(stats, agent_name, env_name);
    if (!out) throw IoError("write failed: summary.csv");
  }
  {
    auto out = open("curve_smoothed.csv");
    write_smoothed_csv(curves, out);
    if (!out) throw IoError("write failed: curve_smoothed.csv");
  }
}

// Reads back a curves.csv written by write_curves_csv.
inline std::vector<LearningCurve> parse_curves(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw IoError("parse_curves: empty curves file");
  std::map<int, LearningCurve> by_run;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    EpisodeRecord rec;
    std::stringstream stream(line);
    std::string field;
    try {
      std::getline(stream, field, ',');
      rec.run = std::stoi(field);
      std::getline(stream, field, ',');
      rec.episode = std::stoi(field);
      std::getline(stream, field, ',');
      rec.sim_time_s = std::stod(field);
      std::getline(stream, field, ',');
      rec.episode_return = std::stod(field);
      std::getline(stream, field, ',');
      rec.steps = std::stoi(field);
    } catch (const std::exception&) {
      throw IoError("parse_curves: malformed line " + std::to_string(line_no));
    }
    by_run[rec.run].episodes.push_back(rec);
  }
  std::vector<LearningCurve> curves;
  for (auto& [run, curve] : by_run) curves.push_back(std::move(curve));
  if (curves.empty()) throw IoError("parse_curves: no data rows");
  return curves;
}

}  // namespace lqrrl
