#pragma once

#include <algorithm>
#include <memory>
#include <sstream>

#include "lqrrl/ddpg.hpp"
#include "lqrrl/dqn.hpp"

namespace lqrrl {

// Parses a benchmark row identifier like "dqn", "dqn-lqr-ia-ld" or
// "ddpg-lqr" into base learner, hybrid mode and dynamics source.
inline AgentConfig parse_agent_name(const std::string& raw_name) {
  std::string name = raw_name;
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });

  std::vector<std::string> tokens;
  std::stringstream stream(name);
  for (std::string tok; std::getline(stream, tok, '-');)
    tokens.push_back(tok);
  if (tokens.empty()) throw ConfigError("empty agent name");

  AgentConfig cfg;
  cfg.name = name;
  size_t i = 0;
  if (tokens[i] == "dqn") {
    cfg.ddpg = false;
  } else if (tokens[i] == "ddpg") {
    cfg.ddpg = true;
  } else {
    throw ConfigError("unknown agent base: " + tokens[i]);
  }
  ++i;

  if (i < tokens.size() && tokens[i] == "lqr") {
    cfg.mode = HybridMode::capture;
    ++i;
    if (i < tokens.size() && tokens[i] == "a") {
      cfg.mode = HybridMode::abstract_action;
      ++i;
    } else if (i < tokens.size() && tokens[i] == "ia") {
      cfg.mode = HybridMode::integrated_action;
      ++i;
    }
  }
  if (i < tokens.size() && tokens[i] == "ld") {
    cfg.dynamics = DynamicsSource::learned;
    ++i;
  }
  if (i != tokens.size())
    throw ConfigError("unrecognized agent name: " + name);
  if (cfg.dynamics == DynamicsSource::learned && cfg.mode == HybridMode::none)
    throw ConfigError("learned dynamics without an lqr mode: " + name);
  if (cfg.ddpg && cfg.mode == HybridMode::abstract_action)
    throw ConfigError(
        "the abstract lqr action applies to discrete action sets only");
  return cfg;
}

inline std::unique_ptr<Agent> make_agent(const AgentConfig& cfg,
                                         const Environment& env) {
  if (cfg.ddpg && cfg.mode == HybridMode::abstract_action)
    throw ConfigError(
        "the abstract lqr action applies to discrete action sets only");
  if (cfg.ddpg) return std::make_unique<DdpgAgent>(cfg, env);
  return std::make_unique<DqnAgent>(cfg, env);
}

// Checkpoints are the network files prefixed with a small header naming the
// hybrid configuration, so a checkpoint can't silently load into the wrong
// kind of agent.
inline void save_checkpoint(const Agent& agent, std::ostream& out) {
  out.write("LQRCK1", 6);
  const AgentConfig& cfg = agent.config();
  const uint8_t fields[3] = {uint8_t(cfg.ddpg ? 1 : 0), uint8_t(cfg.mode),
                             uint8_t(cfg.dynamics)};
  out.write(reinterpret_cast<const char*>(fields), 3);
  agent.save(out);
  if (!out) throw IoError("save_checkpoint: write failed");
}

inline void load_checkpoint(Agent& agent, std::istream& in) {
  char magic[6];
  in.read(magic, 6);
  if (!in || std::string(magic, 6) != "LQRCK1")
    throw IoError("load_checkpoint: bad magic");
  uint8_t fields[3];
  in.read(reinterpret_cast<char*>(fields), 3);
  const AgentConfig& cfg = agent.config();
  if (fields[0] != uint8_t(cfg.ddpg ? 1 : 0) ||
      fields[1] != uint8_t(cfg.mode) || fields[2] != uint8_t(cfg.dynamics))
    throw ConfigError("load_checkpoint: hybrid configuration mismatch");
  agent.load(in);
}

}  // namespace lqrrl
