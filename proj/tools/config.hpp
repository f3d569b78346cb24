#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dissnet/lti_sim.hpp"
#include "dissnet/synthesis.hpp"

namespace dissnet::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  double dt = 0.01;
  double horizon = 100.0;
  std::vector<FirstOrderDelaySISO> controllers;
  std::vector<FirstOrderDelaySISO> plants;
  Excitation excitation;
  std::optional<double> k_sys;
};

struct Config {
  NSCProblem problem;
  std::optional<InterconnectionMatrix> m;
  std::map<MBlock, DenseMatrix> fixed;
  std::string structure = "custom";
  Objective objective = Objective::Feasible;
  double c1 = 1.0;
  double c2 = 1.0;
  double margin = -1.0;
  double p_min = 1e-6;
  double p_max = 1e2;
  std::optional<double> alpha;
  std::optional<SimConfig> sim;
};

/// Parses a schema_version 1 config; errors carry "source:line: message".
Config parse_config(const std::string& text, const std::string& source = "<config>");
Config load_config(const std::string& path);

Objective parse_objective(const std::string& name);
TopologyMode parse_topology_mode(const std::string& name);

}  // namespace dissnet::cli
