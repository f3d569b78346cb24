#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dissnet/analysis.hpp"

namespace dissnet {

enum class Objective { Feasible, MaxPassivity, MinL2Gain, SoftTopologyCost };

const char* to_string(Objective o);

struct SynthesisRequest {
  NSCProblem problem;
  StructureTemplate structure;               // Zero/Identity/NegIdentity blocks are fixed
  std::map<MBlock, DenseMatrix> fixed;       // further blocks fixed to given values
  Objective objective = Objective::Feasible;
  double c1 = 1.0;
  double c2 = 1.0;
  bool nonnegative_nu = true;
  double margin = -1.0;
  double p_min = 1e-6;
  double p_max = 1e2;
  bool soft_cost_on_m = false;
  std::optional<double> alpha;  // negative-X11 path: fixed alpha instead of the grid
  SolveOptions solver;
};

struct SynthesisResult {
  SdpStatus status = SdpStatus::NumericalFailure;
  InterconnectionMatrix m;
  std::vector<double> p;
  std::vector<double> pbar;
  Indices indices;
  double margin = 0.0;        // slack above the required margin
  double solve_margin = 0.0;  // margin the LMI was solved at
  std::optional<double> alpha;
  std::optional<double> soft_cost;
  bool verified = false;  // recovered M re-certified through the analysis path
  std::string message;

  bool ok() const { return status == SdpStatus::Feasible || status == SdpStatus::Optimal; }
};

SynthesisResult synthesize(const SynthesisRequest& request);
SynthesisResult synth_nsc1(const SynthesisRequest& request);
SynthesisResult synth_nsc2(const SynthesisRequest& request);
SynthesisResult synth_nsc3(const SynthesisRequest& request);
SynthesisResult synth_nsc4(const SynthesisRequest& request);
/// Index-optimal synthesis; the objective must be MaxPassivity or MinL2Gain.
SynthesisResult synth_optimal(const SynthesisRequest& request);
/// alpha-embedding route for non-positive X11, searching alpha on the grid unless
/// request.alpha is set.
SynthesisResult synth_negative_x11(const SynthesisRequest& request);

/// Block specs implied by a request (template + explicit fixes).
std::map<MBlock, BlockSpec> request_specs(const SynthesisRequest& request);

}  // namespace dissnet
