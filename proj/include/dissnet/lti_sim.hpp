#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dissnet/nsc.hpp"

namespace dissnet {

/// G(s) = (a s + b) / (s + c) * exp(-d s), realized as x' = -c x + u,
/// yhat = (b - a c) x + a u, y(t) = yhat(t - d).
struct FirstOrderDelaySISO {
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
  double d = 0.0;

  double feedthrough() const { return a; }
  double output_gain() const { return b - a * c; }
  double dc_gain() const { return b / c; }
};

struct Excitation {
  double start = 1.0;
  double width = 5.0;
  double amplitude = 1.0;

  double at(double t) const { return (t >= start && t < start + width) ? amplitude : 0.0; }
};

struct ClosedLoop {
  std::vector<FirstOrderDelaySISO> controllers;
  std::vector<FirstOrderDelaySISO> plants;  // empty for variants 1 and 2
  DenseMatrix m;  // stacked [u; ubar; z] = m * [y; ybar; w]
  int n_w = 0;
  int n_z = 0;
  double dt = 0.01;
  double horizon = 100.0;
  Excitation excitation;
  /// Static feedback w = excitation - k_sys * z (requires n_w == n_z).
  std::optional<double> k_sys;
};

ClosedLoop make_closed_loop(const NSCProblem& problem, const InterconnectionMatrix& m,
                            const std::vector<FirstOrderDelaySISO>& controllers,
                            const std::vector<FirstOrderDelaySISO>& plants = {});

struct TimeSeries {
  std::vector<double> t;
  std::vector<std::string> channels;  // y1.., ybar1.., w1.., z1.., u1.., ubar1..
  DenseMatrix data;                   // one row per time step
  bool diverged = false;

  int steps() const { return static_cast<int>(t.size()); }
  std::vector<int> columns(const std::string& port) const;
  void write_csv(std::ostream& out) const;
};

TimeSeries simulate(const ClosedLoop& loop);

/// Single-system response to an arbitrary input signal.
std::vector<double> simulate_siso(const FirstOrderDelaySISO& sys,
                                  const std::function<double(double)>& input, double dt,
                                  double horizon);

struct DecayReport {
  bool decayed = false;
  double ratio = 1.0;
};

/// Late-window peak over overall peak on the given ports.
DecayReport decay_metric(const TimeSeries& ts,
                         const std::vector<std::string>& ports = {"y", "ybar", "z"});

TimeSeries feedback_gain_demo(const ClosedLoop& nsc2_loop, double k_sys);

struct StudyCatalog {
  std::vector<FirstOrderDelaySISO> controllers;
  std::vector<FirstOrderDelaySISO> plants;
  std::vector<double> gamma_sq;
  std::vector<double> rho_bar;
  DenseMatrix adjacency;
  DenseMatrix cost;
  double plant_ifp_shift = 0.01;  // plants are certified as IFP(-shift), OFP(rho_bar)
};

StudyCatalog builtin_study();

/// NSC instance of the study. Variant 2 defaults Y to StrictlyPassive(0, 1)
/// and variant 4 to L2Gain(1); pass `y` to override.
NSCProblem study_problem(const StudyCatalog& study, int variant,
                         std::optional<TopologyMode> topology = std::nullopt,
                         std::optional<SupplyMatrix> y = std::nullopt);

}  // namespace dissnet
