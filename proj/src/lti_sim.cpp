#include "dissnet/lti_sim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/LU>

namespace dissnet {

namespace {

constexpr double kDivergence = 1e6;

int delay_samples(double d, double dt) {
  const double k = d / dt;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-9 * std::max(1.0, k)) {
    throw std::invalid_argument("delay " + std::to_string(d) + " is not a multiple of dt");
  }
  return static_cast<int>(r);
}

int total(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }

}  // namespace

ClosedLoop make_closed_loop(const NSCProblem& problem, const InterconnectionMatrix& m,
                            const std::vector<FirstOrderDelaySISO>& controllers,
                            const std::vector<FirstOrderDelaySISO>& plants) {
  for (const auto& s : problem.subsystems) {
    if (s.input_dim != 1 || s.output_dim != 1) throw std::invalid_argument("simulation needs SISO subsystems");
  }
  if (static_cast<int>(controllers.size()) != problem.size()) {
    throw std::invalid_argument("controller count does not match the problem");
  }
  if (problem.has_plants() && plants.size() != controllers.size()) {
    throw std::invalid_argument("plant count does not match the problem");
  }
  ClosedLoop loop;
  loop.controllers = controllers;
  if (problem.has_plants()) loop.plants = plants;
  loop.m = stacked(problem, m);
  loop.n_w = total(problem.col_partition(ColGroup::W));
  loop.n_z = total(problem.row_partition(RowGroup::Z));
  return loop;
}

std::vector<int> TimeSeries::columns(const std::string& port) const {
  std::vector<int> out;
  for (int k = 0; k < static_cast<int>(channels.size()); ++k) {
    const std::string& c = channels[k];
    std::size_t e = c.size();
    while (e > 0 && std::isdigit(static_cast<unsigned char>(c[e - 1]))) --e;
    if (c.compare(0, e, port) == 0 && e == port.size()) out.push_back(k);
  }
  return out;
}

void TimeSeries::write_csv(std::ostream& out) const {
  out << "t";
  for (const auto& c : channels) out << ',' << c;
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int k = 0; k < steps(); ++k) {
    out << t[k];
    for (int j = 0; j < data.cols(); ++j) out << ',' << data(k, j);
    out << '\n';
  }
}

namespace {

// Integrator state shared by simulate and simulate_siso.
class Simulator {
 public:
  explicit Simulator(const ClosedLoop& loop) : loop_(loop) {
    systems_ = loop.controllers;
    systems_.insert(systems_.end(), loop.plants.begin(), loop.plants.end());
    n_ = static_cast<int>(systems_.size());
    nv_ = n_ + loop.n_w;
    if (loop.m.rows() != n_ + loop.n_z || loop.m.cols() != nv_) {
      throw std::invalid_argument("interconnection size does not match the loop");
    }
    if (loop.k_sys && loop.n_w != loop.n_z) {
      throw std::invalid_argument("feedback demo needs dim w == dim z");
    }
    if (loop.dt <= 0 || loop.horizon <= 0) throw std::invalid_argument("dt and horizon must be positive");
    for (const auto& s : systems_) delays_.push_back(delay_samples(s.d, loop.dt));
    steps_ = static_cast<int>(std::llround(loop.horizon / loop.dt)) + 1;
    history_.assign(n_, std::vector<double>(steps_, 0.0));

    // Static part of the algebraic loop: v = k + F v.
    DenseMatrix f = DenseMatrix::Zero(nv_, nv_);
    for (int i = 0; i < n_; ++i) {
      if (delays_[i] == 0) f.row(i) = systems_[i].feedthrough() * loop.m.row(i);
    }
    if (loop.k_sys) f.bottomRows(loop.n_w) = -*loop.k_sys * loop.m.bottomRows(loop.n_z);
    lu_.compute(DenseMatrix::Identity(nv_, nv_) - f);
    if (lu_.rcond() < 1e-12) {
      std::string ch;
      for (int i = 0; i < n_; ++i) {
        if (delays_[i] == 0 && systems_[i].feedthrough() != 0.0) ch += " " + std::to_string(i);
      }
      throw std::runtime_error("singular algebraic loop through feedthrough channels:" + ch);
    }
  }

  int steps() const { return steps_; }
  int channels() const { return n_; }

  // Solves the algebraic loop at time index position `pos` (may be fractional:
  // k + 0.5 for RK4 midpoints) for state x. Returns v = [y; ybar; w].
  Eigen::VectorXd solve_ports(double pos, double t, const Eigen::VectorXd& x) const {
    Eigen::VectorXd k(nv_);
    for (int i = 0; i < n_; ++i) {
      const auto& s = systems_[i];
      k(i) = delays_[i] == 0 ? s.output_gain() * x(i) : delayed(i, pos - delays_[i]);
    }
    for (int j = 0; j < loop_.n_w; ++j) k(n_ + j) = loop_.excitation.at(t);
    return lu_.solve(k);
  }

  Eigen::VectorXd inputs(double t, const Eigen::VectorXd& v) const {
    Eigen::VectorXd u = loop_.m.topRows(n_) * v;
    if (loop_.n_w == 0) {
      for (int i = 0; i < n_; ++i) u(i) += loop_.excitation.at(t);
    }
    return u;
  }

  Eigen::VectorXd deriv(double pos, double t, const Eigen::VectorXd& x) const {
    const Eigen::VectorXd u = inputs(t, solve_ports(pos, t, x));
    Eigen::VectorXd dx(n_);
    for (int i = 0; i < n_; ++i) dx(i) = -systems_[i].c * x(i) + u(i);
    return dx;
  }

  // Records the undelayed outputs yhat at grid index k.
  void record(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    for (int i = 0; i < n_; ++i) {
      history_[i][k] = systems_[i].output_gain() * x(i) + systems_[i].feedthrough() * u(i);
    }
  }

  const ClosedLoop& loop() const { return loop_; }

 private:
  double delayed(int i, double pos) const {
    if (pos < 0) return 0.0;
    const int lo = static_cast<int>(std::floor(pos));
    const double frac = pos - lo;
    const double a = history_[i][lo];
    return frac == 0.0 ? a : (1.0 - frac) * a + frac * history_[i][lo + 1];
  }

  const ClosedLoop& loop_;
  std::vector<FirstOrderDelaySISO> systems_;
  std::vector<int> delays_;
  std::vector<std::vector<double>> history_;
  Eigen::PartialPivLU<DenseMatrix> lu_;
  int n_ = 0, nv_ = 0, steps_ = 0;
};

}  // namespace

TimeSeries simulate(const ClosedLoop& loop) {
  Simulator sim(loop);
  const int n = sim.channels();
  const int nc = static_cast<int>(loop.controllers.size());
  const int np = n - nc;
  TimeSeries ts;
  auto add = [&](const std::string& name, int count) {
    for (int i = 0; i < count; ++i) ts.channels.push_back(name + std::to_string(i + 1));
  };
  add("y", nc);
  add("ybar", np);
  add("w", loop.n_w);
  add("z", loop.n_z);
  add("u", nc);
  add("ubar", np);
  const int cols = static_cast<int>(ts.channels.size());
  ts.data = DenseMatrix::Zero(sim.steps(), cols);
  ts.t.reserve(sim.steps());

  const double dt = loop.dt;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  int k = 0;
  for (; k < sim.steps(); ++k) {
    const double t = k * dt;
    const Eigen::VectorXd v = sim.solve_ports(k, t, x);
    const Eigen::VectorXd u = sim.inputs(t, v);
    const Eigen::VectorXd z = loop.m.bottomRows(loop.n_z) * v;
    sim.record(k, x, u);
    ts.t.push_back(t);
    Eigen::VectorXd row(cols);
    row << v, z, u;
    ts.data.row(k) = row.transpose();
    if (!row.allFinite() || row.cwiseAbs().maxCoeff() > kDivergence) {
      ts.diverged = true;
      ++k;
      break;
    }
    if (k + 1 == sim.steps()) break;
    const Eigen::VectorXd k1 = sim.deriv(k, t, x);
    const Eigen::VectorXd k2 = sim.deriv(k + 0.5, t + 0.5 * dt, x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = sim.deriv(k + 0.5, t + 0.5 * dt, x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = sim.deriv(k + 1, t + dt, x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (k < sim.steps()) {
    ts.data.conservativeResize(k, Eigen::NoChange);
  }
  return ts;
}

std::vector<double> simulate_siso(const FirstOrderDelaySISO& sys,
                                  const std::function<double(double)>& input, double dt,
                                  double horizon) {
  const int steps = static_cast<int>(std::llround(horizon / dt)) + 1;
  const int delay = delay_samples(sys.d, dt);
  std::vector<double> yhat(steps), y(steps);
  double x = 0.0;
  auto f = [&](double t, double xs) { return -sys.c * xs + input(t); };
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    yhat[k] = sys.output_gain() * x + sys.feedthrough() * input(t);
    y[k] = k >= delay ? yhat[k - delay] : 0.0;
    const double k1 = f(t, x);
    const double k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
    const double k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
    const double k4 = f(t + dt, x + dt * k3);
    x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return y;
}

DecayReport decay_metric(const TimeSeries& ts, const std::vector<std::string>& ports) {
  if (ts.steps() == 0) throw std::invalid_argument("decay_metric: empty series");
  if (!ts.diverged && ts.t.back() - ts.t.front() < 40.0 - 1e-9) {
    throw std::invalid_argument("decay_metric: horizon shorter than 40 s");
  }
  std::vector<int> cols;
  for (const auto& p : ports) {
    const auto c = ts.columns(p);
    cols.insert(cols.end(), c.begin(), c.end());
  }
  if (cols.empty()) throw std::invalid_argument("decay_metric: no matching channels");
  DecayReport r;
  if (ts.diverged) return r;
  const int n = ts.steps();
  const int tail = static_cast<int>(std::floor(0.8 * (n - 1)));
  double overall = 0.0, late = 0.0;
  for (int k = 0; k < n; ++k) {
    for (int c : cols) {
      const double a = std::abs(ts.data(k, c));
      overall = std::max(overall, a);
      if (k >= tail) late = std::max(late, a);
    }
  }
  r.ratio = overall > 0.0 ? late / overall : 0.0;
  r.decayed = r.ratio < 0.05;
  return r;
}

TimeSeries feedback_gain_demo(const ClosedLoop& nsc2_loop, double k_sys) {
  if (nsc2_loop.n_w == 0 || nsc2_loop.n_w != nsc2_loop.n_z) {
    throw std::invalid_argument("feedback demo needs an NSC 2 loop with dim w == dim z");
  }
  ClosedLoop loop = nsc2_loop;
  loop.k_sys = k_sys;
  return simulate(loop);
}

StudyCatalog builtin_study() {
  StudyCatalog s;
  const double ca[] = {-2, -0.3, -0.2, -1.3, -1.2};
  const double cb[] = {1, 16, 0.2, 0.2, 1};
  const double cc[] = {1, 9, 1, 1, 3};
  const double cd[] = {1, 1.2, 0.8, 0.9, 1.1};
  const double pa[] = {1, 1.5, 2, 0.5, 3};
  const double pb[] = {2, 3, 2, 1, 1.5};
  const double pc[] = {-1, -3, -5, -2, -4};
  for (int i = 0; i < 5; ++i) {
    s.controllers.push_back({ca[i], cb[i], cc[i], cd[i]});
    s.plants.push_back({pa[i], pb[i], pc[i], 0.0});
  }
  s.gamma_sq = {4.00, 3.16, 0.04, 1.69, 1.44};
  s.rho_bar = {-0.50, -1.00, -2.50, -2.00, -2.67};
  s.adjacency = DenseMatrix(5, 5);
  s.adjacency << 0, 1, 1, 0, 0,
                 1, 0, 1, 0, 0,
                 1, 1, 0, 1, 1,
                 0, 0, 1, 0, 0,
                 0, 0, 1, 0, 0;
  s.cost = DenseMatrix(5, 5);
  s.cost << 100, 1, 1, 10, 10,
            1, 100, 1, 10, 10,
            1, 1, 100, 1, 1,
            10, 10, 1, 100, 10,
            10, 10, 1, 10, 100;
  return s;
}

NSCProblem study_problem(const StudyCatalog& study, int variant,
                         std::optional<TopologyMode> topology, std::optional<SupplyMatrix> y) {
  if (variant < 1 || variant > 4) throw std::invalid_argument("variant must be 1..4");
  NSCProblem p;
  p.variant = variant;
  const int n = static_cast<int>(study.controllers.size());
  for (int i = 0; i < n; ++i) {
    p.subsystems.push_back(make_profile(i, L2Gain{std::sqrt(study.gamma_sq[i])}, 1, 1));
  }
  if (p.has_plants()) {
    for (int i = 0; i < n; ++i) {
      SubsystemProfile pr = make_profile(i, StrictlyPassive{0.0, study.rho_bar[i]}, 1, 1);
      pr.certificate = shift_ifp(pr.certificate, study.plant_ifp_shift);
      p.plants.push_back(pr);
    }
  }
  if (p.has_exogenous()) {
    p.w_split.assign(n, 1);
    p.z_split.assign(n, 1);
    if (y) {
      p.global_spec = *y;
    } else if (variant == 2) {
      p.global_spec = supply_from_kind(StrictlyPassive{0.0, 1.0}, n, n);
    } else {
      p.global_spec = supply_from_kind(L2Gain{1.0}, n, n);
    }
  }
  if (topology) p.topology = Topology{study.adjacency, study.cost, *topology};
  return p;
}

}  // namespace dissnet
