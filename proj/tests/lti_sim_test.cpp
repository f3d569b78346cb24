#include "dissnet/lti_sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "dissnet/analysis.hpp"
#include "dissnet/synthesis.hpp"
#include "study_fixtures.hpp"

namespace dissnet {
namespace {

double gain_at(const FirstOrderDelaySISO& s, double w) {
  const std::complex<double> jw(0.0, w);
  return std::abs((s.a * jw + s.b) / (jw + s.c));
}

TimeSeries synthetic(const std::function<double(double)>& f, double horizon, double dt = 0.01) {
  TimeSeries ts;
  ts.channels = {"y1"};
  const int n = static_cast<int>(std::llround(horizon / dt)) + 1;
  ts.data.resize(n, 1);
  for (int k = 0; k < n; ++k) {
    ts.t.push_back(k * dt);
    ts.data(k, 0) = f(k * dt);
  }
  return ts;
}

TEST(Catalog, PublishedValues) {
  const StudyCatalog st = builtin_study();
  ASSERT_EQ(st.controllers.size(), 5u);
  ASSERT_EQ(st.plants.size(), 5u);
  const FirstOrderDelaySISO& c1 = st.controllers[0];
  EXPECT_EQ(c1.a, -2.0);
  EXPECT_EQ(c1.b, 1.0);
  EXPECT_EQ(c1.c, 1.0);
  EXPECT_EQ(c1.d, 1.0);
  EXPECT_EQ(st.rho_bar[2], -2.5);
  EXPECT_EQ(st.gamma_sq[2], 0.04);
  const std::vector<double> g2 = {4.00, 3.16, 0.04, 1.69, 1.44};
  EXPECT_EQ(st.gamma_sq, g2);
  const std::vector<double> rb = {-0.50, -1.00, -2.50, -2.00, -2.67};
  EXPECT_EQ(st.rho_bar, rb);
  EXPECT_EQ(st.adjacency.rows(), 5);
  EXPECT_TRUE(st.adjacency.isApprox(st.adjacency.transpose()));
}

TEST(Siso, StepResponseMatchesClosedForm) {
  const FirstOrderDelaySISO s{-1.3, 0.2, 1.0, 0.0};
  const double dt = 0.01;
  const auto y = simulate_siso(s, [](double) { return 1.0; }, dt, 10.0);
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double t = k * dt;
    const double exact = s.a + (s.b - s.a * s.c) * (1.0 - std::exp(-s.c * t)) / s.c;
    ASSERT_NEAR(y[k], exact, 1e-8) << t;
  }
}

TEST(Siso, FeedthroughAndDcGain) {
  for (const auto& c : builtin_study().controllers) {
    FirstOrderDelaySISO s = c;
    s.d = 0.0;
    const auto y = simulate_siso(s, [](double) { return 1.0; }, 0.01, 60.0);
    EXPECT_DOUBLE_EQ(y.front(), s.feedthrough());
    EXPECT_NEAR(y.back(), s.b / s.c, 1e-9);
  }
}

TEST(Siso, DelayShiftsBySamples) {
  FirstOrderDelaySISO s{0.5, 2.0, 3.0, 0.0};
  auto u = [](double t) { return std::sin(2.0 * t) + (t > 0.3 ? 1.0 : 0.0); };
  const auto y0 = simulate_siso(s, u, 0.01, 5.0);
  s.d = 0.8;
  const auto yd = simulate_siso(s, u, 0.01, 5.0);
  for (int k = 0; k < 80; ++k) EXPECT_EQ(yd[k], 0.0);
  for (std::size_t k = 80; k < yd.size(); ++k) ASSERT_DOUBLE_EQ(yd[k], y0[k - 80]);
}

TEST(Siso, DelayNotMultipleOfDtThrows) {
  const FirstOrderDelaySISO s{0.0, 1.0, 1.0, 1.0};
  EXPECT_THROW(simulate_siso(s, [](double) { return 1.0; }, 0.03, 5.0), std::invalid_argument);
}

TEST(Siso, SweptSineGainWithinCertificate) {
  const StudyCatalog st = builtin_study();
  for (std::size_t i = 0; i < st.controllers.size(); ++i) {
    const FirstOrderDelaySISO& s = st.controllers[i];
    const double gamma = std::sqrt(st.gamma_sq[i]);
    double peak = 0.0;
    for (int e = -13; e <= 8; ++e) {
      const double w = std::pow(10.0, e / 4.0);
      const double dt = w > 10.0 ? 0.001 : 0.01;
      const double period = 2.0 * std::numbers::pi / w;
      const double settle = 20.0 / s.c + s.d;
      const double horizon = settle + 2.0 * period;
      const auto y = simulate_siso(s, [w](double t) { return std::sin(w * t); }, dt, horizon);
      double amp = 0.0;
      const auto from = static_cast<std::size_t>((horizon - period) / dt);
      for (std::size_t k = from; k < y.size(); ++k) amp = std::max(amp, std::abs(y[k]));
      EXPECT_NEAR(amp, gain_at(s, w), 0.01 * gain_at(s, w) + 1e-6) << i << " w=" << w;
      peak = std::max(peak, amp);
    }
    EXPECT_LE(peak, 1.02 * gamma) << "controller " << i;
  }
}

TEST(ClosedLoop, IdentityDiverges) {
  const StudyCatalog st = builtin_study();
  const NSCProblem p = study_problem(st, 1);
  const TimeSeries ts = simulate(make_closed_loop(p, fixtures::uy(p, DenseMatrix::Identity(5, 5)), st.controllers));
  EXPECT_TRUE(ts.diverged);
  EXPECT_FALSE(decay_metric(ts, {"y"}).decayed);
}

TEST(ClosedLoop, ZeroDecays) {
  const StudyCatalog st = builtin_study();
  const NSCProblem p = study_problem(st, 1);
  const TimeSeries ts = simulate(make_closed_loop(p, zero_interconnection(p), st.controllers));
  EXPECT_FALSE(ts.diverged);
  EXPECT_TRUE(decay_metric(ts, {"y"}).decayed);
}

TEST(ClosedLoop, PublishedHardMatrixDecays) {
  const StudyCatalog st = builtin_study();
  const NSCProblem p = study_problem(st, 1);
  const TimeSeries ts = simulate(make_closed_loop(p, fixtures::uy(p, fixtures::hard_m_uy()), st.controllers));
  EXPECT_TRUE(decay_metric(ts, {"y"}).decayed);
}

TEST(ClosedLoop, HalvingDtKeepsDecayRatio) {
  const StudyCatalog st = builtin_study();
  const NSCProblem p1 = study_problem(st, 1);
  const NSCProblem p3 = study_problem(st, 3);
  const SynthesisResult r3 = synth_nsc3(SynthesisRequest{.problem = p3});
  ASSERT_TRUE(r3.ok());
  std::vector<ClosedLoop> loops = {make_closed_loop(p1, fixtures::uy(p1, fixtures::hard_m_uy()), st.controllers),
                                   make_closed_loop(p3, r3.m, st.controllers, st.plants)};
  for (ClosedLoop& loop : loops) {
    const DecayReport a = decay_metric(simulate(loop));
    loop.dt /= 2.0;
    const DecayReport b = decay_metric(simulate(loop));
    ASSERT_TRUE(a.decayed && b.decayed);
    EXPECT_LT(std::abs(a.ratio - b.ratio), 0.1 * a.ratio);
  }
}

TEST(ClosedLoop, SingularAlgebraicLoopNamesChannels) {
  NSCProblem p = fixtures::scalar_nsc1(1.0);
  const std::vector<FirstOrderDelaySISO> c = {{1.0, 1.0, 1.0, 0.0}};
  try {
    simulate(make_closed_loop(p, fixtures::uy(p, DenseMatrix::Identity(1, 1)), c));
    FAIL() << "expected a throw";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("0"), std::string::npos);
  }
}

TEST(ClosedLoop, CsvExport) {
  const StudyCatalog st = builtin_study();
  const NSCProblem p = study_problem(st, 1);
  ClosedLoop loop = make_closed_loop(p, zero_interconnection(p), st.controllers);
  loop.horizon = 2.0;
  const TimeSeries ts = simulate(loop);
  std::ostringstream os;
  ts.write_csv(os);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("t,y1,y2,y3,y4,y5", 0), 0u) << header;
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, ts.steps());
  EXPECT_EQ(ts.steps(), 201);
}

TEST(DecayMetric, ExponentialDecay) {
  const DecayReport r = decay_metric(synthetic([](double t) { return std::exp(-t); }, 50.0), {"y"});
  EXPECT_TRUE(r.decayed);
  EXPECT_NEAR(r.ratio, std::exp(-40.0), 1e-3 * std::exp(-40.0));
}

TEST(DecayMetric, ConstantDoesNotDecay) {
  const DecayReport r = decay_metric(synthetic([](double) { return 3.0; }, 50.0), {"y"});
  EXPECT_FALSE(r.decayed);
  EXPECT_DOUBLE_EQ(r.ratio, 1.0);
}

TEST(DecayMetric, Errors) {
  EXPECT_THROW(decay_metric(TimeSeries{}, {"y"}), std::invalid_argument);
  EXPECT_THROW(decay_metric(synthetic([](double) { return 1.0; }, 10.0), {"y"}), std::invalid_argument);
  EXPECT_THROW(decay_metric(synthetic([](double) { return 1.0; }, 50.0), {"z"}), std::invalid_argument);
}

TEST(DecayMetric, DivergedNeverDecays) {
  TimeSeries ts = synthetic([](double t) { return std::exp(-t); }, 50.0);
  ts.diverged = true;
  EXPECT_FALSE(decay_metric(ts, {"y"}).decayed);
}

class FeedbackGain : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const StudyCatalog st = builtin_study();
    SynthesisRequest q;
    q.problem = study_problem(st, 2);
    q.objective = Objective::MaxPassivity;
    q.fixed = {{MBlock::UW, DenseMatrix::Identity(5, 5)}, {MBlock::ZY, DenseMatrix::Identity(5, 5)}};
    const SynthesisResult r = synth_optimal(q);
    ASSERT_TRUE(r.ok() && r.indices.rho);
    rho_ = *r.indices.rho;
    loop_ = new ClosedLoop(make_closed_loop(q.problem, r.m, st.controllers));
  }
  static void TearDownTestSuite() { delete loop_; }
  static inline double rho_ = 0.0;
  static inline ClosedLoop* loop_ = nullptr;
};

TEST_F(FeedbackGain, PassiveGainDecays) {
  const TimeSeries ts = feedback_gain_demo(*loop_, -rho_ + 1.0);
  EXPECT_FALSE(ts.diverged);
  EXPECT_TRUE(decay_metric(ts, {"z"}).decayed);
}

TEST_F(FeedbackGain, NonPassiveGainDiverges) {
  const TimeSeries ts = feedback_gain_demo(*loop_, -rho_ - 1.0);
  EXPECT_TRUE(ts.diverged);
}

TEST_F(FeedbackGain, ZeroGainBounded) {
  const TimeSeries ts = feedback_gain_demo(*loop_, 0.0);
  EXPECT_FALSE(ts.diverged);
}

TEST_F(FeedbackGain, NeedsMatchingPorts) {
  ClosedLoop l = *loop_;
  l.n_w = 0;
  EXPECT_THROW(feedback_gain_demo(l, 1.0), std::invalid_argument);
}

}  // namespace
}  // namespace dissnet
