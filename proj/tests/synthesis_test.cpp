#include "dissnet/synthesis.hpp"

#include <gtest/gtest.h>

#include "dissnet/lti_sim.hpp"
#include "study_fixtures.hpp"

namespace dissnet {
namespace {

const DenseMatrix kI5 = DenseMatrix::Identity(5, 5);

DenseMatrix s1(double v) { return DenseMatrix::Constant(1, 1, v); }

SynthesisRequest request(const NSCProblem& p, Objective o = Objective::Feasible) {
  SynthesisRequest q;
  q.problem = p;
  q.objective = o;
  return q;
}

NSCProblem single_nsc2(const DissipativityKind& sub, const SupplyMatrix& y) {
  NSCProblem p;
  p.variant = 2;
  p.subsystems = {make_profile(0, sub, 1, 1)};
  p.w_split = {1};
  p.z_split = {1};
  p.global_spec = y;
  return p;
}

TEST(SynthNsc1, StudyHardTopologyStabilizes) {
  const StudyCatalog st = builtin_study();
  const SynthesisRequest q = request(study_problem(st, 1, TopologyMode::Hard));
  const SynthesisResult r = synth_nsc1(q);
  ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_TRUE(r.verified);
  EXPECT_TRUE(respects_topology(q.problem, r.m));
  EXPECT_TRUE(analyze_nsc1(q.problem, r.m).certified());
  const TimeSeries ts = simulate(make_closed_loop(q.problem, r.m, st.controllers));
  EXPECT_TRUE(decay_metric(ts, {"y"}).decayed);
}

TEST(SynthNsc1, ScalarSmallGain) {
  for (double g : {0.5, 1.0, 2.0, 4.0}) {
    const SynthesisResult r = synth_nsc1(request(fixtures::scalar_nsc1(g)));
    ASSERT_TRUE(r.ok()) << g;
    EXPECT_LT(std::abs(r.m.at(MBlock::UY).data(0, 0)) * g, 1.0) << g;
  }
}

TEST(SynthNsc1, FullyMaskedIsFeasibleAtZero) {
  NSCProblem p = study_problem(builtin_study(), 1, TopologyMode::Hard);
  p.topology->adjacency.setZero();
  SynthesisRequest q = request(p);
  q.fixed[MBlock::UY] = DenseMatrix::Zero(5, 5);
  const SynthesisResult r = synth_nsc1(q);
  ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_TRUE(r.m.at(MBlock::UY).data.isZero());
}

TEST(SynthNsc1, SoftTopologyCost) {
  SynthesisRequest q = request(study_problem(builtin_study(), 1, TopologyMode::Soft),
                               Objective::SoftTopologyCost);
  const SynthesisResult r = synthesize(q);
  ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_TRUE(r.verified);
  ASSERT_TRUE(r.soft_cost.has_value());
  EXPECT_GE(*r.soft_cost, -1e-9);
}

TEST(SynthNsc1, WrongVariantThrows) {
  EXPECT_THROW(synth_nsc1(request(study_problem(builtin_study(), 2))), std::invalid_argument);
}

TEST(SynthNsc2, StudyFeasibleWithOfpSpec) {
  const NSCProblem p = study_problem(builtin_study(), 2);
  const SynthesisResult r = synth_nsc2(request(p));
  ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_TRUE(r.verified);
  EXPECT_TRUE(analyze_nsc2(p, r.m).certified());
}

TEST(SynthNsc2, SingleSubsystemReduction) {
  // N = 1: a gain-2 subsystem can be made L2(1)-stable from w to z.
  const NSCProblem p = single_nsc2(L2Gain{2.0}, supply_from_kind(L2Gain{1.0}, 1, 1));
  const SynthesisResult r = synth_nsc2(request(p));
  ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_TRUE(analyze_nsc2(p, r.m).certified());
}

TEST(SynthNsc2, FeasibilityMonotoneInRho) {
  // Fixed M_uw = M_zy = I: larger claimed OFP level is harder.
  std::vector<bool> feasible;
  for (double rho : {0.05, 0.1, 0.2, 0.24, 0.27, 0.3, 0.5, 1.0}) {
    SynthesisRequest q = request(study_problem(builtin_study(), 2, std::nullopt,
                                               supply_from_kind(StrictlyPassive{-0.01, rho}, 5, 5)));
    q.fixed = {{MBlock::UW, kI5}, {MBlock::ZY, kI5}};
    feasible.push_back(synth_nsc2(q).ok());
  }
  EXPECT_TRUE(feasible.front());
  EXPECT_FALSE(feasible.back());
  EXPECT_TRUE(std::is_sorted(feasible.begin(), feasible.end(), std::greater<>()));
}

TEST(SynthNsc3, StudyStabilizes) {
  const StudyCatalog st = builtin_study();
  const NSCProblem p = study_problem(st, 3);
  const SynthesisResult r = synth_nsc3(request(p));
  ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_TRUE(r.verified);
  EXPECT_TRUE(analyze_nsc3(p, r.m).certified());
  const TimeSeries ts = simulate(make_closed_loop(p, r.m, st.controllers, st.plants));
  EXPECT_TRUE(decay_metric(ts, {"y", "ybar"}).decayed);
}

TEST(SynthNsc3, StablePlantsDecoupled) {
  NSCProblem p = study_problem(builtin_study(), 3);
  for (auto& pl : p.plants) pl.certificate = supply_from_kind(StrictlyPassive{-0.1, 0.5}, 1, 1);
  SynthesisRequest q = request(p);
  q.fixed = {{MBlock::UbY, DenseMatrix::Zero(5, 5)}, {MBlock::UbYb, DenseMatrix::Zero(5, 5)}};
  const SynthesisResult r = synth_nsc3(q);
  ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_TRUE(r.m.at(MBlock::UbY).data.isZero());
}

TEST(SynthNsc3, SinglePairMatchesGridOracle) {
  const StudyCatalog st = builtin_study();
  NSCProblem p = study_problem(st, 3);
  p.subsystems.resize(1);
  p.plants.resize(1);
  p.topology.reset();
  const bool synth_ok = synth_nsc3(request(p)).ok();
  int certified = 0;
  const std::vector<double> grid = {-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2};
  for (double a : grid)
    for (double b : grid)
      for (double c : grid)
        for (double d : grid) {
          const InterconnectionMatrix m = make_interconnection(
              p, {{MBlock::UY, s1(a)}, {MBlock::UYb, s1(b)}, {MBlock::UbY, s1(c)}, {MBlock::UbYb, s1(d)}});
          certified += analyze_nsc3(p, m).certified();
        }
  EXPECT_TRUE(synth_ok);
  EXPECT_EQ(synth_ok, certified > 0);
}

TEST(SynthNsc4, ApproximateSimulationTemplate) {
  const NSCProblem p = study_problem(builtin_study(), 4);
  SynthesisRequest q = request(p, Objective::MinL2Gain);
  q.structure = template_mask("approximate_simulation", p);
  const SynthesisResult r = synth_nsc4(q);
  ASSERT_TRUE(r.ok()) << r.message;
  ASSERT_TRUE(r.indices.gamma.has_value());
  EXPECT_TRUE(r.verified);
  // template blocks verbatim
  EXPECT_EQ(r.m.at(MBlock::UW).data, kI5);
  EXPECT_EQ(r.m.at(MBlock::ZY).data, kI5);
  EXPECT_EQ(r.m.at(MBlock::ZYb).data, -kI5);
  EXPECT_TRUE(r.m.at(MBlock::UY).data.isZero());
  EXPECT_TRUE(r.m.at(MBlock::UYb).data.isZero());
  EXPECT_TRUE(r.m.at(MBlock::ZW).data.isZero());
  const IndexEstimate e = estimate_indices(p, r.m, IndexMode::MinL2Gain);
  ASSERT_TRUE(e.indices.gamma.has_value());
  EXPECT_NEAR(*e.indices.gamma, *r.indices.gamma, 0.05 * *r.indices.gamma);
}

TEST(SynthNsc4, NoExogenousChannelsReduceToNsc3) {
  NSCProblem p4 = study_problem(builtin_study(), 4);
  p4.w_split.assign(5, 0);
  p4.z_split.assign(5, 0);
  p4.global_spec = SupplyMatrix{DenseMatrix(0, 0), DenseMatrix(0, 0), DenseMatrix(0, 0),
                                DenseMatrix(0, 0)};
  const bool ok4 = synth_nsc4(request(p4)).ok();
  const bool ok3 = synth_nsc3(request(study_problem(builtin_study(), 3))).ok();
  EXPECT_EQ(ok4, ok3);
  EXPECT_TRUE(ok4);
}

TEST(SynthNsc4, FixedNsc3SolutionGainMatchesEstimate) {
  const SynthesisResult r3 = synth_nsc3(request(study_problem(builtin_study(), 3)));
  ASSERT_TRUE(r3.ok());
  const NSCProblem p4 = study_problem(builtin_study(), 4);
  SynthesisRequest q = request(p4, Objective::MinL2Gain);
  for (MBlock b : {MBlock::UY, MBlock::UYb, MBlock::UbY, MBlock::UbYb}) q.fixed[b] = r3.m.at(b).data;
  q.fixed[MBlock::UW] = kI5;
  q.fixed[MBlock::UbW] = DenseMatrix::Zero(5, 5);
  q.fixed[MBlock::ZY] = kI5;
  q.fixed[MBlock::ZYb] = DenseMatrix::Zero(5, 5);
  q.fixed[MBlock::ZW] = DenseMatrix::Zero(5, 5);
  const SynthesisResult r = synth_optimal(q);
  ASSERT_TRUE(r.ok()) << r.message;
  const IndexEstimate e = estimate_indices(p4, r.m, IndexMode::MinL2Gain);
  ASSERT_TRUE(e.indices.gamma && r.indices.gamma);
  EXPECT_LE(*r.indices.gamma, *e.indices.gamma * 1.05);
  EXPECT_GE(*r.indices.gamma, *e.indices.gamma * 0.95);
}

TEST(SynthOptimal, WeightShiftsTowardNu) {
  const NSCProblem p = study_problem(builtin_study(), 2);
  SynthesisRequest a = request(p, Objective::MaxPassivity), b = a;
  b.c1 = 4.0;
  const SynthesisResult ra = synth_optimal(a), rb = synth_optimal(b);
  ASSERT_TRUE(ra.ok() && rb.ok());
  EXPECT_GE(*rb.indices.nu, *ra.indices.nu - 1e-6);
  EXPECT_GT(*rb.indices.nu, 1.0);
}

TEST(SynthOptimal, UnboundedReportedDistinctly) {
  SynthesisRequest q = request(study_problem(builtin_study(), 2), Objective::MaxPassivity);
  q.c1 = 8.0;
  EXPECT_EQ(synth_optimal(q).status, SdpStatus::Unbounded);
}

TEST(SynthOptimal, PassiveSingleSubsystemPassThrough) {
  // w feeds u, y is z: the network is the subsystem itself.
  const NSCProblem p = single_nsc2(Passive{}, supply_from_kind(Passive{}, 1, 1));
  SynthesisRequest q = request(p, Objective::MaxPassivity);
  q.fixed = {{MBlock::UY, s1(0)}, {MBlock::UW, s1(1)}, {MBlock::ZY, s1(1)}, {MBlock::ZW, s1(0)}};
  q.nonnegative_nu = false;
  const SynthesisResult r = synth_optimal(q);
  ASSERT_TRUE(r.ok()) << r.message;
  ASSERT_TRUE(r.indices.nu.has_value());
  // lossless certificate: nu = 0 sits on the boundary, reached up to the margin width
  EXPECT_GE(*r.indices.nu, -1e-5);
}

TEST(SynthOptimal, RequiresIndexObjective) {
  EXPECT_THROW(synth_optimal(request(study_problem(builtin_study(), 2))), std::invalid_argument);
  EXPECT_THROW(synth_optimal(request(study_problem(builtin_study(), 1), Objective::MinL2Gain)),
               std::invalid_argument);
}

NSCProblem skew_pair(double nu) {
  NSCProblem p;
  p.variant = 1;
  p.subsystems = {make_profile(0, StrictlyPassive{nu, 0.5}, 1, 1),
                  make_profile(1, StrictlyPassive{nu, 0.5}, 1, 1)};
  return p;
}

TEST(NegativeX11, ZeroAlphaLeavesGammaPart) {
  // alpha = 0 drops the Theta rows: the LMI reduces to the Gamma block.
  const NSCProblem p = skew_pair(0.2);
  DenseMatrix m(2, 2);
  m << -1, 1, -1, -1;
  LmiOptions lo;
  lo.alpha = 0.0;
  lo.normalize = false;
  lo.p_min = 0.0;
  const NscLmi lmi = build_nsc_lmi(p, fixed_specs(p, fixtures::uy(p, m)), lo);
  std::vector<double> x(lmi.problem.num_scalars(), 0.0);
  for (int k : lmi.p) x[k] = 1.0;
  const DenseMatrix f = evaluate(lmi.problem.psd()[lmi.main_constraint].expr, x);
  const DenseMatrix raw = raw_quadratic_form(p, fixtures::uy(p, m), {1.0, 1.0}, {});
  // Gamma-part: the raw form without the M' X11 M term
  const DenseMatrix quad = -0.2 * m.transpose() * m;
  EXPECT_LT((f - (quad - raw)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NegativeX11, RouteEquivalenceOnHandBuiltM) {
  DenseMatrix m(2, 2);
  m << -1, 1, -1, -1;
  const NSCProblem neg = skew_pair(0.05);   // X11 = -0.05
  const NSCProblem pos = skew_pair(-0.05);  // X11 = +0.05
  const AnalysisResult a = analyze_nsc1(neg, fixtures::uy(neg, m));
  const AnalysisResult b = analyze_nsc1(pos, fixtures::uy(pos, m));
  EXPECT_TRUE(a.certified()) << a.message;
  EXPECT_TRUE(a.alpha.has_value());
  EXPECT_TRUE(b.certified()) << b.message;
  EXPECT_FALSE(b.alpha.has_value());
  SynthesisRequest q = request(neg);
  const SynthesisResult r = synth_negative_x11(q);
  ASSERT_TRUE(r.ok()) << r.message;
  EXPECT_TRUE(r.verified);
}

TEST(NegativeX11, GridFindsScannedInterval) {
  // X11 = -1, X12 = 1/2, X22 = -0.1, m = -1: the alpha-embedded scalar
  // 2*alpha*m - alpha^2 + rho - m is positive on an interval of alpha.
  NSCProblem p;
  p.variant = 1;
  p.subsystems = {make_profile(0, StrictlyPassive{1.0, 0.1}, 1, 1)};
  const DenseMatrix th = s1(-1.0), ph = s1(-1.0);
  const DenseMatrix ga = s1(-(0.5 * -1.0 * 2.0) + 0.1);
  bool scan_hit = false;
  for (double a = -10.0; a <= 10.0; a += 1e-3) scan_hit |= alpha_embed(th, ph, ga, a)(0, 0) > 0;
  ASSERT_TRUE(scan_hit);
  const AnalysisResult r = analyze_nsc1(p, fixtures::uy(p, s1(-1.0)));
  EXPECT_TRUE(r.certified()) << r.message;
  ASSERT_TRUE(r.alpha.has_value());
  EXPECT_GT(alpha_embed(th, ph, ga, *r.alpha)(0, 0), 0.0);
}

TEST(Recover, ScalarArithmetic) {
  const NSCProblem p = fixtures::scalar_nsc1(2.0);
  const InterconnectionMatrix m = recover_interconnection(p, {{MBlock::UY, s1(1.0)}}, {1.0}, {});
  EXPECT_DOUBLE_EQ(m.at(MBlock::UY).data(0, 0), 0.25);
}

TEST(Recover, ZeroL) {
  const NSCProblem p = study_problem(builtin_study(), 3);
  std::map<MBlock, DenseMatrix> l;
  for (MBlock b : {MBlock::UY, MBlock::UYb, MBlock::UbY, MBlock::UbYb}) l[b] = DenseMatrix::Zero(5, 5);
  const InterconnectionMatrix m =
      recover_interconnection(p, l, std::vector<double>(5, 1.0), std::vector<double>(5, 2.0));
  for (const auto& [b, blk] : m.blocks) EXPECT_TRUE(blk.data.isZero()) << block_name(b);
}

TEST(Recover, RoundTripResidual) {
  const NSCProblem p = study_problem(builtin_study(), 1);
  const DenseMatrix l = fixtures::soft_m_uy();
  const std::vector<double> mult = {0.3, 1.0, 2.5, 7.0, 0.01};
  const InterconnectionMatrix m = recover_interconnection(p, {{MBlock::UY, l}}, mult, {});
  const ScaledAggregate xs = assemble_scaled(p.subsystems, mult);
  EXPECT_LT((xs.x11.data * m.at(MBlock::UY).data - l).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Recover, SingularBlockNamesSubsystem) {
  const NSCProblem p = study_problem(builtin_study(), 1);
  try {
    recover_interconnection(p, {{MBlock::UY, kI5}}, {1, 1, 0, 1, 1}, {});
    FAIL() << "expected a throw";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos) << e.what();
  }
}

TEST(Invariants, RoundTripCertificationAcrossVariants) {
  for (int v = 1; v <= 4; ++v) {
    const NSCProblem p = study_problem(builtin_study(), v);
    const SynthesisResult r = synthesize(request(p));
    ASSERT_TRUE(r.ok()) << v << " " << r.message;
    EXPECT_TRUE(r.verified) << v;
    EXPECT_TRUE(analyze(p, r.m).certified()) << v;
  }
}

TEST(Invariants, HardTopologyExactZerosAcrossVariants) {
  for (int v = 1; v <= 4; ++v) {
    const NSCProblem p = study_problem(builtin_study(), v, TopologyMode::Hard);
    const SynthesisResult r = synthesize(request(p));
    ASSERT_TRUE(r.ok()) << v << " " << r.message;
    EXPECT_TRUE(respects_topology(p, r.m)) << v;
  }
}

}  // namespace
}  // namespace dissnet
