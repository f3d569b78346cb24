#include "dissnet/dissipativity.hpp"

#include <gtest/gtest.h>

#include "random_util.hpp"

namespace dissnet {
namespace {

DenseMatrix scalar(double v) { return DenseMatrix::Constant(1, 1, v); }

TEST(SupplyFromKind, L2GainScalar) {
  const SupplyMatrix x = supply_from_kind(L2Gain{2.0}, 1, 1);
  DenseMatrix e(2, 2);
  e << 4, 0, 0, -1;
  EXPECT_EQ(x.full(), e);
}

TEST(SupplyFromKind, PassiveHalfIdentity) {
  const SupplyMatrix x = supply_from_kind(Passive{}, 2, 2);
  EXPECT_EQ(x.x12, 0.5 * DenseMatrix::Identity(2, 2));
  EXPECT_EQ(x.x11, DenseMatrix::Zero(2, 2));
  EXPECT_EQ(x.x22, DenseMatrix::Zero(2, 2));
}

TEST(SupplyFromKind, ShortageOfPassivityGivesPositiveX11) {
  const SupplyMatrix x = supply_from_kind(StrictlyPassive{-0.5, -1.0}, 1, 1);
  EXPECT_EQ(x.x11(0, 0), 0.5);
  EXPECT_EQ(x.x22(0, 0), 1.0);
  EXPECT_TRUE(check_assumption1({make_profile(0, StrictlyPassive{-0.5, -1.0}, 1, 1)}).ok);
}

TEST(SupplyFromKind, Errors) {
  EXPECT_THROW(supply_from_kind(Passive{}, 1, 2), std::invalid_argument);
  EXPECT_THROW(supply_from_kind(StrictlyPassive{1, 1}, 2, 1), std::invalid_argument);
  EXPECT_THROW(supply_from_kind(L2Gain{0.0}, 1, 1), std::invalid_argument);
  EXPECT_THROW(supply_from_kind(L2Gain{-1.0}, 1, 1), std::invalid_argument);
  SupplyMatrix bad = supply_from_kind(L2Gain{1.0}, 1, 1);
  bad.x12 = scalar(1.0);
  EXPECT_THROW(supply_from_kind(General{bad}, 1, 1), std::invalid_argument);
}

TEST(SupplyFromKind, AlwaysSymmetric) {
  std::mt19937 rng(11);
  for (int t = 0; t < 50; ++t) {
    const int n = testutil::uniform_int(rng, 1, 3);
    const double nu = testutil::uniform(rng, -2, 2), rho = testutil::uniform(rng, -2, 2);
    for (const DissipativityKind& k :
         {DissipativityKind{Passive{}}, DissipativityKind{StrictlyPassive{nu, rho}},
          DissipativityKind{L2Gain{testutil::uniform(rng, 0.1, 3)}}}) {
      const DenseMatrix f = supply_from_kind(k, n, n).full();
      EXPECT_EQ(f, f.transpose());
    }
  }
}

TEST(ShiftIfp, Arithmetic) {
  const SupplyMatrix a = shift_ifp(supply_from_kind(StrictlyPassive{0.1, 0.0}, 1, 1), 0.2);
  EXPECT_NEAR(a.x11(0, 0), 0.1, 1e-15);
  const SupplyMatrix b = shift_ifp(supply_from_kind(StrictlyPassive{1.0, 0.3}, 2, 2), 1.5);
  EXPECT_TRUE(b.x11.isApprox(0.5 * DenseMatrix::Identity(2, 2)));
  SubsystemProfile pr{0, 2, 2, b};
  EXPECT_TRUE(check_assumption1({pr}).ok);
}

TEST(ShiftIfp, SmallEpsilonIsNearlyUnchanged) {
  const SupplyMatrix x = supply_from_kind(StrictlyPassive{0.4, 0.2}, 1, 1);
  EXPECT_LT((shift_ifp(x, 1e-12).full() - x.full()).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(ShiftIfp, RejectsNonPassivityForm) {
  EXPECT_THROW(shift_ifp(supply_from_kind(L2Gain{2.0}, 1, 1), 0.1), std::invalid_argument);
  EXPECT_THROW(shift_ifp(supply_from_kind(Passive{}, 1, 1), -0.1), std::invalid_argument);
}

TEST(AssembleScaled, SingleProfileUnitWeight) {
  const SubsystemProfile pr = make_profile(0, StrictlyPassive{0.3, 0.7}, 2, 2);
  const ScaledAggregate s = assemble_scaled({pr}, {1.0});
  EXPECT_EQ(s.x11.data, pr.certificate.x11);
  EXPECT_EQ(s.x12.data, pr.certificate.x12);
  EXPECT_EQ(s.x21.data, pr.certificate.x21);
  EXPECT_EQ(s.x22.data, pr.certificate.x22);
}

TEST(AssembleScaled, TwoL2GainProfiles) {
  const ScaledAggregate s = assemble_scaled(
      {make_profile(0, L2Gain{1.0}, 1, 1), make_profile(1, L2Gain{2.0}, 1, 1)}, {2.0, 3.0});
  DenseMatrix x11 = DenseMatrix::Zero(2, 2), x22 = DenseMatrix::Zero(2, 2);
  x11(0, 0) = 2;
  x11(1, 1) = 12;
  x22(0, 0) = -2;
  x22(1, 1) = -3;
  EXPECT_EQ(s.x11.data, x11);
  EXPECT_EQ(s.x22.data, x22);
}

TEST(AssembleScaled, ZeroWeights) {
  const ScaledAggregate s = assemble_scaled(
      {make_profile(0, Passive{}, 1, 1), make_profile(1, L2Gain{2.0}, 2, 1)}, {0.0, 0.0});
  EXPECT_TRUE(s.x11.data.isZero());
  EXPECT_TRUE(s.x12.data.isZero());
  EXPECT_TRUE(s.x22.data.isZero());
}

TEST(AssembleScaled, Errors) {
  const std::vector<SubsystemProfile> prs = {make_profile(0, L2Gain{1.0}, 1, 1)};
  EXPECT_THROW(assemble_scaled(prs, {-1.0}), std::invalid_argument);
  EXPECT_THROW(assemble_scaled(prs, {1.0, 2.0}), std::invalid_argument);
}

TEST(AssembleScaled, LinearInWeights) {
  std::mt19937 rng(12);
  std::vector<SubsystemProfile> prs;
  for (int i = 0; i < 4; ++i) {
    const int n = testutil::uniform_int(rng, 1, 3);
    prs.push_back(make_profile(i, StrictlyPassive{testutil::uniform(rng, -1, 1), 0.5}, n, n));
  }
  std::vector<double> a, b, ab;
  for (int i = 0; i < 4; ++i) {
    a.push_back(testutil::uniform(rng, 0, 3));
    b.push_back(testutil::uniform(rng, 0, 3));
    ab.push_back(a.back() + b.back());
  }
  const ScaledAggregate sa = assemble_scaled(prs, a), sb = assemble_scaled(prs, b),
                        sab = assemble_scaled(prs, ab);
  EXPECT_LT((sab.x11.data - sa.x11.data - sb.x11.data).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((sab.x12.data - sa.x12.data - sb.x12.data).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((sab.x22.data - sa.x22.data - sb.x22.data).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(RatioBlocks, L2GainIsZero) {
  const RatioBlocks r =
      ratio_blocks({make_profile(0, L2Gain{2.0}, 1, 1), make_profile(1, L2Gain{0.5}, 2, 2)});
  EXPECT_TRUE(r.x12_ratio.data.isZero());
  EXPECT_TRUE(r.x21_ratio.data.isZero());
}

TEST(RatioBlocks, StrictlyPassiveScalar) {
  const RatioBlocks r = ratio_blocks({make_profile(0, StrictlyPassive{-1.0, 0.5}, 1, 1)});
  EXPECT_DOUBLE_EQ(r.x12_ratio.data(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(r.x21_ratio.data(0, 0), 0.5);
}

TEST(RatioBlocks, SingularX11Throws) {
  EXPECT_THROW(ratio_blocks({make_profile(0, Passive{}, 1, 1)}), std::invalid_argument);
}

TEST(RatioBlocks, ScaleInvariantFromAggregates) {
  const std::vector<SubsystemProfile> prs = {make_profile(0, StrictlyPassive{-1.0, 0.5}, 1, 1),
                                             make_profile(1, StrictlyPassive{-0.25, 2.0}, 1, 1)};
  const ScaledAggregate a = assemble_scaled(prs, {1.0, 1.0});
  const ScaledAggregate b = assemble_scaled(prs, {7.0, 7.0});
  const DenseMatrix ra = a.x11.data.inverse() * a.x12.data;
  const DenseMatrix rb = b.x11.data.inverse() * b.x12.data;
  EXPECT_EQ(ra, rb);
  EXPECT_EQ(ra, ratio_blocks(prs).x12_ratio.data);
}

TEST(Assumptions, L2GainProfilesPass) {
  EXPECT_TRUE(
      check_assumption1({make_profile(0, L2Gain{2.0}, 1, 1), make_profile(1, L2Gain{0.3}, 1, 1)})
          .ok);
}

TEST(Assumptions, OfpGlobalSpecPasses) {
  EXPECT_TRUE(check_assumption2(supply_from_kind(StrictlyPassive{0.0, 0.5}, 2, 2)).ok);
  EXPECT_FALSE(check_assumption2(supply_from_kind(Passive{}, 2, 2)).ok);
}

TEST(Assumptions, PassiveFailsWithSuggestion) {
  const AssumptionReport r =
      check_assumption1({make_profile(3, L2Gain{1.0}, 1, 1), make_profile(7, Passive{}, 1, 1)});
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.offenders, std::vector<int>{7});
  EXPECT_NE(r.message.find("shift_ifp"), std::string::npos);
  EXPECT_NE(r.message.find("negative-X11"), std::string::npos);
}

}  // namespace
}  // namespace dissnet
