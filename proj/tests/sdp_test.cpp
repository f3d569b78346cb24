#include "dissnet/sdp.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "random_util.hpp"

namespace dissnet {
namespace {

SdpProblem two_by_two(double eps) {
  SdpProblem p;
  const int t = p.add_scalar("t");
  AffineMatrixExpr e(2);
  e.add_scalar_term(0, 0, p.var(t).first_scalar, DenseMatrix::Identity(2, 2));
  e.add_constant(0, 1, DenseMatrix::Ones(1, 1));
  p.add_psd(e, eps);
  p.set_objective({{p.var(t).first_scalar, 1.0}}, Sense::Minimize);
  return p;
}

bool verifies(const SdpProblem& p, const SdpSolution& s) {
  for (const PsdConstraint& c : p.psd()) {
    const DenseMatrix f = evaluate(c.expr, s.values);
    if (min_eigenvalue(f) < c.margin - 1e-9) return false;
  }
  return true;
}

TEST(SdpSolve, TwoByTwoEigenvalueFormula) {
  const double eps = 1e-3;
  const SdpProblem p = two_by_two(eps);
  const SdpSolution s = solve(p);
  ASSERT_EQ(s.status, SdpStatus::Optimal) << s.message;
  EXPECT_NEAR(s.value(0), 1.0 + eps, 1e-6);
  EXPECT_TRUE(verifies(p, s));
}

TEST(SdpSolve, ScalarFeasibility) {
  SdpProblem p;
  const int v = p.add_scalar("p");
  AffineMatrixExpr e(1);
  e.add_scalar_term(0, 0, p.var(v).first_scalar, DenseMatrix::Ones(1, 1));
  e.add_constant(0, 0, -DenseMatrix::Ones(1, 1));
  p.add_psd(e, 0.0);
  const SdpSolution s = solve(p);
  ASSERT_EQ(s.status, SdpStatus::Feasible) << s.message;
  EXPECT_GE(s.value(0), 1.0 - 1e-9);
}

TEST(SdpSolve, DetectsInfeasibility) {
  // p <= -1 and p >= 1 through two 1x1 LMIs.
  SdpProblem p;
  const int v = p.add_scalar("p");
  const int s0 = p.var(v).first_scalar;
  AffineMatrixExpr a(1), b(1);
  a.add_scalar_term(0, 0, s0, DenseMatrix::Ones(1, 1));
  a.add_constant(0, 0, -DenseMatrix::Ones(1, 1));
  b.add_scalar_term(0, 0, s0, -DenseMatrix::Ones(1, 1));
  b.add_constant(0, 0, -DenseMatrix::Ones(1, 1));
  p.add_psd(a, 0.0);
  p.add_psd(b, 0.0);
  EXPECT_EQ(solve(p).status, SdpStatus::Infeasible);
}

TEST(SdpSolve, MatrixBlockVariable) {
  // [[I, X], [X', I]] >= 0.1 I maximizing trace-weighted X(0,0): X(0,0) -> 0.9.
  SdpProblem p;
  const int x = p.add_block("X", 2, 2);
  AffineMatrixExpr e(4);
  e.add_constant(0, 0, DenseMatrix::Identity(2, 2));
  e.add_constant(2, 2, DenseMatrix::Identity(2, 2));
  e.add_product_term(0, 2, DenseMatrix::Identity(2, 2), p.var(x), DenseMatrix::Identity(2, 2));
  p.add_psd(e, 0.1);
  p.set_objective({{p.var(x).scalar(0, 0), 1.0}}, Sense::Maximize);
  const SdpSolution s = solve(p);
  ASSERT_EQ(s.status, SdpStatus::Optimal) << s.message;
  EXPECT_NEAR(s.block(p.var(x))(0, 0), 0.9, 1e-6);
  EXPECT_TRUE(verifies(p, s));
}

TEST(SdpSolve, Deterministic) {
  const SdpProblem p = two_by_two(1e-2);
  const SdpSolution a = solve(p), b = solve(p);
  EXPECT_EQ(a.status, b.status);
  EXPECT_NEAR(a.objective_value, b.objective_value, 1e-9);
}

TEST(SdpSolve, LooserMarginNeverWorse) {
  double prev = -1e300;
  for (double eps : {0.5, 0.1, 1e-2, 1e-4}) {
    const SdpSolution s = solve(two_by_two(eps));
    ASSERT_TRUE(s.ok());
    // minimizing: the optimum does not increase as the margin shrinks
    if (prev > -1e300) EXPECT_LE(s.objective_value, prev + 1e-9);
    prev = s.objective_value;
  }
}

TEST(SdpSolve, RandomLmisRoundTrip) {
  std::mt19937 rng(21);
  int solved = 0;
  for (int t = 0; t < 20; ++t) {
    // F(x) = F0 + sum x_k F_k with F0 = I, so x = 0 is strictly feasible.
    SdpProblem p;
    const int n = 4;
    AffineMatrixExpr e(n);
    e.add_constant(0, 0, DenseMatrix::Identity(n, n));
    std::vector<std::pair<int, double>> obj;
    for (int k = 0; k < 3; ++k) {
      const int v = p.add_scalar("x" + std::to_string(k), -5.0, 5.0);
      e.add_scalar_term(0, 0, p.var(v).first_scalar, testutil::random_symmetric(rng, n));
      obj.push_back({p.var(v).first_scalar, testutil::uniform(rng, -1, 1)});
    }
    p.add_psd(e);
    p.set_objective(obj, Sense::Maximize);
    const SdpSolution s = solve(p);
    if (!s.ok()) continue;
    ++solved;
    EXPECT_TRUE(verifies(p, s)) << "trial " << t;
  }
  EXPECT_EQ(solved, 20);
}

TEST(Evaluate, ZeroAssignmentGivesConstant) {
  SdpProblem p;
  const int v = p.add_scalar("p");
  AffineMatrixExpr e(2);
  DenseMatrix c(2, 2);
  c << 1, 2, 2, 3;
  e.add_constant(0, 0, c);
  e.add_scalar_term(0, 0, p.var(v).first_scalar, DenseMatrix::Identity(2, 2));
  EXPECT_EQ(evaluate(e, {0.0}), c);
}

TEST(Evaluate, ScaledIdentity) {
  AffineMatrixExpr e(3);
  e.add_scalar_term(0, 0, 0, DenseMatrix::Identity(3, 3));
  EXPECT_EQ(evaluate(e, {3.0}), 3.0 * DenseMatrix::Identity(3, 3));
}

TEST(Evaluate, MissingVariableThrows) {
  AffineMatrixExpr e(1);
  e.add_scalar_term(0, 0, 2, DenseMatrix::Ones(1, 1));
  EXPECT_THROW(evaluate(e, {1.0}), std::out_of_range);
}

TEST(Evaluate, LinearInAssignment) {
  std::mt19937 rng(22);
  SdpProblem p;
  const int x = p.add_block("X", 2, 3);
  AffineMatrixExpr e(5);
  e.add_product_term(0, 2, testutil::gaussian(rng, 2, 2), p.var(x), testutil::gaussian(rng, 3, 3));
  e.add_product_term(0, 0, testutil::gaussian(rng, 2, 2), p.var(x), testutil::gaussian(rng, 3, 2));
  std::vector<double> a(6), b(6), ab(6);
  for (int k = 0; k < 6; ++k) {
    a[k] = testutil::uniform(rng, -1, 1);
    b[k] = testutil::uniform(rng, -1, 1);
    ab[k] = a[k] + b[k];
  }
  const DenseMatrix lin = evaluate(e, a) + evaluate(e, b) - evaluate(e, {0, 0, 0, 0, 0, 0});
  EXPECT_LT((lin - evaluate(e, ab)).cwiseAbs().maxCoeff(), 1e-12);
  const DenseMatrix v = evaluate(e, a);
  EXPECT_EQ(v, v.transpose());
}

TEST(SoftCost, SingleTermMatchesSquare) {
  SdpProblem p;
  const int x = p.add_block("M", 1, 1);
  p.fix_block(x, DenseMatrix::Constant(1, 1, 0.7));
  int t = -1;
  const SdpProblem q = add_soft_quadratic_cost(p, {{x, 0, 0, 1.0}}, &t);
  const SdpSolution s = solve(q);
  ASSERT_TRUE(s.ok()) << s.message;
  EXPECT_NEAR(s.value(t), 0.49, 1e-6);
}

TEST(SoftCost, EmptyTermsUnchanged) {
  const SdpProblem p = two_by_two(1e-3);
  const SdpProblem q = add_soft_quadratic_cost(p, {});
  EXPECT_EQ(q.num_scalars(), p.num_scalars());
  EXPECT_EQ(q.psd().size(), p.psd().size());
}

TEST(SoftCost, RejectsNonPositiveWeight) {
  SdpProblem p;
  const int x = p.add_block("M", 1, 1);
  EXPECT_THROW(add_soft_quadratic_cost(p, {{x, 0, 0, 0.0}}), std::invalid_argument);
}

TEST(SoftCost, HeavierWeightShrinks) {
  SdpProblem p;
  const int x = p.add_block("M", 1, 2);
  p.add_linear({{{p.var(x).scalar(0, 0), 1.0}, {p.var(x).scalar(0, 1), 1.0}}, 1.0});
  int t = -1;
  const SdpProblem q = add_soft_quadratic_cost(p, {{x, 0, 0, 1.0}, {x, 0, 1, 10.0}}, &t);
  const SdpSolution s = solve(q);
  ASSERT_TRUE(s.ok()) << s.message;
  const double x1 = s.value(p.var(x).scalar(0, 0)), x2 = s.value(p.var(x).scalar(0, 1));
  EXPECT_LT(x2, x1);
  // the hand-built point (0.5, 0.5) costs 0.25 + 25
  EXPECT_LT(s.value(t), 25.25);
  EXPECT_NEAR(x2, 1.0 / 101.0, 1e-4);
}

TEST(Triplets, HeaderAndRows) {
  const SdpProblem p = two_by_two(1e-3);
  std::ostringstream os;
  write_triplets(os, to_conic(p, {}));
  const std::string out = os.str();
  EXPECT_EQ(out.rfind("conic ", 0), 0u);
  EXPECT_NE(out.find("dims:"), std::string::npos);
  EXPECT_NE(out.find("\nb "), std::string::npos);
}

}  // namespace
}  // namespace dissnet
