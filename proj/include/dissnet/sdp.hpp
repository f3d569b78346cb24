#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dissnet/linalg.hpp"

namespace dissnet {

enum class VarKind { Scalar, MatrixBlock };

struct DecisionVar {
  int id = -1;
  std::string name;
  VarKind kind = VarKind::Scalar;
  int rows = 1;
  int cols = 1;
  int first_scalar = 0;  // index of entry (0,0) in the flattened scalar list

  int scalar(int r, int c) const { return first_scalar + r * cols + c; }
  int size() const { return rows * cols; }
};

/// Symmetric n x n matrix affine in the scalar decision variables of one
/// SdpProblem. Placements address a block (r0, c0) of the frame; an
/// off-diagonal placement also writes the transpose at (c0, r0). On a
/// diagonal placement (r0 == c0) constant and scalar coefficients must be
/// symmetric and are added once, while a product C*V*D is added as
/// C*V*D + (C*V*D)'.
class AffineMatrixExpr {
 public:
  struct Entry {
    int row;  // row <= col
    int col;
    int scalar;
    double coeff;
  };

  AffineMatrixExpr() = default;
  explicit AffineMatrixExpr(int n);

  int dim() const { return n_; }
  const DenseMatrix& constant() const { return constant_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void add_constant(int r0, int c0, const DenseMatrix& block);
  void add_scalar_term(int r0, int c0, int scalar, const DenseMatrix& coeff);
  /// coeff * C * V * D placed at (r0, c0); V is a matrix-block variable.
  void add_product_term(int r0, int c0, const DenseMatrix& c, const DecisionVar& v,
                        const DenseMatrix& d, double coeff = 1.0);
  /// Raw symmetric entry: v * x_scalar at (r, c) and (c, r), once if r == c.
  void add_entry(int r, int c, int scalar, double v);
  void add_constant_entry(int r, int c, double v);
  /// Adds another expression of the same dimension.
  void add(const AffineMatrixExpr& other, double scale = 1.0);

  /// Merges duplicate entries and drops exact zeros.
  void compress();
  /// Coefficient matrix of one scalar (dense, symmetric).
  DenseMatrix coefficient(int scalar) const;
  std::vector<int> referenced_scalars() const;
  /// Principal submatrix on the given rows (in order).
  AffineMatrixExpr principal(const std::vector<int>& rows) const;

 private:
  void check_block(int r0, int c0, Eigen::Index h, Eigen::Index w) const;
  void push(int r, int c, int scalar, double v);

  int n_ = 0;
  DenseMatrix constant_;
  std::vector<Entry> entries_;
};

struct LinearConstraint {
  std::vector<std::pair<int, double>> terms;  // scalar index, coefficient
  double lower = 0.0;                         // sum >= lower
};

struct PsdConstraint {
  AffineMatrixExpr expr;
  double margin = 0.0;
  std::string name;
};

enum class Sense { Minimize, Maximize };

struct ScalarInfo {
  int var = -1;
  int row = 0;
  int col = 0;
  std::optional<double> lower;
  std::optional<double> upper;
  std::optional<double> fixed;
};

class SdpProblem {
 public:
  int add_scalar(const std::string& name, std::optional<double> lower = std::nullopt,
                 std::optional<double> upper = std::nullopt);
  int add_block(const std::string& name, int rows, int cols);

  const DecisionVar& var(int id) const { return vars_.at(id); }
  const std::vector<DecisionVar>& vars() const { return vars_; }
  std::optional<int> find_var(const std::string& name) const;
  int num_scalars() const { return static_cast<int>(scalars_.size()); }
  const ScalarInfo& scalar_info(int s) const { return scalars_.at(s); }
  std::string scalar_name(int s) const;

  void set_bounds(int scalar, std::optional<double> lower, std::optional<double> upper);
  void fix(int scalar, double value);
  void fix_block(int var_id, const DenseMatrix& value);

  /// margin < 0 selects the default 1e-6 * (1 + ||constant||_inf).
  void add_psd(AffineMatrixExpr expr, double margin = -1.0, std::string name = {});
  void add_linear(LinearConstraint c) { linear_.push_back(std::move(c)); }

  void set_objective(std::vector<std::pair<int, double>> terms, Sense sense);
  void add_objective_term(int scalar, double coeff);
  bool has_objective() const { return !objective_.empty(); }
  Sense sense() const { return sense_; }
  const std::vector<std::pair<int, double>>& objective() const { return objective_; }

  const std::vector<PsdConstraint>& psd() const { return psd_; }
  std::vector<PsdConstraint>& psd() { return psd_; }
  const std::vector<LinearConstraint>& linear() const { return linear_; }

 private:
  std::vector<DecisionVar> vars_;
  std::vector<ScalarInfo> scalars_;
  std::vector<PsdConstraint> psd_;
  std::vector<LinearConstraint> linear_;
  std::vector<std::pair<int, double>> objective_;
  Sense sense_ = Sense::Minimize;
};

enum class SdpStatus { Feasible, Optimal, Infeasible, Unbounded, NumericalFailure };
const char* to_string(SdpStatus s);

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalFailure;
  std::vector<double> values;  // one per scalar, fixed ones included
  double achieved_margin = 0.0;  // min over constraints of lambda_min(F_j(x)) - margin_j
  double objective_value = 0.0;
  double phase1_t = 0.0;
  int iterations = 0;
  std::vector<int> at_box_bound;  // scalars resting on the artificial box
  std::string message;

  bool ok() const { return status == SdpStatus::Feasible || status == SdpStatus::Optimal; }
  double value(int scalar) const { return values.at(scalar); }
  DenseMatrix block(const DecisionVar& v) const;
};

struct SolveOptions {
  double box = 1e4;       // |x| bound for scalars without explicit bounds
  double t_cap = 1.0;     // cap on the feasibility slack
  int max_iterations = 150;
  double tolerance = 1e-9;
};

DenseMatrix evaluate(const AffineMatrixExpr& expr, const std::vector<double>& assignment);

SdpSolution solve(const SdpProblem& problem, const SolveOptions& options = {});

struct SoftTerm {
  int var_id;
  int row;
  int col;
  double weight;
};

/// Adds t >= sum (w_k x_k)^2 through [[t, w'], [w, I]] >= 0 and puts t into a
/// minimization objective. Returns the index of t.
SdpProblem add_soft_quadratic_cost(SdpProblem problem, const std::vector<SoftTerm>& terms,
                                   int* epigraph_scalar = nullptr);

/// Standard dual-form conic layout handed to the backend:
///   maximize b'y  s.t.  C - sum_k y_k A_k = Z,  Z in (PSD blocks) x (nonneg orthant).
struct ConicProblem {
  struct Triplet {
    int block;  // SDP block index, or sdp_dims.size() for the LP block
    int row;
    int col;    // row <= col
    double value;
  };
  std::vector<int> sdp_dims;
  int lp_dim = 0;
  std::vector<DenseMatrix> c_sdp;
  Vector c_lp;
  std::vector<std::vector<Triplet>> a;  // a[k]: entries of A_k
  Vector b;

  int num_vars() const { return static_cast<int>(b.size()); }
};

struct ConicResult {
  bool converged = false;
  bool primal_ray = false;  // certificate that the dual-form problem is infeasible
  bool dual_ray = false;    // certificate that the dual-form objective is unbounded
  Vector y;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  int iterations = 0;
  std::string message;
};

ConicResult solve_conic(const ConicProblem& problem, int max_iterations, double tolerance);

/// Plain-text sparse triplet dump. Header:
///   conic <num_vars> <num_sdp_blocks> <lp_dim> <nnz> dims: d1 d2 ...
/// then one line per nonzero "block row col var coeff" where var 0 is the
/// constant C and var k >= 1 is A_k (upper triangle only), then "b k value".
void write_triplets(std::ostream& os, const ConicProblem& problem);

/// The standard-form feasibility (phase-1) layout of a problem; used for dumps.
ConicProblem to_conic(const SdpProblem& problem, const SolveOptions& options);

}  // namespace dissnet
