#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dissnet/nsc.hpp"
#include "dissnet/sdp.hpp"

namespace dissnet {

/// Rectangular matrix affine in problem scalars: constant + sum_t v_t x_{s_t} e_{r_t} e_{c_t}'.
struct LinearMatrix {
  struct Term {
    int scalar;
    int row;
    int col;
    double coeff;
  };
  DenseMatrix constant;
  std::vector<Term> terms;

  static LinearMatrix zero(int rows, int cols);
  static LinearMatrix of_var(const DecisionVar& v);
  int rows() const { return static_cast<int>(constant.rows()); }
  int cols() const { return static_cast<int>(constant.cols()); }
  DenseMatrix evaluate(const std::vector<double>& x) const;
};

/// Places scale * C * L * D at block (r0, c0) of the frame (diagonal placement
/// adds the symmetric sum, see AffineMatrixExpr).
void place(AffineMatrixExpr& e, int r0, int c0, const LinearMatrix& l, const DenseMatrix& c,
           const DenseMatrix& d, double scale = 1.0);
void place(AffineMatrixExpr& e, int r0, int c0, const LinearMatrix& l, double scale = 1.0);

enum class IndexMode { FixedY, MaxPassivity, MinL2Gain };

enum class BlockMode { Fixed, Free };

struct BlockSpec {
  BlockMode mode = BlockMode::Free;
  DenseMatrix value;  // Fixed: the M block
};

struct LmiOptions {
  double margin = -1.0;  // < 0: default relative margin
  double p_min = 1e-6;
  double p_max = 1e2;
  bool normalize = true;  // sum p >= 1
  IndexMode index_mode = IndexMode::FixedY;
  double c1 = 1.0;  // MaxPassivity weights: maximize c1*nu - c2*rho_bar
  double c2 = 1.0;
  bool nonnegative_nu = true;  // MaxPassivity: nu >= 0
  /// alpha-embedding path for non-positive X11 (all input-side groups), fixed alpha.
  std::optional<double> alpha;
  bool soft_cost_on_m = false;
};

/// The assembled embedded LMI of an NSC instance plus the bookkeeping needed
/// to recover M and to decentralize it.
struct NscLmi {
  SdpProblem problem;
  int main_constraint = 0;
  std::vector<int> p;     // scalar index of p_i
  std::vector<int> pbar;  // scalar index of pbar_i
  std::map<MBlock, int> vars;  // free block -> var id (L for input side, M for z side)
  std::map<MBlock, BlockSpec> specs;
  std::optional<int> nu, rho_bar, gamma_sq;  // scalar indices
  std::optional<int> soft_cost;              // epigraph scalar
  BlockBlockMatrix layout;                   // group/agent structure of the main LMI
  std::vector<std::string> group_names;
  std::vector<int> owner;  // per scalar: agent index, or -1 for global variables
};

/// Builds the embedded LMI for the problem with the given per-block specs.
/// Blocks missing from `specs` are Free. Topology hard/soft constraints are
/// applied to free blocks.
NscLmi build_nsc_lmi(const NSCProblem& problem, const std::map<MBlock, BlockSpec>& specs,
                     const LmiOptions& options);

/// Recovers M blocks from a solution: input-side M = (X_p11)^-1 L.
InterconnectionMatrix recover_from_solution(const NSCProblem& problem, const NscLmi& lmi,
                                            const std::vector<double>& values);

/// Exact per-agent solve M_i = (p_i X_i11)^-1 L_i for input-side blocks;
/// z-side blocks are taken verbatim.
InterconnectionMatrix recover_interconnection(const NSCProblem& problem,
                                              const std::map<MBlock, DenseMatrix>& blocks,
                                              const std::vector<double>& p,
                                              const std::vector<double>& pbar);

/// Specs that fix every block to the given interconnection (analysis).
std::map<MBlock, BlockSpec> fixed_specs(const NSCProblem& problem, const InterconnectionMatrix& m);

}  // namespace dissnet
