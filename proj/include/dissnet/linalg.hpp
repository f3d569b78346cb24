#pragma once

#include <vector>

#include <Eigen/Dense>

namespace dissnet {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A dense matrix together with row/column block partitions.
struct BlockMatrix {
  std::vector<int> row_partition;
  std::vector<int> col_partition;
  DenseMatrix data;

  BlockMatrix() = default;
  BlockMatrix(std::vector<int> rows, std::vector<int> cols);
  BlockMatrix(std::vector<int> rows, std::vector<int> cols, DenseMatrix data);

  int block_rows() const { return static_cast<int>(row_partition.size()); }
  int block_cols() const { return static_cast<int>(col_partition.size()); }
  int row_offset(int i) const;
  int col_offset(int j) const;

  Eigen::Block<DenseMatrix> block(int i, int j);
  Eigen::Block<const DenseMatrix> block(int i, int j) const;
};

/// Square block-block matrix Psi = [Psi^{kl}], k,l = 1..m. Outer group k
/// carries its own inner partition over the same n subsystems, so every
/// Psi^{kl} is an n x n block matrix.
struct BlockBlockMatrix {
  std::vector<std::vector<int>> inner;  // inner[k][i]: size of part i in group k
  DenseMatrix data;

  int outer() const { return static_cast<int>(inner.size()); }
  int inner_count() const;
  int group_offset(int k) const;
  int group_size(int k) const;
};

/// H(A) = A + A'.
DenseMatrix symmetrize(const DenseMatrix& a);

/// Symmetric part (A + A') / 2, used to clean roundoff.
DenseMatrix sym_part(const DenseMatrix& a);

double default_pd_margin(const DenseMatrix& s);

/// True iff S - margin*I has an LDL' factorization with all pivots > 0.
bool is_positive_definite(const DenseMatrix& s, double margin);
bool is_positive_definite(const DenseMatrix& s);

double min_eigenvalue(const DenseMatrix& s);
double max_eigenvalue(const DenseMatrix& s);

/// perm[new_index] = old_index, so BEW(Psi) = P' Psi P with P(perm[r], r) = 1.
std::vector<int> bew_permutation(const BlockBlockMatrix& psi);
std::vector<int> bew_partition(const BlockBlockMatrix& psi);
BlockMatrix bew(const BlockBlockMatrix& psi);

/// [[Theta, Theta*Phi], [Phi'*Theta, Gamma]].
DenseMatrix schur_embed(const DenseMatrix& theta, const DenseMatrix& phi,
                        const DenseMatrix& gamma);

/// -alpha*(Phi'*Theta + Theta*Phi) + alpha^2*Theta + Gamma.
DenseMatrix alpha_embed(const DenseMatrix& theta, const DenseMatrix& phi,
                        const DenseMatrix& gamma, double alpha);

DenseMatrix block_diagonal(const std::vector<DenseMatrix>& blocks);

}  // namespace dissnet
