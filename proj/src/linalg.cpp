#include "dissnet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dissnet {

namespace {

int sum(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }

void check_partition(const std::vector<int>& part, int dim, const char* what) {
  for (int s : part) {
    if (s < 0) throw std::invalid_argument(std::string(what) + ": negative block size");
  }
  if (sum(part) != dim) {
    throw std::invalid_argument(std::string(what) + ": partition sum " +
                                std::to_string(sum(part)) + " != dimension " +
                                std::to_string(dim));
  }
}

void require_square(const DenseMatrix& a, const char* what) {
  if (a.rows() != a.cols()) throw std::invalid_argument(std::string(what) + ": matrix is not square");
}

}  // namespace

BlockMatrix::BlockMatrix(std::vector<int> rows, std::vector<int> cols)
    : row_partition(std::move(rows)), col_partition(std::move(cols)) {
  data = DenseMatrix::Zero(sum(row_partition), sum(col_partition));
  check_partition(row_partition, static_cast<int>(data.rows()), "BlockMatrix rows");
  check_partition(col_partition, static_cast<int>(data.cols()), "BlockMatrix cols");
}

BlockMatrix::BlockMatrix(std::vector<int> rows, std::vector<int> cols, DenseMatrix d)
    : row_partition(std::move(rows)), col_partition(std::move(cols)), data(std::move(d)) {
  check_partition(row_partition, static_cast<int>(data.rows()), "BlockMatrix rows");
  check_partition(col_partition, static_cast<int>(data.cols()), "BlockMatrix cols");
}

int BlockMatrix::row_offset(int i) const {
  return std::accumulate(row_partition.begin(), row_partition.begin() + i, 0);
}

int BlockMatrix::col_offset(int j) const {
  return std::accumulate(col_partition.begin(), col_partition.begin() + j, 0);
}

Eigen::Block<DenseMatrix> BlockMatrix::block(int i, int j) {
  return data.block(row_offset(i), col_offset(j), row_partition.at(i), col_partition.at(j));
}

Eigen::Block<const DenseMatrix> BlockMatrix::block(int i, int j) const {
  return data.block(row_offset(i), col_offset(j), row_partition.at(i), col_partition.at(j));
}

int BlockBlockMatrix::inner_count() const {
  return inner.empty() ? 0 : static_cast<int>(inner.front().size());
}

int BlockBlockMatrix::group_offset(int k) const {
  int off = 0;
  for (int g = 0; g < k; ++g) off += sum(inner.at(g));
  return off;
}

int BlockBlockMatrix::group_size(int k) const { return sum(inner.at(k)); }

DenseMatrix symmetrize(const DenseMatrix& a) {
  require_square(a, "symmetrize");
  DenseMatrix r(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i; j < a.cols(); ++j) {
      const double v = a(i, j) + a(j, i);
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return r;
}

DenseMatrix sym_part(const DenseMatrix& a) { return 0.5 * symmetrize(a); }

double default_pd_margin(const DenseMatrix& s) {
  const double norm = s.size() == 0 ? 0.0 : s.cwiseAbs().rowwise().sum().maxCoeff();
  return 1e-9 * (1.0 + norm);
}

bool is_positive_definite(const DenseMatrix& s, double margin) {
  require_square(s, "is_positive_definite");
  if (margin < 0) throw std::invalid_argument("is_positive_definite: negative margin");
  if (s.size() == 0) return true;
  if (!s.allFinite()) return false;
  const double norm = s.cwiseAbs().maxCoeff();
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(norm, 1.0)) {
    throw std::invalid_argument("is_positive_definite: matrix is not symmetric");
  }
  DenseMatrix shifted = 0.5 * (s + s.transpose());
  shifted.diagonal().array() -= margin;
  // Cholesky breaks down exactly when some pivot is <= 0.
  return Eigen::LLT<DenseMatrix>(shifted).info() == Eigen::Success;
}

bool is_positive_definite(const DenseMatrix& s) {
  return is_positive_definite(s, default_pd_margin(s));
}

double min_eigenvalue(const DenseMatrix& s) {
  require_square(s, "min_eigenvalue");
  if (s.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(0.5 * (s + s.transpose()),
                                                Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const DenseMatrix& s) {
  require_square(s, "max_eigenvalue");
  if (s.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(0.5 * (s + s.transpose()),
                                                Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

namespace {

void check_block_block(const BlockBlockMatrix& psi) {
  const int n = psi.inner_count();
  int total = 0;
  for (const auto& g : psi.inner) {
    if (static_cast<int>(g.size()) != n) {
      throw std::invalid_argument("bew: outer groups have different numbers of inner blocks");
    }
    for (int s : g) {
      if (s < 0) throw std::invalid_argument("bew: negative inner block size");
    }
    total += sum(g);
  }
  if (total != psi.data.rows() || psi.data.rows() != psi.data.cols()) {
    throw std::invalid_argument("bew: inner partitions do not match the data dimensions");
  }
}

}  // namespace

std::vector<int> bew_permutation(const BlockBlockMatrix& psi) {
  check_block_block(psi);
  const int m = psi.outer();
  const int n = psi.inner_count();
  std::vector<int> perm;
  perm.reserve(psi.data.rows());
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < m; ++k) {
      int start = psi.group_offset(k);
      for (int j = 0; j < i; ++j) start += psi.inner[k][j];
      for (int r = 0; r < psi.inner[k][i]; ++r) perm.push_back(start + r);
    }
  }
  return perm;
}

std::vector<int> bew_partition(const BlockBlockMatrix& psi) {
  check_block_block(psi);
  std::vector<int> part(psi.inner_count(), 0);
  for (const auto& g : psi.inner) {
    for (std::size_t i = 0; i < g.size(); ++i) part[i] += g[i];
  }
  return part;
}

BlockMatrix bew(const BlockBlockMatrix& psi) {
  const std::vector<int> perm = bew_permutation(psi);
  const std::vector<int> part = bew_partition(psi);
  const Eigen::Index dim = psi.data.rows();
  DenseMatrix out(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) out(r, c) = psi.data(perm[r], perm[c]);
  }
  return BlockMatrix(part, part, std::move(out));
}

DenseMatrix schur_embed(const DenseMatrix& theta, const DenseMatrix& phi,
                        const DenseMatrix& gamma) {
  require_square(theta, "schur_embed theta");
  require_square(gamma, "schur_embed gamma");
  if (phi.rows() != theta.rows() || phi.cols() != gamma.rows()) {
    throw std::invalid_argument("schur_embed: dimension mismatch");
  }
  if (!is_positive_definite(theta, 0.0)) {
    throw std::invalid_argument("schur_embed: theta is not positive definite; use alpha_embed");
  }
  const Eigen::Index a = theta.rows();
  const Eigen::Index b = gamma.rows();
  DenseMatrix out(a + b, a + b);
  const DenseMatrix tp = theta * phi;
  out.topLeftCorner(a, a) = theta;
  out.topRightCorner(a, b) = tp;
  out.bottomLeftCorner(b, a) = tp.transpose();
  out.bottomRightCorner(b, b) = gamma;
  return sym_part(out);
}

DenseMatrix alpha_embed(const DenseMatrix& theta, const DenseMatrix& phi,
                        const DenseMatrix& gamma, double alpha) {
  require_square(theta, "alpha_embed theta");
  require_square(gamma, "alpha_embed gamma");
  if (phi.rows() != theta.rows() || phi.cols() != gamma.rows() || phi.rows() != phi.cols()) {
    throw std::invalid_argument("alpha_embed: dimension mismatch");
  }
  const DenseMatrix pt = phi.transpose() * theta;
  return sym_part(-alpha * (pt + pt.transpose()) + alpha * alpha * theta + gamma);
}

DenseMatrix block_diagonal(const std::vector<DenseMatrix>& blocks) {
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    r += b.rows();
    c += b.cols();
  }
  DenseMatrix out = DenseMatrix::Zero(r, c);
  r = c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

}  // namespace dissnet
