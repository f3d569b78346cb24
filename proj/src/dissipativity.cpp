#include "dissnet/dissipativity.hpp"

#include <cmath>
#include <stdexcept>

namespace dissnet {

DenseMatrix SupplyMatrix::full() const {
  const int q = input_dim();
  const int m = output_dim();
  DenseMatrix x(q + m, q + m);
  x.topLeftCorner(q, q) = x11;
  x.topRightCorner(q, m) = x12;
  x.bottomLeftCorner(m, q) = x21;
  x.bottomRightCorner(m, m) = x22;
  return x;
}

SupplyMatrix SupplyMatrix::from_full(const DenseMatrix& x, int q) {
  if (x.rows() != x.cols() || q < 0 || q > x.rows()) {
    throw std::invalid_argument("SupplyMatrix::from_full: bad dimensions");
  }
  const int m = static_cast<int>(x.rows()) - q;
  SupplyMatrix s{x.topLeftCorner(q, q), x.topRightCorner(q, m), x.bottomLeftCorner(m, q),
                 x.bottomRightCorner(m, m)};
  s.validate();
  return s;
}

void SupplyMatrix::validate() const {
  const auto q = x11.rows();
  const auto m = x22.rows();
  if (x11.cols() != q || x22.cols() != m || x12.rows() != q || x12.cols() != m ||
      x21.rows() != m || x21.cols() != q) {
    throw std::invalid_argument("SupplyMatrix: inconsistent block dimensions");
  }
  const DenseMatrix f = full();
  if (f.size() == 0) return;
  if (!f.allFinite()) throw std::invalid_argument("SupplyMatrix: non-finite entry");
  const double scale = std::max(1.0, f.cwiseAbs().maxCoeff());
  if ((f - f.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("SupplyMatrix: matrix is not symmetric");
  }
}

SupplyMatrix supply_from_kind(const DissipativityKind& kind, int q, int m) {
  if (q < 0 || m < 0) throw std::invalid_argument("supply_from_kind: negative dimension");
  const DenseMatrix iq = DenseMatrix::Identity(q, q);
  const DenseMatrix im = DenseMatrix::Identity(m, m);
  const DenseMatrix zqm = DenseMatrix::Zero(q, m);
  return std::visit(
      [&](const auto& k) -> SupplyMatrix {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Passive>) {
          if (q != m) throw std::invalid_argument("supply_from_kind: passivity needs q == m");
          return {DenseMatrix::Zero(q, q), 0.5 * iq, 0.5 * iq, DenseMatrix::Zero(m, m)};
        } else if constexpr (std::is_same_v<K, StrictlyPassive>) {
          if (q != m) throw std::invalid_argument("supply_from_kind: passivity needs q == m");
          return {-k.nu * iq, 0.5 * iq, 0.5 * iq, -k.rho * im};
        } else if constexpr (std::is_same_v<K, L2Gain>) {
          if (!(k.gamma > 0) || !std::isfinite(k.gamma)) {
            throw std::invalid_argument("supply_from_kind: gamma must be positive");
          }
          return {k.gamma * k.gamma * iq, zqm, zqm.transpose(), -im};
        } else {
          k.x.validate();
          if (k.x.input_dim() != q || k.x.output_dim() != m) {
            throw std::invalid_argument("supply_from_kind: general certificate dims mismatch");
          }
          return k.x;
        }
      },
      kind);
}

SubsystemProfile make_profile(int id, const DissipativityKind& kind, int q, int m) {
  return {id, q, m, supply_from_kind(kind, q, m)};
}

namespace {

bool is_scaled_identity(const DenseMatrix& a, double* value) {
  if (a.rows() != a.cols()) return false;
  const double v = a.rows() > 0 ? a(0, 0) : 0.0;
  const DenseMatrix diff = a - v * DenseMatrix::Identity(a.rows(), a.cols());
  if (a.size() > 0 && diff.cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, std::abs(v))) return false;
  *value = v;
  return true;
}

}  // namespace

SupplyMatrix shift_ifp(const SupplyMatrix& x, double epsilon) {
  if (!(epsilon > 0)) throw std::invalid_argument("shift_ifp: epsilon must be positive");
  x.validate();
  double a = 0, b = 0, c = 0;
  if (x.input_dim() != x.output_dim() || !is_scaled_identity(x.x11, &a) ||
      !is_scaled_identity(x.x12, &b) || !is_scaled_identity(x.x22, &c) ||
      std::abs(b - 0.5) > 1e-12) {
    throw std::invalid_argument("shift_ifp: certificate is not of passivity-index form");
  }
  SupplyMatrix out = x;
  out.x11 += epsilon * DenseMatrix::Identity(x.input_dim(), x.input_dim());
  return out;
}

std::vector<int> input_partition(const std::vector<SubsystemProfile>& profiles) {
  std::vector<int> part;
  for (const auto& p : profiles) part.push_back(p.input_dim);
  return part;
}

std::vector<int> output_partition(const std::vector<SubsystemProfile>& profiles) {
  std::vector<int> part;
  for (const auto& p : profiles) part.push_back(p.output_dim);
  return part;
}

ScaledAggregate assemble_scaled(const std::vector<SubsystemProfile>& profiles,
                                const std::vector<double>& p) {
  if (p.size() != profiles.size()) throw std::invalid_argument("assemble_scaled: |p| != N");
  const auto in = input_partition(profiles);
  const auto out = output_partition(profiles);
  ScaledAggregate agg{BlockMatrix(in, in), BlockMatrix(in, out), BlockMatrix(out, in),
                      BlockMatrix(out, out), p};
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (p[i] < 0 || !std::isfinite(p[i])) {
      throw std::invalid_argument("assemble_scaled: multipliers must be non-negative");
    }
    const auto& x = profiles[i].certificate;
    x.validate();
    if (x.input_dim() != profiles[i].input_dim || x.output_dim() != profiles[i].output_dim) {
      throw std::invalid_argument("assemble_scaled: certificate dims mismatch profile");
    }
    const int k = static_cast<int>(i);
    agg.x11.block(k, k) = p[i] * x.x11;
    agg.x12.block(k, k) = p[i] * x.x12;
    agg.x21.block(k, k) = p[i] * x.x21;
    agg.x22.block(k, k) = p[i] * x.x22;
  }
  return agg;
}

RatioBlocks ratio_blocks(const std::vector<SubsystemProfile>& profiles) {
  const auto in = input_partition(profiles);
  const auto out = output_partition(profiles);
  RatioBlocks r{BlockMatrix(in, out), BlockMatrix(out, in)};
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& x = profiles[i].certificate;
    Eigen::FullPivLU<DenseMatrix> lu(x.x11);
    if (x.x11.size() > 0 && !lu.isInvertible()) {
      throw std::invalid_argument("ratio_blocks: X11 of subsystem " +
                                  std::to_string(profiles[i].id) + " is singular");
    }
    const int k = static_cast<int>(i);
    r.x12_ratio.block(k, k) = lu.solve(x.x12);
    r.x21_ratio.block(k, k) = lu.solve(x.x21.transpose()).transpose();
  }
  return r;
}

AssumptionReport check_assumption1(const std::vector<SubsystemProfile>& profiles) {
  AssumptionReport rep;
  for (const auto& p : profiles) {
    if (!is_positive_definite(p.certificate.x11, 0.0)) {
      rep.ok = false;
      rep.offenders.push_back(p.id);
    }
  }
  if (!rep.ok) {
    rep.message =
        "X11 is not positive definite for some subsystems; apply shift_ifp to passivity-form "
        "certificates or use the negative-X11 synthesis path";
  }
  return rep;
}

AssumptionReport check_assumption2(const SupplyMatrix& y) {
  AssumptionReport rep;
  if (!is_positive_definite(-y.x22, 0.0)) {
    rep.ok = false;
    rep.message = "Y22 is not negative definite";
  }
  return rep;
}

}  // namespace dissnet
