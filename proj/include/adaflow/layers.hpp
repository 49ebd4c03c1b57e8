#pragma once

#include "adaflow/common.hpp"

#include <optional>
#include <random>
#include <utility>
#include <variant>

namespace adaflow {

/// Affine projection y = L diag(d) U z + b with unit-diagonal triangular
/// factors. Only the strict triangles of `lower` and `upper` are read; the
/// remaining entries are kept at zero.
struct LinearLDU {
  Matrix lower;
  Matrix upper;
  Vector d;
  Vector b;

  static LinearLDU identity(Index dim) {
    return {Matrix::Zero(dim, dim), Matrix::Zero(dim, dim), Vector::Ones(dim),
            Vector::Zero(dim)};
  }

  /// Strict triangles ~ N(0, 0.01), d = 1, b = 0.
  template <class Rng>
  static LinearLDU near_identity(Index dim, Rng& rng, double stddev = 0.1) {
    LinearLDU l = identity(dim);
    std::normal_distribution<double> n(0.0, stddev);
    for (Index i = 0; i < dim; ++i) {
      for (Index j = 0; j < i; ++j) l.lower(i, j) = n(rng);
      for (Index j = i + 1; j < dim; ++j) l.upper(i, j) = n(rng);
    }
    return l;
  }

  Index dim() const { return d.size(); }

  /// Dense W, for tests and diagnostics only.
  Matrix weight() const {
    Matrix lo = lower.triangularView<Eigen::StrictlyLower>();
    lo.diagonal().setOnes();
    Matrix up = upper.triangularView<Eigen::StrictlyUpper>();
    up.diagonal().setOnes();
    return lo * d.asDiagonal() * up;
  }
};

/// Elementwise max(z, alpha z). Zero inputs take the identity branch.
struct LeakyReLU {
  Index size = 0;
  double alpha = kDefaultAlpha;

  Index dim() const { return size; }
};

/// Batch normalization with shared scale/shift and per-domain statistics.
struct AdaBN {
  Vector gamma;
  Vector beta;

  static AdaBN identity(Index dim) {
    return {Vector::Ones(dim), Vector::Zero(dim)};
  }

  Index dim() const { return gamma.size(); }
};

/// Mean and population variance of one AdaBN layer's input for one domain.
struct BNStats {
  Vector mu;
  Vector sigma;
};

using Layer = std::variant<LinearLDU, LeakyReLU, AdaBN>;

enum class LayerKind { kLinearLDU, kLeakyReLU, kAdaBN };

inline LayerKind kind_of(const Layer& layer) {
  return static_cast<LayerKind>(layer.index());
}

inline const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kLinearLDU: return "linear_ldu";
    case LayerKind::kLeakyReLU: return "leaky_relu";
    case LayerKind::kAdaBN: return "adabn";
  }
  return "?";
}

inline Index layer_dim(const Layer& layer) {
  return std::visit([](const auto& l) { return l.dim(); }, layer);
}

/// Output of a normalize-direction pass: transformed rows and the per-row
/// log |det J| of the applied map.
struct RowsWithLogdet {
  Batch rows;
  Vector logdet;
};

namespace detail {

inline void check_rows(const Batch& z, Index dim) {
  if (z.cols() != dim) {
    throw Error("dimension mismatch: layer expects " + std::to_string(dim) +
                " columns, got " + std::to_string(z.cols()));
  }
}

inline Vector adabn_inv_std(const BNStats& s, double eps) {
  return (s.sigma.array() + eps).rsqrt().matrix();
}

}  // namespace detail

inline RowsWithLogdet normalize_rows(const LinearLDU& l, const Batch& z) {
  detail::check_rows(z, l.dim());
  Matrix t = z.transpose();
  t = l.upper.triangularView<Eigen::UnitUpper>() * t;
  t = l.d.asDiagonal() * t;
  t = l.lower.triangularView<Eigen::UnitLower>() * t;
  Batch out = t.transpose();
  out.rowwise() += l.b.transpose();
  const double ld = l.d.array().abs().log().sum();
  return {std::move(out), Vector::Constant(z.rows(), ld)};
}

inline Batch generate_rows(const LinearLDU& l, const Batch& y) {
  detail::check_rows(y, l.dim());
  if ((l.d.array() == 0.0).any()) throw NumericError("singular LDU scale");
  Matrix t = (y.rowwise() - l.b.transpose()).transpose();
  l.lower.triangularView<Eigen::UnitLower>().solveInPlace(t);
  t = l.d.cwiseInverse().asDiagonal() * t;
  l.upper.triangularView<Eigen::UnitUpper>().solveInPlace(t);
  return t.transpose();
}

inline RowsWithLogdet normalize_rows(const LeakyReLU& l, const Batch& z) {
  detail::check_rows(z, l.dim());
  const double log_alpha = std::log(l.alpha);
  Batch out = (z.array() < 0.0).select(l.alpha * z, z);
  Vector ld(z.rows());
  for (Index n = 0; n < z.rows(); ++n) {
    ld(n) = static_cast<double>((z.row(n).array() < 0.0).count()) * log_alpha;
  }
  return {std::move(out), std::move(ld)};
}

inline Batch generate_rows(const LeakyReLU& l, const Batch& y) {
  detail::check_rows(y, l.dim());
  return (y.array() < 0.0).select(y / l.alpha, y);
}

inline RowsWithLogdet normalize_rows(const AdaBN& l, const Batch& z,
                                     const BNStats& s, double eps) {
  detail::check_rows(z, l.dim());
  const Vector inv_std = detail::adabn_inv_std(s, eps);
  const Vector scale = l.gamma.cwiseProduct(inv_std);
  Batch out = ((z.rowwise() - s.mu.transpose()).array().rowwise() *
               scale.transpose().array())
                  .matrix();
  out.rowwise() += l.beta.transpose();
  const double ld = l.gamma.array().abs().log().sum() +
                    inv_std.array().log().sum();
  return {std::move(out), Vector::Constant(z.rows(), ld)};
}

inline Batch generate_rows(const AdaBN& l, const Batch& y, const BNStats& s,
                           double eps) {
  detail::check_rows(y, l.dim());
  if ((l.gamma.array() == 0.0).any()) throw NumericError("zero AdaBN gamma");
  const Vector scale =
      (s.sigma.array() + eps).sqrt().matrix().cwiseQuotient(l.gamma);
  Batch out = ((y.rowwise() - l.beta.transpose()).array().rowwise() *
               scale.transpose().array())
                  .matrix();
  out.rowwise() += s.mu.transpose();
  return out;
}

/// Dispatches on layer kind. `stats` must be supplied exactly for AdaBN.
inline RowsWithLogdet normalize_rows(const Layer& layer, const Batch& z,
                                     const BNStats* stats, double eps) {
  if (const auto* bn = std::get_if<AdaBN>(&layer)) {
    if (stats == nullptr) throw Error("AdaBN layer requires domain statistics");
    return normalize_rows(*bn, z, *stats, eps);
  }
  if (stats != nullptr) throw Error("statistics supplied for a non-AdaBN layer");
  if (const auto* lin = std::get_if<LinearLDU>(&layer)) return normalize_rows(*lin, z);
  return normalize_rows(std::get<LeakyReLU>(layer), z);
}

inline Batch generate_rows(const Layer& layer, const Batch& y,
                           const BNStats* stats, double eps) {
  if (const auto* bn = std::get_if<AdaBN>(&layer)) {
    if (stats == nullptr) throw Error("AdaBN layer requires domain statistics");
    return generate_rows(*bn, y, *stats, eps);
  }
  if (stats != nullptr) throw Error("statistics supplied for a non-AdaBN layer");
  if (const auto* lin = std::get_if<LinearLDU>(&layer)) return generate_rows(*lin, y);
  return generate_rows(std::get<LeakyReLU>(layer), y);
}

/// Single-vector form of normalize_rows.
inline std::pair<Vector, double> layer_normalize(const Layer& layer,
                                                 const Vector& z,
                                                 const BNStats* stats = nullptr,
                                                 double eps = kDefaultEpsilon) {
  if (!z.allFinite()) throw NumericError("non-finite layer input");
  Batch row = z.transpose();
  auto r = normalize_rows(layer, row, stats, eps);
  return {r.rows.row(0).transpose(), r.logdet(0)};
}

inline Vector layer_generate(const Layer& layer, const Vector& z,
                             const BNStats* stats = nullptr,
                             double eps = kDefaultEpsilon) {
  if (!z.allFinite()) throw NumericError("non-finite layer input");
  Batch row = z.transpose();
  return generate_rows(layer, row, stats, eps).row(0).transpose();
}

/// Column means and population (1/N) variances of a batch.
inline BNStats batch_moments(const Batch& z) {
  BNStats s;
  s.mu = z.colwise().mean().transpose();
  s.sigma = (z.rowwise() - s.mu.transpose())
                .array()
                .square()
                .colwise()
                .mean()
                .transpose();
  return s;
}

}  // namespace adaflow
