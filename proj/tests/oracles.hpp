#pragma once

// Independent reference computations for the test suites. Nothing here
// calls the analytic log-determinant or gradient code under test.

#include "adaflow/adaflow.hpp"

#include <functional>
#include <random>
#include <vector>

namespace adaflow::oracle {

/// Central-difference Jacobian of f at x.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  const Index n = x.size();
  const Vector f0 = f(x);
  Matrix j(f0.size(), n);
  for (Index i = 0; i < n; ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

inline double log_abs_det(const Matrix& m) {
  const Eigen::FullPivLU<Matrix> lu(m);
  return std::log(std::abs(lu.determinant()));
}

/// Dense W with explicit unit diagonals; does not use LinearLDU::weight.
inline Matrix dense_ldu(const LinearLDU& l) {
  const Index d = l.dim();
  Matrix lo = Matrix::Identity(d, d), up = Matrix::Identity(d, d);
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < d; ++c) {
      if (c < r) lo(r, c) = l.lower(r, c);
      if (c > r) up(r, c) = l.upper(r, c);
    }
  Matrix dm = Matrix::Zero(d, d);
  dm.diagonal() = l.d;
  return lo * dm * up;
}

/// P(anomaly > normal) + P(tie)/2 over all pairs.
inline double pairwise_auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Midpoint-rule integral of exp(log_density) over [lo, hi]^D, D in {1, 2}.
inline double grid_integral(const std::function<Vector(const Batch&)>& log_density, Index dim,
                            double lo, double hi, Index cells) {
  const double h = (hi - lo) / static_cast<double>(cells);
  if (dim == 1) {
    Batch x(cells, 1);
    for (Index i = 0; i < cells; ++i) x(i, 0) = lo + (static_cast<double>(i) + 0.5) * h;
    return log_density(x).array().exp().sum() * h;
  }
  double total = 0.0;
  Batch x(cells, 2);
  for (Index i = 0; i < cells; ++i) {
    for (Index j = 0; j < cells; ++j) {
      x(j, 0) = lo + (static_cast<double>(i) + 0.5) * h;
      x(j, 1) = lo + (static_cast<double>(j) + 0.5) * h;
    }
    total += log_density(x).array().exp().sum();
  }
  return total * h * h;
}

/// Central-difference gradient of a scalar function of a flat vector.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& p, double h = 1e-5) {
  Vector g(p.size());
  for (Index i = 0; i < p.size(); ++i) {
    Vector pp = p, pm = p;
    pp(i) += h;
    pm(i) -= h;
    g(i) = (f(pp) - f(pm)) / (2.0 * h);
  }
  return g;
}

/// |a - b| within max(rel * max(|a|,|b|), abs).
inline bool close(double a, double b, double rel, double abs) {
  return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs);
}

inline Vector random_vector(Index n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

inline Vector random_nonzero(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 0.3);
  std::bernoulli_distribution sign(0.5);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = (sign(rng) ? 1.0 : -1.0) * std::exp(nd(rng));
  return v;
}

/// Random stack of at most `max_layers` layers with random parameters, and
/// domains "a" and "b" registered with random statistics.
inline FlowModel random_model(std::mt19937_64& rng, Index dim, int max_layers) {
  std::uniform_int_distribution<int> count(1, max_layers), kind(0, 2);
  std::uniform_real_distribution<double> alpha(0.1, 0.9);
  std::normal_distribution<double> nd(0.0, 0.3);
  FlowModel m(dim);
  const int layers = count(rng);
  for (int i = 0; i < layers; ++i) {
    switch (kind(rng)) {
      case 0: {
        LinearLDU l = LinearLDU::identity(dim);
        for (Index r = 0; r < dim; ++r)
          for (Index c = 0; c < dim; ++c) {
            if (c < r) l.lower(r, c) = nd(rng);
            if (c > r) l.upper(r, c) = nd(rng);
          }
        l.d = random_nonzero(dim, rng);
        l.b = random_vector(dim, rng);
        m.add_layer(std::move(l));
        break;
      }
      case 1: m.add_layer(LeakyReLU{dim, alpha(rng)}); break;
      default: m.add_layer(AdaBN{random_nonzero(dim, rng), random_vector(dim, rng)}); break;
    }
  }
  for (const char* k : {"a", "b"}) {
    DomainStats ds;
    for (std::size_t i : m.adabn_indices()) {
      ds.layers[i] = BNStats{random_vector(dim, rng), random_vector(dim, rng, 0.5).array().exp().matrix()};
    }
    m.set_domain(k, std::move(ds));
  }
  return m;
}

/// Smallest distance of any leaky-ReLU input coordinate from zero along the
/// normalize pass (infinity when the stack has no leaky-ReLU layer).
inline double kink_distance(const FlowModel& m, const Vector& x, const DomainId& k) {
  double best = std::numeric_limits<double>::infinity();
  Vector z = x;
  const DomainStats& ds = m.stats(k);
  for (std::size_t i = m.size(); i-- > 0;) {
    if (std::holds_alternative<LeakyReLU>(m.layers()[i])) best = std::min(best, z.cwiseAbs().minCoeff());
    z = layer_normalize(m.layers()[i], z, m.layer_stats(ds, i), m.epsilon()).first;
  }
  return best;
}

}  // namespace adaflow::oracle
