#pragma once

#include "adaflow/common.hpp"

#include <algorithm>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

namespace adaflow {

/// Samples with optional per-row labels (0 normal, 1 anomaly) and domains.
struct Dataset {
  Batch x;
  std::vector<int> labels;
  std::vector<DomainId> domains;

  Index size() const { return x.rows(); }
  Index dim() const { return x.cols(); }
  bool labeled() const { return !labels.empty(); }

  /// First n rows.
  Dataset head(Index n) const {
    require(n <= size(), "requested more rows than the dataset holds");
    Dataset d{x.topRows(n), {}, {}};
    if (!labels.empty()) d.labels.assign(labels.begin(), labels.begin() + n);
    if (!domains.empty()) d.domains.assign(domains.begin(), domains.begin() + n);
    return d;
  }
};

struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;

  Index dim() const { return means.empty() ? 0 : means.front().size(); }

  void validate() const {
    require(!weights.empty(), "mixture needs at least one component");
    require(weights.size() == means.size() && means.size() == covariances.size(),
            "mixture component arrays differ in length");
    double total = 0.0;
    for (double w : weights) {
      require(w >= 0.0, "mixture weights must be non-negative");
      total += w;
    }
    require(std::abs(total - 1.0) < 1e-9, "mixture weights must sum to 1");
    for (std::size_t c = 0; c < means.size(); ++c) {
      require(means[c].size() == dim(), "mixture means differ in dimension");
      const Matrix& s = covariances[c];
      require(s.rows() == dim() && s.cols() == dim(), "covariance has wrong shape");
      require((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + s.cwiseAbs().maxCoeff()),
              "covariance must be symmetric");
      require(Eigen::LLT<Matrix>(s).info() == Eigen::Success, "covariance must be positive definite");
    }
  }

  Vector mean() const {
    Vector m = Vector::Zero(dim());
    for (std::size_t c = 0; c < means.size(); ++c) m += weights[c] * means[c];
    return m;
  }

  Matrix covariance() const {
    const Vector mu = mean();
    Matrix s = Matrix::Zero(dim(), dim());
    for (std::size_t c = 0; c < means.size(); ++c) {
      const Vector d = means[c] - mu;
      s += weights[c] * (covariances[c] + d * d.transpose());
    }
    return s;
  }
};

/// A domain: an affine image x = A y + shift of a base mixture draw y.
struct DomainSpec {
  GaussianMixture base;
  Matrix transform;
  Vector shift;
  Index n_train = 0;
  Index n_test = 0;

  Vector mean() const { return transform * base.mean() + shift; }
  Matrix covariance() const { return transform * base.covariance() * transform.transpose(); }

  void validate() const {
    base.validate();
    require(transform.rows() == base.dim() && transform.cols() == base.dim(),
            "domain transform has wrong shape");
    require(shift.size() == base.dim(), "domain shift has wrong dimension");
    require(std::abs(transform.determinant()) > 0.0, "domain transform must be invertible");
    require(n_train >= 0 && n_test >= 0, "sample counts must be non-negative");
  }
};

enum class AnomalyKind { kUniformBox, kShiftedGaussian, kRadialShell };

struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::kUniformBox;
  /// Fraction of each test set that is anomalous.
  double contamination = 0.5;
  /// Box: relative widening of the normal data's bounding box.
  double box_margin = 0.1;
  /// Box: weight of the uniform draw when mixed into a fresh normal draw,
  /// x = (1 - mix) * normal + mix * uniform. 1 gives pure box samples.
  double mix = 1.0;
  /// Shifted Gaussian: displacement length in units of the data scale.
  double shift = 3.0;
  /// Radial shell: radius in units of the data scale.
  double radius = 4.0;

  void validate() const {
    require(contamination >= 0.0 && contamination < 1.0, "contamination must lie in [0,1)");
    require(box_margin >= 0.0 && shift >= 0.0 && radius > 0.0, "anomaly geometry must be positive");
    require(mix > 0.0 && mix <= 1.0, "box mixing weight must lie in (0,1]");
  }
};

inline Batch sample_mixture(const GaussianMixture& g, Index n, std::mt19937_64& rng) {
  std::vector<Matrix> chol;
  for (const auto& s : g.covariances) chol.push_back(Eigen::LLT<Matrix>(s).matrixL());
  std::discrete_distribution<std::size_t> pick(g.weights.begin(), g.weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  Batch out(n, g.dim());
  Vector e(g.dim());
  for (Index r = 0; r < n; ++r) {
    const std::size_t c = pick(rng);
    for (Index i = 0; i < e.size(); ++i) e(i) = normal(rng);
    out.row(r) = (g.means[c] + chol[c] * e).transpose();
  }
  return out;
}

inline Batch sample_domain(const DomainSpec& spec, Index n, std::mt19937_64& rng) {
  Batch y = sample_mixture(spec.base, n, rng);
  Batch x = y * spec.transform.transpose();
  x.rowwise() += spec.shift.transpose();
  return x;
}

/// Anomalies placed relative to a domain's normal test samples.
inline Batch sample_anomalies(const AnomalySpec& a, const DomainSpec& domain, const Batch& normals,
                              Index n, std::mt19937_64& rng) {
  const Index dim = domain.base.dim();
  Batch out(n, dim);
  if (n == 0) return out;
  const Vector mu = domain.mean();
  const double scale = std::sqrt(domain.covariance().trace() / static_cast<double>(dim));
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (a.kind) {
    case AnomalyKind::kUniformBox: {
      require(normals.rows() > 0, "box anomalies need normal samples to enclose");
      Vector lo = normals.colwise().minCoeff().transpose();
      Vector hi = normals.colwise().maxCoeff().transpose();
      const Vector pad = a.box_margin * (hi - lo);
      lo -= pad;
      hi += pad;
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (Index r = 0; r < n; ++r)
        for (Index i = 0; i < dim; ++i) out(r, i) = lo(i) + (hi(i) - lo(i)) * u(rng);
      if (a.mix < 1.0) out = (1.0 - a.mix) * sample_domain(domain, n, rng) + a.mix * out;
      break;
    }
    case AnomalyKind::kShiftedGaussian: {
      Vector dir(dim);
      for (Index i = 0; i < dim; ++i) dir(i) = normal(rng);
      dir *= a.shift * scale / dir.norm();
      out = sample_domain(domain, n, rng);
      out.rowwise() += dir.transpose();
      break;
    }
    case AnomalyKind::kRadialShell: {
      for (Index r = 0; r < n; ++r) {
        Vector dir(dim);
        for (Index i = 0; i < dim; ++i) dir(i) = normal(rng);
        out.row(r) = (mu + a.radius * scale * dir / dir.norm()).transpose();
      }
      break;
    }
  }
  return out;
}

/// Normal-only training split.
inline Dataset make_train_split(const DomainSpec& spec, const DomainId& id, std::mt19937_64& rng) {
  Dataset d{sample_domain(spec, spec.n_train, rng), {}, {}};
  d.domains.assign(static_cast<std::size_t>(spec.n_train), id);
  return d;
}

/// Labeled test split: round(contamination * n_test) anomalies, the rest
/// normal, rows shuffled.
inline Dataset make_test_split(const DomainSpec& spec, const AnomalySpec& a, const DomainId& id,
                               std::mt19937_64& rng) {
  const Index n_anom = static_cast<Index>(std::llround(a.contamination * static_cast<double>(spec.n_test)));
  const Index n_norm = spec.n_test - n_anom;
  const Batch normals = sample_domain(spec, n_norm, rng);
  const Batch anomalies = sample_anomalies(a, spec, normals, n_anom, rng);
  std::vector<Index> perm(static_cast<std::size_t>(spec.n_test));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Dataset d{Batch(spec.n_test, spec.base.dim()), std::vector<int>(perm.size()),
            std::vector<DomainId>(perm.size(), id)};
  for (std::size_t r = 0; r < perm.size(); ++r) {
    const Index src = perm[r];
    if (src < n_norm) {
      d.x.row(static_cast<Index>(r)) = normals.row(src);
      d.labels[r] = 0;
    } else {
      d.x.row(static_cast<Index>(r)) = anomalies.row(src - n_norm);
      d.labels[r] = 1;
    }
  }
  return d;
}

struct BenchmarkSpec {
  Index dim = 16;
  int domains = 3;
  /// Rotation of the first two coordinates, degrees; one per pre-training
  /// domain followed by the target.
  std::vector<double> angles_deg{0.0, 30.0, 60.0, 90.0};
  double shift_scale = 2.0;
  double log_scale_spread = 0.4;
  int components = 3;
  Index n_train = 5000;
  Index n_test = 2000;
  AnomalySpec anomalies{.mix = 0.5};

  void validate() const {
    require(dim >= 1, "dimension must be positive");
    require(domains >= 1, "need at least one pre-training domain");
    require(angles_deg.size() == static_cast<std::size_t>(domains) + 1,
            "need one rotation angle per domain plus the target");
    require(components >= 1, "need at least one mixture component");
    require(n_train >= 2, "training splits need at least two samples");
    anomalies.validate();
  }
};

struct Benchmark {
  std::map<DomainId, Dataset> pretrain;
  DomainId target_id = "target";
  Dataset target_train;
  Dataset target_test;
  std::vector<DomainSpec> specs;  // pre-training domains, then the target
};

inline DomainId pretrain_domain_id(int k) { return "domain" + std::to_string(k); }

/// Base shape shared by all domains of a benchmark.
inline GaussianMixture make_base_mixture(Index dim, int components, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  GaussianMixture g;
  for (int c = 0; c < components; ++c) {
    g.weights.push_back(1.0 / components);
    Vector m(dim);
    for (Index i = 0; i < dim; ++i) m(i) = 1.5 * normal(rng);
    Matrix a(dim, dim);
    for (Index r = 0; r < dim; ++r)
      for (Index s = 0; s < dim; ++s) a(r, s) = normal(rng);
    Matrix cov = a * a.transpose() / static_cast<double>(dim) + 0.1 * Matrix::Identity(dim, dim);
    cov = 0.5 * (cov + cov.transpose());
    g.means.push_back(std::move(m));
    g.covariances.push_back(std::move(cov));
  }
  return g;
}

/// Domain j: rotation of coordinates (0,1) by angle, coordinate-wise
/// rescaling and a shift, each drawn from the domain's own stream.
inline DomainSpec make_domain_spec(const BenchmarkSpec& b, const GaussianMixture& base,
                                   double angle_deg, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index d = b.dim;
  Matrix rot = Matrix::Identity(d, d);
  if (d >= 2) {
    const double t = angle_deg * std::numbers::pi / 180.0;
    rot(0, 0) = std::cos(t);
    rot(0, 1) = -std::sin(t);
    rot(1, 0) = std::sin(t);
    rot(1, 1) = std::cos(t);
  }
  Vector scale(d), shift(d);
  for (Index i = 0; i < d; ++i) scale(i) = std::exp(b.log_scale_spread * normal(rng));
  for (Index i = 0; i < d; ++i) shift(i) = b.shift_scale * normal(rng);
  DomainSpec s;
  s.base = base;
  s.transform = scale.asDiagonal() * rot;
  s.shift = shift;
  s.n_train = b.n_train;
  s.n_test = b.n_test;
  return s;
}

/// K pre-training domains and one held-out target domain sharing one base
/// mixture under distinct affine maps. Training splits are normal-only;
/// the target test split carries labels.
inline Benchmark make_benchmark(std::uint64_t seed, const BenchmarkSpec& b) {
  b.validate();
  std::mt19937_64 shape_rng(derive_seed(seed, "synth-shape"));
  const GaussianMixture base = make_base_mixture(b.dim, b.components, shape_rng);
  Benchmark out;
  for (int k = 0; k <= b.domains; ++k) {
    std::mt19937_64 rng(derive_seed(seed, "synth-domain-" + std::to_string(k)));
    DomainSpec spec = make_domain_spec(b, base, b.angles_deg[static_cast<std::size_t>(k)], rng);
    spec.validate();
    if (k < b.domains) {
      spec.n_test = 0;
      const DomainId id = pretrain_domain_id(k);
      out.pretrain.emplace(id, make_train_split(spec, id, rng));
    } else {
      out.target_train = make_train_split(spec, out.target_id, rng);
      out.target_test = make_test_split(spec, b.anomalies, out.target_id, rng);
    }
    out.specs.push_back(std::move(spec));
  }
  return out;
}

/// Two 2-D "styles" of one Gaussian mixture for translation experiments.
struct TranslationPair {
  DomainSpec a;
  DomainSpec b;
  Dataset train_a;
  Dataset train_b;
};

inline TranslationPair make_translation_pair(std::uint64_t seed, Index n = 2000) {
  GaussianMixture base;
  base.weights = {0.5, 0.5};
  base.means = {Vector::Constant(2, -1.0), Vector::Constant(2, 1.0)};
  Matrix c0(2, 2), c1(2, 2);
  c0 << 0.3, 0.1, 0.1, 0.2;
  c1 << 0.2, -0.05, -0.05, 0.4;
  base.covariances = {c0, c1};
  TranslationPair p;
  p.a = {base, Matrix::Identity(2, 2), Vector::Zero(2), n, 0};
  Matrix tb(2, 2);
  tb << 1.5, 0.0, 0.0, 0.6;
  p.b = {base, tb, (Vector(2) << 3.0, -2.0).finished(), n, 0};
  std::mt19937_64 ra(derive_seed(seed, "pair-a"));
  std::mt19937_64 rb(derive_seed(seed, "pair-b"));
  p.train_a = make_train_split(p.a, "A", ra);
  p.train_b = make_train_split(p.b, "B", rb);
  return p;
}

}  // namespace adaflow
