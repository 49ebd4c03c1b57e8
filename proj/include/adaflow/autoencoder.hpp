#pragma once

#include "adaflow/common.hpp"
#include "adaflow/training.hpp"

#include <chrono>
#include <map>
#include <numeric>
#include <random>
#include <vector>

namespace adaflow {

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
};

/// Fully connected autoencoder. ReLU follows every layer except the last,
/// which is linear.
class AEModel {
 public:
  AEModel() = default;

  /// He-initialized weights, zero biases. `sizes` lists widths from input to
  /// output and must start and end with the same dimension.
  AEModel(std::vector<Index> sizes, std::uint64_t seed) {
    validate_sizes(sizes);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      std::normal_distribution<double> n(0.0, std::sqrt(2.0 / static_cast<double>(sizes[i])));
      DenseLayer l{Matrix(sizes[i + 1], sizes[i]), Vector::Zero(sizes[i + 1])};
      for (Index r = 0; r < l.weight.rows(); ++r)
        for (Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = n(rng);
      layers_.push_back(std::move(l));
    }
  }

  explicit AEModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    require(!layers_.empty(), "autoencoder needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      require(layers_[i].bias.size() == layers_[i].weight.rows(), "bias/weight mismatch");
      if (i > 0) require(layers_[i].weight.cols() == layers_[i - 1].weight.rows(), "layer widths do not chain");
    }
    require(layers_.front().weight.cols() == layers_.back().weight.rows(),
            "encoder input and decoder output dimensions differ");
  }

  Index dim() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  std::vector<Index> sizes() const {
    std::vector<Index> s;
    if (layers_.empty()) return s;
    s.push_back(layers_.front().weight.cols());
    for (const auto& l : layers_) s.push_back(l.weight.rows());
    return s;
  }

  /// Reconstructions of each row.
  Batch reconstruct(const Batch& x) const {
    require(x.cols() == dim(), "dimension mismatch");
    Batch h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = (h * layers_[i].weight.transpose()).rowwise() + layers_[i].bias.transpose();
      if (i + 1 < layers_.size()) h = h.cwiseMax(0.0);
    }
    return h;
  }

  static void validate_sizes(const std::vector<Index>& sizes) {
    require(sizes.size() >= 2, "autoencoder needs at least input and output sizes");
    for (Index s : sizes) require(s >= 1, "layer widths must be positive");
    require(sizes.front() == sizes.back(), "encoder input and decoder output dimensions differ");
  }

 private:
  std::vector<DenseLayer> layers_;
};

/// D -> D/6 -> D/12 -> D/6 -> D, rounded, at least one unit wide.
inline std::vector<Index> default_ae_sizes(Index dim) {
  auto w = [&](double f) {
    return std::max<Index>(1, static_cast<Index>(std::lround(static_cast<double>(dim) * f)));
  };
  return {dim, w(1.0 / 6.0), w(1.0 / 12.0), w(1.0 / 6.0), dim};
}

/// Squared reconstruction error per row.
inline Vector ae_scores(const AEModel& ae, const Batch& x) {
  return (x - ae.reconstruct(x)).rowwise().squaredNorm();
}

inline double ae_score(const AEModel& ae, const Vector& x) {
  require(x.size() == ae.dim(), "dimension mismatch");
  return ae_scores(ae, x.transpose())(0);
}

struct AEBackwardResult {
  double objective = 0.0;
  std::vector<DenseLayer> grads;
};

/// Mean squared reconstruction error of the batch and its gradient.
inline AEBackwardResult ae_backward(const AEModel& ae, const Batch& x) {
  require(x.rows() > 0, "empty batch");
  require(x.cols() == ae.dim(), "dimension mismatch");
  const auto& layers = ae.layers();
  std::vector<Batch> acts{x};  // post-activation outputs
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Batch h = (acts.back() * layers[i].weight.transpose()).rowwise() + layers[i].bias.transpose();
    if (i + 1 < layers.size()) h = h.cwiseMax(0.0);
    acts.push_back(std::move(h));
  }
  const double n = static_cast<double>(x.rows());
  const Batch resid = acts.back() - x;
  AEBackwardResult out;
  out.objective = resid.rowwise().squaredNorm().mean();
  out.grads.resize(layers.size());
  Batch g = 2.0 * resid / n;
  for (std::size_t i = layers.size(); i-- > 0;) {
    if (i + 1 < layers.size()) g = (acts[i + 1].array() > 0.0).select(g, 0.0);
    out.grads[i].weight = g.transpose() * acts[i];
    out.grads[i].bias = g.colwise().sum().transpose();
    g = g * layers[i].weight;
  }
  return out;
}

inline Vector flatten_parameters(const std::vector<DenseLayer>& layers) {
  Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  Vector out(n);
  Index p = 0;
  for (const auto& l : layers) {
    out.segment(p, l.weight.size()) = Eigen::Map<const Vector>(l.weight.data(), l.weight.size());
    p += l.weight.size();
    out.segment(p, l.bias.size()) = l.bias;
    p += l.bias.size();
  }
  return out;
}

inline Vector flatten_parameters(const AEModel& ae) { return flatten_parameters(ae.layers()); }

inline void assign_parameters(AEModel& ae, const Vector& flat) {
  Index p = 0;
  for (auto& l : ae.mutable_layers()) {
    require(p + l.weight.size() + l.bias.size() <= flat.size(), "parameter vector too short");
    Eigen::Map<Vector>(l.weight.data(), l.weight.size()) = flat.segment(p, l.weight.size());
    p += l.weight.size();
    l.bias = flat.segment(p, l.bias.size());
    p += l.bias.size();
  }
  require(p == flat.size(), "parameter vector too long");
}

/// Minimizes the mean reconstruction error over the concatenation of all
/// datasets (pooled, so unequal dataset sizes weight domains by count).
inline TrainResult ae_train(AEModel& ae, const std::map<DomainId, Batch>& datasets,
                            const TrainConfig& cfg) {
  cfg.validate();
  require(!datasets.empty(), "no training domains supplied");
  Index rows = 0;
  for (const auto& [k, x] : datasets) {
    require(x.cols() == ae.dim(), "dataset '" + k + "' has wrong dimension");
    if (!x.allFinite()) throw NumericError("non-finite sample in dataset '" + k + "'");
    rows += x.rows();
  }
  require(rows >= cfg.batch_size, "fewer samples than the batch size");
  Batch pooled(rows, ae.dim());
  Index r = 0;
  for (const auto& [k, x] : datasets) {
    pooled.middleRows(r, x.rows()) = x;
    r += x.rows();
  }

  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  std::mt19937_64 rng(derive_seed(cfg.seed, "ae-batch-order"));
  Vector params = flatten_parameters(ae);
  Optimizer opt(cfg, params.size());
  std::vector<Index> perm(static_cast<std::size_t>(rows));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double sum = 0.0;
    int count = 0;
    for (Index s = 0; s < rows; s += cfg.batch_size) {
      const Index e = std::min(rows, s + cfg.batch_size);
      std::vector<Index> idx(perm.begin() + s, perm.begin() + e);
      const auto b = ae_backward(ae, pooled(idx, Eigen::all));
      if (!std::isfinite(b.objective)) {
        throw Error("autoencoder training diverged at epoch " + std::to_string(epoch));
      }
      opt.step(params, flatten_parameters(b.grads));
      assign_parameters(ae, params);
      sum += b.objective;
      ++count;
      ++result.steps;
    }
    result.curve.push_back({epoch, "pooled", sum / count});
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace adaflow
