#pragma once

#include "adaflow/common.hpp"
#include "adaflow/layers.hpp"

#include <map>
#include <random>
#include <utility>
#include <vector>

namespace adaflow {

/// Per-AdaBN-layer statistics of one domain, keyed by layer index.
struct DomainStats {
  std::map<std::size_t, BNStats> layers;

  bool operator==(const DomainStats& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (const auto& [i, s] : layers) {
      auto it = o.layers.find(i);
      if (it == o.layers.end() || s.mu != it->second.mu ||
          s.sigma != it->second.sigma) {
        return false;
      }
    }
    return true;
  }
};

/// Stack of D -> D bijections plus a table of per-domain AdaBN statistics.
///
/// Layers are stored in generative order (index 0 is closest to the latent
/// variable). The normalize pass (data -> latent) walks the stack from the
/// back; the generate pass walks it from the front.
class FlowModel {
 public:
  explicit FlowModel(Index dim, double epsilon = kDefaultEpsilon)
      : dim_(dim), epsilon_(epsilon) {
    require(dim >= 1, "flow dimension must be positive");
    require(epsilon >= 0.0, "variance floor must be non-negative");
  }

  Index dim() const { return dim_; }
  double epsilon() const { return epsilon_; }
  std::size_t size() const { return layers_.size(); }

  const std::vector<Layer>& layers() const { return layers_; }
  /// Mutable access for optimizers; layer kinds and sizes must not change.
  std::vector<Layer>& mutable_layers() { return layers_; }

  void add_layer(Layer layer) {
    require(domains_.empty(), "cannot add layers after domains are registered");
    require(layer_dim(layer) == dim_, "layer dimension does not match flow");
    if (const auto* l = std::get_if<LeakyReLU>(&layer)) {
      require(l->alpha > 0.0 && l->alpha < 1.0, "leaky-ReLU slope must lie in (0,1)");
    }
    if (const auto* l = std::get_if<LinearLDU>(&layer)) {
      require(l->lower.rows() == dim_ && l->lower.cols() == dim_ &&
                  l->upper.rows() == dim_ && l->upper.cols() == dim_ &&
                  l->b.size() == dim_,
              "malformed LDU parameter block");
      require((l->d.array() != 0.0).all(), "LDU scale entries must be nonzero");
    }
    if (const auto* l = std::get_if<AdaBN>(&layer)) {
      require(l->beta.size() == dim_, "malformed AdaBN parameter block");
      require((l->gamma.array() != 0.0).all(), "AdaBN gamma entries must be nonzero");
    }
    layers_.push_back(std::move(layer));
  }

  std::vector<std::size_t> adabn_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (std::holds_alternative<AdaBN>(layers_[i])) out.push_back(i);
    }
    return out;
  }

  const std::map<DomainId, DomainStats>& domains() const { return domains_; }
  bool has_domain(const DomainId& k) const { return domains_.count(k) != 0; }

  const DomainStats& stats(const DomainId& k) const {
    auto it = domains_.find(k);
    if (it == domains_.end()) throw Error("unknown domain '" + k + "'");
    return it->second;
  }

  /// Registers or replaces a domain. The statistics must cover exactly the
  /// AdaBN layers of the stack.
  void set_domain(const DomainId& k, DomainStats stats) {
    const auto idx = adabn_indices();
    require(stats.layers.size() == idx.size(),
            "domain statistics do not cover the AdaBN layers");
    for (std::size_t i : idx) {
      auto it = stats.layers.find(i);
      require(it != stats.layers.end(), "missing statistics for layer " + std::to_string(i));
      require(it->second.mu.size() == dim_ && it->second.sigma.size() == dim_,
              "statistics have wrong dimension");
      require((it->second.sigma.array() >= 0.0).all(), "variance must be non-negative");
    }
    domains_[k] = std::move(stats);
  }

  void remove_domain(const DomainId& k) {
    if (domains_.erase(k) == 0) throw Error("unknown domain '" + k + "'");
  }

  /// Statistics slice for layer i, or nullptr for non-AdaBN layers.
  const BNStats* layer_stats(const DomainStats& ds, std::size_t i) const {
    if (!std::holds_alternative<AdaBN>(layers_[i])) return nullptr;
    return &ds.layers.at(i);
  }

 private:
  Index dim_;
  double epsilon_;
  std::vector<Layer> layers_;
  std::map<DomainId, DomainStats> domains_;
};

struct NormalizeResult {
  Vector z;
  double logdet = 0.0;
};

struct BatchNormalizeResult {
  Batch z;
  Vector logdet;
};

namespace detail {

inline void check_finite(const Batch& z, std::size_t layer) {
  if (!z.allFinite()) {
    throw NumericError("non-finite activation after layer " + std::to_string(layer));
  }
}

}  // namespace detail

/// Data -> latent with domain k's statistics.
inline BatchNormalizeResult normalize_batch(const FlowModel& model, const Batch& x,
                                            const DomainId& k) {
  const DomainStats& ds = model.stats(k);
  require(x.cols() == model.dim(), "input dimension does not match flow");
  if (!x.allFinite()) throw NumericError("non-finite input");
  BatchNormalizeResult out{x, Vector::Zero(x.rows())};
  for (std::size_t i = model.size(); i-- > 0;) {
    auto r = normalize_rows(model.layers()[i], out.z, model.layer_stats(ds, i),
                            model.epsilon());
    detail::check_finite(r.rows, i);
    out.z = std::move(r.rows);
    out.logdet += r.logdet;
  }
  return out;
}

inline NormalizeResult normalize(const FlowModel& model, const Vector& x,
                                 const DomainId& k) {
  auto r = normalize_batch(model, x.transpose(), k);
  return {r.z.row(0).transpose(), r.logdet(0)};
}

/// Latent -> data with domain k's statistics.
inline Batch generate_batch(const FlowModel& model, const Batch& z, const DomainId& k) {
  const DomainStats& ds = model.stats(k);
  require(z.cols() == model.dim(), "latent dimension does not match flow");
  if (!z.allFinite()) throw NumericError("non-finite latent");
  Batch x = z;
  for (std::size_t i = 0; i < model.size(); ++i) {
    x = generate_rows(model.layers()[i], x, model.layer_stats(ds, i), model.epsilon());
    detail::check_finite(x, i);
  }
  return x;
}

inline Vector generate(const FlowModel& model, const Vector& z, const DomainId& k) {
  return generate_batch(model, z.transpose(), k).row(0).transpose();
}

/// ln N(z; 0, I) per row.
inline Vector base_log_density(const Batch& z) {
  return (-0.5 * static_cast<double>(z.cols()) * kLog2Pi) -
         0.5 * z.rowwise().squaredNorm().array();
}

inline Vector log_likelihood_batch(const FlowModel& model, const Batch& x,
                                   const DomainId& k) {
  auto r = normalize_batch(model, x, k);
  return base_log_density(r.z) + r.logdet;
}

inline double log_likelihood(const FlowModel& model, const Vector& x, const DomainId& k) {
  return log_likelihood_batch(model, x.transpose(), k)(0);
}

/// Builds a flow from a list of layer kinds given in normalize order
/// (first entry touches the data). Parameters use the near-identity start.
inline FlowModel make_flow(Index dim, const std::vector<LayerKind>& normalize_order,
                           std::uint64_t seed, double alpha = kDefaultAlpha,
                           double epsilon = kDefaultEpsilon) {
  FlowModel model(dim, epsilon);
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  for (LayerKind k : normalize_order) {
    switch (k) {
      case LayerKind::kLinearLDU: layers.emplace_back(LinearLDU::near_identity(dim, rng)); break;
      case LayerKind::kLeakyReLU: layers.emplace_back(LeakyReLU{dim, alpha}); break;
      case LayerKind::kAdaBN: layers.emplace_back(AdaBN::identity(dim)); break;
    }
  }
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) model.add_layer(std::move(*it));
  return model;
}

/// Linear, AdaBN, then (LeakyReLU, Linear, AdaBN) repeated; `blocks` counts
/// Linear+AdaBN pairs. blocks = 2 gives the five-layer anomaly model.
inline std::vector<LayerKind> default_architecture(int blocks = 2) {
  require(blocks >= 1, "need at least one block");
  std::vector<LayerKind> arch{LayerKind::kLinearLDU, LayerKind::kAdaBN};
  for (int b = 1; b < blocks; ++b) {
    arch.insert(arch.end(), {LayerKind::kLeakyReLU, LayerKind::kLinearLDU, LayerKind::kAdaBN});
  }
  return arch;
}

/// Pushes a batch through the stack in the normalize direction, measuring
/// each AdaBN layer's input moments on the fly and normalizing with them.
/// Returns the moments keyed by layer index.
inline DomainStats measure_batch_stats(const FlowModel& model, const Batch& x) {
  DomainStats ds;
  Batch z = x;
  for (std::size_t i = model.size(); i-- > 0;) {
    const Layer& layer = model.layers()[i];
    if (std::holds_alternative<AdaBN>(layer)) {
      BNStats s = batch_moments(z);
      z = normalize_rows(layer, z, &s, model.epsilon()).rows;
      ds.layers.emplace(i, std::move(s));
    } else {
      z = normalize_rows(layer, z, nullptr, model.epsilon()).rows;
    }
    detail::check_finite(z, i);
  }
  return ds;
}

}  // namespace adaflow
