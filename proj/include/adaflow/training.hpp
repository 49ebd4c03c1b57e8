#pragma once

#include "adaflow/adaptation.hpp"
#include "adaflow/flow.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <optional>
#include <random>
#include <variant>
#include <vector>

namespace adaflow {

enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  int epochs = 20;
  Index batch_size = 128;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// Weight kept by the running AdaBN averages at each update.
  double stats_momentum = 0.9;
  std::optional<double> grad_clip = std::nullopt;

  void validate() const {
    require(epochs >= 0, "epochs must be non-negative");
    require(batch_size >= 2, "batch size must be at least 2");
    require(learning_rate > 0.0, "learning rate must be positive");
    require(stats_momentum >= 0.0 && stats_momentum < 1.0, "stats momentum must lie in [0,1)");
    require(!grad_clip || *grad_clip > 0.0, "gradient clip must be positive");
  }
};

/// How AdaBN layers obtain statistics during a pass.
enum class StatsMode {
  kBatch,   ///< moments of the current batch, differentiated through
  kFrozen,  ///< registered domain statistics, treated as constants
};

struct LinearLDUGrad {
  Matrix lower;
  Matrix upper;
  Vector d;
  Vector b;
};

struct AdaBNGrad {
  Vector gamma;
  Vector beta;
};

using LayerGrad = std::variant<LinearLDUGrad, std::monostate, AdaBNGrad>;

/// Gradients mirroring the parameter blocks, one entry per layer.
struct GradientBlock {
  std::vector<LayerGrad> layers;

  Index parameter_count() const {
    Index n = 0;
    for (const auto& g : layers) {
      if (const auto* l = std::get_if<LinearLDUGrad>(&g)) {
        const Index d = l->d.size();
        n += d * (d - 1) + 2 * d;
      } else if (const auto* a = std::get_if<AdaBNGrad>(&g)) {
        n += 2 * a->gamma.size();
      }
    }
    return n;
  }
};

namespace detail {

struct Tape {
  std::vector<Batch> inputs;  // input of layer i in the normalize pass
  std::map<std::size_t, BNStats> stats;
  Batch z0;
  Vector logdet;
};

inline Tape forward_tape(const FlowModel& model, const Batch& x, StatsMode mode,
                         const DomainId& k) {
  require(x.cols() == model.dim(), "input dimension does not match flow");
  if (!x.allFinite()) throw NumericError("non-finite input");
  const DomainStats* ds = mode == StatsMode::kFrozen ? &model.stats(k) : nullptr;
  Tape t;
  t.inputs.resize(model.size());
  t.logdet = Vector::Zero(x.rows());
  Batch z = x;
  for (std::size_t i = model.size(); i-- > 0;) {
    const Layer& layer = model.layers()[i];
    t.inputs[i] = z;
    const BNStats* s = nullptr;
    if (std::holds_alternative<AdaBN>(layer)) {
      BNStats st = mode == StatsMode::kBatch ? batch_moments(z) : ds->layers.at(i);
      s = &t.stats.emplace(i, std::move(st)).first->second;
    }
    auto r = normalize_rows(layer, z, s, model.epsilon());
    check_finite(r.rows, i);
    z = std::move(r.rows);
    t.logdet += r.logdet;
  }
  t.z0 = std::move(z);
  return t;
}

/// Mean anomaly score over the batch.
inline double tape_objective(const Tape& t) {
  return -(base_log_density(t.z0) + t.logdet).mean();
}

}  // namespace detail

/// Summed per-domain mean anomaly score.
inline double nll_objective(const FlowModel& model, const std::map<DomainId, Batch>& batches,
                            StatsMode mode = StatsMode::kFrozen) {
  require(!batches.empty(), "no batches supplied");
  double total = 0.0;
  for (const auto& [k, x] : batches) {
    require(x.rows() > 0, "empty batch for domain '" + k + "'");
    if (!model.has_domain(k)) throw Error("unknown domain '" + k + "'");
    if (mode == StatsMode::kBatch && !model.adabn_indices().empty()) {
      require(x.rows() >= 2, "batch statistics need two samples");
    }
    total += detail::tape_objective(detail::forward_tape(model, x, mode, k));
  }
  return total;
}

struct BackwardResult {
  double objective = 0.0;
  GradientBlock grads;
  /// Moments seen at each AdaBN layer (batch mode) or the frozen ones.
  DomainStats stats;
};

/// Objective of a single-domain batch and its exact parameter gradient.
inline BackwardResult backward(const FlowModel& model, const Batch& batch, const DomainId& k,
                               StatsMode mode = StatsMode::kBatch) {
  require(batch.rows() > 0, "empty batch");
  if (mode == StatsMode::kBatch) {
    if (!model.adabn_indices().empty()) require(batch.rows() >= 2, "batch statistics need two samples");
  } else if (!model.has_domain(k)) {
    throw Error("unknown domain '" + k + "'");
  }
  detail::Tape tape = detail::forward_tape(model, batch, mode, k);
  BackwardResult out;
  out.objective = detail::tape_objective(tape);
  out.grads.layers.resize(model.size());

  const double n = static_cast<double>(batch.rows());
  const double eps = model.epsilon();
  Batch g = tape.z0 / n;  // d objective / d z0

  for (std::size_t i = 0; i < model.size(); ++i) {
    const Layer& layer = model.layers()[i];
    const Batch& x = tape.inputs[i];
    if (const auto* lin = std::get_if<LinearLDU>(&layer)) {
      Matrix lo = lin->lower.triangularView<Eigen::StrictlyLower>();
      lo.diagonal().setOnes();
      Matrix up = lin->upper.triangularView<Eigen::StrictlyUpper>();
      up.diagonal().setOnes();
      const Matrix a = lin->d.asDiagonal() * up;
      const Matrix w = lo * a;
      const Matrix dw = g.transpose() * x;
      const Matrix da = lo.transpose() * dw;
      LinearLDUGrad lg;
      lg.lower = (dw * a.transpose()).triangularView<Eigen::StrictlyLower>();
      lg.upper = (lin->d.asDiagonal() * da).triangularView<Eigen::StrictlyUpper>();
      lg.d = da.cwiseProduct(up).rowwise().sum() - lin->d.cwiseInverse();
      lg.b = g.colwise().sum().transpose();
      out.grads.layers[i] = std::move(lg);
      g = g * w;
    } else if (const auto* lr = std::get_if<LeakyReLU>(&layer)) {
      g = (x.array() < 0.0).select(lr->alpha * g, g);
      out.grads.layers[i] = std::monostate{};
    } else {
      const auto& bn = std::get<AdaBN>(layer);
      const BNStats& s = tape.stats.at(i);
      const Vector inv = (s.sigma.array() + eps).rsqrt().matrix();
      const Batch centered = x.rowwise() - s.mu.transpose();
      const Batch xhat = (centered.array().rowwise() * inv.transpose().array()).matrix();
      AdaBNGrad ag;
      ag.gamma = (g.cwiseProduct(xhat)).colwise().sum().transpose() - bn.gamma.cwiseInverse();
      ag.beta = g.colwise().sum().transpose();
      const Batch dxhat = (g.array().rowwise() * bn.gamma.transpose().array()).matrix();
      if (mode == StatsMode::kFrozen) {
        g = (dxhat.array().rowwise() * inv.transpose().array()).matrix();
      } else {
        const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
        const Eigen::RowVectorXd sum_dxhat_xhat = dxhat.cwiseProduct(xhat).colwise().sum();
        Batch core = (n * dxhat).rowwise() - sum_dxhat;
        core -= (xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
        g = ((core.array().rowwise() * inv.transpose().array()) / n).matrix();
        // log-det term -1/2 ln(sigma + eps) depends on the batch variance
        const Vector var_term = (s.sigma.array() + eps).inverse().matrix() / n;
        g += (centered.array().rowwise() * var_term.transpose().array()).matrix();
      }
      out.grads.layers[i] = std::move(ag);
    }
  }
  for (const auto& [i, s] : tape.stats) out.stats.layers.emplace(i, s);
  return out;
}

/// Trainable parameters in a fixed order: per layer, LDU strict-lower
/// (row-major), strict-upper (row-major), d, b; AdaBN gamma, beta.
inline Vector flatten_parameters(const FlowModel& model) {
  std::vector<double> out;
  for (const Layer& layer : model.layers()) {
    if (const auto* l = std::get_if<LinearLDU>(&layer)) {
      const Index d = l->dim();
      for (Index r = 0; r < d; ++r)
        for (Index c = 0; c < r; ++c) out.push_back(l->lower(r, c));
      for (Index r = 0; r < d; ++r)
        for (Index c = r + 1; c < d; ++c) out.push_back(l->upper(r, c));
      out.insert(out.end(), l->d.data(), l->d.data() + d);
      out.insert(out.end(), l->b.data(), l->b.data() + d);
    } else if (const auto* a = std::get_if<AdaBN>(&layer)) {
      out.insert(out.end(), a->gamma.data(), a->gamma.data() + a->dim());
      out.insert(out.end(), a->beta.data(), a->beta.data() + a->dim());
    }
  }
  return Eigen::Map<const Vector>(out.data(), static_cast<Index>(out.size()));
}

inline void assign_parameters(FlowModel& model, const Vector& flat) {
  Index p = 0;
  auto take = [&]() {
    require(p < flat.size(), "parameter vector too short");
    return flat(p++);
  };
  for (Layer& layer : model.mutable_layers()) {
    if (auto* l = std::get_if<LinearLDU>(&layer)) {
      const Index d = l->dim();
      for (Index r = 0; r < d; ++r)
        for (Index c = 0; c < r; ++c) l->lower(r, c) = take();
      for (Index r = 0; r < d; ++r)
        for (Index c = r + 1; c < d; ++c) l->upper(r, c) = take();
      for (Index i = 0; i < d; ++i) l->d(i) = take();
      for (Index i = 0; i < d; ++i) l->b(i) = take();
    } else if (auto* a = std::get_if<AdaBN>(&layer)) {
      for (Index i = 0; i < a->dim(); ++i) a->gamma(i) = take();
      for (Index i = 0; i < a->dim(); ++i) a->beta(i) = take();
    }
  }
  require(p == flat.size(), "parameter vector too long");
}

inline Vector flatten_gradients(const GradientBlock& grads) {
  std::vector<double> out;
  for (const auto& g : grads.layers) {
    if (const auto* l = std::get_if<LinearLDUGrad>(&g)) {
      const Index d = l->d.size();
      for (Index r = 0; r < d; ++r)
        for (Index c = 0; c < r; ++c) out.push_back(l->lower(r, c));
      for (Index r = 0; r < d; ++r)
        for (Index c = r + 1; c < d; ++c) out.push_back(l->upper(r, c));
      out.insert(out.end(), l->d.data(), l->d.data() + d);
      out.insert(out.end(), l->b.data(), l->b.data() + d);
    } else if (const auto* a = std::get_if<AdaBNGrad>(&g)) {
      out.insert(out.end(), a->gamma.data(), a->gamma.data() + a->gamma.size());
      out.insert(out.end(), a->beta.data(), a->beta.data() + a->beta.size());
    }
  }
  return Eigen::Map<const Vector>(out.data(), static_cast<Index>(out.size()));
}

/// First-order optimizer over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, Index n)
      : cfg_(cfg), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

  void step(Vector& params, Vector grad) {
    if (cfg_.grad_clip) {
      const double norm = grad.norm();
      if (norm > *cfg_.grad_clip) grad *= *cfg_.grad_clip / norm;
    }
    if (cfg_.optimizer == OptimizerKind::kSgd) {
      params -= cfg_.learning_rate * grad;
      return;
    }
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    params.array() -= cfg_.learning_rate * (m_.array() / c1) /
                      ((v_.array() / c2).sqrt() + cfg_.adam_epsilon);
  }

 private:
  TrainConfig cfg_;
  Vector m_;
  Vector v_;
  long t_ = 0;
};

struct LossRecord {
  int epoch = 0;
  DomainId domain;
  double nll = 0.0;
};

struct TrainResult {
  std::vector<LossRecord> curve;
  std::size_t steps = 0;
  double seconds = 0.0;
};

namespace detail {

inline void blend_running_stats(FlowModel& model, const DomainId& k, const DomainStats& batch,
                                double momentum) {
  if (!model.has_domain(k)) {
    model.set_domain(k, batch);
    return;
  }
  DomainStats running = model.stats(k);
  for (auto& [i, s] : running.layers) {
    const BNStats& b = batch.layers.at(i);
    s.mu = momentum * s.mu + (1.0 - momentum) * b.mu;
    s.sigma = momentum * s.sigma + (1.0 - momentum) * b.sigma;
  }
  model.set_domain(k, std::move(running));
}

/// Row-index batches of one epoch, round-robin over domains. Each domain's
/// rows are shuffled; a trailing batch with fewer than two rows is dropped.
inline std::vector<std::pair<DomainId, std::vector<Index>>> epoch_schedule(
    const std::map<DomainId, Batch>& data, Index batch_size, std::mt19937_64& rng) {
  std::vector<std::pair<DomainId, std::vector<std::vector<Index>>>> per_domain;
  for (const auto& [k, x] : data) {
    std::vector<Index> perm(static_cast<std::size_t>(x.rows()));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<Index>> chunks;
    for (std::size_t s = 0; s < perm.size(); s += static_cast<std::size_t>(batch_size)) {
      const std::size_t e = std::min(perm.size(), s + static_cast<std::size_t>(batch_size));
      if (e - s >= 2) chunks.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(s),
                                          perm.begin() + static_cast<std::ptrdiff_t>(e));
    }
    per_domain.emplace_back(k, std::move(chunks));
  }
  std::vector<std::pair<DomainId, std::vector<Index>>> out;
  for (std::size_t round = 0;; ++round) {
    bool any = false;
    for (auto& [k, chunks] : per_domain) {
      if (round < chunks.size()) {
        out.emplace_back(k, std::move(chunks[round]));
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

inline void check_datasets(const FlowModel& model, const std::map<DomainId, Batch>& data,
                           const TrainConfig& cfg) {
  cfg.validate();
  require(!data.empty(), "no training domains supplied");
  for (const auto& [k, x] : data) {
    require(x.cols() == model.dim(), "dataset '" + k + "' has wrong dimension");
    require(x.rows() >= cfg.batch_size,
            "dataset '" + k + "' has fewer samples than the batch size");
    if (!x.allFinite()) throw NumericError("non-finite sample in dataset '" + k + "'");
  }
}

inline TrainResult run_training(FlowModel& model, const std::map<DomainId, Batch>& data,
                                const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  std::mt19937_64 rng(derive_seed(cfg.seed, "batch-order"));
  Vector params = flatten_parameters(model);
  Optimizer opt(cfg, params.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::map<DomainId, std::pair<double, int>> sums;
    const auto schedule = epoch_schedule(data, cfg.batch_size, rng);
    for (std::size_t b = 0; b < schedule.size(); ++b) {
      const auto& [k, rows] = schedule[b];
      const Batch batch = data.at(k)(rows, Eigen::all);
      BackwardResult r;
      try {
        r = backward(model, batch, k, StatsMode::kBatch);
      } catch (const NumericError& e) {
        throw Error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(b) + ": " + e.what());
      }
      if (!std::isfinite(r.objective)) {
        throw Error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(b) + ": non-finite loss");
      }
      if (params.size() > 0) {
        opt.step(params, flatten_gradients(r.grads));
        assign_parameters(model, params);
      }
      blend_running_stats(model, k, r.stats, cfg.stats_momentum);
      auto& acc = sums[k];
      acc.first += r.objective;
      acc.second += 1;
      ++result.steps;
    }
    for (const auto& [k, acc] : sums) {
      result.curve.push_back({epoch, k, acc.first / acc.second});
    }
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace detail

/// Trains every parameter on K domain datasets. Each mini-batch is drawn
/// from a single domain; AdaBN uses batch moments in the forward/backward
/// pass and keeps momentum-averaged per-domain running statistics, which are
/// the statistics registered on the model afterwards.
inline TrainResult pretrain(FlowModel& model, const std::map<DomainId, Batch>& datasets,
                            const TrainConfig& cfg) {
  detail::check_datasets(model, datasets, cfg);
  return detail::run_training(model, datasets, cfg);
}

/// Gradient-based adaptation baseline: registers `k_new` by a forward pass,
/// then updates all parameters on the new domain only.
inline TrainResult finetune(FlowModel& model, const Batch& dataset, const DomainId& k_new,
                            const TrainConfig& cfg) {
  std::map<DomainId, Batch> data{{k_new, dataset}};
  detail::check_datasets(model, data, cfg);
  const auto start = std::chrono::steady_clock::now();
  if (!model.has_domain(k_new)) adapt(model, dataset, k_new);
  TrainResult r = detail::run_training(model, data, cfg);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace adaflow
