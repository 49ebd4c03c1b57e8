#pragma once

#include "adaflow/adaptation.hpp"
#include "adaflow/autoencoder.hpp"
#include "adaflow/io.hpp"
#include "adaflow/scoring.hpp"
#include "adaflow/synth.hpp"
#include "adaflow/training.hpp"

#include <chrono>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace adaflow {

/// Configuration of the anomaly-detection experiment matrix.
struct BenchConfig {
  BenchmarkSpec data;
  int blocks = 2;
  double alpha = kDefaultAlpha;
  TrainConfig pretrain{.epochs = 20, .batch_size = 128, .learning_rate = 1e-3};
  TrainConfig finetune{.epochs = 200, .batch_size = 100, .learning_rate = 1e-4};
  TrainConfig autoencoder{.epochs = 20, .batch_size = 128, .learning_rate = 1e-3};
  std::vector<Index> adapt_sizes{10, 100, 1000};
  Index finetune_samples = 1000;
};

struct MethodResult {
  std::string method;
  Index n_samples = 0;
  std::optional<double> mean_nll;
  double auroc = 0.0;
  double seconds = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<MethodResult> methods;
  std::vector<std::pair<std::string, double>> timings;
};

inline constexpr const char* kPooledDomain = "pooled";

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

inline MethodResult flow_row(std::string method, Index n, const FlowModel& m, const Dataset& test,
                             const DomainId& k, double secs) {
  const EvalReport r = evaluate(m, test.x, test.labels, k);
  return {std::move(method), n, r.mean_nll, r.auroc.value_or(0.5), secs};
}

inline std::map<DomainId, Batch> batches_of(const std::map<DomainId, Dataset>& data) {
  std::map<DomainId, Batch> out;
  for (const auto& [k, d] : data) out.emplace(k, d.x);
  return out;
}

inline Batch concat_rows(const std::map<DomainId, Dataset>& data) {
  Index rows = 0, dim = 0;
  for (const auto& [k, d] : data) {
    rows += d.size();
    dim = d.dim();
  }
  Batch out(rows, dim);
  Index r = 0;
  for (const auto& [k, d] : data) {
    out.middleRows(r, d.size()) = d.x;
    r += d.size();
  }
  return out;
}

}  // namespace detail

/// One seed of the experiment matrix: a flow trained on pooled
/// pre-training data (single-domain batch norm), the autoencoder, the
/// per-domain flow adapted with each sample budget, and the pooled flow
/// fine-tuned on the target.
inline SeedResult run_bench_seed(std::uint64_t seed, const BenchConfig& cfg) {
  const Benchmark bench = make_benchmark(derive_seed(seed, "bench-data"), cfg.data);
  const Index dim = cfg.data.dim;
  const auto arch = default_architecture(cfg.blocks);
  SeedResult out;
  out.seed = seed;

  TrainConfig pre = cfg.pretrain;
  pre.seed = derive_seed(seed, "bench-pretrain");

  // Flow with ordinary batch norm over the pooled domains.
  FlowModel plain = make_flow(dim, arch, derive_seed(seed, "bench-flow-init"), cfg.alpha);
  {
    const auto t = std::chrono::steady_clock::now();
    pretrain(plain, {{kPooledDomain, detail::concat_rows(bench.pretrain)}}, pre);
    out.timings.emplace_back("pretrain_flow", detail::seconds_since(t));
  }
  out.methods.push_back(detail::flow_row("flow", 0, plain, bench.target_test, kPooledDomain, 0.0));

  AEModel ae(default_ae_sizes(dim), derive_seed(seed, "bench-ae-init"));
  {
    TrainConfig c = cfg.autoencoder;
    c.seed = derive_seed(seed, "bench-ae-train");
    const auto r = ae_train(ae, detail::batches_of(bench.pretrain), c);
    out.timings.emplace_back("pretrain_ae", r.seconds);
    const Vector s = ae_scores(ae, bench.target_test.x);
    const EvalReport rep = evaluate_scores(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())),
                                           bench.target_test.labels, false);
    out.methods.push_back({"ae", 0, std::nullopt, rep.auroc.value_or(0.5), 0.0});
  }

  FlowModel ada = make_flow(dim, arch, derive_seed(seed, "bench-flow-init"), cfg.alpha);
  {
    const auto t = std::chrono::steady_clock::now();
    pretrain(ada, detail::batches_of(bench.pretrain), pre);
    out.timings.emplace_back("pretrain_adaflow", detail::seconds_since(t));
  }
  for (Index n : cfg.adapt_sizes) {
    FlowModel m = ada;
    const Batch samples = bench.target_train.x.topRows(n);
    const auto t = std::chrono::steady_clock::now();
    adapt(m, samples, bench.target_id);
    const double secs = detail::seconds_since(t);
    out.timings.emplace_back("adapt_n" + std::to_string(n), secs);
    out.methods.push_back(detail::flow_row("adaflow", n, m, bench.target_test, bench.target_id, secs));
  }

  {
    FlowModel m = plain;
    TrainConfig c = cfg.finetune;
    c.seed = derive_seed(seed, "bench-finetune");
    const auto r = finetune(m, bench.target_train.x.topRows(cfg.finetune_samples), bench.target_id, c);
    out.timings.emplace_back("finetune_n" + std::to_string(cfg.finetune_samples), r.seconds);
    out.methods.push_back(
        detail::flow_row("flow_finetuned", cfg.finetune_samples, m, bench.target_test, bench.target_id, r.seconds));
  }
  return out;
}

/// Seed-averaged rows in experiment order.
inline std::vector<MethodResult> average_results(const std::vector<SeedResult>& seeds) {
  require(!seeds.empty(), "no seeds to average");
  std::vector<MethodResult> mean = seeds.front().methods;
  for (auto& m : mean) {
    m.mean_nll = m.mean_nll ? std::optional<double>(0.0) : std::nullopt;
    m.auroc = 0.0;
    m.seconds = 0.0;
  }
  const double inv = 1.0 / static_cast<double>(seeds.size());
  for (const auto& s : seeds) {
    require(s.methods.size() == mean.size(), "seed results differ in shape");
    for (std::size_t i = 0; i < mean.size(); ++i) {
      if (mean[i].mean_nll) *mean[i].mean_nll += *s.methods[i].mean_nll * inv;
      mean[i].auroc += s.methods[i].auroc * inv;
      mean[i].seconds += s.methods[i].seconds * inv;
    }
  }
  return mean;
}

/// Results table. Wall-clock seconds are only written when requested, so
/// that the default table is a pure function of the seeds and flags.
inline std::string results_csv(const std::vector<MethodResult>& rows, bool with_seconds) {
  std::ostringstream os;
  os << "method,n_samples,mean_nll,auroc,seconds\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.n_samples << ','
       << (r.mean_nll ? detail::format_double(*r.mean_nll) : std::string("NA")) << ','
       << detail::format_double(r.auroc) << ',';
    if (with_seconds) os << detail::format_double(r.seconds);
    os << '\n';
  }
  return os.str();
}

inline std::string per_seed_csv(const std::vector<SeedResult>& seeds) {
  std::ostringstream os;
  os << "seed,method,n_samples,mean_nll,auroc\n";
  for (const auto& s : seeds) {
    for (const auto& r : s.methods) {
      os << s.seed << ',' << r.method << ',' << r.n_samples << ','
         << (r.mean_nll ? detail::format_double(*r.mean_nll) : std::string("NA")) << ','
         << detail::format_double(r.auroc) << '\n';
    }
  }
  return os.str();
}

/// Seed-averaged wall-clock time per phase.
inline std::vector<std::pair<std::string, double>> average_timings(const std::vector<SeedResult>& seeds) {
  std::vector<std::pair<std::string, double>> out = seeds.front().timings;
  for (auto& [p, s] : out) s = 0.0;
  for (const auto& seed : seeds)
    for (std::size_t i = 0; i < out.size(); ++i) out[i].second += seed.timings[i].second / static_cast<double>(seeds.size());
  return out;
}

}  // namespace adaflow
