#include "cli.hpp"

#include "adaflow/adaflow.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <ostream>
#include <string>

namespace adaflow::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string model, data, domain_id, out, report, loss_curve;
  std::string from, to;
  std::string model_type;
  std::uint64_t seed = 0;
  int epochs = -1;
  Index batch_size = -1;
  double lr = -1.0;
  Index n_adapt = -1;
  int blocks = 2;
  double alpha = kDefaultAlpha;
  bool pooled = false;
  // synth
  Index dim = 16;
  int domains = 3;
  Index n_train = 5000;
  Index n_test = 2000;
  double contamination = 0.5;
  double mix = 0.5;
  // bench
  int seeds = 10;
  bool timing_in_results = false;
};

TrainConfig train_config(const Options& o, TrainConfig base) {
  if (o.epochs >= 0) base.epochs = o.epochs;
  if (o.batch_size > 0) base.batch_size = o.batch_size;
  if (o.lr > 0.0) base.learning_rate = o.lr;
  base.seed = derive_seed(o.seed, "cli-train");
  return base;
}

Dataset load(const std::string& path, Index limit = -1) {
  Dataset d = read_dataset(path);
  if (limit > 0 && limit < d.size()) d = d.head(limit);
  return d;
}

std::string model_type_of(const json& j) { return j.value("type", std::string("flow")); }

void check_model_type(const Options& o, const std::string& actual) {
  if (!o.model_type.empty() && o.model_type != actual) {
    throw Error("model file holds a '" + actual + "' model, --model-type says '" + o.model_type + "'");
  }
}

void cmd_synth(const Options& o, std::ostream& out) {
  BenchmarkSpec spec;
  spec.dim = o.dim;
  spec.domains = o.domains;
  spec.angles_deg.clear();
  for (int k = 0; k < o.domains; ++k) spec.angles_deg.push_back(30.0 * k);
  spec.angles_deg.push_back(90.0);
  spec.n_train = o.n_train;
  spec.n_test = o.n_test;
  spec.anomalies.contamination = o.contamination;
  spec.anomalies.mix = o.mix;
  const Benchmark b = make_benchmark(o.seed, spec);
  Dataset pre;
  Index rows = 0;
  for (const auto& [k, d] : b.pretrain) rows += d.size();
  pre.x.resize(rows, spec.dim);
  Index r = 0;
  for (const auto& [k, d] : b.pretrain) {
    pre.x.middleRows(r, d.size()) = d.x;
    pre.domains.insert(pre.domains.end(), d.domains.begin(), d.domains.end());
    r += d.size();
  }
  const fs::path dir(o.out);
  write_dataset(dir / "pretrain.csv", pre);
  write_dataset(dir / "target_train.csv", b.target_train);
  write_dataset(dir / "target_test.csv", b.target_test);
  out << "wrote " << b.pretrain.size() << " pre-training domains and target '" << b.target_id
      << "' to " << dir.string() << "\n";
}

void cmd_train(const Options& o, std::ostream& out) {
  const Dataset d = load(o.data);
  const std::string type = o.model_type.empty() ? "flow" : o.model_type;
  auto data = split_by_domain(d, kPooledDomain);
  if (o.pooled) data = split_by_domain(Dataset{d.x, {}, {}}, kPooledDomain);
  TrainResult r;
  if (type == "ae") {
    AEModel ae(default_ae_sizes(d.dim()), derive_seed(o.seed, "cli-init"));
    r = ae_train(ae, data, train_config(o, BenchConfig{}.autoencoder));
    write_json_file(o.out, ae_to_json(ae));
  } else {
    FlowModel m = make_flow(d.dim(), default_architecture(o.blocks), derive_seed(o.seed, "cli-init"), o.alpha);
    r = pretrain(m, data, train_config(o, BenchConfig{}.pretrain));
    write_json_file(o.out, flow_to_json(m));
  }
  if (!o.loss_curve.empty()) write_text_file(o.loss_curve, loss_curve_csv(r.curve));
  if (!o.report.empty()) write_text_file(o.report, timing_csv({{"train", r.seconds}}));
  out << "trained " << type << " on " << data.size() << " domain(s) in " << r.seconds << " s\n";
}

void cmd_adapt(const Options& o, std::ostream& out) {
  const json j = read_json_file(o.model);
  check_model_type(o, model_type_of(j));
  if (model_type_of(j) != "flow") throw Error("only flow models can be adapted");
  FlowModel m = flow_from_json(j);
  const Dataset d = load(o.data, o.n_adapt);
  const auto t = std::chrono::steady_clock::now();
  adapt(m, d.x, o.domain_id);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
  write_json_file(o.out, flow_to_json(m));
  if (!o.report.empty()) write_text_file(o.report, timing_csv({{"adapt", secs}}));
  out << "adapted domain '" << o.domain_id << "' from " << d.size() << " samples in " << secs << " s\n";
}

void cmd_finetune(const Options& o, std::ostream& out) {
  const json j = read_json_file(o.model);
  check_model_type(o, model_type_of(j));
  if (model_type_of(j) != "flow") throw Error("only flow models can be fine-tuned here");
  FlowModel m = flow_from_json(j);
  const Dataset d = load(o.data, o.n_adapt);
  const TrainResult r = finetune(m, d.x, o.domain_id, train_config(o, BenchConfig{}.finetune));
  write_json_file(o.out, flow_to_json(m));
  if (!o.report.empty()) write_text_file(o.report, timing_csv({{"finetune", r.seconds}}));
  if (!o.loss_curve.empty()) write_text_file(o.loss_curve, loss_curve_csv(r.curve));
  out << "fine-tuned domain '" << o.domain_id << "' on " << d.size() << " samples in " << r.seconds << " s\n";
}

/// Scores of the rows of `d` and whether they are negative log-likelihoods.
std::pair<std::vector<double>, bool> score_rows(const Options& o, const Dataset& d) {
  const json j = read_json_file(o.model);
  const std::string type = model_type_of(j);
  check_model_type(o, type);
  Vector s;
  if (type == "ae") {
    s = ae_scores(ae_from_json(j), d.x);
  } else {
    if (o.domain_id.empty()) throw Error("--domain-id is required for flow models");
    s = anomaly_scores(flow_from_json(j), d.x, o.domain_id);
  }
  return {std::vector<double>(s.data(), s.data() + s.size()), type != "ae"};
}

void cmd_score(const Options& o, std::ostream& out) {
  const Dataset d = load(o.data);
  const auto [scores, nll] = score_rows(o, d);
  write_text_file(o.out, scores_csv(scores, d.labels));
  out << "scored " << scores.size() << " samples\n";
}

void cmd_eval(const Options& o, std::ostream& out) {
  const Dataset d = load(o.data);
  if (d.size() == 0) throw Error("empty test set");
  std::vector<int> labels = d.labels;
  if (labels.empty()) labels.assign(static_cast<std::size_t>(d.size()), kNormal);
  const auto t = std::chrono::steady_clock::now();
  const auto [scores, nll] = score_rows(o, d);
  EvalReport rep = evaluate_scores(scores, labels, nll);
  rep.timings["score"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
  const json j = report_to_json(rep);
  if (!o.out.empty()) write_json_file(o.out, j);
  out << "mean_nll=" << j["mean_nll"].dump() << " auroc=" << j["auroc"].dump() << "\n";
}

void cmd_translate(const Options& o, std::ostream& out) {
  const json j = read_json_file(o.model);
  check_model_type(o, model_type_of(j));
  if (model_type_of(j) != "flow") throw Error("translation needs a flow model");
  const FlowModel m = flow_from_json(j);
  const Dataset d = load(o.data);
  Dataset t{translate_batch(m, d.x, o.from, o.to), {}, {}};
  t.domains.assign(static_cast<std::size_t>(t.size()), o.to);
  write_dataset(o.out, t);
  out << "translated " << t.size() << " samples from '" << o.from << "' to '" << o.to << "'\n";
}

void cmd_bench(const Options& o, std::ostream& out) {
  if (o.seeds < 1) throw Error("--seeds must be at least 1");
  BenchConfig cfg;
  if (o.epochs >= 0) {
    cfg.pretrain.epochs = o.epochs;
    cfg.autoencoder.epochs = o.epochs;
  }
  if (o.batch_size > 0) cfg.pretrain.batch_size = o.batch_size;
  if (o.lr > 0.0) cfg.pretrain.learning_rate = o.lr;
  std::vector<SeedResult> results;
  for (int s = 0; s < o.seeds; ++s) {
    results.push_back(run_bench_seed(o.seed + static_cast<std::uint64_t>(s), cfg));
    out << "seed " << o.seed + static_cast<std::uint64_t>(s) << " done\n";
  }
  const fs::path dir(o.out);
  write_text_file(dir / "results.csv", results_csv(average_results(results), o.timing_in_results));
  write_text_file(dir / "results_per_seed.csv", per_seed_csv(results));
  write_text_file(dir / "timing.csv", timing_csv(average_timings(results)));
  out << "wrote results for " << o.seeds << " seed(s) to " << dir.string() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive normalizing-flow anomaly detection and domain translation"};
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Random seed"); };
  auto add_train = [&](CLI::App* c) {
    c->add_option("--epochs", o.epochs, "Training epochs");
    c->add_option("--batch-size", o.batch_size, "Mini-batch size")->check(CLI::Range(Index{2}, Index{1} << 40));
    c->add_option("--lr", o.lr, "Learning rate")->check(CLI::PositiveNumber);
  };
  auto add_type = [&](CLI::App* c) {
    c->add_option("--model-type", o.model_type, "flow or ae")->check(CLI::IsMember({"flow", "ae"}));
  };

  auto* synth = app.add_subcommand("synth", "Generate the synthetic multi-domain benchmark");
  add_seed(synth);
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--dim", o.dim, "Dimensionality")->check(CLI::PositiveNumber);
  synth->add_option("--domains", o.domains, "Pre-training domains")->check(CLI::PositiveNumber);
  synth->add_option("--n-train", o.n_train, "Training samples per domain");
  synth->add_option("--n-test", o.n_test, "Target test samples");
  synth->add_option("--contamination", o.contamination, "Anomalous fraction of the test set");
  synth->add_option("--mix", o.mix, "Weight of the box draw in each anomaly");

  auto* train = app.add_subcommand("train", "Train a flow (per-domain statistics) or an autoencoder");
  add_seed(train);
  add_train(train);
  add_type(train);
  train->add_option("--data", o.data, "Training CSV (domain column selects the domain)")->required();
  train->add_option("--out", o.out, "Model JSON")->required();
  train->add_option("--blocks", o.blocks, "Linear+AdaBN blocks")->check(CLI::PositiveNumber);
  train->add_option("--alpha", o.alpha, "Leaky-ReLU slope")->check(CLI::Range(0.0, 1.0));
  train->add_flag("--pooled", o.pooled, "Ignore domain labels (ordinary batch norm)");
  train->add_option("--loss-curve", o.loss_curve, "Loss curve CSV");
  train->add_option("--report", o.report, "Timing CSV");

  auto* finetune_cmd = app.add_subcommand("finetune", "Fine-tune all parameters on a new domain");
  add_seed(finetune_cmd);
  add_train(finetune_cmd);
  add_type(finetune_cmd);
  finetune_cmd->add_option("--model", o.model, "Input model JSON")->required();
  finetune_cmd->add_option("--data", o.data, "New-domain CSV")->required();
  finetune_cmd->add_option("--domain-id", o.domain_id, "New domain name")->required();
  finetune_cmd->add_option("--out", o.out, "Output model JSON")->required();
  finetune_cmd->add_option("--n-adapt", o.n_adapt, "Use only the first N rows");
  finetune_cmd->add_option("--report", o.report, "Timing CSV");
  finetune_cmd->add_option("--loss-curve", o.loss_curve, "Loss curve CSV");

  auto* adapt_cmd = app.add_subcommand("adapt", "Register a new domain from its samples");
  add_type(adapt_cmd);
  adapt_cmd->add_option("--model", o.model, "Input model JSON")->required();
  adapt_cmd->add_option("--data", o.data, "New-domain CSV")->required();
  adapt_cmd->add_option("--domain-id", o.domain_id, "New domain name")->required();
  adapt_cmd->add_option("--out", o.out, "Output model JSON")->required();
  adapt_cmd->add_option("--n-adapt", o.n_adapt, "Use only the first N rows");
  adapt_cmd->add_option("--report", o.report, "Timing CSV");

  auto* score = app.add_subcommand("score", "Write per-sample anomaly scores");
  add_type(score);
  score->add_option("--model", o.model, "Model JSON")->required();
  score->add_option("--data", o.data, "Samples CSV")->required();
  score->add_option("--domain-id", o.domain_id, "Domain statistics to use (flow)");
  score->add_option("--out", o.out, "Scores CSV")->required();

  auto* eval = app.add_subcommand("eval", "NLL and AUROC on a labeled test set");
  add_type(eval);
  eval->add_option("--model", o.model, "Model JSON")->required();
  eval->add_option("--data", o.data, "Test CSV")->required();
  eval->add_option("--domain-id", o.domain_id, "Domain statistics to use (flow)");
  eval->add_option("--out", o.out, "Report JSON");

  auto* translate_cmd = app.add_subcommand("translate", "Translate samples between domains");
  translate_cmd->add_option("--model", o.model, "Model JSON")->required();
  translate_cmd->add_option("--data", o.data, "Source-domain CSV")->required();
  translate_cmd->add_option("--from", o.from, "Source domain")->required();
  translate_cmd->add_option("--to", o.to, "Target domain")->required();
  translate_cmd->add_option("--out", o.out, "Output CSV")->required();

  auto* bench = app.add_subcommand("bench", "Run the anomaly-detection experiment matrix");
  add_seed(bench);
  bench->add_option("--seeds", o.seeds, "Number of seeds");
  bench->add_option("--epochs", o.epochs, "Pre-training epochs");
  bench->add_option("--batch-size", o.batch_size, "Pre-training batch size");
  bench->add_option("--lr", o.lr, "Pre-training learning rate");
  bench->add_option("--out", o.out, "Output directory")->required();
  bench->add_flag("--timing-in-results", o.timing_in_results, "Fill the seconds column of results.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (name == "synth") cmd_synth(o, out);
    else if (name == "train") cmd_train(o, out);
    else if (name == "adapt") cmd_adapt(o, out);
    else if (name == "finetune") cmd_finetune(o, out);
    else if (name == "score") cmd_score(o, out);
    else if (name == "eval") cmd_eval(o, out);
    else if (name == "translate") cmd_translate(o, out);
    else if (name == "bench") cmd_bench(o, out);
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace adaflow::cli
