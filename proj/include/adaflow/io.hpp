#pragma once

#include "adaflow/autoencoder.hpp"
#include "adaflow/flow.hpp"
#include "adaflow/scoring.hpp"
#include "adaflow/synth.hpp"
#include "adaflow/training.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace adaflow {

using json = nlohmann::json;

namespace detail {

inline json to_json_vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vec_from_json(const json& j, Index expected, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Index>(v.size()) != expected) {
    throw Error(std::string("field '") + what + "' has length " + std::to_string(v.size()) +
                ", expected " + std::to_string(expected));
  }
  return Eigen::Map<const Vector>(v.data(), expected);
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Self-describing flow document. Layers appear in storage order; the
/// normalize pass applies them from last to first.
inline json flow_to_json(const FlowModel& model) {
  json layers = json::array();
  double alpha = kDefaultAlpha;
  bool alpha_seen = false;
  for (const Layer& layer : model.layers()) {
    json l;
    l["kind"] = kind_name(kind_of(layer));
    if (const auto* lin = std::get_if<LinearLDU>(&layer)) {
      std::vector<double> lo, up;
      const Index d = lin->dim();
      for (Index r = 0; r < d; ++r)
        for (Index c = 0; c < r; ++c) lo.push_back(lin->lower(r, c));
      for (Index r = 0; r < d; ++r)
        for (Index c = r + 1; c < d; ++c) up.push_back(lin->upper(r, c));
      l["lower"] = lo;
      l["upper"] = up;
      l["d"] = detail::to_json_vec(lin->d);
      l["b"] = detail::to_json_vec(lin->b);
    } else if (const auto* lr = std::get_if<LeakyReLU>(&layer)) {
      l["alpha"] = lr->alpha;
      if (!alpha_seen) alpha = lr->alpha;
      alpha_seen = true;
    } else {
      const auto& bn = std::get<AdaBN>(layer);
      l["gamma"] = detail::to_json_vec(bn.gamma);
      l["beta"] = detail::to_json_vec(bn.beta);
    }
    layers.push_back(std::move(l));
  }
  json domains = json::object();
  for (const auto& [k, ds] : model.domains()) {
    json d = json::object();
    for (const auto& [i, s] : ds.layers) {
      d[std::to_string(i)] = {{"mu", detail::to_json_vec(s.mu)}, {"sigma", detail::to_json_vec(s.sigma)}};
    }
    domains[k] = std::move(d);
  }
  return {{"version", kFormatVersion}, {"type", "flow"},      {"dim", model.dim()},
          {"alpha", alpha},            {"epsilon", model.epsilon()},
          {"variance", "population"},  {"layers", std::move(layers)},
          {"domains", std::move(domains)}};
}

inline FlowModel flow_from_json(const json& j) {
  try {
    require(j.at("version").get<int>() == kFormatVersion, "unsupported model version");
    if (j.contains("type")) require(j.at("type") == "flow", "document is not a flow model");
    const Index dim = j.at("dim").get<Index>();
    FlowModel model(dim, j.value("epsilon", kDefaultEpsilon));
    const double default_alpha = j.value("alpha", kDefaultAlpha);
    for (const json& l : j.at("layers")) {
      const std::string kind = l.at("kind").get<std::string>();
      if (kind == kind_name(LayerKind::kLinearLDU)) {
        LinearLDU lin = LinearLDU::identity(dim);
        const Index tri = dim * (dim - 1) / 2;
        const Vector lo = detail::vec_from_json(l.at("lower"), tri, "lower");
        const Vector up = detail::vec_from_json(l.at("upper"), tri, "upper");
        Index p = 0;
        for (Index r = 0; r < dim; ++r)
          for (Index c = 0; c < r; ++c) lin.lower(r, c) = lo(p++);
        p = 0;
        for (Index r = 0; r < dim; ++r)
          for (Index c = r + 1; c < dim; ++c) lin.upper(r, c) = up(p++);
        lin.d = detail::vec_from_json(l.at("d"), dim, "d");
        lin.b = detail::vec_from_json(l.at("b"), dim, "b");
        model.add_layer(std::move(lin));
      } else if (kind == kind_name(LayerKind::kLeakyReLU)) {
        model.add_layer(LeakyReLU{dim, l.value("alpha", default_alpha)});
      } else if (kind == kind_name(LayerKind::kAdaBN)) {
        model.add_layer(AdaBN{detail::vec_from_json(l.at("gamma"), dim, "gamma"),
                              detail::vec_from_json(l.at("beta"), dim, "beta")});
      } else {
        throw Error("unknown layer kind '" + kind + "'");
      }
    }
    for (const auto& [k, d] : j.at("domains").items()) {
      DomainStats ds;
      for (const auto& [idx, s] : d.items()) {
        ds.layers.emplace(std::stoul(idx), BNStats{detail::vec_from_json(s.at("mu"), dim, "mu"),
                                                   detail::vec_from_json(s.at("sigma"), dim, "sigma")});
      }
      model.set_domain(k, std::move(ds));
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed flow document: ") + e.what());
  }
}

inline json ae_to_json(const AEModel& ae) {
  json layers = json::array();
  for (const auto& l : ae.layers()) {
    json rows = json::array();
    for (Index r = 0; r < l.weight.rows(); ++r) rows.push_back(detail::to_json_vec(l.weight.row(r).transpose()));
    layers.push_back({{"weight", std::move(rows)}, {"bias", detail::to_json_vec(l.bias)}});
  }
  return {{"version", kFormatVersion}, {"type", "ae"}, {"sizes", ae.sizes()}, {"layers", std::move(layers)}};
}

inline AEModel ae_from_json(const json& j) {
  try {
    require(j.at("version").get<int>() == kFormatVersion, "unsupported model version");
    require(j.at("type") == "ae", "document is not an autoencoder");
    const auto sizes = j.at("sizes").get<std::vector<Index>>();
    AEModel::validate_sizes(sizes);
    const json& layers = j.at("layers");
    require(layers.size() + 1 == sizes.size(), "layer count does not match sizes");
    std::vector<DenseLayer> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      DenseLayer l{Matrix(sizes[i + 1], sizes[i]), Vector()};
      const json& rows = layers[i].at("weight");
      require(static_cast<Index>(rows.size()) == sizes[i + 1], "weight has wrong row count");
      for (Index r = 0; r < sizes[i + 1]; ++r)
        l.weight.row(r) = detail::vec_from_json(rows[static_cast<std::size_t>(r)], sizes[i], "weight").transpose();
      l.bias = detail::vec_from_json(layers[i].at("bias"), sizes[i + 1], "bias");
      out.push_back(std::move(l));
    }
    return AEModel(std::move(out));
  } catch (const json::exception& e) {
    throw Error(std::string("malformed autoencoder document: ") + e.what());
  }
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("cannot parse " + path.string() + ": " + e.what());
  }
}

/// Writes via a temporary file and rename so readers never see partial output.
inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// Dataset CSV: header x0,...,x{D-1}[,label][,domain].

inline std::string dataset_to_csv(const Dataset& d) {
  std::ostringstream os;
  for (Index i = 0; i < d.dim(); ++i) os << (i ? "," : "") << 'x' << i;
  if (d.labeled()) os << ",label";
  if (!d.domains.empty()) os << ",domain";
  os << '\n';
  for (Index r = 0; r < d.size(); ++r) {
    for (Index i = 0; i < d.dim(); ++i) os << (i ? "," : "") << detail::format_double(d.x(r, i));
    if (d.labeled()) os << ',' << d.labels[static_cast<std::size_t>(r)];
    if (!d.domains.empty()) os << ',' << d.domains[static_cast<std::size_t>(r)];
    os << '\n';
  }
  return os.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw Error("line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
  return v;
}

}  // namespace detail

inline Dataset dataset_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty CSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  int label_col = -1, domain_col = -1;
  std::vector<int> x_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (h == "label") {
      label_col = static_cast<int>(c);
    } else if (h == "domain") {
      domain_col = static_cast<int>(c);
    } else if (h == "x" + std::to_string(x_cols.size())) {
      x_cols.push_back(static_cast<int>(c));
    } else {
      throw Error("unexpected CSV column '" + h + "'");
    }
  }
  require(!x_cols.empty(), "CSV has no feature columns");
  std::vector<std::vector<double>> rows;
  Dataset d;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                  " fields, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (int c : x_cols) row.push_back(detail::parse_double(cells[static_cast<std::size_t>(c)], lineno));
    rows.push_back(std::move(row));
    if (label_col >= 0) {
      const std::string& l = cells[static_cast<std::size_t>(label_col)];
      if (l != "0" && l != "1") throw Error("line " + std::to_string(lineno) + ": label must be 0 or 1");
      d.labels.push_back(l == "1" ? 1 : 0);
    }
    if (domain_col >= 0) d.domains.push_back(cells[static_cast<std::size_t>(domain_col)]);
  }
  d.x.resize(static_cast<Index>(rows.size()), static_cast<Index>(x_cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < x_cols.size(); ++c) d.x(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return d;
}

inline Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return dataset_from_csv(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& d) {
  write_text_file(path, dataset_to_csv(d));
}

/// Splits rows by the domain column; rows without one go to `fallback`.
inline std::map<DomainId, Batch> split_by_domain(const Dataset& d, const DomainId& fallback) {
  std::map<DomainId, std::vector<Index>> idx;
  for (Index r = 0; r < d.size(); ++r) {
    idx[d.domains.empty() ? fallback : d.domains[static_cast<std::size_t>(r)]].push_back(r);
  }
  std::map<DomainId, Batch> out;
  for (const auto& [k, rows] : idx) out.emplace(k, d.x(rows, Eigen::all));
  return out;
}

inline std::string loss_curve_csv(const std::vector<LossRecord>& curve) {
  std::ostringstream os;
  os << "epoch,domain_id,nll\n";
  for (const auto& r : curve) os << r.epoch << ',' << r.domain << ',' << detail::format_double(r.nll) << '\n';
  return os.str();
}

inline std::string timing_csv(const std::vector<std::pair<std::string, double>>& phases) {
  std::ostringstream os;
  os << "phase,seconds\n";
  for (const auto& [p, s] : phases) os << p << ',' << detail::format_double(s) << '\n';
  return os.str();
}

inline std::string scores_csv(std::span<const double> scores, std::span<const int> labels) {
  std::ostringstream os;
  os << "sample_index,score,label\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    os << i << ',' << detail::format_double(scores[i]) << ',';
    if (!labels.empty()) os << labels[i];
    os << '\n';
  }
  return os.str();
}

inline json report_to_json(const EvalReport& r) {
  json j = json::object();
  j["mean_nll"] = r.mean_nll ? json(*r.mean_nll) : json(nullptr);
  j["auroc"] = r.auroc ? json(*r.auroc) : json(nullptr);
  json pts = json::array();
  for (const auto& p : r.roc_points) pts.push_back({p.fpr, p.tpr});
  j["roc_points"] = std::move(pts);
  j["timings"] = r.timings;
  return j;
}

}  // namespace adaflow
