#pragma once

#include "adaflow/flow.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace adaflow {

inline constexpr int kNormal = 0;
inline constexpr int kAnomaly = 1;

struct ScoredSample {
  double score = 0.0;
  std::optional<int> label;
  DomainId domain;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct EvalReport {
  std::optional<double> mean_nll;
  std::optional<double> auroc;
  std::vector<RocPoint> roc_points;
  std::map<std::string, double> timings;
};

/// Negative log-likelihood under domain k.
inline double anomaly_score(const FlowModel& model, const Vector& x, const DomainId& k) {
  return -log_likelihood(model, x, k);
}

inline Vector anomaly_scores(const FlowModel& model, const Batch& x, const DomainId& k) {
  return -log_likelihood_batch(model, x, k);
}

/// 1 (anomaly) when the score reaches the threshold, else 0.
inline int classify(double score, double phi) { return score >= phi ? kAnomaly : kNormal; }

/// ROC over every distinct score threshold, from (0,0) to (1,1). Samples
/// with equal scores enter the curve together, so ties contribute a
/// diagonal segment.
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "scores and labels differ in length");
  std::size_t pos = 0, neg = 0;
  for (int l : labels) {
    require(l == kNormal || l == kAnomaly, "labels must be 0 or 1");
    (l == kAnomaly ? pos : neg) += 1;
  }
  require(pos > 0 && neg > 0, "ROC needs at least one sample of each label");
  for (double s : scores) require(std::isfinite(s), "non-finite score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      (labels[order[i]] == kAnomaly ? tp : fp) += 1;
    }
    pts.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return pts;
}

inline double trapezoid_area(std::span<const RocPoint> pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) * 0.5;
  }
  return area;
}

/// Area under the ROC: P(anomaly score > normal score) + P(tie) / 2.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  const auto pts = roc_curve(scores, labels);
  return trapezoid_area(pts);
}

inline double auroc(std::span<const ScoredSample> samples) {
  std::vector<double> s;
  std::vector<int> l;
  for (const auto& x : samples) {
    require(x.label.has_value(), "AUROC needs labeled samples");
    s.push_back(x.score);
    l.push_back(*x.label);
  }
  return auroc(s, l);
}

/// Report from precomputed scores. When `scores_are_nll`, the mean score of
/// the normal samples is reported as the NLL.
inline EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                                  bool scores_are_nll) {
  require(!scores.empty(), "empty test set");
  require(scores.size() == labels.size(), "scores and labels differ in length");
  EvalReport rep;
  double sum = 0.0;
  std::size_t normals = 0, anomalies = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == kNormal) {
      sum += scores[i];
      ++normals;
    } else {
      ++anomalies;
    }
  }
  if (scores_are_nll && normals > 0) rep.mean_nll = sum / static_cast<double>(normals);
  if (normals > 0 && anomalies > 0) {
    rep.roc_points = roc_curve(scores, labels);
    rep.auroc = trapezoid_area(rep.roc_points);
  } else if (!rep.mean_nll) {
    throw Error("test set has nothing to evaluate: need normals for NLL or both labels for AUROC");
  }
  return rep;
}

/// NLL over normal-labeled rows and AUROC over all rows, under domain k.
inline EvalReport evaluate(const FlowModel& model, const Batch& test, std::span<const int> labels,
                           const DomainId& k) {
  require(test.rows() > 0, "empty test set");
  const Vector s = anomaly_scores(model, test, k);
  return evaluate_scores(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())),
                         labels, true);
}

}  // namespace adaflow
