#include "adaflow/io.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace adaflow;

TEST(FlowJson, RoundTripPreservesEveryBit) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 10; ++t) {
    const FlowModel m = oracle::random_model(rng, 1 + t, 6);
    const FlowModel back = flow_from_json(json::parse(flow_to_json(m).dump()));
    EXPECT_EQ(flatten_parameters(back), flatten_parameters(m));
    ASSERT_EQ(back.size(), m.size());
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(kind_of(back.layers()[i]), kind_of(m.layers()[i]));
    for (const auto& [k, s] : m.domains()) EXPECT_TRUE(back.stats(k) == s);
    const Vector x = oracle::random_vector(m.dim(), rng);
    EXPECT_EQ(log_likelihood(back, x, "a"), log_likelihood(m, x, "a"));
  }
}

TEST(FlowJson, DocumentShape) {
  const FlowModel m = make_flow(3, default_architecture(2), 1, 0.3);
  const json j = flow_to_json(m);
  EXPECT_EQ(j["version"], kFormatVersion);
  EXPECT_EQ(j["dim"], 3);
  EXPECT_DOUBLE_EQ(j["alpha"].get<double>(), 0.3);
  EXPECT_EQ(j["layers"].size(), 5u);
  EXPECT_EQ(j["layers"][4]["kind"], "linear_ldu");
  EXPECT_EQ(j["layers"][4]["lower"].size(), 3u);
  EXPECT_TRUE(j["domains"].is_object());
}

TEST(FlowJson, RejectsMalformedDocuments) {
  const json good = flow_to_json(make_flow(2, default_architecture(1), 1));
  json j = good;
  j["version"] = 99;
  EXPECT_THROW(flow_from_json(j), Error);
  j = good;
  j["layers"][0]["kind"] = "conv";
  EXPECT_THROW(flow_from_json(j), Error);
  j = good;
  j["layers"][1]["d"] = std::vector<double>{1.0};
  EXPECT_THROW(flow_from_json(j), Error);
  j = good;
  j.erase("dim");
  EXPECT_THROW(flow_from_json(j), Error);
}

TEST(AEJson, RoundTrip) {
  const AEModel ae(default_ae_sizes(12), 4);
  const AEModel back = ae_from_json(json::parse(ae_to_json(ae).dump()));
  EXPECT_EQ(back.sizes(), ae.sizes());
  EXPECT_EQ(flatten_parameters(back), flatten_parameters(ae));
}

TEST(DatasetCsv, HeaderAndOptionalColumns) {
  Dataset d{(Batch(2, 2) << 0.1, -2.5, 3.0, 1e-20).finished(), {0, 1}, {"a", "b"}};
  const std::string text = dataset_to_csv(d);
  EXPECT_EQ(text.substr(0, text.find('\n')), "x0,x1,label,domain");
  std::istringstream in(text);
  const Dataset back = dataset_from_csv(in);
  EXPECT_EQ(back.x, d.x);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.domains, d.domains);
  Dataset plain{d.x, {}, {}};
  EXPECT_EQ(dataset_to_csv(plain).substr(0, 6), "x0,x1\n");
}

TEST(DatasetCsv, ParseErrors) {
  const auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return dataset_from_csv(in);
  };
  EXPECT_THROW(parse(""), Error);
  EXPECT_THROW(parse("x0,y\n1,2\n"), Error);
  EXPECT_THROW(parse("x0,x1\n1\n"), Error);
  EXPECT_THROW(parse("x0\nabc\n"), Error);
  EXPECT_THROW(parse("x0,label\n1,2\n"), Error);
  EXPECT_EQ(parse("x0\r\n1.5\r\n").x(0, 0), 1.5);
}

TEST(DatasetCsv, SplitByDomain) {
  Dataset d{(Batch(3, 1) << 1, 2, 3).finished(), {}, {"p", "q", "p"}};
  const auto m = split_by_domain(d, "none");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("p").rows(), 2);
  EXPECT_EQ(m.at("p")(1, 0), 3.0);
  EXPECT_EQ(split_by_domain(Dataset{d.x, {}, {}}, "none").at("none").rows(), 3);
}

TEST(Reports, CsvHeaders) {
  EXPECT_EQ(loss_curve_csv({{0, "a", 1.5}}), "epoch,domain_id,nll\n0,a,1.5\n");
  EXPECT_EQ(timing_csv({{"adapt", 0.25}}), "phase,seconds\nadapt,0.25\n");
  const std::vector<double> s{2.0};
  const std::vector<int> l{1};
  EXPECT_EQ(scores_csv(s, l), "sample_index,score,label\n0,2,1\n");
  EvalReport r;
  r.auroc = 0.75;
  r.roc_points = {{0, 0}, {1, 1}};
  const json j = report_to_json(r);
  EXPECT_TRUE(j["mean_nll"].is_null());
  EXPECT_DOUBLE_EQ(j["auroc"].get<double>(), 0.75);
  EXPECT_EQ(j["roc_points"].size(), 2u);
}
