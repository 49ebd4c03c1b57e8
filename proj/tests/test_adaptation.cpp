#include "adaflow/adaptation.hpp"
#include "adaflow/io.hpp"
#include "adaflow/training.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace adaflow;

namespace {

FlowModel single_adabn() {
  FlowModel m(1);
  m.add_layer(AdaBN::identity(1));
  return m;
}

Batch column(std::initializer_list<double> xs) {
  Batch b(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double x : xs) b(i++, 0) = x;
  return b;
}

}  // namespace

TEST(Adapt, PopulationMoments) {
  FlowModel m = single_adabn();
  const auto& s = adapt(m, column({0, 2}), "new");
  EXPECT_DOUBLE_EQ(s.layers.at(0).mu(0), 1.0);
  EXPECT_DOUBLE_EQ(s.layers.at(0).sigma(0), 1.0);
}

TEST(Adapt, ConstantSamplesGiveZeroVariance) {
  FlowModel m = single_adabn();
  adapt(m, column({4.5, 4.5, 4.5}), "c");
  EXPECT_DOUBLE_EQ(m.stats("c").layers.at(0).mu(0), 4.5);
  EXPECT_DOUBLE_EQ(m.stats("c").layers.at(0).sigma(0), 0.0);
  EXPECT_TRUE(std::isfinite(log_likelihood(m, Vector::Constant(1, 4.5), "c")));
}

TEST(Adapt, StatisticsSeeUpstreamLayers) {
  FlowModel m(1);
  m.add_layer(AdaBN::identity(1));  // applied second when normalizing
  LinearLDU l = LinearLDU::identity(1);
  l.d << 2.0;
  m.add_layer(l);
  adapt(m, column({0, 2}), "new");
  EXPECT_DOUBLE_EQ(m.stats("new").layers.at(0).mu(0), 2.0);
  EXPECT_DOUBLE_EQ(m.stats("new").layers.at(0).sigma(0), 4.0);
}

TEST(Adapt, Errors) {
  FlowModel m = single_adabn();
  EXPECT_THROW(adapt(m, column({1}), "x"), Error);
  EXPECT_THROW(adapt(m, column({1, NAN}), "x"), NumericError);
  EXPECT_THROW(adapt(m, Batch::Zero(3, 2), "x"), Error);
}

TEST(Adapt, IdempotentAndParameterFreeze) {
  std::mt19937_64 rng(3);
  FlowModel m = oracle::random_model(rng, 6, 6);
  const Batch x = Batch::Random(50, 6) * 3.0;
  const Vector before = flatten_parameters(m);
  adapt(m, x, "t");
  const DomainStats first = m.stats("t");
  adapt(m, x, "t");
  EXPECT_TRUE(m.stats("t") == first);
  EXPECT_EQ(flatten_parameters(m), before);
  EXPECT_EQ(flatten_parameters(m).size(), before.size());
}

TEST(Adapt, FirstAdaBNWhitensAdaptationBatch) {
  std::mt19937_64 rng(5);
  FlowModel m = make_flow(4, default_architecture(2), 9);
  Batch x = Batch::Random(200, 4);
  x.col(2) *= 10.0;
  x.col(0).array() += 7.0;
  adapt(m, x, "t");
  // first AdaBN in normalize order is stored at index size-2 (after the
  // data-side linear layer)
  const std::size_t first_bn = m.size() - 2;
  ASSERT_TRUE(std::holds_alternative<AdaBN>(m.layers()[first_bn]));
  Batch z = normalize_rows(m.layers()[m.size() - 1], x, nullptr, m.epsilon()).rows;
  z = normalize_rows(m.layers()[first_bn], z, m.layer_stats(m.stats("t"), first_bn), m.epsilon()).rows;
  const BNStats s = batch_moments(z);
  EXPECT_LT(s.mu.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((s.sigma.array() - 1.0).abs().maxCoeff(), 1e-4);
}

TEST(RemoveDomain, RegisterThenRemoveRestores) {
  std::mt19937_64 rng(7);
  FlowModel m = oracle::random_model(rng, 3, 4);
  const auto before = m.domains();
  adapt(m, Batch::Random(10, 3), "tmp");
  remove_domain(m, "tmp");
  ASSERT_EQ(m.domains().size(), before.size());
  for (const auto& [k, s] : before) EXPECT_TRUE(m.stats(k) == s);
  EXPECT_THROW(remove_domain(m, "tmp"), Error);
}

TEST(RemoveDomain, OthersUntouchedInSerialization) {
  std::mt19937_64 rng(11);
  FlowModel m = oracle::random_model(rng, 3, 4);
  adapt(m, Batch::Random(10, 3), "c");
  const json before = flow_to_json(m);
  remove_domain(m, "b");
  const json after = flow_to_json(m);
  EXPECT_EQ(after["domains"]["a"].dump(), before["domains"]["a"].dump());
  EXPECT_EQ(after["domains"]["c"].dump(), before["domains"]["c"].dump());
  EXPECT_FALSE(after["domains"].contains("b"));
  EXPECT_EQ(after["layers"].dump(), before["layers"].dump());
}
