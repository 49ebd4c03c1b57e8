#include "adaflow/synth.hpp"
#include "adaflow/training.hpp"
#include "adaflow/translation.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace adaflow;

TEST(Translate, AffineExample) {
  FlowModel m(1);
  m.add_layer(AdaBN::identity(1));
  DomainStats a, b;
  a.layers[0] = {Vector::Zero(1), Vector::Ones(1)};
  b.layers[0] = {Vector::Constant(1, 5.0), Vector::Constant(1, 4.0)};
  m.set_domain("A", a);
  m.set_domain("B", b);
  // exact affine maps are checked without the variance floor
  FlowModel exact(1, 0.0);
  exact.add_layer(AdaBN::identity(1));
  exact.set_domain("A", a);
  exact.set_domain("B", b);
  EXPECT_DOUBLE_EQ(translate(exact, Vector::Constant(1, 1.0), "A", "B")(0), 7.0);
  EXPECT_NEAR(translate(m, Vector::Constant(1, 1.0), "A", "B")(0), 7.0, 1e-5);
}

TEST(Translate, SelfAndRoundTripIdentities) {
  std::mt19937_64 rng(3);
  const FlowModel m = oracle::random_model(rng, 6, 6);
  for (int t = 0; t < 50; ++t) {
    const Vector x = oracle::random_vector(6, rng, 2.0);
    EXPECT_LT((translate(m, x, "a", "a") - x).norm() / (1 + x.norm()), 1e-8);
    EXPECT_LT((translate(m, translate(m, x, "a", "b"), "b", "a") - x).norm() / (1 + x.norm()), 1e-8);
  }
}

TEST(Translate, UnknownDomain) {
  std::mt19937_64 rng(5);
  const FlowModel m = oracle::random_model(rng, 2, 2);
  EXPECT_THROW(translate(m, Vector::Zero(2), "a", "zz"), Error);
  EXPECT_THROW(translate_batch(m, Batch(0, 2), "zz", "a"), Error);
}

TEST(TranslateBatch, EmptyAndPermutation) {
  std::mt19937_64 rng(7);
  const FlowModel m = oracle::random_model(rng, 3, 5);
  EXPECT_EQ(translate_batch(m, Batch(0, 3), "a", "b").rows(), 0);
  Batch x(6, 3);
  for (Index r = 0; r < 6; ++r) x.row(r) = oracle::random_vector(3, rng).transpose();
  const Batch y = translate_batch(m, x, "a", "b");
  const std::vector<Index> perm{4, 2, 0, 5, 1, 3};
  const Batch yp = translate_batch(m, x(perm, Eigen::all), "a", "b");
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(yp.row(static_cast<Index>(i)), y.row(perm[i]));
  EXPECT_EQ(translate_batch(m, x, "a", "b"), y);
}

TEST(TranslateBatch, TrainedPairTransfersMeans) {
  const TranslationPair p = make_translation_pair(1);
  FlowModel m = make_flow(2, default_architecture(2), 3);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 100;
  cfg.learning_rate = 3e-3;
  pretrain(m, {{"A", p.train_a.x}, {"B", p.train_b.x}}, cfg);
  const Batch out = translate_batch(m, p.train_a.x, "A", "B");
  const Vector got = out.colwise().mean().transpose();
  const Vector want = p.train_b.x.colwise().mean().transpose();
  EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 0.2);
}
