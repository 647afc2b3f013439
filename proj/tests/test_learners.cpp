#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "pufsec/dataset.hpp"
#include "pufsec/learner.hpp"
#include "pufsec/model_io.hpp"
#include "pufsec/puf.hpp"

using namespace pufsec;

namespace {

LabeledSet random_set(std::size_t rows, std::size_t dim, int classes, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  LabeledSet s;
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < rows; ++i) {
    for (double& v : x) v = g(rng);
    s.add(x, static_cast<int>(uniform_index(rng, static_cast<std::size_t>(classes))));
  }
  return s;
}

LabeledSet arbiter_set(const PufInstance& p, std::size_t rows, std::uint64_t seed) {
  return encode_crps(generate_crps(p, rows, seed), FeatureMode::Parity);
}

LabeledSet xor_toy() {
  LabeledSet s;
  for (int a : {0, 1})
    for (int b : {0, 1}) {
      const double x[] = {1.0 - 2 * a, 1.0 - 2 * b};
      s.add(x, a != b ? 1 : -1);
    }
  return s;
}

DecisionTree single_leaf(double value) {
  DecisionTree t;
  TreeNode leaf;
  leaf.value = value;
  t.nodes.push_back(leaf);
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// gradients against central differences

TEST(Gradients, LogisticMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (int classes : {2, 4}) {
      const auto data = random_set(30, 6, classes, seed);
      Rng rng = make_rng(derive_seed(seed, "points"));
      std::normal_distribution<double> g(0.0, 1.0);
      for (int point = 0; point < 10; ++point) {
        LogisticModel m(6, classes);
        for (double& w : m.params()) w = g(rng);
        std::vector<double> analytic(m.params().size());
        logistic_loss(m, data, analytic);
        const auto numeric = oracle::numeric_gradient(
            [&](std::span<const double> w) {
              LogisticModel t(6, classes, {w.begin(), w.end()});
              std::vector<double> scratch(w.size());
              return logistic_loss(t, data, scratch);
            },
            {m.params().begin(), m.params().end()});
        ASSERT_LT(oracle::relative_error(analytic, numeric), 1e-4) << "seed " << seed << " K=" << classes;
      }
    }
  }
}

TEST(Gradients, NetworkMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (int classes : {2, 3}) {
      const auto data = random_set(20, 5, classes, seed);
      Rng rng = make_rng(derive_seed(seed, "points"));
      for (int point = 0; point < 10; ++point) {
        MlpModel m(5, 4, classes);
        m.initialize(rng);
        for (double& w : m.params()) w *= 3.0;  // leave the near-linear regime
        std::vector<double> analytic(m.param_count());
        mlp_loss(m, data, analytic);
        const auto numeric = oracle::numeric_gradient(
            [&](std::span<const double> w) {
              MlpModel t(5, 4, classes);
              std::copy(w.begin(), w.end(), t.params().begin());
              std::vector<double> scratch(w.size());
              return mlp_loss(t, data, scratch);
            },
            {m.params().begin(), m.params().end()});
        ASSERT_LT(oracle::relative_error(analytic, numeric), 1e-4) << "seed " << seed << " K=" << classes;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// logistic regression

TEST(Logistic, ZeroModelGivesHalfAndPlusOne) {
  const Learner l(LogisticModel(3, 2), true);
  const double x[] = {0.3, -1.0, 2.0};
  EXPECT_EQ(l.predict_proba(x), 0.5);
  EXPECT_EQ(l.predict(x), 1);
}

TEST(Logistic, SaturatedBias) {
  const Learner l(LogisticModel(2, 2, {0.0, 0.0, 10.0}), true);
  const double x[] = {-5.0, 5.0};
  EXPECT_NEAR(l.predict_proba(x), 0.9999546, 1e-6);
  EXPECT_EQ(l.predict(x), 1);
}

TEST(Logistic, LossHistoryIsNonIncreasing) {
  const auto p = create_instance(Architecture::Arbiter, 32, 1, 0.5, 4);
  const auto data = arbiter_set(p, 1000, 2);
  LabeledSet idx = data;
  for (int& y : idx.y) y = y == 1 ? 1 : 0;
  std::vector<double> history;
  train_logistic(idx, 2, LogisticHyper{}, &history);
  ASSERT_GT(history.size(), 5u);
  for (std::size_t i = 1; i < history.size(); ++i) ASSERT_LE(history[i], history[i - 1]);
}

TEST(Logistic, LearnsSixteenStageArbiter) {
  const auto p = create_instance(Architecture::Arbiter, 16, 1, 0.0, 12);
  const auto l = train(LearnerKind::LR, arbiter_set(p, 2000, 1), Hyperparameters{}, 1);
  EXPECT_GE(l.accuracy(arbiter_set(p, 500, 2)), 0.98);
}

TEST(Logistic, CannotFitXorButNetworkCan) {
  const auto data = xor_toy();
  const auto lr = train(LearnerKind::LR, data, Hyperparameters{}, 1);
  EXPECT_LE(lr.accuracy(data), 0.75);

  Hyperparameters h;
  h.nn.hidden = 4;
  h.nn.epochs = 3000;
  h.nn.learning_rate = 0.5;
  h.nn.batch = 4;
  const auto nn = train(LearnerKind::NN, data, h, 3);
  EXPECT_EQ(nn.accuracy(data), 1.0);
}

// ---------------------------------------------------------------------------
// common contract

TEST(Learners, SingleClassDataCollapsesToMajority) {
  LabeledSet s;
  Rng rng = make_rng(5);
  for (int i = 0; i < 40; ++i) {
    const double x[] = {uniform01(rng), uniform01(rng), uniform01(rng)};
    s.add(x, 1);
  }
  Hyperparameters h;
  h.nn.epochs = 20;
  h.rf.trees = 5;
  for (auto kind : kAllLearnerKinds) EXPECT_EQ(train(kind, s, h, 1).accuracy(s), 1.0) << learner_name(kind);
}

TEST(Learners, PredictAgreesWithProbaThreshold) {
  const auto p = create_instance(Architecture::Xor, 12, 2, 0.0, 9);
  const auto data = encode_crps(generate_crps(p, 400, 1), FeatureMode::Raw);
  const auto probe = encode_crps(generate_crps(p, 300, 2), FeatureMode::Raw);
  Hyperparameters h;
  h.nn.epochs = 10;
  h.rf.trees = 9;
  for (auto kind : kAllLearnerKinds) {
    const auto l = train(kind, data, h, 4);
    for (std::size_t i = 0; i < probe.size(); ++i) {
      const double q = l.predict_proba(probe.x.row(i));
      ASSERT_GE(q, 0.0);
      ASSERT_LE(q, 1.0);
      ASSERT_EQ(l.predict(probe.x.row(i)), q >= 0.5 ? 1 : -1);
    }
  }
}

TEST(Learners, TrainingIsReproducible) {
  const auto p = create_instance(Architecture::Xor, 16, 2, 0.0, 9);
  const auto data = encode_crps(generate_crps(p, 500, 1), FeatureMode::Raw);
  const auto probe = encode_crps(generate_crps(p, 200, 2), FeatureMode::Raw);
  Hyperparameters h;
  h.nn.epochs = 5;
  h.rf.trees = 8;
  for (auto kind : kAllLearnerKinds) {
    auto h1 = h, h8 = h;
    h8.threads = 8;
    const auto a = train(kind, data, h1, 11), b = train(kind, data, h8, 11);
    EXPECT_EQ(model_to_string(a), model_to_string(b)) << learner_name(kind);
    for (std::size_t i = 0; i < probe.size(); ++i)
      ASSERT_EQ(a.predict_proba(probe.x.row(i)), b.predict_proba(probe.x.row(i)));
  }
}

TEST(Learners, RejectBadInput) {
  LabeledSet empty;
  for (auto kind : kAllLearnerKinds) EXPECT_THROW(train(kind, empty, {}, 1), InvalidArgument);
  LabeledSet s;
  const double a[] = {1.0, 2.0}, b[] = {1.0};
  s.add(a, 1);
  EXPECT_THROW(s.add(b, 1), DimensionMismatch);
  LabeledSet bad_label;
  bad_label.add(a, 0);
  EXPECT_THROW(train(LearnerKind::LR, bad_label, {}, 1), InvalidArgument);

  const auto l = train(LearnerKind::LR, s, {}, 1);
  EXPECT_THROW(l.predict(std::span<const double>(b)), DimensionMismatch);
}

// ---------------------------------------------------------------------------
// forest

TEST(Forest, UnanimousNegativeLeaves) {
  const Learner l(ForestModel(2, 2, {single_leaf(0.0), single_leaf(0.2), single_leaf(0.1)}), true);
  const double x[] = {0.0, 0.0};
  EXPECT_EQ(l.predict(x), -1);
  EXPECT_EQ(l.predict_proba(x), 0.0);
}

TEST(Forest, ProbaIsVoteFraction) {
  const Learner l(ForestModel(1, 2, {single_leaf(1.0), single_leaf(0.9), single_leaf(0.5), single_leaf(0.1)}), true);
  const double x[] = {0.0};
  EXPECT_EQ(l.predict_proba(x), 0.75);  // the 0.5 leaf ties to +1
}

TEST(Forest, SingleUnboundedTreeMemorizesUniqueRows) {
  const auto p = create_instance(Architecture::Xor, 16, 4, 0.0, 2);
  const auto data = encode_crps(generate_crps(p, 600, 3), FeatureMode::Raw);
  Hyperparameters h;
  h.rf.trees = 1;
  h.rf.bootstrap = false;
  h.rf.max_depth = 0;
  EXPECT_EQ(train(LearnerKind::RF, data, h, 1).accuracy(data), 1.0);
}

// ---------------------------------------------------------------------------
// multiclass

TEST(Multiclass, TwoClassesMatchBinaryDecisions) {
  const auto p = create_instance(Architecture::Arbiter, 16, 1, 0.0, 6);
  const auto bin = arbiter_set(p, 400, 1);
  LabeledSet idx = bin;
  for (int& y : idx.y) y = y == 1 ? 1 : 0;
  Hyperparameters h;
  h.nn.epochs = 10;
  h.rf.trees = 7;
  for (auto kind : kAllLearnerKinds) {
    const auto a = train(kind, bin, h, 3);
    const auto b = train_multiclass(idx, kind, h, 3);
    for (std::size_t i = 0; i < bin.size(); ++i)
      ASSERT_EQ(a.predict(bin.x.row(i)) == 1, b.predict(bin.x.row(i)) == 1) << learner_name(kind);
  }
}

TEST(Multiclass, SeparableClustersAgreeWithNearestCentroid) {
  const std::vector<std::vector<double>> centroids = {{4, 0, 0}, {0, 4, 0}, {0, 0, 4}};
  Rng rng = make_rng(8);
  std::normal_distribution<double> g(0.0, 0.3);
  LabeledSet s;
  for (int i = 0; i < 150; ++i) {
    const int k = i % 3;
    std::vector<double> x = centroids[k];
    for (double& v : x) v += g(rng);
    ASSERT_EQ(oracle::nearest_centroid(centroids, x), k);
    s.add(x, k);
  }
  Hyperparameters h;
  h.nn.epochs = 300;
  h.rf.trees = 15;
  for (auto kind : kAllLearnerKinds) {
    const auto l = train_multiclass(s, kind, h, 2);
    EXPECT_EQ(l.accuracy(s), 1.0) << learner_name(kind);
  }
}

TEST(Multiclass, RandomLabelsStayNearChance) {
  auto train_set = random_set(800, 10, 8, 1);
  auto test_set = random_set(2000, 10, 8, 2);
  const auto l = train_multiclass(train_set, LearnerKind::LR, {}, 1);
  EXPECT_NEAR(l.accuracy(test_set), 0.125, 0.05);
}

TEST(Multiclass, NeedsTwoClasses) {
  LabeledSet s;
  const double x[] = {1.0};
  s.add(x, 3);
  s.add(x, 3);
  EXPECT_THROW(train_multiclass(s, LearnerKind::LR, {}, 1), InvalidArgument);
}

// ---------------------------------------------------------------------------
// model persistence

TEST(ModelFormat, RoundTripsEveryKind) {
  const auto p = create_instance(Architecture::Xor, 10, 2, 0.0, 1);
  const auto data = encode_crps(generate_crps(p, 300, 1), FeatureMode::Parity);
  auto multi = data;
  for (std::size_t i = 0; i < multi.size(); ++i) multi.y[i] = static_cast<int>(i % 3);
  Hyperparameters h;
  h.nn.epochs = 5;
  h.rf.trees = 4;
  for (auto kind : kAllLearnerKinds) {
    for (const auto& l : {train(kind, data, h, 2), train_multiclass(multi, kind, h, 2)}) {
      const std::string text = model_to_string(l);
      const auto back = model_from_string(text);
      EXPECT_EQ(model_to_string(back), text);
      EXPECT_EQ(back.kind(), kind);
      for (std::size_t i = 0; i < data.size(); ++i)
        ASSERT_EQ(back.class_probabilities(data.x.row(i)), l.class_probabilities(data.x.row(i)));
    }
  }
}

TEST(ModelFormat, HeaderAndErrors) {
  const std::string lr = model_to_string(Learner(LogisticModel(2, 2, {0.5, -0.25, 1.0}), true));
  EXPECT_EQ(lr, "pufmodel v1 kind=lr dim=2 classes=2 labels=binary\nweights 0.5 -0.25 1\n");
  EXPECT_THROW(model_from_string("pufmodel v1 kind=svm dim=2\n"), ParseError);
  EXPECT_THROW(model_from_string("pufmodel v1 kind=lr dim=2\nweights 1 2\n"), ParseError);
  EXPECT_THROW(model_from_string("pufmodel v1 kind=rf dim=2\nforest 1\ntree 1\nnode 0 0.5 1 2\n"), ParseError);
  EXPECT_THROW(model_from_string(lr + "extra\n"), ParseError);
  try {
    model_from_string("pufmodel v1 kind=lr dim=2\nweights 1 x 3\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}
