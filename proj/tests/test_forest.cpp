#include <gtest/gtest.h>

#include "hrlfs/forest.hpp"
#include "support/synthetic.hpp"

using namespace hrlfs;

namespace {

FeatureTable threshold_table(std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  FeatureTable t;
  t.feature_names = {"x", "noise"};
  t.columns.assign(2, {});
  t.num_classes = 2;
  for (std::size_t r = 0; r < m; ++r) {
    const double x = rng.uniform(-1, 1);
    t.columns[0].push_back(x);
    t.columns[1].push_back(rng.normal());
    t.labels.push_back(x > 0 ? 1.0 : 0.0);
  }
  return t;
}

}  // namespace

TEST(Forest, PureClassPredictsThatClass) {
  FeatureTable t;
  t.feature_names = {"a", "b"};
  t.columns = {{1, 2, 3, 4}, {4, 3, 2, 1}};
  t.labels = {1, 1, 1, 1};
  t.num_classes = 2;
  const auto model = train_forest(t, {true, true}, {}, 3);
  for (double p : model.predict(t)) EXPECT_EQ(p, 1.0);
}

TEST(Forest, LearnsThresholdRule) {
  const auto train = threshold_table(200, 1), valid = threshold_table(200, 2);
  const auto model = train_forest(train, {true, true}, {}, 9);
  EXPECT_GE(score(model, valid, MetricKind::Accuracy), 0.95);
}

TEST(Forest, UsesOnlyMaskedFeatures) {
  const auto train = threshold_table(200, 1), valid = threshold_table(200, 2);
  const auto model = train_forest(train, {false, true}, {}, 9);
  EXPECT_EQ(model.features, (std::vector<std::size_t>{1}));
  for (const auto& tree : model.trees)
    for (const auto& nd : tree.nodes) EXPECT_NE(nd.feature, 0);
  EXPECT_LT(score(model, valid, MetricKind::Accuracy), 0.8);
  EXPECT_THROW(score(model, valid, Mask{true, false}, MetricKind::Accuracy), InputError);
}

TEST(Forest, DeterministicAndBootstrapSized) {
  const auto t = threshold_table(120, 3);
  const auto a = train_forest(t, {true, true}, {}, 5);
  const auto b = train_forest(t, {true, true}, {}, 5);
  EXPECT_EQ(a.predict(t), b.predict(t));
  ASSERT_EQ(a.trees.size(), 20u);
  for (auto s : a.bag_sizes) EXPECT_EQ(s, 120u);
  for (std::size_t i = 0; i < a.trees.size(); ++i) EXPECT_EQ(a.trees[i].nodes.size(), b.trees[i].nodes.size());
}

TEST(Forest, ConstantInputFlag) {
  FeatureTable t;
  t.feature_names = {"a", "b"};
  t.columns = {{1, 1, 1, 1}, {0, 1, 2, 3}};
  t.labels = {0, 1, 0, 1};
  t.num_classes = 2;
  EXPECT_TRUE(train_forest(t, {true, false}, {}, 0).constant_input);
  EXPECT_FALSE(train_forest(t, {true, true}, {}, 0).constant_input);
  EXPECT_THROW(train_forest(t, {false, false}, {}, 0), InputError);
}

TEST(Forest, RespectsDepthLimit) {
  const auto t = threshold_table(300, 4);
  ForestParams p;
  p.max_depth = 2;
  const auto model = train_forest(t, {true, true}, p, 1);
  for (const auto& tree : model.trees) EXPECT_LE(tree.nodes.size(), 7u);
}

TEST(Forest, RegressionFitsLinearSignal) {
  Rng rng(8);
  FeatureTable t;
  t.task_kind = TaskKind::Regression;
  t.feature_names = {"x", "z"};
  t.columns.assign(2, {});
  for (int r = 0; r < 400; ++r) {
    const double x = rng.uniform(-2, 2);
    t.columns[0].push_back(x);
    t.columns[1].push_back(rng.normal());
    t.labels.push_back(3.0 * x + 0.1 * rng.normal());
  }
  const auto tr = select_rows(t, [] {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < 300; ++i) v.push_back(i);
    return v;
  }());
  const auto va = select_rows(t, [] {
    std::vector<std::size_t> v;
    for (std::size_t i = 300; i < 400; ++i) v.push_back(i);
    return v;
  }());
  const auto model = train_forest(tr, {true, true}, {}, 2);
  EXPECT_GE(score(model, va, MetricKind::OneMinusRae), 0.8);
  EXPECT_THROW(score(model, va, MetricKind::F1Micro), InputError);
}

TEST(Metrics, KnownValues) {
  EXPECT_DOUBLE_EQ(one_minus_rae(std::vector<double>{1, 2, 3}, std::vector<double>{2, 3, 4}), -0.5);
  const std::vector<double> y{0, 0, 1}, yhat{0, 1, 1};
  EXPECT_DOUBLE_EQ(accuracy(y, yhat), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(recall_macro(y, yhat), 0.75);
  EXPECT_DOUBLE_EQ(f1_micro(y, yhat), 2.0 / 3.0);
}

TEST(Metrics, PerfectPredictorScoresOne) {
  const std::vector<double> y{0, 2, 1, 1, 0};
  for (auto m : {MetricKind::F1Micro, MetricKind::Accuracy, MetricKind::RecallMacro, MetricKind::OneMinusRae})
    EXPECT_DOUBLE_EQ(compute_metric(m, y, y), 1.0) << to_string(m);
}

TEST(Metrics, MicroF1EqualsAccuracyForSingleLabel) {
  Rng rng(17);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 1 + rng.below(40);
    const auto c = 2 + rng.below(4);
    std::vector<double> y(m), yhat(m);
    for (std::size_t i = 0; i < m; ++i) {
      y[i] = static_cast<double>(rng.below(c));
      yhat[i] = static_cast<double>(rng.below(c));
    }
    EXPECT_NEAR(f1_micro(y, yhat), accuracy(y, yhat), 1e-12);
  }
}

TEST(Metrics, MeanPredictorHasZeroRae) {
  const std::vector<double> y{1, 5, 2, 8};
  EXPECT_NEAR(one_minus_rae(y, std::vector<double>(4, 4.0)), 0.0, 1e-12);
  EXPECT_THROW(one_minus_rae(std::vector<double>{3, 3}, std::vector<double>{3, 3}), NumericError);
}

TEST(Metrics, NamesAndApplicability) {
  for (auto m : {MetricKind::F1Micro, MetricKind::Accuracy, MetricKind::RecallMacro, MetricKind::OneMinusRae})
    EXPECT_EQ(metric_from_string(to_string(m)), m);
  EXPECT_FALSE(metric_supports(MetricKind::OneMinusRae, TaskKind::BinaryClassification));
  EXPECT_FALSE(metric_supports(MetricKind::F1Micro, TaskKind::Regression));
  EXPECT_EQ(default_metric(TaskKind::Regression), MetricKind::OneMinusRae);
  EXPECT_EQ(default_metric(TaskKind::MulticlassClassification), MetricKind::F1Micro);
}
