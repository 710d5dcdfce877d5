#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "hrlfs/dataset.hpp"
#include "support/synthetic.hpp"

using namespace hrlfs;

namespace {

FeatureTable parse(const std::string& csv, const std::string& label = "y",
                   TaskKind kind = TaskKind::BinaryClassification) {
  std::istringstream in(csv);
  return parse_table(in, label, kind);
}

FeatureTable balanced_table(std::size_t m) {
  FeatureTable t;
  t.feature_names = {"a", "b"};
  t.columns.assign(2, {});
  for (std::size_t r = 0; r < m; ++r) {
    t.columns[0].push_back(static_cast<double>(r));
    t.columns[1].push_back(static_cast<double>(r) * 0.5);
    t.labels.push_back(static_cast<double>(r % 2));
  }
  t.num_classes = 2;
  return t;
}

}  // namespace

TEST(LoadTable, ParsesHeaderAndLabel) {
  const auto t = parse("a,b,y\n1,2,0\n3,4,1\n");
  EXPECT_EQ(t.n_features(), 2u);
  EXPECT_EQ(t.n_rows(), 2u);
  EXPECT_EQ(t.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.labels, (std::vector<double>{0, 1}));
  EXPECT_EQ(t.columns[0], (std::vector<double>{1, 3}));
  EXPECT_EQ(t.num_classes, 2);
}

TEST(LoadTable, LabelColumnMayBeAnywhere) {
  const auto t = parse("y,a,b\n0,1,2\n1,3,4\n");
  EXPECT_EQ(t.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.columns[1], (std::vector<double>{2, 4}));
}

TEST(LoadTable, UnknownLabelColumn) {
  try {
    parse("a,b,y\n1,2,0\n3,4,1\n", "z");
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown label column"), std::string::npos);
  }
}

TEST(LoadTable, NonNumericCellNamesRowAndColumn) {
  try {
    parse("a,b,y\nabc,2,0\n3,4,1\n");
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column \"a\""), std::string::npos) << msg;
  }
}

TEST(LoadTable, RejectsMissingCellsAndTooFewFeatures) {
  EXPECT_THROW(parse("a,b,y\n1,,0\n3,4,1\n"), InputError);
  EXPECT_THROW(parse("a,y\n1,0\n3,1\n"), InputError);
  EXPECT_THROW(parse("a,b,y\n1,2,0\n3,4\n"), InputError);
  EXPECT_THROW(parse("a,b,y\n1,2,nan\n3,4,1\n"), InputError);
}

TEST(LoadTable, ClassificationLabelsMustCoverRange) {
  EXPECT_THROW(parse("a,b,y\n1,2,0\n3,4,2\n", "y", TaskKind::MulticlassClassification), InputError);
  EXPECT_THROW(parse("a,b,y\n1,2,0.5\n3,4,1\n"), InputError);
  EXPECT_THROW(parse("a,b,y\n1,2,0\n3,4,1\n5,6,2\n", "y", TaskKind::BinaryClassification), InputError);
  const auto reg = parse("a,b,y\n1,2,0.5\n3,4,-7\n", "y", TaskKind::Regression);
  EXPECT_EQ(reg.num_classes, 0);
}

TEST(LoadTable, MissingFile) { EXPECT_THROW(load_table("/nonexistent/x.csv", "y", TaskKind::Regression), InputError); }

TEST(LoadTable, CsvRoundTrip) {
  auto d = fixtures::make_selection_dataset(40, 4, {0, 2}, 1.0, 7);
  d.table.feature_names[1] = "with,comma";
  const auto dir = fixtures::scratch_dir("roundtrip");
  save_table(d.table, (dir / "t.csv").string());
  const auto back = load_table((dir / "t.csv").string(), "y", TaskKind::BinaryClassification);
  EXPECT_EQ(back, d.table);
}

TEST(SplitTable, SizesFollowFraction) {
  const auto s = split_table(balanced_table(10), 0.2, 1);
  EXPECT_EQ(s.train.n_rows(), 8u);
  EXPECT_EQ(s.valid.n_rows(), 2u);
}

TEST(SplitTable, Deterministic) {
  const auto t = balanced_table(37);
  const auto a = split_table(t, 0.3, 99);
  const auto b = split_table(t, 0.3, 99);
  EXPECT_EQ(a.valid_rows, b.valid_rows);
  EXPECT_EQ(a.train, b.train);
  const auto c = split_table(t, 0.3, 100);
  EXPECT_NE(a.valid_rows, c.valid_rows);
}

TEST(SplitTable, StratifiedBinaryFiveAndFive) {
  // 5 rows per class, 20% holdout: quota 1 per class.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = split_table(balanced_table(10), 0.2, seed);
    ASSERT_EQ(s.valid.n_rows(), 2u);
    std::multiset<double> classes(s.valid.labels.begin(), s.valid.labels.end());
    EXPECT_EQ(classes.count(0.0), 1u);
    EXPECT_EQ(classes.count(1.0), 1u);
  }
}

TEST(SplitTable, FallsBackToShuffleWithSingletonClass) {
  auto t = balanced_table(9);
  t.labels = {0, 0, 0, 0, 1, 1, 1, 1, 2};
  t.num_classes = 3;
  t.task_kind = TaskKind::MulticlassClassification;
  const auto s = split_table(t, 0.3, 4);
  EXPECT_EQ(s.valid.n_rows(), 3u);
  EXPECT_EQ(s.train.n_rows(), 6u);
}

TEST(SplitTable, DegenerateSizesRejected) {
  EXPECT_THROW(split_table(balanced_table(4), 0.1, 0), InputError);
  EXPECT_THROW(split_table(balanced_table(4), 0.9, 0), InputError);
  EXPECT_THROW(split_table(balanced_table(4), 0.0, 0), InputError);
  EXPECT_THROW(split_table(balanced_table(4), 1.0, 0), InputError);
}

TEST(SplitTable, PartitionProperty) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng.below(80);
    const double frac = rng.uniform(0.01, 0.99);
    const double raw = static_cast<double>(m) * frac;
    if (std::floor(raw) < 1.0 || static_cast<std::size_t>(std::llround(raw)) >= m) continue;
    auto t = balanced_table(m);
    if (trial % 2) t.task_kind = TaskKind::Regression, t.num_classes = 0;
    const auto s = split_table(t, frac, rng.next_u64());
    EXPECT_EQ(s.train.n_rows() + s.valid.n_rows(), m);
    // Stratification keeps one training row per class.
    const auto want = static_cast<std::size_t>(std::llround(raw));
    EXPECT_EQ(s.valid.n_rows(), is_classification(t.task_kind) && m >= 4 ? std::min(want, m - 2) : want);
    std::set<std::size_t> all(s.train_rows.begin(), s.train_rows.end());
    for (auto r : s.valid_rows) EXPECT_TRUE(all.insert(r).second) << "row " << r << " in both halves";
    EXPECT_EQ(all.size(), m);
  }
}

TEST(Metadata, CountsMissingDescriptions) {
  const std::vector<std::string> names{"a", "b"};
  const auto both = parse_metadata(
      R"({"dataset_description":"d","features":[{"name":"a","description":"x"},{"name":"b","description":"y"}]})", names);
  EXPECT_TRUE(both.missing.empty());
  const auto one = parse_metadata(R"({"dataset_description":null,"features":[{"name":"a","description":"x"}]})", names);
  EXPECT_EQ(one.missing, (std::vector<std::string>{"b"}));
  EXPECT_FALSE(one.dataset_description.has_value());
}

TEST(Metadata, RejectsUnknownAndMalformed) {
  const std::vector<std::string> names{"a", "b"};
  EXPECT_THROW(parse_metadata(R"({"features":[{"name":"q","description":"x"}]})", names), InputError);
  EXPECT_THROW(parse_metadata("{not json", names), InputError);
  EXPECT_THROW(parse_metadata(R"({"features":[{"name":"a"}]})", names), InputError);
  EXPECT_THROW(parse_metadata(R"({"dataset_description":3})", names), InputError);
}

TEST(Normalize, ZScoreAndConstantColumns) {
  const auto z = zscore({1, 2, 3, 4});
  double mean = 0, ss = 0;
  for (double v : z) mean += v;
  for (double v : z) ss += v * v;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(ss / 4.0, 1.0, 1e-12);
  EXPECT_EQ(zscore({5, 5, 5}), (std::vector<double>{0, 0, 0}));
}
