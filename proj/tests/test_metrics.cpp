#include <algorithm>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "cmqe/metrics.hpp"
#include "cmqe/report.hpp"
#include "oracles.hpp"

using namespace cmqe;

namespace {

struct Pairs {
  std::vector<Label> golds, preds;
};

Pairs random_pairs(std::mt19937_64& rng, std::size_t n, std::size_t classes) {
  Pairs p;
  for (std::size_t i = 0; i < n; ++i) {
    p.golds.push_back(static_cast<Label>(1 + rng() % classes));
    // correlated predictions so metrics are not all near zero
    p.preds.push_back(rng() % 3 == 0 ? p.golds.back() : static_cast<Label>(1 + rng() % classes));
  }
  return p;
}

}  // namespace

TEST(F1Weighted, PerfectPrediction) {
  const std::vector<Label> g{4, 1, 9, 9, 2};
  EXPECT_EQ(f1_weighted(g, g), 1.0);
}

TEST(F1Weighted, HandComputedExample) {
  const std::vector<Label> g{1, 1, 2}, p{1, 2, 2};
  EXPECT_DOUBLE_EQ(f1_weighted(g, p), 2.0 / 3.0);
}

TEST(F1Weighted, ClassNeverPredictedCountsAsZero) {
  // class 2 is gold-only: P undefined -> F1 0; class 3 is predicted-only.
  const std::vector<Label> g{1, 2}, p{1, 3};
  EXPECT_DOUBLE_EQ(f1_weighted(g, p), 0.5);
}

TEST(F1Weighted, MatchesBruteForce) {
  std::mt19937_64 rng(500);
  for (int t = 0; t < 50; ++t) {
    const auto s = random_pairs(rng, 500, 5);
    EXPECT_NEAR(f1_weighted(s.golds, s.preds), oracle::f1_weighted(s.golds, s.preds), 1e-12);
  }
}

TEST(F1Average, MacroAndMicro) {
  const std::vector<Label> g{1, 1, 2}, p{1, 2, 2};
  const auto cm = confusion_matrix(g, p);
  EXPECT_DOUBLE_EQ(f1_score(cm, F1Average::macro), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(f1_score(cm, F1Average::micro), 2.0 / 3.0);
  const std::vector<Label> g2{1, 1, 1, 2}, p2{1, 1, 1, 1};
  const auto cm2 = confusion_matrix(g2, p2);
  EXPECT_DOUBLE_EQ(f1_score(cm2, F1Average::micro), 0.75);
  EXPECT_DOUBLE_EQ(f1_score(cm2, F1Average::macro), (6.0 / 7.0) / 2.0);
}

TEST(F1Weighted, EqualsAccuracyWhenClassesAllOrNothing) {
  // classes 1 and 3 predicted perfectly, class 2 swapped entirely into class 4
  const std::vector<Label> g{1, 1, 2, 2, 3, 3, 3}, p{1, 1, 4, 4, 3, 3, 3};
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] == p[i];
  EXPECT_DOUBLE_EQ(f1_weighted(g, p), acc / g.size());
}

TEST(CohensKappa, PerfectAndChance) {
  const std::vector<Label> g{1, 2, 3, 1};
  EXPECT_EQ(cohens_kappa(g, g), 1.0);
  const std::vector<Label> a{1, 1, 2, 2}, b{1, 2, 1, 2};
  EXPECT_EQ(cohens_kappa(a, b), 0.0);
}

TEST(CohensKappa, DegenerateSingleClassIsOne) {
  const std::vector<Label> g{5, 5, 5};
  EXPECT_EQ(cohens_kappa(g, g), 1.0);
}

TEST(CohensKappa, OneOnlyForIdenticalStreams) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    auto s = random_pairs(rng, 20, 3);
    const double k = cohens_kappa(s.golds, s.preds);
    EXPECT_LE(k, 1.0);
    if (s.golds != s.preds) {
      EXPECT_LT(k, 1.0);
    }
  }
}

TEST(CohensKappa, MatchesBruteForce) {
  std::mt19937_64 rng(501);
  for (int t = 0; t < 50; ++t) {
    const auto s = random_pairs(rng, 500, 5);
    EXPECT_NEAR(cohens_kappa(s.golds, s.preds), oracle::cohens_kappa(s.golds, s.preds), 1e-12);
  }
}

TEST(CohensKappa, IndependentStreamsNearZero) {
  std::mt19937_64 rng(12345);
  std::vector<Label> a(10000), b(10000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<Label>(rng() % 5);
    b[i] = static_cast<Label>(rng() % 5);
  }
  EXPECT_LT(std::abs(cohens_kappa(a, b)), 0.05);
}

TEST(Mse, Cases) {
  const std::vector<Label> g{1, 2, 3}, p{2, 2, 5};
  EXPECT_EQ(mse(g, g), 0.0);
  EXPECT_DOUBLE_EQ(mse(g, p), 5.0 / 3.0);
  EXPECT_EQ(mse(g, p), mse(p, g));
  std::mt19937_64 rng(502);
  for (int t = 0; t < 50; ++t) {
    const auto s = random_pairs(rng, 500, 10);
    EXPECT_NEAR(mse(s.golds, s.preds), oracle::mse(s.golds, s.preds), 1e-12);
  }
}

TEST(Metrics, InputErrors) {
  const std::vector<Label> a{1, 2}, b{1};
  const std::vector<Label> empty;
  EXPECT_THROW(f1_weighted(a, b), DataError);
  EXPECT_THROW(cohens_kappa(a, b), DataError);
  EXPECT_THROW(mse(a, b), DataError);
  EXPECT_THROW(mse(empty, empty), DataError);
  EXPECT_THROW(f1_weighted(empty, empty), DataError);
  const std::vector<Label> nan{1, std::nan("")};
  EXPECT_THROW(mse(a, nan), DataError);
}

TEST(Metrics, InvariantUnderJointPermutation) {
  std::mt19937_64 rng(77);
  auto s = random_pairs(rng, 300, 5);
  const double f = f1_weighted(s.golds, s.preds), k = cohens_kappa(s.golds, s.preds), m = mse(s.golds, s.preds);
  std::vector<std::size_t> idx(s.golds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  Pairs t;
  for (auto i : idx) {
    t.golds.push_back(s.golds[i]);
    t.preds.push_back(s.preds[i]);
  }
  EXPECT_NEAR(f1_weighted(t.golds, t.preds), f, 1e-12);
  EXPECT_NEAR(cohens_kappa(t.golds, t.preds), k, 1e-12);
  EXPECT_NEAR(mse(t.golds, t.preds), m, 1e-12);
}

TEST(Metrics, F1AndKappaInvariantUnderRelabeling) {
  std::mt19937_64 rng(78);
  auto s = random_pairs(rng, 300, 5);
  const std::map<Label, Label> bijection{{1, 40}, {2, -3}, {3, 7}, {4, 0.5}, {5, 12}};
  Pairs r;
  for (std::size_t i = 0; i < s.golds.size(); ++i) {
    r.golds.push_back(bijection.at(s.golds[i]));
    r.preds.push_back(bijection.at(s.preds[i]));
  }
  EXPECT_NEAR(f1_weighted(r.golds, r.preds), f1_weighted(s.golds, s.preds), 1e-12);
  EXPECT_NEAR(cohens_kappa(r.golds, r.preds), cohens_kappa(s.golds, s.preds), 1e-12);
  // MSE depends on label values
  EXPECT_NE(mse(r.golds, r.preds), mse(s.golds, s.preds));
}

TEST(Evaluate, PerfectSubtaskA) {
  const std::vector<Label> g{3, 7, 7, 10, 1};
  const auto r = evaluate(g, g, Subtask::A);
  EXPECT_EQ(r.f1_weighted, 1.0);
  EXPECT_EQ(r.cohens_kappa, 1.0);
  EXPECT_EQ(r.mse, 0.0);
  EXPECT_TRUE(r.kappa_official);
  EXPECT_EQ(r.confusion.total(), 5u);
}

TEST(Evaluate, FieldsMatchIndividualMetrics) {
  std::mt19937_64 rng(79);
  const auto s = random_pairs(rng, 400, 6);
  const auto r = evaluate(s.golds, s.preds, Subtask::B);
  EXPECT_EQ(r.f1_weighted, f1_weighted(s.golds, s.preds));
  EXPECT_EQ(r.cohens_kappa, cohens_kappa(s.golds, s.preds));
  EXPECT_EQ(r.mse, mse(s.golds, s.preds));
  EXPECT_FALSE(r.kappa_official);
  EXPECT_EQ(r.n, 400u);
  // row sums are gold counts
  for (std::size_t c = 0; c < r.confusion.size(); ++c) {
    std::uint64_t row = 0;
    for (std::size_t j = 0; j < r.confusion.size(); ++j) row += r.confusion(c, j);
    EXPECT_EQ(row, static_cast<std::uint64_t>(std::count(s.golds.begin(), s.golds.end(), r.confusion.classes[c])));
  }
}

TEST(Report, TextFormatsFiveDecimals) {
  const std::vector<Label> g{1, 2, 3}, p{2, 2, 5};
  const auto text = report_to_text(evaluate(g, p, Subtask::A));
  EXPECT_NE(text.find("mse=1.66667\n"), std::string::npos) << text;
  EXPECT_NE(text.find("cohens_kappa_official=true"), std::string::npos);
  const auto summary = report_summary(evaluate(g, g, Subtask::B));
  EXPECT_NE(summary.find("FS  1.00000"), std::string::npos) << summary;
  EXPECT_NE(summary.find("CK  -"), std::string::npos) << summary;
  EXPECT_NE(summary.find("MSE 0.00000"), std::string::npos) << summary;
  const auto j = report_to_json(evaluate(g, p, Subtask::A));
  EXPECT_EQ(j["confusion"]["classes"].size(), 4u);
  EXPECT_DOUBLE_EQ(j["mse"].get<double>(), 5.0 / 3.0);
}
