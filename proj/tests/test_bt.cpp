#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "arr/bt_model.hpp"
#include "arr/util.hpp"
#include "fixtures.hpp"

using namespace arr;
namespace fs = std::filesystem;

namespace {

BTRewardModel model_of(std::vector<double> w, double bias = 0.0) {
  BTRewardModel m;
  m.weights = std::move(w);
  m.bias = bias;
  return m;
}

PreferenceDataset random_bt_dataset(int n, int dim, uint64_t seed) {
  Rng rng(seed);
  PreferenceDataset ds;
  ds.name = "bt";
  for (int i = 0; i < n; ++i) {
    std::vector<double> f1(dim), f2(dim);
    for (int k = 0; k < dim; ++k) {
      f1[k] = rng.normal();
      f2[k] = rng.normal();
    }
    ds.pairs.push_back(testfx::feature_pair(
        "p" + std::to_string(i), f1, f2,
        rng.bernoulli(0.5) ? PreferenceLabel::FirstPreferred
                           : PreferenceLabel::SecondPreferred));
  }
  return ds;
}

// Linearly separable fixture: labels follow a hidden weight vector with a
// margin, so a linear model can hit high accuracy.
PreferenceDataset separable_dataset(int n, int dim, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> hidden(dim);
  for (int k = 0; k < dim; ++k) hidden[k] = rng.normal();

  PreferenceDataset ds;
  ds.name = "separable";
  int i = 0;
  while (static_cast<int>(ds.pairs.size()) < n) {
    std::vector<double> f1(dim), f2(dim);
    double gap = 0.0;
    for (int k = 0; k < dim; ++k) {
      f1[k] = rng.normal();
      f2[k] = rng.normal();
      gap += hidden[k] * (f1[k] - f2[k]);
    }
    if (std::abs(gap) < 0.5) continue;  // enforce a margin
    ds.pairs.push_back(testfx::feature_pair(
        "p" + std::to_string(i++), f1, f2,
        gap > 0 ? PreferenceLabel::FirstPreferred : PreferenceLabel::SecondPreferred));
  }
  return ds;
}

}  // namespace

TEST_CASE("reward is the dot product plus bias") {
  CHECK(reward(model_of({0.0, 0.0}), Candidate::features("c", {3.0, 5.0})) == 0.0);
  CHECK(reward(model_of({1.0, 0.0}), Candidate::features("c", {3.0, 5.0})) == 3.0);
  CHECK(reward(model_of({1.0, 0.0}, 2.0), Candidate::features("c", {3.0, 5.0})) == 5.0);

  // duplicate-arithmetic oracle on random instances
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> w(4), f(4);
    for (int k = 0; k < 4; ++k) {
      w[k] = rng.normal();
      f[k] = rng.normal();
    }
    double bias = rng.normal();
    double expected = bias;
    for (int k = 0; k < 4; ++k) expected += w[k] * f[k];
    CHECK(reward(model_of(w, bias), Candidate::features("c", f)) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("reward dimension mismatch is an error") {
  CHECK_THROWS_AS(reward(model_of({1.0, 2.0}), Candidate::features("c", {1.0})), DataError);
  CHECK_THROWS_AS(reward(model_of({1.0}), Candidate::text("c", "words")), DataError);
}

TEST_CASE("bt_probability closed forms") {
  CHECK(bt_probability(3.0, 3.0) == 0.5);
  CHECK(bt_probability(std::log(3.0), 0.0) == doctest::Approx(0.75).epsilon(1e-12));
  // shift invariance
  CHECK(std::abs(bt_probability(1.3 + 5.0, 0.4 + 5.0) - bt_probability(1.3, 0.4)) <= 1e-12);
}

TEST_CASE("bt_probability complementarity and monotonicity") {
  Rng rng(2);
  double prev = -1.0;
  for (int i = 0; i < 10000; ++i) {
    double a = 20.0 * (rng.uniform01() - 0.5);
    double b = 20.0 * (rng.uniform01() - 0.5);
    CHECK(std::abs(bt_probability(a, b) + bt_probability(b, a) - 1.0) <= 1e-12);
  }
  for (double gap = -30.0; gap <= 30.0; gap += 0.25) {
    double p = bt_probability(gap, 0.0);
    CHECK(p >= prev);
    prev = p;
  }
  // stable at extreme gaps
  CHECK(bt_probability(1000.0, -1000.0) == 1.0);
  CHECK(bt_probability(-1000.0, 1000.0) == 0.0);
}

TEST_CASE("equal-scoring model has loss ln 2") {
  PreferenceDataset ds = random_bt_dataset(25, 3, 5);
  CHECK(std::abs(bt_loss(model_of({0.0, 0.0, 0.0}), ds) - std::log(2.0)) <= 1e-12);
}

TEST_CASE("single pair with reward gap ln 3 has loss -ln 0.75") {
  PreferenceDataset ds;
  ds.pairs.push_back(testfx::feature_pair("p", {std::log(3.0)}, {0.0},
                                          PreferenceLabel::FirstPreferred));
  CHECK(bt_loss(model_of({1.0}), ds) == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
}

TEST_CASE("bt_loss matches brute-force per-pair summation") {
  PreferenceDataset ds = random_bt_dataset(20, 3, 6);
  BTRewardModel model = model_of({0.4, -1.1, 0.7}, 0.3);
  double l2 = 0.05;

  double expected = 0.0;
  for (const auto& pair : ds.pairs) {
    const auto& f1 = *pair.first.feature_vector();
    const auto& f2 = *pair.second.feature_vector();
    double r1 = model.bias, r2 = model.bias;
    for (int k = 0; k < 3; ++k) {
      r1 += model.weights[k] * f1[k];
      r2 += model.weights[k] * f2[k];
    }
    double gap = pair.label == PreferenceLabel::FirstPreferred ? r1 - r2 : r2 - r1;
    expected += -std::log(1.0 / (1.0 + std::exp(-gap)));
  }
  expected /= ds.pairs.size();
  for (double w : model.weights) expected += 0.5 * l2 * w * w;

  CHECK(bt_loss(model, ds, l2) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("loss is invariant under bias shifts") {
  PreferenceDataset ds = random_bt_dataset(15, 3, 7);
  BTRewardModel a = model_of({0.3, 0.1, -0.8}, 0.0);
  BTRewardModel b = model_of({0.3, 0.1, -0.8}, 123.456);
  CHECK(bt_loss(a, ds) == bt_loss(b, ds));
  CHECK(bt_grad(a, ds).bias == 0.0);
}

TEST_CASE("gradient saturates on perfectly separated data with a huge gap") {
  PreferenceDataset ds;
  ds.pairs.push_back(
      testfx::feature_pair("p", {100.0}, {-100.0}, PreferenceLabel::FirstPreferred));
  BTGradient grad = bt_grad(model_of({1.0}), ds);
  CHECK(std::abs(grad.weights[0]) < 1e-6);
}

TEST_CASE("zero model is a stationary point of a label-symmetric dataset") {
  // every pair appears with both labels; at the zero model the per-pair
  // contributions cancel exactly, leaving only the l2 term
  PreferenceDataset ds;
  Rng rng(9);
  for (int i = 0; i < 10; ++i) {
    std::vector<double> f1{rng.normal(), rng.normal()};
    std::vector<double> f2{rng.normal(), rng.normal()};
    ds.pairs.push_back(testfx::feature_pair("a" + std::to_string(i), f1, f2,
                                            PreferenceLabel::FirstPreferred));
    ds.pairs.push_back(testfx::feature_pair("b" + std::to_string(i), f1, f2,
                                            PreferenceLabel::SecondPreferred));
  }
  BTRewardModel zero = model_of({0.0, 0.0});
  BTGradient grad = bt_grad(zero, ds, 0.5);
  CHECK(grad.weights[0] == 0.5 * zero.weights[0]);
  CHECK(grad.weights[1] == 0.5 * zero.weights[1]);
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(44);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    PreferenceDataset ds = random_bt_dataset(8, 3, rng.next_u64());
    BTRewardModel model = model_of({rng.normal(), rng.normal(), rng.normal()}, rng.normal());
    double l2 = 0.1 * rng.uniform01();
    BTGradient analytic = bt_grad(model, ds, l2);

    const double h = 1e-5;
    for (int k = 0; k < 3; ++k) {
      BTRewardModel plus = model, minus = model;
      plus.weights[k] += h;
      minus.weights[k] -= h;
      double numeric = (bt_loss(plus, ds, l2) - bt_loss(minus, ds, l2)) / (2.0 * h);
      double scale = std::max({1e-6, std::abs(numeric), std::abs(analytic.weights[k])});
      worst = std::max(worst, std::abs(numeric - analytic.weights[k]) / scale);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("training reaches 95% accuracy on a separable fixture") {
  PreferenceDataset ds = separable_dataset(200, 5, 3);
  BTTrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.epochs = 500;
  BTTrainResult result = train_bt(ds, cfg);
  CHECK(bt_accuracy(result.model, ds) >= 0.95);
  CHECK(result.loss_curve.size() == 501);
}

TEST_CASE("small learning rate gives a non-increasing loss curve") {
  PreferenceDataset ds = separable_dataset(100, 4, 13);
  BTTrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 100;
  BTTrainResult result = train_bt(ds, cfg);
  for (std::size_t e = 1; e < result.loss_curve.size(); ++e)
    CHECK(result.loss_curve[e] <= result.loss_curve[e - 1]);
}

TEST_CASE("epochs=0 returns the zero model with loss ln 2") {
  PreferenceDataset ds = random_bt_dataset(10, 3, 1);
  BTTrainConfig cfg;
  cfg.epochs = 0;
  BTTrainResult result = train_bt(ds, cfg);
  for (double w : result.model.weights) CHECK(w == 0.0);
  REQUIRE(result.loss_curve.size() == 1);
  CHECK(std::abs(result.loss_curve[0] - std::log(2.0)) <= 1e-12);
}

TEST_CASE("divergence aborts naming the epoch") {
  PreferenceDataset ds = separable_dataset(20, 3, 21);
  BTTrainConfig cfg;
  cfg.learning_rate = 1e200;  // first step overflows the l2 term
  cfg.l2 = 1.0;
  cfg.epochs = 5;
  CHECK_THROWS_WITH_AS(train_bt(ds, cfg), doctest::Contains("epoch"), Error);
}

TEST_CASE("model save/load round-trip") {
  fs::path dir = fs::temp_directory_path() / "arr_bt_tests";
  fs::create_directories(dir);
  fs::path path = dir / "model.json";

  BTRewardModel model = model_of({0.25, -1.5, 3.0}, 0.125);
  BTTrainConfig cfg;
  cfg.l2 = 0.01;
  cfg.seed = 77;
  save_bt_model(model, cfg, path);
  BTRewardModel loaded = load_bt_model(path);
  CHECK(loaded.weights == model.weights);
  CHECK(loaded.bias == model.bias);

  save_loss_curve({0.69, 0.5, 0.4}, dir / "curve.jsonl");
  CHECK(fs::exists(dir / "curve.jsonl"));
}
