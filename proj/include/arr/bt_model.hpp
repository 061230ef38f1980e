#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "arr/preference.hpp"

namespace arr {

// Linear-in-features reward model: the smallest family exhibiting every
// property of the logistic pairwise objective, kept as an honest implicit
// baseline rather than a learned deep reward head.
struct BTRewardModel {
  std::vector<double> weights;
  double bias = 0.0;

  int dim() const { return static_cast<int>(weights.size()); }
};

struct BTTrainConfig {
  double learning_rate = 0.1;
  int epochs = 200;
  double l2 = 0.0;
  uint64_t seed = 0;
};

struct BTGradient {
  std::vector<double> weights;
  double bias = 0.0;
};

struct BTTrainResult {
  BTRewardModel model;
  // loss_curve[0] is the initial loss, loss_curve[e] the loss after epoch e
  std::vector<double> loss_curve;
};

// dot(weights, features) + bias
double reward(const BTRewardModel& model, const Candidate& candidate);

// exp(r+)/(exp(r+)+exp(r-)), computed as the numerically stable sigmoid of
// the reward gap; finite for all finite inputs.
double bt_probability(double r_plus, double r_minus);

// -mean log sigmoid(r(y+) - r(y-)) + l2 * ||weights||^2 / 2
double bt_loss(const BTRewardModel& model, const PreferenceDataset& dataset, double l2 = 0.0);

// Analytic gradient of bt_loss. The bias cancels in pairwise differences, so
// its component is exactly zero.
BTGradient bt_grad(const BTRewardModel& model, const PreferenceDataset& dataset, double l2 = 0.0);

// Full-batch deterministic gradient descent from zero initialization.
// Throws on a non-finite loss, naming the epoch.
BTTrainResult train_bt(const PreferenceDataset& dataset, const BTTrainConfig& cfg);

// fraction of pairs whose reward gap strictly favors the labeled winner
double bt_accuracy(const BTRewardModel& model, const PreferenceDataset& dataset);

void save_bt_model(const BTRewardModel& model, const BTTrainConfig& cfg,
                   const std::filesystem::path& path);
BTRewardModel load_bt_model(const std::filesystem::path& path);
void save_loss_curve(const std::vector<double>& curve, const std::filesystem::path& path);

}  // namespace arr
