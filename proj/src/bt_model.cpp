#include "arr/bt_model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "arr/linalg.hpp"

namespace arr {

using nlohmann::json;

namespace {

// log(1 + exp(t)) without overflow
double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

const std::vector<double>& require_features(const Candidate& candidate,
                                            const std::string& pair_id, int dim) {
  const auto* fv = candidate.feature_vector();
  if (!fv)
    throw DataError("reward model requires feature-vector candidates (pair '" + pair_id + "')");
  if (static_cast<int>(fv->size()) != dim)
    throw DataError("feature dimension " + std::to_string(fv->size()) + " != model dimension " +
                    std::to_string(dim) + " (pair '" + pair_id + "')");
  return *fv;
}

// reward gap r(winner) - r(loser); the bias cancels
double labeled_gap(const BTRewardModel& model, const PreferencePair& pair) {
  if (!pair.label)
    throw PreconditionError("Bradley-Terry objective requires labeled pairs; pair '" + pair.id +
                            "' is unlabeled");
  const auto& f1 = require_features(pair.first, pair.id, model.dim());
  const auto& f2 = require_features(pair.second, pair.id, model.dim());
  double gap = dot(model.weights, f1) - dot(model.weights, f2);
  return *pair.label == PreferenceLabel::FirstPreferred ? gap : -gap;
}

}  // namespace

double reward(const BTRewardModel& model, const Candidate& candidate) {
  const auto& f = require_features(candidate, candidate.id, model.dim());
  return dot(model.weights, f) + model.bias;
}

double bt_probability(double r_plus, double r_minus) {
  if (!std::isfinite(r_plus) || !std::isfinite(r_minus))
    throw DataError("bt_probability requires finite rewards");
  return sigmoid(r_plus - r_minus);
}

double bt_loss(const BTRewardModel& model, const PreferenceDataset& dataset, double l2) {
  if (dataset.pairs.empty()) throw PreconditionError("bt_loss requires a non-empty dataset");
  double total = 0.0;
  for (const auto& pair : dataset.pairs) {
    // -log sigmoid(gap) == softplus(-gap)
    total += softplus(-labeled_gap(model, pair));
  }
  double loss = total / static_cast<double>(dataset.pairs.size());
  if (l2 > 0.0) {
    double sq = 0.0;
    for (double w : model.weights) sq += w * w;
    loss += 0.5 * l2 * sq;
  }
  return loss;
}

BTGradient bt_grad(const BTRewardModel& model, const PreferenceDataset& dataset, double l2) {
  if (dataset.pairs.empty()) throw PreconditionError("bt_grad requires a non-empty dataset");

  BTGradient grad;
  grad.weights.assign(model.weights.size(), 0.0);
  grad.bias = 0.0;

  for (const auto& pair : dataset.pairs) {
    if (!pair.label)
      throw PreconditionError("Bradley-Terry objective requires labeled pairs; pair '" +
                              pair.id + "' is unlabeled");
    const auto& f1 = require_features(pair.first, pair.id, model.dim());
    const auto& f2 = require_features(pair.second, pair.id, model.dim());
    bool first_wins = *pair.label == PreferenceLabel::FirstPreferred;
    const auto& fw = first_wins ? f1 : f2;
    const auto& fl = first_wins ? f2 : f1;
    double gap = dot(model.weights, fw) - dot(model.weights, fl);
    double coeff = -(1.0 - sigmoid(gap));  // d/d(gap) of softplus(-gap)
    for (std::size_t k = 0; k < grad.weights.size(); ++k)
      grad.weights[k] += coeff * (fw[k] - fl[k]);
  }
  double inv_n = 1.0 / static_cast<double>(dataset.pairs.size());
  for (std::size_t k = 0; k < grad.weights.size(); ++k) {
    grad.weights[k] *= inv_n;
    if (l2 > 0.0) grad.weights[k] += l2 * model.weights[k];
  }
  return grad;
}

BTTrainResult train_bt(const PreferenceDataset& dataset, const BTTrainConfig& cfg) {
  if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (dataset.pairs.empty()) throw PreconditionError("train_bt requires a non-empty dataset");

  const auto* f = dataset.pairs.front().first.feature_vector();
  if (!f) throw DataError("train_bt requires feature-vector candidates");
  int dim = static_cast<int>(f->size());

  BTTrainResult result;
  result.model.weights.assign(dim, 0.0);
  result.model.bias = 0.0;
  result.loss_curve.push_back(bt_loss(result.model, dataset, cfg.l2));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    BTGradient grad = bt_grad(result.model, dataset, cfg.l2);
    for (int k = 0; k < dim; ++k) result.model.weights[k] -= cfg.learning_rate * grad.weights[k];
    result.model.bias -= cfg.learning_rate * grad.bias;

    double loss = bt_loss(result.model, dataset, cfg.l2);
    if (!std::isfinite(loss))
      throw Error(ErrorCategory::Internal,
                  "Bradley-Terry training diverged at epoch " + std::to_string(epoch));
    result.loss_curve.push_back(loss);
  }
  return result;
}

double bt_accuracy(const BTRewardModel& model, const PreferenceDataset& dataset) {
  if (dataset.pairs.empty()) throw PreconditionError("bt_accuracy requires a non-empty dataset");
  int correct = 0;
  for (const auto& pair : dataset.pairs) {
    if (labeled_gap(model, pair) > 0.0) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.pairs.size());
}

void save_bt_model(const BTRewardModel& model, const BTTrainConfig& cfg,
                   const std::filesystem::path& path) {
  json j{{"dimension", model.dim()},
         {"weights", model.weights},
         {"bias", model.bias},
         {"l2", cfg.l2},
         {"seed", cfg.seed}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path.string());
  out << j.dump() << '\n';
}

BTRewardModel load_bt_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model file parse failure: " + std::string(e.what()));
  }
  BTRewardModel model;
  model.weights = j.at("weights").get<std::vector<double>>();
  model.bias = j.at("bias").get<double>();
  if (j.value("dimension", model.dim()) != model.dim())
    throw DataError("model file dimension mismatch");
  return model;
}

void save_loss_curve(const std::vector<double>& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write loss curve: " + path.string());
  for (std::size_t e = 0; e < curve.size(); ++e)
    out << json{{"epoch", e}, {"loss", curve[e]}}.dump() << '\n';
}

}  // namespace arr
