#include "arr/rpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "arr/bt_model.hpp"
#include "arr/templates.hpp"

namespace arr {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Policy and trajectories

GaussianChainPolicy GaussianChainPolicy::initial(int timesteps, int dim, double sigma) {
  GaussianChainPolicy p;
  p.timesteps = timesteps;
  p.dim = dim;
  p.sigma = sigma;
  p.weights.assign(timesteps, Matrix::identity(dim));
  p.biases.assign(timesteps, Vector(dim, 0.0));
  return p;
}

Vector GaussianChainPolicy::step_mean(const Vector& x_t, int t) const {
  Vector mu = matvec(weights[t - 1], x_t);
  for (int k = 0; k < dim; ++k) mu[k] += biases[t - 1][k];
  return mu;
}

void RPOConfig::validate() const {
  if (clip_eps <= 0.0 || clip_eps >= 1.0) throw ConfigError("clip_eps must be in (0, 1)");
  if (lambda <= 0.0 || gamma <= 0.0) throw ConfigError("lambda and gamma must be positive");
  if (kl_beta < 0.0) throw ConfigError("kl_beta must be non-negative");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (timesteps < 1 || dim < 1) throw ConfigError("timesteps and dim must be positive");
  if (sigma <= 0.0) throw ConfigError("sigma must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (iterations < 0) throw ConfigError("iterations must be non-negative");
}

Trajectory sample_trajectory(const GaussianChainPolicy& policy, const Vector& g, Rng& rng) {
  if (static_cast<int>(g.size()) != policy.dim)
    throw DataError("prompt dimension does not match policy dimension");

  Trajectory traj;
  traj.prompt = g;
  traj.states.reserve(policy.timesteps + 1);
  traj.per_step_logprob.reserve(policy.timesteps);

  Vector x(policy.dim);
  for (int k = 0; k < policy.dim; ++k) x[k] = rng.normal();
  traj.states.push_back(x);

  const double log_norm =
      -0.5 * policy.dim * std::log(2.0 * std::numbers::pi * policy.sigma * policy.sigma);
  for (int t = policy.timesteps; t >= 1; --t) {
    Vector mu = policy.step_mean(x, t);
    Vector x_prev(policy.dim);
    double eps_sq = 0.0;
    for (int k = 0; k < policy.dim; ++k) {
      double eps = rng.normal();
      eps_sq += eps * eps;
      x_prev[k] = mu[k] + policy.sigma * eps;
    }
    traj.per_step_logprob.push_back(log_norm - 0.5 * eps_sq);
    traj.states.push_back(x_prev);
    x = x_prev;
  }
  return traj;
}

double step_log_prob(const GaussianChainPolicy& policy, const Vector& x_t, const Vector& x_prev,
                     int t, const Vector& g) {
  (void)g;  // the toy policy's mean is prompt-independent; g rides along for the interface
  Vector mu = policy.step_mean(x_t, t);
  double sq = squared_distance(x_prev, mu);
  double var = policy.sigma * policy.sigma;
  return -0.5 * policy.dim * std::log(2.0 * std::numbers::pi * var) - sq / (2.0 * var);
}

double trajectory_log_prob(const GaussianChainPolicy& policy, const Trajectory& traj) {
  double total = 0.0;
  for (int j = 0; j < policy.timesteps; ++j) {
    int t = policy.timesteps - j;
    total += step_log_prob(policy, traj.states[j], traj.states[j + 1], t, traj.prompt);
  }
  return total;
}

double importance_ratio(const GaussianChainPolicy& policy, const GaussianChainPolicy& old_policy,
                        const Trajectory& traj, int step_index) {
  int t = policy.timesteps - step_index;
  const Vector& x_t = traj.states[step_index];
  const Vector& x_prev = traj.states[step_index + 1];
  return std::exp(step_log_prob(policy, x_t, x_prev, t, traj.prompt) -
                  step_log_prob(old_policy, x_t, x_prev, t, traj.prompt));
}

std::pair<double, double> assign_advantages(const Verdict& verdict, const RPOConfig& cfg) {
  if (verdict.preferred == Side::First) return {cfg.lambda, -cfg.gamma};
  return {-cfg.gamma, cfg.lambda};
}

double kl_step(const GaussianChainPolicy& policy, const GaussianChainPolicy& ref,
               const Vector& x_t, int t, const Vector& g) {
  (void)g;
  if (policy.sigma != ref.sigma)
    throw PreconditionError("kl_step requires both policies to share sigma");
  Vector mu = policy.step_mean(x_t, t);
  Vector mu_ref = ref.step_mean(x_t, t);
  return squared_distance(mu, mu_ref) / (2.0 * policy.sigma * policy.sigma);
}

double trajectory_kl(const GaussianChainPolicy& policy, const GaussianChainPolicy& ref,
                     const Trajectory& traj) {
  double total = 0.0;
  for (int j = 0; j < policy.timesteps; ++j) {
    int t = policy.timesteps - j;
    total += kl_step(policy, ref, traj.states[j], t, traj.prompt);
  }
  return total / policy.timesteps;
}

// ---------------------------------------------------------------------------
// Objective and gradient

PolicyGradient PolicyGradient::zeros(int timesteps, int dim) {
  PolicyGradient g;
  g.d_weights.assign(timesteps, Matrix(dim, dim));
  g.d_biases.assign(timesteps, Vector(dim, 0.0));
  return g;
}

void PolicyGradient::scale(double factor) {
  for (auto& w : d_weights)
    for (double& v : w.data) v *= factor;
  for (auto& b : d_biases)
    for (double& v : b) v *= factor;
}

double PolicyGradient::squared_norm() const {
  double acc = 0.0;
  for (const auto& w : d_weights)
    for (double v : w.data) acc += v * v;
  for (const auto& b : d_biases)
    for (double v : b) acc += v * v;
  return acc;
}

namespace {

void check_finite(double v, const char* where) {
  if (!std::isfinite(v))
    throw Error(ErrorCategory::Internal,
                std::string("non-finite intermediate in rpo_objective (") + where + ")");
}

// accumulates d(objective)/d(theta) into grad for one trajectory
void accumulate_trajectory(const GaussianChainPolicy& policy,
                           const GaussianChainPolicy& old_policy,
                           const GaussianChainPolicy& ref_policy, const Trajectory& traj,
                           double advantage, const RPOConfig& cfg, double pair_weight,
                           double* objective, PolicyGradient* grad) {
  const int T = cfg.timesteps;
  const double var = policy.sigma * policy.sigma;
  const double inv_t = 1.0 / static_cast<double>(T);

  double surrogate = 0.0;
  double kl = 0.0;

  for (int j = 0; j < T; ++j) {
    const int t = T - j;
    const Vector& x_t = traj.states[j];
    const Vector& x_prev = traj.states[j + 1];

    const double lp_new = step_log_prob(policy, x_t, x_prev, t, traj.prompt);
    const double lp_old = step_log_prob(old_policy, x_t, x_prev, t, traj.prompt);
    const double ratio = std::exp(lp_new - lp_old);
    check_finite(ratio, "importance ratio");

    const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    const double unclipped_term = ratio * advantage;
    const double clipped_term = clipped * advantage;
    surrogate += std::min(unclipped_term, clipped_term);

    Vector mu = policy.step_mean(x_t, t);

    // d(min)/d(theta): the clipped branch is flat in the ratio, so only the
    // unclipped branch propagates gradient.
    if (unclipped_term <= clipped_term) {
      const double coeff = pair_weight * inv_t * advantage * ratio / var;
      for (int k = 0; k < policy.dim; ++k) {
        const double resid = coeff * (x_prev[k] - mu[k]);
        grad->d_biases[t - 1][k] += resid;
        for (int c = 0; c < policy.dim; ++c) grad->d_weights[t - 1].at(k, c) += resid * x_t[c];
      }
    }

    // per-step KL against the reference on the visited state
    Vector mu_ref = ref_policy.step_mean(x_t, t);
    kl += squared_distance(mu, mu_ref) / (2.0 * var);
    const double kl_coeff = -pair_weight * cfg.kl_beta * inv_t / var;
    for (int k = 0; k < policy.dim; ++k) {
      const double diff = kl_coeff * (mu[k] - mu_ref[k]);
      grad->d_biases[t - 1][k] += diff;
      for (int c = 0; c < policy.dim; ++c) grad->d_weights[t - 1].at(k, c) += diff * x_t[c];
    }
  }

  surrogate *= inv_t;
  kl *= inv_t;
  check_finite(surrogate, "surrogate");
  check_finite(kl, "kl");
  *objective += pair_weight * (surrogate - cfg.kl_beta * kl);
}

}  // namespace

ObjectiveResult rpo_objective(const GaussianChainPolicy& policy,
                              const GaussianChainPolicy& old_policy,
                              const GaussianChainPolicy& ref_policy,
                              const std::vector<TrajectoryPair>& batch, const RPOConfig& cfg) {
  if (batch.empty()) throw PreconditionError("rpo_objective requires a non-empty batch");

  double objective = 0.0;
  PolicyGradient grad = PolicyGradient::zeros(cfg.timesteps, cfg.dim);
  const double pair_weight = 1.0 / (2.0 * static_cast<double>(batch.size()));

  for (const auto& pair : batch) {
    accumulate_trajectory(policy, old_policy, ref_policy, pair.first, pair.advantage_first, cfg,
                          pair_weight, &objective, &grad);
    accumulate_trajectory(policy, old_policy, ref_policy, pair.second, pair.advantage_second,
                          cfg, pair_weight, &objective, &grad);
  }

  // return as a loss to minimize
  grad.scale(-1.0);
  ObjectiveResult result;
  result.loss = -objective;
  result.gradient = std::move(grad);
  return result;
}

// ---------------------------------------------------------------------------
// Judges

Side CloseToTargetJudge::prefer(const Vector& g, const Trajectory& a, const Trajectory& b) {
  return closeness_decide(g, a.final_state(), b.final_state(), axes_);
}

void CloseToTargetJudge::condition_on(const StructuredRubric* rubric) {
  axes_.clear();
  if (rubric) axes_ = parse_axis_markers(rubric->rendered);
}

Side ChatTrajectoryJudge::prefer(const Vector& g, const Trajectory& a, const Trajectory& b) {
  JudgeRequest req;
  req.system_text = templates::kTrajectoryEvaluate;
  if (rubric_ && !rubric_->rendered.empty()) req.system_text += "\n\n" + rubric_->rendered;
  req.user_parts.push_back(UserPart::text(render_feature_anchor("TARGET", g)));
  req.user_parts.push_back(UserPart::text(
      "Candidate FIRST:\n" + render_feature_anchor("FEATURES_A", a.final_state())));
  req.user_parts.push_back(UserPart::text(
      "Candidate SECOND:\n" + render_feature_anchor("FEATURES_B", b.final_state())));
  req.request_tag = "traj:" + std::to_string(call_index_++);

  JudgeResponse resp = chat_complete(backend_, req, retry_);
  return parse_verdict(resp.text).preferred;
}

// ---------------------------------------------------------------------------
// Prompt sources

Vector GaussianPromptSource::sample(Rng& rng) {
  Vector g(dim_);
  for (int k = 0; k < dim_; ++k) g[k] = scale_ * rng.normal();
  return g;
}

DatasetPromptSource::DatasetPromptSource(const PreferenceDataset& dataset, int dim, double scale,
                                         uint64_t seed) {
  if (dataset.pairs.empty())
    throw PreconditionError("dataset prompt source requires a non-empty dataset");
  for (const auto& pair : dataset.pairs) {
    Rng embed(mix_seed({seed, fnv1a64("prompt-embed"), fnv1a64(pair.prompt)}));
    Vector g(dim);
    for (int k = 0; k < dim; ++k) g[k] = scale * embed.normal();
    targets_.push_back(std::move(g));
  }
}

Vector DatasetPromptSource::sample(Rng&) {
  Vector g = targets_[next_ % targets_.size()];
  ++next_;
  return g;
}

// ---------------------------------------------------------------------------
// Training loop

TrainerState rpo_train(const RPOConfig& cfg, PromptSource& prompts, TrajectoryJudge& judge,
                       const RubricProvider& rubric_provider) {
  cfg.validate();

  TrainerState state;
  state.policy = GaussianChainPolicy::initial(cfg.timesteps, cfg.dim, cfg.sigma);
  state.ref_policy = state.policy;
  state.old_policy = state.policy;

  Rng rng(mix_seed({cfg.seed, fnv1a64("rpo-train")}));

  // Explicit gradient steps on the KL penalty are only stable while
  // lr * beta * curvature < 2, with curvature ~ 1/(T sigma^2) on visited
  // states. Cap the step size at that bound so stiff beta values pin the
  // policy instead of oscillating around the reference.
  double lr = cfg.learning_rate;
  if (cfg.kl_beta > 0.0) {
    double stability_cap = 0.3 * cfg.timesteps * cfg.sigma * cfg.sigma / cfg.kl_beta;
    lr = std::min(lr, stability_cap);
  }

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    std::vector<TrajectoryPair> batch;
    batch.reserve(cfg.batch_size);
    double dist_sum = 0.0;
    double kl_sum = 0.0;
    int wins = 0;

    for (int j = 0; j < cfg.batch_size; ++j) {
      Vector g = prompts.sample(rng);
      TrajectoryPair pair;
      pair.first = sample_trajectory(state.old_policy, g, rng);
      pair.second = sample_trajectory(state.old_policy, g, rng);

      StructuredRubric regenerated;
      if (cfg.regenerate_rubrics && rubric_provider) {
        regenerated = rubric_provider(g, pair.first, pair.second);
        judge.condition_on(&regenerated);
      }

      Verdict verdict;
      verdict.preferred = judge.prefer(g, pair.first, pair.second);
      std::tie(pair.advantage_first, pair.advantage_second) = assign_advantages(verdict, cfg);

      dist_sum += std::sqrt(squared_distance(pair.first.final_state(), g));
      dist_sum += std::sqrt(squared_distance(pair.second.final_state(), g));
      kl_sum += trajectory_kl(state.policy, state.ref_policy, pair.first);
      kl_sum += trajectory_kl(state.policy, state.ref_policy, pair.second);

      // one fresh sample from the current policy against one from the frozen
      // reference, judged on the same prompt
      Trajectory current = sample_trajectory(state.policy, g, rng);
      Trajectory reference = sample_trajectory(state.ref_policy, g, rng);
      if (judge.prefer(g, current, reference) == Side::First) ++wins;

      if (cfg.regenerate_rubrics && rubric_provider) judge.condition_on(nullptr);
      batch.push_back(std::move(pair));
    }

    ObjectiveResult obj = rpo_objective(state.policy, state.old_policy, state.ref_policy, batch,
                                        cfg);
    if (!std::isfinite(obj.loss))
      throw Error(ErrorCategory::Internal,
                  "RPO training diverged at iteration " + std::to_string(iter));

    if (cfg.grad_clip_norm > 0.0) {
      double norm = std::sqrt(obj.gradient.squared_norm());
      if (norm > cfg.grad_clip_norm) obj.gradient.scale(cfg.grad_clip_norm / norm);
    }
    for (int t = 0; t < cfg.timesteps; ++t) {
      for (std::size_t i = 0; i < state.policy.weights[t].data.size(); ++i)
        state.policy.weights[t].data[i] -= lr * obj.gradient.d_weights[t].data[i];
      for (int k = 0; k < cfg.dim; ++k)
        state.policy.biases[t][k] -= lr * obj.gradient.d_biases[t][k];
    }
    state.old_policy = state.policy;

    IterationMetrics m;
    m.iteration = iter;
    m.mean_final_distance = dist_sum / (2.0 * cfg.batch_size);
    m.mean_kl = kl_sum / (2.0 * cfg.batch_size);
    m.win_rate_vs_ref = static_cast<double>(wins) / cfg.batch_size;
    m.loss = obj.loss;
    state.metrics.push_back(m);
  }
  return state;
}

// ---------------------------------------------------------------------------
// Finite-difference verification

namespace {

GaussianChainPolicy random_policy(int timesteps, int dim, double sigma, Rng& rng,
                                  double spread) {
  GaussianChainPolicy p = GaussianChainPolicy::initial(timesteps, dim, sigma);
  for (auto& w : p.weights)
    for (double& v : w.data) v += spread * (2.0 * rng.uniform01() - 1.0);
  for (auto& b : p.biases)
    for (double& v : b) v += spread * (2.0 * rng.uniform01() - 1.0);
  return p;
}

double relative_error(double a, double b) {
  double scale = std::max({1e-6, std::abs(a), std::abs(b)});
  return std::abs(a - b) / scale;
}

// true when any per-step ratio sits within `margin` of a clip boundary, where
// min/clip is non-differentiable
bool near_clip_boundary(const GaussianChainPolicy& policy, const GaussianChainPolicy& old_policy,
                        const std::vector<TrajectoryPair>& batch, const RPOConfig& cfg,
                        double margin) {
  for (const auto& pair : batch) {
    for (const Trajectory* traj : {&pair.first, &pair.second}) {
      for (int j = 0; j < cfg.timesteps; ++j) {
        double r = importance_ratio(policy, old_policy, *traj, j);
        if (std::abs(r - (1.0 - cfg.clip_eps)) < margin ||
            std::abs(r - (1.0 + cfg.clip_eps)) < margin)
          return true;
      }
    }
  }
  return false;
}

double rpo_fd_worst_error(Rng& rng) {
  const int dim = 2;
  const int timesteps = 3;

  RPOConfig cfg;
  cfg.timesteps = timesteps;
  cfg.dim = dim;
  cfg.sigma = 0.5 + 0.5 * rng.uniform01();
  cfg.clip_eps = 0.2;
  cfg.kl_beta = 0.05 + 0.1 * rng.uniform01();
  cfg.lambda = 1.0;
  cfg.gamma = 0.1;

  GaussianChainPolicy policy;
  GaussianChainPolicy old_policy;
  GaussianChainPolicy ref_policy;
  std::vector<TrajectoryPair> batch;

  for (int attempt = 0; attempt < 100; ++attempt) {
    policy = random_policy(timesteps, dim, cfg.sigma, rng, 0.25);
    old_policy = policy;
    for (auto& w : old_policy.weights)
      for (double& v : w.data) v += 0.04 * (2.0 * rng.uniform01() - 1.0);
    for (auto& b : old_policy.biases)
      for (double& v : b) v += 0.04 * (2.0 * rng.uniform01() - 1.0);
    ref_policy = random_policy(timesteps, dim, cfg.sigma, rng, 0.25);

    batch.clear();
    TrajectoryPair pair;
    Vector g(dim, 0.0);
    pair.first = sample_trajectory(old_policy, g, rng);
    pair.second = sample_trajectory(old_policy, g, rng);
    bool first_wins = rng.bernoulli(0.5);
    pair.advantage_first = first_wins ? cfg.lambda : -cfg.gamma;
    pair.advantage_second = first_wins ? -cfg.gamma : cfg.lambda;
    batch.push_back(std::move(pair));

    if (!near_clip_boundary(policy, old_policy, batch, cfg, 5e-3)) break;
  }

  ObjectiveResult analytic = rpo_objective(policy, old_policy, ref_policy, batch, cfg);

  const double h = 1e-5;
  double worst = 0.0;
  auto loss_at = [&](const GaussianChainPolicy& p) {
    return rpo_objective(p, old_policy, ref_policy, batch, cfg).loss;
  };

  for (int t = 0; t < timesteps; ++t) {
    for (int i = 0; i < dim * dim; ++i) {
      GaussianChainPolicy plus = policy;
      GaussianChainPolicy minus = policy;
      plus.weights[t].data[i] += h;
      minus.weights[t].data[i] -= h;
      double numeric = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
      worst = std::max(worst, relative_error(analytic.gradient.d_weights[t].data[i], numeric));
    }
    for (int k = 0; k < dim; ++k) {
      GaussianChainPolicy plus = policy;
      GaussianChainPolicy minus = policy;
      plus.biases[t][k] += h;
      minus.biases[t][k] -= h;
      double numeric = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
      worst = std::max(worst, relative_error(analytic.gradient.d_biases[t][k], numeric));
    }
  }
  return worst;
}

double bt_fd_worst_error(Rng& rng) {
  const int dim = 3;
  const int n_pairs = 10;

  PreferenceDataset dataset;
  dataset.name = "gradcheck";
  for (int i = 0; i < n_pairs; ++i) {
    Vector f1(dim), f2(dim);
    for (int k = 0; k < dim; ++k) {
      f1[k] = rng.normal();
      f2[k] = rng.normal();
    }
    PreferencePair pair;
    pair.id = "p" + std::to_string(i);
    pair.prompt = "gradcheck";
    pair.first = Candidate::features("a" + std::to_string(i), f1);
    pair.second = Candidate::features("b" + std::to_string(i), f2);
    pair.label =
        rng.bernoulli(0.5) ? PreferenceLabel::FirstPreferred : PreferenceLabel::SecondPreferred;
    dataset.pairs.push_back(std::move(pair));
  }

  BTRewardModel model;
  model.weights.resize(dim);
  for (int k = 0; k < dim; ++k) model.weights[k] = rng.normal();
  model.bias = rng.normal();
  double l2 = 0.1 * rng.uniform01();

  BTGradient analytic = bt_grad(model, dataset, l2);
  const double h = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < dim; ++k) {
    BTRewardModel plus = model;
    BTRewardModel minus = model;
    plus.weights[k] += h;
    minus.weights[k] -= h;
    double numeric = (bt_loss(plus, dataset, l2) - bt_loss(minus, dataset, l2)) / (2.0 * h);
    worst = std::max(worst, relative_error(analytic.weights[k], numeric));
  }
  {
    BTRewardModel plus = model;
    BTRewardModel minus = model;
    plus.bias += h;
    minus.bias -= h;
    double numeric = (bt_loss(plus, dataset, l2) - bt_loss(minus, dataset, l2)) / (2.0 * h);
    worst = std::max(worst, relative_error(analytic.bias, numeric));
  }
  return worst;
}

}  // namespace

double finite_diff_check(int trials, uint64_t seed) {
  Rng rng(mix_seed({seed, fnv1a64("gradcheck")}));
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    worst = std::max(worst, rpo_fd_worst_error(rng));
    worst = std::max(worst, bt_fd_worst_error(rng));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Persistence

void save_policy(const GaussianChainPolicy& policy, uint64_t seed,
                 const std::filesystem::path& path) {
  json weights = json::array();
  for (const auto& w : policy.weights) weights.push_back(w.data);
  json biases = json::array();
  for (const auto& b : policy.biases) biases.push_back(b);

  json j{{"timesteps", policy.timesteps}, {"dim", policy.dim},     {"sigma", policy.sigma},
         {"seed", seed},                  {"weights", weights},    {"biases", biases}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write policy checkpoint: " + path.string());
  out << j.dump() << '\n';
}

GaussianChainPolicy load_policy(const std::filesystem::path& path, uint64_t* seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open policy checkpoint: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("policy checkpoint parse failure: " + std::string(e.what()));
  }

  GaussianChainPolicy policy;
  policy.timesteps = j.at("timesteps").get<int>();
  policy.dim = j.at("dim").get<int>();
  policy.sigma = j.at("sigma").get<double>();
  for (const auto& wj : j.at("weights")) {
    Matrix w(policy.dim, policy.dim);
    w.data = wj.get<std::vector<double>>();
    if (static_cast<int>(w.data.size()) != policy.dim * policy.dim)
      throw DataError("policy checkpoint weight block has wrong size");
    policy.weights.push_back(std::move(w));
  }
  for (const auto& bj : j.at("biases")) policy.biases.push_back(bj.get<Vector>());
  if (static_cast<int>(policy.weights.size()) != policy.timesteps ||
      static_cast<int>(policy.biases.size()) != policy.timesteps)
    throw DataError("policy checkpoint is missing timestep blocks");
  if (seed) *seed = j.value("seed", 0ull);
  return policy;
}

void write_metrics(const std::vector<IterationMetrics>& metrics,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write metrics log: " + path.string());
  for (const auto& m : metrics) {
    out << json{{"iteration", m.iteration},
                {"mean_final_distance", m.mean_final_distance},
                {"mean_kl", m.mean_kl},
                {"win_rate_vs_ref", m.win_rate_vs_ref},
                {"loss", m.loss}}
               .dump()
        << '\n';
  }
}

}  // namespace arr
