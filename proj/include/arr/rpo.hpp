#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arr/judge.hpp"
#include "arr/linalg.hpp"
#include "arr/preference.hpp"
#include "arr/rubric_pipeline.hpp"
#include "arr/util.hpp"

namespace arr {

// T-step affine-Gaussian trajectory policy standing in for the generative
// model: x_T ~ N(0, I), then x_{t-1} = W_t x_t + b_t + sigma * eps for
// t = T..1. Every quantity the objective needs (per-step log-density,
// importance ratio, KL against a reference) is closed-form.
struct GaussianChainPolicy {
  int timesteps = 8;  // T
  int dim = 2;        // d
  std::vector<Matrix> weights;  // weights[t-1] = W_t
  std::vector<Vector> biases;   // biases[t-1] = b_t
  double sigma = 0.5;

  static GaussianChainPolicy initial(int timesteps, int dim, double sigma);

  // W_t x_t + b_t for the transition t -> t-1; t in [1, T]
  Vector step_mean(const Vector& x_t, int t) const;

  bool operator==(const GaussianChainPolicy&) const = default;
};

struct Trajectory {
  Vector prompt;                      // target vector g
  std::vector<Vector> states;        // states[j] = x_{T-j}; states.back() = x_0
  std::vector<double> per_step_logprob;  // per_step_logprob[j] for transition t = T-j

  const Vector& final_state() const { return states.back(); }
  // x_t for t in [0, T]
  const Vector& state_at(int t) const { return states[states.size() - 1 - t]; }
};

struct RPOConfig {
  int iterations = 500;
  int batch_size = 32;
  double lambda = 1.0;    // winner advantage
  double gamma = 0.1;     // loser advantage magnitude
  double clip_eps = 0.2;
  double kl_beta = 0.01;
  double learning_rate = 0.1;
  int timesteps = 8;
  int dim = 2;
  double sigma = 0.5;
  double grad_clip_norm = 1.0;  // 0 disables clipping
  bool regenerate_rubrics = false;
  uint64_t seed = 0;

  void validate() const;
};

Trajectory sample_trajectory(const GaussianChainPolicy& policy, const Vector& g, Rng& rng);

// Gaussian log-density of x_prev under mean W_t x_t + b_t, isotropic sigma^2.
double step_log_prob(const GaussianChainPolicy& policy, const Vector& x_t, const Vector& x_prev,
                     int t, const Vector& g);

double trajectory_log_prob(const GaussianChainPolicy& policy, const Trajectory& traj);

// pi_theta(x_{t-1} | x_t) / pi_old(x_{t-1} | x_t) on the sampled transition;
// step_index in [0, T-1] indexes the trajectory's transitions.
double importance_ratio(const GaussianChainPolicy& policy, const GaussianChainPolicy& old_policy,
                        const Trajectory& traj, int step_index);

// winner gets +lambda, loser -gamma; the scalar repeats at every timestep
std::pair<double, double> assign_advantages(const Verdict& verdict, const RPOConfig& cfg);

// Per-step Gaussian KL: ||mu_theta - mu_ref||^2 / (2 sigma^2). Both policies
// must share sigma.
double kl_step(const GaussianChainPolicy& policy, const GaussianChainPolicy& ref,
               const Vector& x_t, int t, const Vector& g);

// mean of kl_step over the trajectory's visited transitions
double trajectory_kl(const GaussianChainPolicy& policy, const GaussianChainPolicy& ref,
                     const Trajectory& traj);

struct PolicyGradient {
  std::vector<Matrix> d_weights;
  std::vector<Vector> d_biases;

  static PolicyGradient zeros(int timesteps, int dim);
  void scale(double factor);
  double squared_norm() const;
};

struct TrajectoryPair {
  Trajectory first;
  Trajectory second;
  double advantage_first = 0.0;
  double advantage_second = 0.0;
};

struct ObjectiveResult {
  double loss = 0.0;  // negated surrogate, to minimize
  PolicyGradient gradient;
};

// Clipped-surrogate objective with per-trajectory KL penalty over a batch of
// advantaged trajectory pairs sampled under old_policy, with its exact
// analytic gradient.
ObjectiveResult rpo_objective(const GaussianChainPolicy& policy,
                              const GaussianChainPolicy& old_policy,
                              const GaussianChainPolicy& ref_policy,
                              const std::vector<TrajectoryPair>& batch, const RPOConfig& cfg);

// ---------------------------------------------------------------------------
// Judges over trajectories

class TrajectoryJudge {
 public:
  virtual ~TrajectoryJudge() = default;
  virtual Side prefer(const Vector& g, const Trajectory& a, const Trajectory& b) = 0;
  virtual std::string id() const = 0;
  // optional rubric conditioning hook; judges may ignore it
  virtual void condition_on(const StructuredRubric*) {}
};

// Deterministic closeness-to-target judge: one vote per coordinate for the
// trajectory whose final state is closer on that axis, majority wins, ties
// break on total squared distance, then toward the first presented.
class CloseToTargetJudge : public TrajectoryJudge {
 public:
  Side prefer(const Vector& g, const Trajectory& a, const Trajectory& b) override;
  std::string id() const override { return "close-to-target"; }
  void condition_on(const StructuredRubric* rubric) override;

 private:
  std::vector<int> axes_;  // empty = all coordinates
};

class ScriptedTrajectoryJudge : public TrajectoryJudge {
 public:
  explicit ScriptedTrajectoryJudge(Side always) : always_(always) {}
  Side prefer(const Vector&, const Trajectory&, const Trajectory&) override { return always_; }
  std::string id() const override { return "scripted-trajectory"; }

 private:
  Side always_;
};

// Renders both trajectories for a chat backend and parses the verdict line;
// this is the frozen rubric-conditioned judge path when a remote backend is
// plugged in.
class ChatTrajectoryJudge : public TrajectoryJudge {
 public:
  ChatTrajectoryJudge(JudgeBackend& backend, RetryPolicy retry = {})
      : backend_(backend), retry_(std::move(retry)) {}

  Side prefer(const Vector& g, const Trajectory& a, const Trajectory& b) override;
  std::string id() const override { return "chat:" + backend_.id(); }
  void condition_on(const StructuredRubric* rubric) override { rubric_ = rubric; }

 private:
  JudgeBackend& backend_;
  RetryPolicy retry_;
  const StructuredRubric* rubric_ = nullptr;
  uint64_t call_index_ = 0;
};

// ---------------------------------------------------------------------------
// Prompt sources

class PromptSource {
 public:
  virtual ~PromptSource() = default;
  virtual Vector sample(Rng& rng) = 0;
};

class FixedPromptSource : public PromptSource {
 public:
  explicit FixedPromptSource(Vector target) : target_(std::move(target)) {}
  Vector sample(Rng&) override { return target_; }

 private:
  Vector target_;
};

class GaussianPromptSource : public PromptSource {
 public:
  GaussianPromptSource(int dim, double scale) : dim_(dim), scale_(scale) {}
  Vector sample(Rng& rng) override;

 private:
  int dim_;
  double scale_;
};

// Embeds dataset prompt strings into d-dimensional targets via a seeded hash,
// cycling through the dataset in order.
class DatasetPromptSource : public PromptSource {
 public:
  DatasetPromptSource(const PreferenceDataset& dataset, int dim, double scale, uint64_t seed);
  Vector sample(Rng& rng) override;

 private:
  std::vector<Vector> targets_;
  std::size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Training

struct IterationMetrics {
  int iteration = 0;
  double mean_final_distance = 0.0;
  double mean_kl = 0.0;
  double win_rate_vs_ref = 0.0;
  double loss = 0.0;
};

struct TrainerState {
  GaussianChainPolicy policy;
  GaussianChainPolicy old_policy;
  GaussianChainPolicy ref_policy;  // frozen snapshot of the initialization
  std::vector<IterationMetrics> metrics;
};

// regenerates a conditioning rubric per prompt-output pair when
// cfg.regenerate_rubrics is on
using RubricProvider =
    std::function<StructuredRubric(const Vector& g, const Trajectory&, const Trajectory&)>;

// Fully online loop: sample B prompts, two trajectories each from the
// snapshot policy, judge, assign advantages, one gradient step, re-snapshot.
// Bit-reproducible under a fixed seed with a deterministic judge.
TrainerState rpo_train(const RPOConfig& cfg, PromptSource& prompts, TrajectoryJudge& judge,
                       const RubricProvider& rubric_provider = {});

// Worst relative error of analytic gradients (rpo_objective and bt_grad)
// against central finite differences over random small instances.
double finite_diff_check(int trials, uint64_t seed);

void save_policy(const GaussianChainPolicy& policy, uint64_t seed,
                 const std::filesystem::path& path);
GaussianChainPolicy load_policy(const std::filesystem::path& path, uint64_t* seed = nullptr);
void write_metrics(const std::vector<IterationMetrics>& metrics,
                   const std::filesystem::path& path);

}  // namespace arr
