#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "arr/errors.hpp"
#include "arr/preference.hpp"
#include "arr/util.hpp"

namespace arr {

enum class Side { First, Second };

inline Side flip(Side s) { return s == Side::First ? Side::Second : Side::First; }

inline Side side_of(PreferenceLabel label) {
  return label == PreferenceLabel::FirstPreferred ? Side::First : Side::Second;
}

// Presentation order of a pair to a judge. Reverse swaps the candidates.
enum class Order { Forward, Reverse };

inline const char* order_name(Order o) { return o == Order::Forward ? "fwd" : "rev"; }

struct UserPart {
  enum class Kind { Text, Image };
  Kind kind = Kind::Text;
  std::string value;

  static UserPart text(std::string v) { return {Kind::Text, std::move(v)}; }
  static UserPart image(std::string uri) { return {Kind::Image, std::move(uri)}; }
};

struct JudgeRequest {
  std::string system_text;
  std::vector<UserPart> user_parts;
  double temperature = 0.0;
  int max_output_units = 1024;
  std::string request_tag;
};

struct JudgeResponse {
  std::string text;
  std::string backend_id;
  long long latency_ms = 0;
  int attempt_count = 1;
};

// Binary pairwise decision in the coordinates the judge saw (First = the
// candidate presented first).
struct Verdict {
  Side preferred = Side::First;
  std::string rationale;
  std::string raw;
};

// Extracts the final `VERDICT: FIRST|SECOND` line (case-insensitive);
// everything before it becomes the rationale. Missing or conflicting verdict
// lines are errors, never defaulted.
Verdict parse_verdict(const std::string& text);

// Canonical formatter; parse_verdict(render_verdict(v)).preferred == v.preferred.
std::string render_verdict(const Verdict& verdict);

// One backend attempt. Retry/backoff lives in chat_complete, so scripted
// failure schedules drive the retry path deterministically.
class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::string id() const = 0;
  virtual std::string complete_once(const JudgeRequest& request) = 0;
};

struct RetryPolicy {
  int retry_limit = 3;  // retries beyond the first attempt
  double base_delay_ms = 100.0;
  double max_delay_ms = 5000.0;
  uint64_t jitter_seed = 0;
  // test seam; defaults to std::this_thread::sleep_for
  std::function<void(std::chrono::milliseconds)> sleeper;
};

// Calls the backend, retrying transport/timeout/429/5xx failures with
// exponential backoff and jitter, up to retry_limit retries. attempt_count on
// the response never exceeds retry_limit + 1.
JudgeResponse chat_complete(JudgeBackend& backend, const JudgeRequest& request,
                            const RetryPolicy& retry = {});

// ---------------------------------------------------------------------------
// Scripted backend (mock): reply table keyed by request_tag, consumed in order.

class ScriptedBackend : public JudgeBackend {
 public:
  explicit ScriptedBackend(std::string id = "scripted") : id_(std::move(id)) {}

  std::string id() const override { return id_; }
  std::string complete_once(const JudgeRequest& request) override;

  void script(const std::string& tag, std::string reply);
  void script_failure(const std::string& tag, BackendErrorKind kind, std::string message,
                      int http_status = 0);
  void script_default(std::string reply);
  // programmable fallback when no table entry matches
  void set_replier(std::function<std::string(const JudgeRequest&)> replier);

  int call_count() const;
  std::vector<JudgeRequest> requests() const;

 private:
  struct Failure {
    BackendErrorKind kind;
    std::string message;
    int http_status;
  };
  using Entry = std::variant<std::string, Failure>;

  mutable std::mutex mutex_;
  std::string id_;
  std::map<std::string, std::deque<Entry>> by_tag_;
  std::optional<std::string> default_reply_;
  std::function<std::string(const JudgeRequest&)> replier_;
  int call_count_ = 0;
  std::vector<JudgeRequest> requests_;
};

// ---------------------------------------------------------------------------
// Synthetic oracle. Stands in for the inaccessible true preference
// distribution: scores feature-vector candidates with a fixed weight vector,
// with controllable position bias and decision noise. Fully deterministic
// given (seed, pair id, order).

struct OracleConfig {
  std::vector<double> weight_vector;
  double position_bias = 0.0;  // probability of overriding to the first-presented
  double noise_rate = 0.0;     // probability of flipping the decision
  uint64_t seed = 0;
};

// Judges the pair as presented in `order`; the returned verdict is in
// presented coordinates. Ties on the restricted score resolve by a coin keyed
// to the pair alone, so the unbiased noiseless oracle is order-equivariant.
Verdict oracle_judge(const PreferencePair& pair, const OracleConfig& cfg, Order order);

// Core decision rule shared by oracle_judge and OracleBackend. `axes` empty
// means all coordinates. Features are in presented order.
Side oracle_decide(const std::string& pair_id, Order order,
                   const std::vector<double>& presented_first,
                   const std::vector<double>& presented_second,
                   const std::vector<int>& axes, const OracleConfig& cfg,
                   uint64_t salt = 0);

// Deterministic closeness-to-target rule: one vote per axis for the vector
// nearer the target on that coordinate, majority wins, ties break on total
// squared distance over the axes in play, then toward the first.
Side closeness_decide(const std::vector<double>& target, const std::vector<double>& first,
                      const std::vector<double>& second, const std::vector<int>& axes);

// Chat-flavored deterministic oracle: answers the same prompts a remote judge
// would receive, by reading the machine anchors the prompt builders embed
// (FEATURES_* lines, axis=k criteria markers, request tags). Lets every
// pipeline and evaluation path run offline and bit-reproducibly.
class OracleBackend : public JudgeBackend {
 public:
  explicit OracleBackend(OracleConfig cfg) : cfg_(std::move(cfg)) {}

  std::string id() const override { return "oracle"; }
  std::string complete_once(const JudgeRequest& request) override;

  const OracleConfig& config() const { return cfg_; }

 private:
  std::string handle_eval(const JudgeRequest& request, const std::string& pair_id,
                          Order order) const;
  std::string handle_generate(const JudgeRequest& request, const std::string& pair_id) const;
  std::string handle_verify(const JudgeRequest& request, const std::string& pair_id,
                            int attempt) const;
  std::string handle_refine(const JudgeRequest& request, const std::string& pair_id,
                            int attempt) const;
  std::string handle_structure(const JudgeRequest& request) const;
  std::string handle_trajectory(const JudgeRequest& request) const;

  OracleConfig cfg_;
};

// Prompt anchor helpers shared by prompt builders and the oracle backend.
std::string render_feature_anchor(const std::string& name, const std::vector<double>& values);
std::optional<std::vector<double>> parse_feature_anchor(const std::string& text,
                                                        const std::string& name);
// all `axis=<k>` markers in the text, sorted unique
std::vector<int> parse_axis_markers(const std::string& text);

// ---------------------------------------------------------------------------
// Remote OpenAI-compatible backend.

struct HttpBackendConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8080/v1"
  std::string model;
  std::string api_key_env = "ARR_API_KEY";
  int timeout_ms = 30000;
  int concurrency_bound = 4;
  // applied to requests that leave the temperature at the deterministic 0
  double default_temperature = 0.0;
};

class HttpBackend : public JudgeBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg);
  ~HttpBackend() override;

  std::string id() const override;
  std::string complete_once(const JudgeRequest& request) override;

  // exposed for wire-format tests
  static std::string build_request_body(const JudgeRequest& request, const std::string& model);
  static std::string extract_content(const std::string& response_body,
                                     const std::string& request_tag);

 private:
  HttpBackendConfig cfg_;
  AdmissionGate gate_;
  std::string host_port_;
  std::string path_prefix_;
};

// Decorator bounding concurrent in-flight calls on any backend.
class BoundedBackend : public JudgeBackend {
 public:
  BoundedBackend(JudgeBackend& inner, int bound) : inner_(inner), gate_(bound) {}

  std::string id() const override { return inner_.id(); }
  std::string complete_once(const JudgeRequest& request) override {
    auto ticket = gate_.acquire();
    return inner_.complete_once(request);
  }

  int in_flight() const { return gate_.in_flight(); }

 private:
  JudgeBackend& inner_;
  AdmissionGate gate_;
};

}  // namespace arr
