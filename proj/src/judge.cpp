#include "arr/judge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "arr/linalg.hpp"

namespace arr {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Verdict grammar

namespace {

std::string to_upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// returns the verdict on a `VERDICT: FIRST|SECOND` line, nullopt otherwise
std::optional<Side> match_verdict_line(const std::string& line) {
  std::string t = to_upper(trim(line));
  if (t.rfind("VERDICT:", 0) != 0) return std::nullopt;
  std::string rest = trim(t.substr(8));
  if (rest == "FIRST") return Side::First;
  if (rest == "SECOND") return Side::Second;
  return std::nullopt;
}

}  // namespace

Verdict parse_verdict(const std::string& text) {
  std::vector<std::pair<std::size_t, Side>> hits;  // (line start offset, side)
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
    if (auto side = match_verdict_line(line)) hits.emplace_back(pos, *side);
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }

  if (hits.empty()) throw DataError("missing verdict line in judge output");
  for (const auto& [off, side] : hits) {
    if (side != hits.back().second)
      throw DataError("conflicting verdict lines in judge output");
  }

  Verdict v;
  v.preferred = hits.back().second;
  v.rationale = trim(text.substr(0, hits.back().first));
  v.raw = text;
  return v;
}

std::string render_verdict(const Verdict& verdict) {
  std::string out;
  if (!verdict.rationale.empty()) out += verdict.rationale + "\n";
  out += verdict.preferred == Side::First ? "VERDICT: FIRST" : "VERDICT: SECOND";
  out += "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Retry loop

JudgeResponse chat_complete(JudgeBackend& backend, const JudgeRequest& request,
                            const RetryPolicy& retry) {
  if (request.user_parts.empty())
    throw PreconditionError("judge request needs at least one user part (tag '" +
                            request.request_tag + "')");
  if (!std::isfinite(request.temperature) || request.temperature < 0.0)
    throw PreconditionError("judge request temperature must be finite and non-negative");

  auto started = std::chrono::steady_clock::now();
  int max_attempts = retry.retry_limit + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    try {
      std::string text = backend.complete_once(request);
      JudgeResponse resp;
      resp.text = std::move(text);
      resp.backend_id = backend.id();
      resp.attempt_count = attempt;
      resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
      return resp;
    } catch (const BackendError& e) {
      if (!e.retriable()) throw;
      if (attempt == max_attempts) {
        throw BackendError(BackendErrorKind::ExhaustedRetries, request.request_tag,
                           "retries exhausted after " + std::to_string(attempt) +
                               " attempts; last error: " + e.what());
      }
      double delay = retry.base_delay_ms * std::pow(2.0, attempt - 1);
      delay = std::min(delay, retry.max_delay_ms);
      Rng jitter(mix_seed({retry.jitter_seed, fnv1a64(request.request_tag),
                           static_cast<uint64_t>(attempt)}));
      delay *= 0.5 + 0.5 * jitter.uniform01();
      auto ms = std::chrono::milliseconds(static_cast<long long>(delay));
      if (retry.sleeper) {
        retry.sleeper(ms);
      } else {
        std::this_thread::sleep_for(ms);
      }
    }
  }
  throw BackendError(BackendErrorKind::ExhaustedRetries, request.request_tag,
                     "unreachable retry state");
}

// ---------------------------------------------------------------------------
// ScriptedBackend

std::string ScriptedBackend::complete_once(const JudgeRequest& request) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++call_count_;
  requests_.push_back(request);

  auto it = by_tag_.find(request.request_tag);
  if (it != by_tag_.end() && !it->second.empty()) {
    Entry entry = std::move(it->second.front());
    it->second.pop_front();
    if (auto* reply = std::get_if<std::string>(&entry)) return *reply;
    const Failure& f = std::get<Failure>(entry);
    throw BackendError(f.kind, request.request_tag, f.message, f.http_status);
  }
  if (replier_) return replier_(request);
  if (default_reply_) return *default_reply_;
  throw BackendError(BackendErrorKind::MalformedResponse, request.request_tag,
                     "no scripted reply for tag");
}

void ScriptedBackend::script(const std::string& tag, std::string reply) {
  std::lock_guard<std::mutex> lock(mutex_);
  by_tag_[tag].emplace_back(std::move(reply));
}

void ScriptedBackend::script_failure(const std::string& tag, BackendErrorKind kind,
                                     std::string message, int http_status) {
  std::lock_guard<std::mutex> lock(mutex_);
  by_tag_[tag].emplace_back(Failure{kind, std::move(message), http_status});
}

void ScriptedBackend::script_default(std::string reply) {
  std::lock_guard<std::mutex> lock(mutex_);
  default_reply_ = std::move(reply);
}

void ScriptedBackend::set_replier(std::function<std::string(const JudgeRequest&)> replier) {
  std::lock_guard<std::mutex> lock(mutex_);
  replier_ = std::move(replier);
}

int ScriptedBackend::call_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return call_count_;
}

std::vector<JudgeRequest> ScriptedBackend::requests() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return requests_;
}

// ---------------------------------------------------------------------------
// Synthetic oracle

namespace {

double restricted_score_diff(const std::vector<double>& a, const std::vector<double>& b,
                             const std::vector<int>& axes, const std::vector<double>& w,
                             const std::string& pair_id) {
  if (a.size() != w.size() || b.size() != w.size()) {
    throw DataError("oracle dimension mismatch on pair '" + pair_id + "': features " +
                    std::to_string(a.size()) + "/" + std::to_string(b.size()) +
                    " vs weights " + std::to_string(w.size()));
  }
  double diff = 0.0;
  if (axes.empty()) {
    for (std::size_t k = 0; k < w.size(); ++k) diff += w[k] * (a[k] - b[k]);
  } else {
    for (int k : axes) {
      if (k < 0 || static_cast<std::size_t>(k) >= w.size())
        throw DataError("rubric axis " + std::to_string(k) + " out of range");
      diff += w[k] * (a[k] - b[k]);
    }
  }
  return diff;
}

uint64_t order_code(Order o) { return o == Order::Forward ? 1 : 2; }

}  // namespace

Side oracle_decide(const std::string& pair_id, Order order,
                   const std::vector<double>& presented_first,
                   const std::vector<double>& presented_second,
                   const std::vector<int>& axes, const OracleConfig& cfg, uint64_t salt) {
  double diff = restricted_score_diff(presented_first, presented_second, axes,
                                      cfg.weight_vector, pair_id);

  Side presented;
  if (diff > 0.0) {
    presented = Side::First;
  } else if (diff < 0.0) {
    presented = Side::Second;
  } else {
    // Tie-break in canonical coordinates so the unbiased oracle stays
    // order-equivariant even on ties.
    Rng tie(mix_seed({cfg.seed, fnv1a64(pair_id), fnv1a64("tie"), salt}));
    Side canonical = tie.bernoulli(0.5) ? Side::First : Side::Second;
    presented = order == Order::Forward ? canonical : flip(canonical);
  }

  Rng bias(mix_seed({cfg.seed, fnv1a64(pair_id), fnv1a64("bias"), order_code(order), salt}));
  if (bias.uniform01() < cfg.position_bias) presented = Side::First;

  Rng noise(mix_seed({cfg.seed, fnv1a64(pair_id), fnv1a64("noise"), order_code(order), salt}));
  if (noise.uniform01() < cfg.noise_rate) presented = flip(presented);

  return presented;
}

Side closeness_decide(const std::vector<double>& target, const std::vector<double>& first,
                      const std::vector<double>& second, const std::vector<int>& axes) {
  if (first.size() != target.size() || second.size() != target.size())
    throw DataError("closeness rule dimension mismatch");

  std::vector<int> in_play = axes;
  if (in_play.empty()) {
    in_play.resize(target.size());
    for (std::size_t k = 0; k < target.size(); ++k) in_play[k] = static_cast<int>(k);
  }

  int votes_first = 0, votes_second = 0;
  double dist_first = 0.0, dist_second = 0.0;
  for (int k : in_play) {
    if (k < 0 || static_cast<std::size_t>(k) >= target.size())
      throw DataError("closeness rule axis out of range");
    double da = std::abs(first[k] - target[k]);
    double db = std::abs(second[k] - target[k]);
    if (da < db) ++votes_first;
    if (db < da) ++votes_second;
    dist_first += da * da;
    dist_second += db * db;
  }
  if (votes_first != votes_second)
    return votes_first > votes_second ? Side::First : Side::Second;
  if (dist_first != dist_second) return dist_first < dist_second ? Side::First : Side::Second;
  return Side::First;
}

Verdict oracle_judge(const PreferencePair& pair, const OracleConfig& cfg, Order order) {
  const std::vector<double>* f1 = pair.first.feature_vector();
  const std::vector<double>* f2 = pair.second.feature_vector();
  if (!f1 || !f2)
    throw DataError("oracle judge requires feature-vector candidates on pair '" + pair.id + "'");

  const std::vector<double>& a = order == Order::Forward ? *f1 : *f2;
  const std::vector<double>& b = order == Order::Forward ? *f2 : *f1;
  Side presented = oracle_decide(pair.id, order, a, b, {}, cfg);

  Verdict v;
  v.preferred = presented;
  v.rationale = "synthetic oracle decision on pair '" + pair.id + "' (" + order_name(order) + ")";
  v.raw = render_verdict(v);
  return v;
}

// ---------------------------------------------------------------------------
// Prompt anchors

std::string render_feature_anchor(const std::string& name, const std::vector<double>& values) {
  return name + ": " + json(values).dump();
}

std::optional<std::vector<double>> parse_feature_anchor(const std::string& text,
                                                        const std::string& name) {
  std::string needle = name + ": ";
  std::size_t pos = text.find(needle);
  if (pos == std::string::npos) return std::nullopt;
  if (pos != 0 && text[pos - 1] != '\n') return std::nullopt;
  std::size_t start = pos + needle.size();
  std::size_t eol = text.find('\n', start);
  std::string payload = text.substr(start, eol == std::string::npos ? std::string::npos : eol - start);
  try {
    json j = json::parse(payload);
    std::vector<double> out;
    for (const auto& v : j) out.push_back(v.get<double>());
    return out;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

std::vector<int> parse_axis_markers(const std::string& text) {
  std::set<int> axes;
  std::size_t pos = 0;
  while ((pos = text.find("axis=", pos)) != std::string::npos) {
    pos += 5;
    std::size_t end = pos;
    while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
    if (end > pos) axes.insert(std::stoi(text.substr(pos, end - pos)));
    pos = end;
  }
  return std::vector<int>(axes.begin(), axes.end());
}

// ---------------------------------------------------------------------------
// OracleBackend

namespace {

std::string full_prompt_text(const JudgeRequest& request) {
  std::string text = request.system_text;
  for (const auto& part : request.user_parts) {
    text += "\n";
    text += part.value;
  }
  return text;
}

std::vector<std::string> split_tag(const std::string& tag) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    std::size_t colon = tag.find(':', pos);
    if (colon == std::string::npos) {
      parts.push_back(tag.substr(pos));
      break;
    }
    parts.push_back(tag.substr(pos, colon - pos));
    pos = colon + 1;
  }
  return parts;
}

std::vector<double> require_anchor(const JudgeRequest& request, const std::string& name) {
  auto values = parse_feature_anchor(full_prompt_text(request), name);
  if (!values) {
    throw BackendError(BackendErrorKind::MalformedResponse, request.request_tag,
                       "oracle backend requires a " + name +
                           " anchor (feature-vector candidates)");
  }
  return *values;
}

// axes ranked by how strongly they support the stated preference
std::vector<int> rank_axes_by_support(const std::vector<double>& preferred,
                                      const std::vector<double>& dispreferred,
                                      const std::vector<double>& weights,
                                      const std::string& tag) {
  if (preferred.size() != weights.size() || dispreferred.size() != weights.size())
    throw BackendError(BackendErrorKind::MalformedResponse, tag,
                       "oracle backend dimension mismatch");
  std::vector<int> order(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) order[k] = static_cast<int>(k);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    double cx = weights[x] * (preferred[x] - dispreferred[x]);
    double cy = weights[y] * (preferred[y] - dispreferred[y]);
    if (cx != cy) return cx > cy;
    return x < y;
  });
  return order;
}

std::string axis_criterion(int axis) {
  return "- axis=" + std::to_string(axis) +
         ": prefer the candidate with the stronger weighted score on quality axis " +
         std::to_string(axis);
}

const char* axis_dimension_name(int axis) {
  switch (axis) {
    case 0: return "Overall alignment";
    case 1: return "Compositional structure";
    case 2: return "Fine-grained fidelity";
    default: return nullptr;
  }
}

}  // namespace

std::string OracleBackend::handle_eval(const JudgeRequest& request, const std::string& pair_id,
                                       Order order) const {
  std::vector<double> a = require_anchor(request, "FEATURES_A");
  std::vector<double> b = require_anchor(request, "FEATURES_B");
  std::vector<int> axes = parse_axis_markers(full_prompt_text(request));

  Side presented;
  try {
    presented = oracle_decide(pair_id, order, a, b, axes, cfg_);
  } catch (const DataError& e) {
    throw BackendError(BackendErrorKind::MalformedResponse, request.request_tag, e.what());
  }

  Verdict v;
  v.preferred = presented;
  std::ostringstream rationale;
  rationale << "oracle scored the candidates";
  if (!axes.empty()) {
    rationale << " restricted to axes [";
    for (std::size_t i = 0; i < axes.size(); ++i) rationale << (i ? "," : "") << axes[i];
    rationale << "]";
  }
  v.rationale = rationale.str();
  return render_verdict(v);
}

std::string OracleBackend::handle_generate(const JudgeRequest& request,
                                           const std::string& pair_id) const {
  std::vector<double> pref = require_anchor(request, "FEATURES_PREFERRED");
  std::vector<double> dis = require_anchor(request, "FEATURES_DISPREFERRED");
  std::vector<int> ranked =
      rank_axes_by_support(pref, dis, cfg_.weight_vector, request.request_tag);
  // Instance-specific rubric: name the most decisive quality axis for this pair.
  (void)pair_id;
  return axis_criterion(ranked.front()) + "\n";
}

std::string OracleBackend::handle_verify(const JudgeRequest& request, const std::string& pair_id,
                                         int attempt) const {
  std::vector<double> a = require_anchor(request, "FEATURES_A");
  std::vector<double> b = require_anchor(request, "FEATURES_B");
  std::vector<int> axes = parse_axis_markers(full_prompt_text(request));
  uint64_t salt = mix_seed({fnv1a64("verify"), static_cast<uint64_t>(attempt)});

  Side presented;
  try {
    presented = oracle_decide(pair_id, Order::Forward, a, b, axes, cfg_, salt);
  } catch (const DataError& e) {
    throw BackendError(BackendErrorKind::MalformedResponse, request.request_tag, e.what());
  }

  Verdict v;
  v.preferred = presented;
  std::ostringstream rationale;
  rationale << "the rubric's axes [";
  for (std::size_t i = 0; i < axes.size(); ++i) rationale << (i ? "," : "") << axes[i];
  rationale << "] favor the " << (presented == Side::First ? "first" : "second")
            << " candidate on this pair";
  v.rationale = rationale.str();
  return render_verdict(v);
}

std::string OracleBackend::handle_refine(const JudgeRequest& request, const std::string& pair_id,
                                         int attempt) const {
  std::vector<double> pref = require_anchor(request, "FEATURES_PREFERRED");
  std::vector<double> dis = require_anchor(request, "FEATURES_DISPREFERRED");
  std::vector<int> ranked =
      rank_axes_by_support(pref, dis, cfg_.weight_vector, request.request_tag);
  (void)pair_id;
  // Move to the next-most-supportive axis each refinement round.
  int rank = (attempt + 1) % static_cast<int>(ranked.size());
  return axis_criterion(ranked[rank]) + "\n";
}

std::string OracleBackend::handle_structure(const JudgeRequest& request) const {
  auto text = full_prompt_text(request);
  std::string needle = "RUBRICS_JSON: ";
  std::size_t pos = text.find(needle);
  if (pos == std::string::npos)
    throw BackendError(BackendErrorKind::MalformedResponse, request.request_tag,
                       "oracle backend requires a RUBRICS_JSON anchor");
  std::size_t eol = text.find('\n', pos);
  std::string payload = text.substr(pos + needle.size(),
                                    eol == std::string::npos ? std::string::npos
                                                             : eol - pos - needle.size());
  json rubrics;
  try {
    rubrics = json::parse(payload);
  } catch (const json::exception& e) {
    throw BackendError(BackendErrorKind::MalformedResponse, request.request_tag,
                       std::string("bad RUBRICS_JSON anchor: ") + e.what());
  }

  // group criteria by their leading axis marker
  std::map<int, std::vector<std::pair<std::string, std::string>>> by_axis;  // axis -> (id, text)
  for (const auto& r : rubrics) {
    std::string id = r.at("id").get<std::string>();
    std::string rubric_text = r.at("text").get<std::string>();
    std::vector<int> axes = parse_axis_markers(rubric_text);
    int axis = axes.empty() ? 0 : axes.front();
    by_axis[axis].emplace_back(id, rubric_text);
  }

  json dims = json::array();
  for (auto& [axis, entries] : by_axis) {
    std::sort(entries.begin(), entries.end());
    json dim = json::object();
    const char* name = axis_dimension_name(axis);
    dim["name"] = name ? name : ("Auxiliary axis " + std::to_string(axis));
    dim["operationalization"] =
        "Criteria keyed to quality axis " + std::to_string(axis) + ".";
    json criteria = json::array();
    for (auto& [id, rubric_text] : entries) {
      std::string t = trim(rubric_text);
      criteria.push_back({{"text", t}, {"source_id", id}});
    }
    dim["criteria"] = std::move(criteria);
    dims.push_back(std::move(dim));
  }

  json block = json::object();
  block["dimensions"] = std::move(dims);
  return "Grouped the verified criteria by quality axis.\n```json\n" + block.dump() + "\n```\n";
}

std::string OracleBackend::handle_trajectory(const JudgeRequest& request) const {
  std::vector<double> target = require_anchor(request, "TARGET");
  std::vector<double> a = require_anchor(request, "FEATURES_A");
  std::vector<double> b = require_anchor(request, "FEATURES_B");
  std::vector<int> axes = parse_axis_markers(full_prompt_text(request));

  Verdict v;
  try {
    v.preferred = closeness_decide(target, a, b, axes);
  } catch (const DataError& e) {
    throw BackendError(BackendErrorKind::MalformedResponse, request.request_tag, e.what());
  }
  v.rationale = "per-coordinate closeness to the target";
  return render_verdict(v);
}

std::string OracleBackend::complete_once(const JudgeRequest& request) {
  std::vector<std::string> tag = split_tag(request.request_tag);
  const std::string& kind = tag.empty() ? std::string() : tag.front();

  if (kind == "eval" && tag.size() >= 3) {
    Order order = tag[2] == "rev" ? Order::Reverse : Order::Forward;
    return handle_eval(request, tag[1], order);
  }
  if (kind == "gen" && tag.size() >= 2) return handle_generate(request, tag[1]);
  if (kind == "verify" && tag.size() >= 3)
    return handle_verify(request, tag[1], std::stoi(tag[2]));
  if (kind == "refine" && tag.size() >= 3)
    return handle_refine(request, tag[1], std::stoi(tag[2]));
  if (kind == "struct") return handle_structure(request);
  if (kind == "traj") return handle_trajectory(request);

  throw BackendError(BackendErrorKind::MalformedResponse, request.request_tag,
                     "oracle backend cannot serve request kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// HttpBackend

HttpBackend::HttpBackend(HttpBackendConfig cfg)
    : cfg_(std::move(cfg)), gate_(cfg_.concurrency_bound) {
  std::string url = cfg_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  std::size_t scheme = url.find("://");
  std::size_t path_start =
      scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
  if (path_start == std::string::npos) {
    host_port_ = url;
    path_prefix_.clear();
  } else {
    host_port_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
  }
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::id() const { return "http:" + cfg_.model + "@" + cfg_.base_url; }

std::string HttpBackend::build_request_body(const JudgeRequest& request,
                                            const std::string& model) {
  json body = json::object();
  body["model"] = model;

  json messages = json::array();
  json system_msg = json::object();
  system_msg["role"] = "system";
  system_msg["content"] = json::array({json{{"type", "text"}, {"text", request.system_text}}});
  messages.push_back(std::move(system_msg));

  json user_content = json::array();
  for (const auto& part : request.user_parts) {
    if (part.kind == UserPart::Kind::Text) {
      user_content.push_back({{"type", "text"}, {"text", part.value}});
    } else {
      user_content.push_back({{"type", "image_url"}, {"image_url", {{"url", part.value}}}});
    }
  }
  json user_msg = json::object();
  user_msg["role"] = "user";
  user_msg["content"] = std::move(user_content);
  messages.push_back(std::move(user_msg));

  body["messages"] = std::move(messages);
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_output_units;
  return body.dump();
}

std::string HttpBackend::extract_content(const std::string& response_body,
                                         const std::string& request_tag) {
  json j;
  try {
    j = json::parse(response_body);
  } catch (const json::exception& e) {
    throw BackendError(BackendErrorKind::MalformedResponse, request_tag,
                       std::string("response is not JSON: ") + e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw BackendError(BackendErrorKind::MalformedResponse, request_tag,
                       "response missing choices[0]");
  const json& msg = j["choices"][0].contains("message") ? j["choices"][0]["message"] : json();
  if (!msg.contains("content"))
    throw BackendError(BackendErrorKind::MalformedResponse, request_tag,
                       "response missing choices[0].message.content");
  const json& content = msg["content"];
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content) {
      if (part.contains("text") && part["text"].is_string())
        out += part["text"].get<std::string>();
    }
    return out;
  }
  throw BackendError(BackendErrorKind::MalformedResponse, request_tag,
                     "unsupported content shape in response");
}

std::string HttpBackend::complete_once(const JudgeRequest& request) {
  auto ticket = gate_.acquire();

  httplib::Client client(host_port_);
  client.set_connection_timeout(0, cfg_.timeout_ms * 1000LL);
  client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000LL);
  client.set_write_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000LL);

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  // requests left at the deterministic default inherit the configured
  // decoding temperature
  JudgeRequest effective = request;
  if (effective.temperature == 0.0) effective.temperature = cfg_.default_temperature;
  std::string body = build_request_body(effective, cfg_.model);
  auto res = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");

  if (!res) {
    auto err = res.error();
    bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                     err == httplib::Error::Write;
    throw BackendError(timed_out ? BackendErrorKind::Timeout : BackendErrorKind::Transport,
                       request.request_tag,
                       std::string("transport failure: ") + httplib::to_string(err));
  }
  if (res->status == 401 || res->status == 403)
    throw BackendError(BackendErrorKind::Auth, request.request_tag,
                       "authentication failure (HTTP " + std::to_string(res->status) + ")",
                       res->status);
  if (res->status != 200)
    throw BackendError(BackendErrorKind::HttpStatus, request.request_tag,
                       "HTTP " + std::to_string(res->status), res->status);
  return extract_content(res->body, request.request_tag);
}

}  // namespace arr
