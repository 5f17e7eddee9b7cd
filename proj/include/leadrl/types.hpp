#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace leadrl {

/// One question of a dataset. `difficulty` is the dataset's own rating, not a
/// measured quantity; measured difficulty lives in group statistics.
struct QuestionRecord {
  std::string id;
  double difficulty = 0.0;
  std::string reference_answer;
  std::string source_tag;
};

/// One sampled response to a question. Only the token count and extracted
/// answer are kept here; token sequences themselves belong to the environment
/// that produced them. Logprob tracks are per token, in nats: `new` under the
/// current policy, `old` under the sampling-time snapshot.
struct Rollout {
  std::string question_id;
  std::int64_t token_length = 1;
  std::optional<std::string> extracted_answer;
  bool is_correct = false;
  std::optional<std::vector<double>> token_logprobs_new;
  std::optional<std::vector<double>> token_logprobs_old;
  bool has_repetition = false;
};

/// All rollouts sampled for one question in one step.
struct Group {
  std::string question_id;
  std::vector<Rollout> rollouts;
};

/// Stage-dependent reward shaping knobs. `incorrect_penalty = 0` gives the
/// zero-reward-for-wrong scheme, `-1` the explicit-penalty scheme. The
/// repetition penalty replaces the reward outright when enabled and flagged.
struct RewardConfig {
  double alpha = 0.05;
  double epsilon = 1e-6;
  double incorrect_penalty = -1.0;
  bool length_reward_enabled = true;
  double repetition_penalty = -1.5;
  std::int32_t repetition_ngram_n = 5;
  std::int32_t repetition_min_repeats = 4;
  bool repetition_penalty_enabled = false;
};

/// Logistic advantage-reweighting parameters: weight moves from B (hard
/// questions, low correctness ratio) down to A (easy ones), with midpoint
/// rho0 and slope k.
struct ReweightConfig {
  double A = 0.4;
  double B = 1.5;
  double rho0 = 0.75;
  double k = 10.0;
  bool enabled = true;
};

struct ValidationResult {
  bool ok = true;
  std::string violation;  // first violated invariant, empty when ok

  explicit operator bool() const { return ok; }
};

inline ValidationResult validate_rollout(const Rollout& r) {
  if (r.token_length < 1) return {false, "token_length >= 1"};
  const auto check_track = [&](const std::optional<std::vector<double>>& lp)
      -> ValidationResult {
    if (!lp) return {};
    if (static_cast<std::int64_t>(lp->size()) != r.token_length)
      return {false, "logprob length mismatch"};
    for (double v : *lp)
      if (!(v <= 0.0)) return {false, "logprob <= 0"};
    return {};
  };
  if (auto v = check_track(r.token_logprobs_new); !v.ok) return v;
  if (auto v = check_track(r.token_logprobs_old); !v.ok) return v;
  return {};
}

inline void validate(const RewardConfig& c) {
  if (!(c.alpha > 0.0)) throw std::invalid_argument("RewardConfig: alpha must be > 0");
  if (!(c.epsilon > 0.0)) throw std::invalid_argument("RewardConfig: epsilon must be > 0");
  if (!(c.incorrect_penalty <= 0.0))
    throw std::invalid_argument("RewardConfig: incorrect_penalty must be <= 0");
  if (!(c.repetition_penalty <= 0.0))
    throw std::invalid_argument("RewardConfig: repetition_penalty must be <= 0");
  if (c.repetition_ngram_n < 1)
    throw std::invalid_argument("RewardConfig: repetition_ngram_n must be >= 1");
  if (c.repetition_min_repeats < 2)
    throw std::invalid_argument("RewardConfig: repetition_min_repeats must be >= 2");
}

inline void validate(const ReweightConfig& c) {
  // A >= 0 keeps weights positive, which is what makes reweighting
  // sign-preserving on advantages.
  if (!(c.A >= 0.0)) throw std::invalid_argument("ReweightConfig: A must be >= 0");
  if (!(c.B > c.A)) throw std::invalid_argument("ReweightConfig: B must be > A");
  if (!(c.rho0 >= 0.0 && c.rho0 <= 1.0))
    throw std::invalid_argument("ReweightConfig: rho0 must be in [0, 1]");
  if (!(c.k > 0.0)) throw std::invalid_argument("ReweightConfig: k must be > 0");
}

inline RewardConfig default_reward_config() { return RewardConfig{}; }
inline ReweightConfig default_reweight_config() { return ReweightConfig{}; }

inline std::pair<RewardConfig, ReweightConfig> default_configs() {
  return {default_reward_config(), default_reweight_config()};
}

/// Late-stage shape: length reward removed, looping outputs penalized.
inline RewardConfig stage3_reward_config() {
  RewardConfig c;
  c.length_reward_enabled = false;
  c.repetition_penalty_enabled = true;
  return c;
}

}  // namespace leadrl
