#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "leadrl/types.hpp"

namespace leadrl {

/// Length statistics over the *correct* rollouts of one group.
struct LengthStats {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation
  std::int64_t n_correct = 0;

  bool defined() const { return n_correct > 0; }
};

struct RewardOutcome {
  double reward = 0.0;
  std::optional<double> z;  // set only for correct rollouts
  bool penalized_for_repetition = false;
};

inline LengthStats length_stats(const Group& group) {
  if (group.rollouts.empty()) throw std::invalid_argument("length_stats: empty group");
  LengthStats st;
  double sum = 0.0;
  for (const Rollout& r : group.rollouts) {
    if (!r.is_correct) continue;
    ++st.n_correct;
    sum += static_cast<double>(r.token_length);
  }
  if (st.n_correct == 0) return st;
  st.mu = sum / static_cast<double>(st.n_correct);
  double ss = 0.0;
  for (const Rollout& r : group.rollouts) {
    if (!r.is_correct) continue;
    const double d = static_cast<double>(r.token_length) - st.mu;
    ss += d * d;
  }
  st.sigma = std::sqrt(ss / static_cast<double>(st.n_correct));
  return st;
}

inline double z_score(std::int64_t token_length, const LengthStats& stats, double epsilon) {
  if (!stats.defined()) throw std::logic_error("z_score: no correct rollouts in group");
  return (static_cast<double>(token_length) - stats.mu) / (stats.sigma + epsilon);
}

/// Length-dependent accuracy reward: exp(-alpha * z) for correct rollouts so
/// shorter-than-average solutions earn > 1 and longer ones < 1; incorrect
/// rollouts take a fixed penalty. An optional repetition penalty overrides
/// either branch (a wrong *and* repetitive rollout keeps whichever penalty is
/// more negative).
inline RewardOutcome reward(const Rollout& rollout, const LengthStats& stats,
                            const RewardConfig& cfg) {
  validate(cfg);
  RewardOutcome out;
  if (rollout.is_correct) {
    out.z = z_score(rollout.token_length, stats, cfg.epsilon);
    out.reward = cfg.length_reward_enabled ? std::exp(-cfg.alpha * *out.z) : 1.0;
  } else {
    out.reward = cfg.incorrect_penalty;
  }
  if (cfg.repetition_penalty_enabled && rollout.has_repetition) {
    out.penalized_for_repetition = true;
    out.reward = rollout.is_correct ? cfg.repetition_penalty
                                    : std::min(cfg.repetition_penalty, cfg.incorrect_penalty);
  }
  return out;
}

inline std::vector<RewardOutcome> score_group(const Group& group, const RewardConfig& cfg) {
  const LengthStats stats = length_stats(group);
  std::vector<RewardOutcome> out;
  out.reserve(group.rollouts.size());
  for (const Rollout& r : group.rollouts) out.push_back(reward(r, stats, cfg));
  return out;
}

/// Expected reward of a question solved with probability p when incorrect
/// answers cost -1 and correct ones pay ~m (m = 1 without the length shaping):
/// E[R] = p*m - (1-p), i.e. 2p - 1 at m = 1.
inline double expected_reward(double p, double m = 1.0) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("expected_reward: p outside [0, 1]");
  return p * m - (1.0 - p);
}

}  // namespace leadrl
