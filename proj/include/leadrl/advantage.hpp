#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "leadrl/types.hpp"

namespace leadrl {

struct GroupStats {
  double reward_mu = 0.0;
  double reward_sigma = 0.0;  // population standard deviation
  double rho = 0.0;           // fraction of correct rollouts
  std::int64_t group_size = 0;
};

struct AdvantageRecord {
  double raw = 0.0;         // (r - mu) / (sigma + eps)
  double reweighted = 0.0;  // raw * weight_applied
  double weight_applied = 1.0;
};

inline double correctness_ratio(const Group& group) {
  if (group.rollouts.empty()) throw std::invalid_argument("correctness_ratio: empty group");
  std::int64_t correct = 0;
  for (const Rollout& r : group.rollouts) correct += r.is_correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(group.rollouts.size());
}

/// Difficulty weight: a reversed logistic in the group's correctness ratio.
/// Hard questions (low rho) approach B, easy ones (high rho) approach A, and
/// the midpoint rho0 maps to (A + B) / 2.
inline double logistic_weight(double rho, const ReweightConfig& cfg) {
  validate(cfg);
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("logistic_weight: rho outside [0, 1]");
  return cfg.A + (cfg.B - cfg.A) / (1.0 + std::exp(cfg.k * (rho - cfg.rho0)));
}

inline GroupStats group_stats(const Group& group, const std::vector<double>& rewards) {
  if (group.rollouts.empty()) throw std::invalid_argument("group_stats: empty group");
  if (rewards.size() != group.rollouts.size())
    throw std::invalid_argument("group_stats: rewards size mismatch");
  GroupStats st;
  st.group_size = static_cast<std::int64_t>(rewards.size());
  double sum = 0.0;
  for (double r : rewards) sum += r;
  st.reward_mu = sum / static_cast<double>(st.group_size);
  double ss = 0.0;
  for (double r : rewards) {
    const double d = r - st.reward_mu;
    ss += d * d;
  }
  st.reward_sigma = std::sqrt(ss / static_cast<double>(st.group_size));
  st.rho = correctness_ratio(group);
  return st;
}

/// Group-normalized advantages: (r_i - mu) / (sigma + eps). A zero-variance
/// group yields all-zero advantages (the group carries no learning signal).
inline std::vector<double> normalized_advantages(const Group& group,
                                                 const std::vector<double>& rewards,
                                                 double epsilon = 1e-6) {
  if (epsilon <= 0.0) throw std::invalid_argument("normalized_advantages: epsilon must be > 0");
  const GroupStats st = group_stats(group, rewards);
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i)
    adv[i] = (rewards[i] - st.reward_mu) / (st.reward_sigma + epsilon);
  return adv;
}

/// Asymmetric difficulty reweighting: positive advantages scale by w(rho) --
/// amplified on hard questions, damped on easy ones -- while non-positive
/// advantages scale by w(1 - rho), the mirror image, so mistakes on easy
/// questions are punished harder than mistakes on hard ones.
inline AdvantageRecord reweight(double raw_advantage, double rho, const ReweightConfig& cfg) {
  AdvantageRecord rec;
  rec.raw = raw_advantage;
  if (!cfg.enabled) {
    rec.weight_applied = 1.0;
    rec.reweighted = raw_advantage;
    return rec;
  }
  rec.weight_applied =
      raw_advantage > 0.0 ? logistic_weight(rho, cfg) : logistic_weight(1.0 - rho, cfg);
  rec.reweighted = raw_advantage * rec.weight_applied;
  return rec;
}

inline std::vector<AdvantageRecord> reweight_group(const std::vector<double>& raw, double rho,
                                                   const ReweightConfig& cfg) {
  std::vector<AdvantageRecord> out;
  out.reserve(raw.size());
  for (double a : raw) out.push_back(reweight(a, rho, cfg));
  return out;
}

}  // namespace leadrl
