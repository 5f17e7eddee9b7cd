#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "leadrl/toy_env.hpp"

namespace leadrl {

/// How token terms are pooled into the scalar loss. TokenMean averages over
/// every token in the batch; SequenceMeanThenGroupMean first averages within
/// each rollout, then within each group, then across groups, so short and
/// long rollouts weigh equally.
enum class LossAggregation { TokenMean, SequenceMeanThenGroupMean };

struct ObjectiveConfig {
  double beta = 0.0;                   // KL penalty coefficient (0 disables)
  std::optional<double> clip_epsilon;  // PPO-style ratio clip; disabled when unset
  LossAggregation loss_aggregation = LossAggregation::TokenMean;
};

inline void validate(const ObjectiveConfig& cfg) {
  if (cfg.beta < 0.0) throw std::invalid_argument("ObjectiveConfig: beta must be >= 0");
  if (cfg.clip_epsilon && (*cfg.clip_epsilon <= 0.0 || *cfg.clip_epsilon >= 1.0))
    throw std::invalid_argument("ObjectiveConfig: clip_epsilon must lie in (0, 1)");
}

struct LossReport {
  double loss = 0.0;
  double mean_ratio = 0.0;  // token-mean importance ratio
  double mean_kl = 0.0;     // token-mean KL estimate, r - log r - 1
  double grad_norm = 0.0;   // filled by policy_gradient, 0 otherwise
};

inline double token_ratio(double logprob_new, double logprob_old) {
  const double r = std::exp(logprob_new - logprob_old);
  if (!std::isfinite(r)) throw std::invalid_argument("token_ratio: non-finite ratio");
  return r;
}

namespace detail {

// Per-token clipped objective and its derivative in the ratio. The clipped
// branch is active only when it is strictly smaller, where clamp is flat, so
// the derivative there is zero.
inline void token_objective(double r, double advantage, const ObjectiveConfig& cfg, double& obj,
                            double& dobj_dr) {
  const double unclipped = r * advantage;
  if (!cfg.clip_epsilon) {
    obj = unclipped;
    dobj_dr = advantage;
    return;
  }
  const double clipped = std::clamp(r, 1.0 - *cfg.clip_epsilon, 1.0 + *cfg.clip_epsilon) * advantage;
  if (unclipped <= clipped) {
    obj = unclipped;
    dobj_dr = advantage;
  } else {
    obj = clipped;
    dobj_dr = 0.0;
  }
}

inline double kl_estimate(double r) { return r - std::log(r) - 1.0; }

template <typename GroupRange, typename PerToken>
LossReport accumulate_loss(const GroupRange& groups, const ObjectiveConfig& cfg,
                           PerToken&& per_token) {
  validate(cfg);
  if (groups.empty()) throw std::invalid_argument("surrogate loss: no groups");
  std::int64_t total_tokens = 0;
  for (const auto& g : groups) {
    if (g.rollouts.empty()) throw std::invalid_argument("surrogate loss: empty group");
    for (const auto& ro : g.rollouts) {
      if (ro.logprobs_old.empty()) throw std::invalid_argument("surrogate loss: empty rollout");
      total_tokens += static_cast<std::int64_t>(ro.logprobs_old.size());
    }
  }
  LossReport rep;
  const double n_groups = static_cast<double>(groups.size());
  for (const auto& g : groups) {
    const double g_size = static_cast<double>(g.rollouts.size());
    for (const auto& ro : g.rollouts) {
      const std::size_t T = ro.logprobs_old.size();
      const double w = cfg.loss_aggregation == LossAggregation::TokenMean
                           ? 1.0 / static_cast<double>(total_tokens)
                           : 1.0 / (static_cast<double>(T) * g_size * n_groups);
      for (std::size_t t = 0; t < T; ++t) {
        const double lp_new = per_token(g, ro, t, w);
        const double r = token_ratio(lp_new, ro.logprobs_old[t]);
        double obj = 0.0, dobj_dr = 0.0;
        token_objective(r, ro.advantage, cfg, obj, dobj_dr);
        const double kl = kl_estimate(r);
        rep.loss -= w * (obj - cfg.beta * kl);
        rep.mean_ratio += r;
        rep.mean_kl += kl;
      }
    }
  }
  rep.mean_ratio /= static_cast<double>(total_tokens);
  rep.mean_kl /= static_cast<double>(total_tokens);
  return rep;
}

}  // namespace detail

/// Precomputed-logprob form: enough to score a batch somebody else sampled.
struct ScoredRollout {
  std::vector<double> logprobs_new;
  std::vector<double> logprobs_old;
  double advantage = 0.0;
};

struct ScoredGroup {
  std::vector<ScoredRollout> rollouts;
};

/// Group-relative surrogate loss: the negated mean of
/// ratio * advantage - beta * KL, with an optional PPO clip on the ratio term.
inline LossReport surrogate_loss(std::span<const ScoredGroup> groups,
                                 const ObjectiveConfig& cfg) {
  return detail::accumulate_loss(groups, cfg, [](const ScoredGroup&, const ScoredRollout& ro,
                                                 std::size_t t, double) {
    if (ro.logprobs_new.size() != ro.logprobs_old.size())
      throw std::invalid_argument("surrogate_loss: logprob track length mismatch");
    return ro.logprobs_new[t];
  });
}

/// Policy-attached form: the new logprobs are recomputed from the live policy
/// so the loss and its gradient stay consistent as parameters move.
struct ObjectiveRollout {
  std::vector<std::int32_t> states;
  std::vector<std::int32_t> tokens;
  std::vector<std::int32_t> support;
  std::vector<double> logprobs_old;
  double advantage = 0.0;
};

struct ObjectiveGroup {
  std::vector<ObjectiveRollout> rollouts;
};

namespace detail {

inline void check_objective_rollout(const ObjectiveRollout& ro) {
  if (ro.states.size() != ro.tokens.size() || ro.tokens.size() != ro.logprobs_old.size())
    throw std::invalid_argument("objective rollout: track length mismatch");
}

inline std::size_t support_index(const ObjectiveRollout& ro, std::int32_t token) {
  const auto it = std::find(ro.support.begin(), ro.support.end(), token);
  if (it == ro.support.end())
    throw std::invalid_argument("objective rollout: token not in support");
  return static_cast<std::size_t>(it - ro.support.begin());
}

}  // namespace detail

inline LossReport loss_at(const PolicyParams& policy, std::span<const ObjectiveGroup> groups,
                          const ObjectiveConfig& cfg) {
  return detail::accumulate_loss(
      groups, cfg, [&](const ObjectiveGroup&, const ObjectiveRollout& ro, std::size_t t, double) {
        detail::check_objective_rollout(ro);
        const std::vector<double> lp = support_logprobs(policy, ro.states[t], ro.support, 1.0);
        return lp[detail::support_index(ro, ro.tokens[t])];
      });
}

/// Analytic gradient of loss_at with respect to every policy logit, plus the
/// matching loss report. For a softmax row, d lp(a) / d logit(b) is
/// (1[b == a] - p_b) over the support and 0 off it.
inline std::vector<double> policy_gradient(const PolicyParams& policy,
                                           std::span<const ObjectiveGroup> groups,
                                           const ObjectiveConfig& cfg, LossReport* report = nullptr) {
  std::vector<double> grad(policy.logits.size(), 0.0);
  LossReport rep = detail::accumulate_loss(
      groups, cfg, [&](const ObjectiveGroup&, const ObjectiveRollout& ro, std::size_t t, double w) {
        detail::check_objective_rollout(ro);
        const std::vector<double> lp = support_logprobs(policy, ro.states[t], ro.support, 1.0);
        const std::size_t a = detail::support_index(ro, ro.tokens[t]);
        const double r = token_ratio(lp[a], ro.logprobs_old[t]);
        double obj = 0.0, dobj_dr = 0.0;
        detail::token_objective(r, ro.advantage, cfg, obj, dobj_dr);
        // d(term)/d lp_new with term = obj - beta * (r - log r - 1).
        const double coeff = dobj_dr * r - cfg.beta * (r - 1.0);
        const std::size_t row = static_cast<std::size_t>(ro.states[t]) *
                                static_cast<std::size_t>(policy.row_width());
        for (std::size_t i = 0; i < ro.support.size(); ++i) {
          const double indicator = i == a ? 1.0 : 0.0;
          grad[row + static_cast<std::size_t>(ro.support[i])] -=
              w * coeff * (indicator - std::exp(lp[i]));
        }
        return lp[a];
      });
  double ss = 0.0;
  for (double g : grad) ss += g * g;
  rep.grad_norm = std::sqrt(ss);
  if (report) *report = rep;
  return grad;
}

}  // namespace leadrl
