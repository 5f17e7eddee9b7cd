#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "leadrl/advantage.hpp"
#include "leadrl/metrics.hpp"
#include "leadrl/objective.hpp"
#include "leadrl/parallel.hpp"
#include "leadrl/reward.hpp"
#include "leadrl/toy_env.hpp"
#include "leadrl/types.hpp"
#include "leadrl/verifier.hpp"

namespace leadrl {

// Purpose tags folded into the root seed so the train, eval, filter and
// shuffle streams never collide even at equal step/task indices.
inline constexpr std::uint64_t kTrainSalt = 0x7261696eULL;
inline constexpr std::uint64_t kEvalSalt = 0x6576616cULL;
inline constexpr std::uint64_t kFilterSalt = 0x66696c74ULL;
inline constexpr std::uint64_t kShuffleSalt = 0x73687566ULL;

/// Dataset filter: keep questions at least this hard (static rating) and at
/// most this solvable (measured rollout accuracy under the current policy).
struct FilterRule {
  std::optional<double> min_difficulty;
  std::optional<double> max_rollout_accuracy;

  static FilterRule pass_through() { return {}; }
};

struct StageConfig {
  std::string name;
  std::int32_t steps = 0;
  RewardConfig reward_cfg;
  ReweightConfig reweight_cfg;
  ObjectiveConfig objective_cfg;
  std::int32_t batch_questions = 32;
  std::int32_t group_size = 8;
  double learning_rate = 0.05;
  double rollout_temperature = 1.0;
  FilterRule dataset_filter;
};

inline void validate(const StageConfig& cfg) {
  validate(cfg.reward_cfg);
  validate(cfg.reweight_cfg);
  validate(cfg.objective_cfg);
  if (cfg.steps < 0) throw std::invalid_argument("StageConfig: steps must be >= 0");
  if (cfg.batch_questions < 1) throw std::invalid_argument("StageConfig: batch_questions must be >= 1");
  if (cfg.group_size < 2) throw std::invalid_argument("StageConfig: group_size must be >= 2");
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("StageConfig: learning_rate must be > 0");
  if (cfg.rollout_temperature <= 0.0)
    throw std::invalid_argument("StageConfig: rollout_temperature must be > 0");
  if (cfg.dataset_filter.max_rollout_accuracy &&
      (*cfg.dataset_filter.max_rollout_accuracy < 0.0 ||
       *cfg.dataset_filter.max_rollout_accuracy > 1.0))
    throw std::invalid_argument("StageConfig: max_rollout_accuracy outside [0, 1]");
}

struct TrainOptions {
  std::int32_t eval_every = 5;  // in-stage step cadence; stage end always evaluated
  std::int32_t eval_k = 8;
  double eval_temperature = 0.6;
  std::int32_t probes_per_task = 8;  // rollouts per task when measuring filter accuracy
};

inline void validate(const TrainOptions& opt) {
  if (opt.eval_every < 1) throw std::invalid_argument("TrainOptions: eval_every must be >= 1");
  if (opt.eval_k < 1) throw std::invalid_argument("TrainOptions: eval_k must be >= 1");
  if (opt.eval_temperature <= 0.0)
    throw std::invalid_argument("TrainOptions: eval_temperature must be > 0");
  if (opt.probes_per_task < 1)
    throw std::invalid_argument("TrainOptions: probes_per_task must be >= 1");
}

struct StepRecord {
  std::int64_t step = 0;  // global step index, 1-based
  std::optional<double> pass1;   // present on eval steps
  std::optional<double> cons_k;  // present on eval steps
  double mean_len = 0.0;
  double mean_reward = 0.0;
  double mean_abs_adv = 0.0;
  bool degenerate = false;  // every group in the batch had zero reward variance
};

struct TrainingCurve {
  std::string stage_name;
  bool dataset_empty = false;  // stage skipped: the filter kept nothing
  std::vector<StepRecord> records;
};

struct TrainerState {
  PolicyParams policy;
  std::uint64_t root_seed = 0;
  std::int64_t global_step = 0;
  std::int64_t stage_ordinal = 0;  // stages completed or skipped so far
};

/// Fraction of `probes` sampled rollouts that solve the task.
inline double measure_rollout_accuracy(const PolicyParams& policy, const ToyTask& task,
                                       std::int32_t probes, std::uint64_t seed,
                                       double temperature) {
  if (probes < 1) throw std::invalid_argument("measure_rollout_accuracy: probes must be >= 1");
  std::vector<char> correct(static_cast<std::size_t>(probes), 0);
  parallel_for(probes, [&](std::int64_t j) {
    SampledRollout sr = sample_rollout(policy, task, split_seed(seed, static_cast<std::uint64_t>(j)),
                                       temperature);
    grade(task, policy.vocab_size, sr);
    correct[static_cast<std::size_t>(j)] = sr.record.is_correct ? 1 : 0;
  });
  std::int64_t hits = 0;
  for (char c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(probes);
}

/// Apply a FilterRule under the current policy. The difficulty bound is
/// inclusive (a rating equal to min_difficulty is kept), as is the accuracy
/// bound (a task solved at exactly the cap is kept).
inline std::vector<ToyTask> filter_dataset(std::span<const ToyTask> tasks, const FilterRule& rule,
                                           const PolicyParams& policy, std::int32_t probes_per_task,
                                           std::uint64_t seed, double temperature = 1.0) {
  std::vector<ToyTask> kept;
  kept.reserve(tasks.size());
  for (const ToyTask& t : tasks) {
    if (rule.min_difficulty && t.difficulty_rating < *rule.min_difficulty) continue;
    if (rule.max_rollout_accuracy) {
      const double acc = measure_rollout_accuracy(
          policy, t, probes_per_task,
          split_seed(seed ^ kFilterSalt, static_cast<std::uint64_t>(t.index)), temperature);
      if (acc > *rule.max_rollout_accuracy) continue;
    }
    kept.push_back(t);
  }
  return kept;
}

/// One policy-gradient step over a batch of questions: sample a group per
/// question from the current policy, grade, reward, normalize and reweight
/// advantages, then descend the surrogate loss. Sampling is seeded per
/// (step, task, rollout) so the step is reproducible for any worker count.
inline StepRecord train_step(TrainerState& state, std::span<const ToyTask> tasks,
                             std::span<const std::size_t> batch, const StageConfig& cfg) {
  validate(cfg);
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  ++state.global_step;

  const std::int64_t n_q = static_cast<std::int64_t>(batch.size());
  const std::int64_t n_slots = n_q * cfg.group_size;
  std::vector<SampledRollout> slots(static_cast<std::size_t>(n_slots));
  parallel_for(n_slots, [&](std::int64_t i) {
    const ToyTask& task = tasks[batch[static_cast<std::size_t>(i / cfg.group_size)]];
    const std::int64_t j = i % cfg.group_size;
    const std::uint64_t seed =
        split_seed(state.root_seed ^ kTrainSalt, static_cast<std::uint64_t>(state.global_step),
                   static_cast<std::uint64_t>(task.index), static_cast<std::uint64_t>(j));
    SampledRollout sr = sample_rollout(state.policy, task, seed, cfg.rollout_temperature);
    grade(task, state.policy.vocab_size, sr);
    if (cfg.reward_cfg.repetition_penalty_enabled)
      sr.record.has_repetition = detect_repetition(sr.tokens, cfg.reward_cfg.repetition_ngram_n,
                                                   cfg.reward_cfg.repetition_min_repeats);
    slots[static_cast<std::size_t>(i)] = std::move(sr);
  });

  StepRecord rec;
  rec.step = state.global_step;
  std::vector<ObjectiveGroup> groups(static_cast<std::size_t>(n_q));
  std::int64_t live_groups = 0;
  double len_sum = 0.0, reward_sum = 0.0, abs_adv_sum = 0.0;
  for (std::int64_t q = 0; q < n_q; ++q) {
    Group group;
    group.question_id = tasks[batch[static_cast<std::size_t>(q)]].id;
    for (std::int64_t j = 0; j < cfg.group_size; ++j) {
      const Rollout& r = slots[static_cast<std::size_t>(q * cfg.group_size + j)].record;
      if (const ValidationResult v = validate_rollout(r); !v.ok)
        throw std::logic_error("train_step: invalid rollout: " + v.violation);
      group.rollouts.push_back(r);
    }
    const std::vector<RewardOutcome> outcomes = score_group(group, cfg.reward_cfg);
    std::vector<double> rewards(outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) rewards[i] = outcomes[i].reward;
    const GroupStats st = group_stats(group, rewards);
    if (st.reward_sigma > 0.0) ++live_groups;
    const std::vector<double> raw = normalized_advantages(group, rewards, cfg.reward_cfg.epsilon);
    ObjectiveGroup& og = groups[static_cast<std::size_t>(q)];
    for (std::int64_t j = 0; j < cfg.group_size; ++j) {
      SampledRollout& sr = slots[static_cast<std::size_t>(q * cfg.group_size + j)];
      const AdvantageRecord adv =
          reweight(raw[static_cast<std::size_t>(j)], st.rho, cfg.reweight_cfg);
      ObjectiveRollout oro;
      oro.states = std::move(sr.states);
      oro.tokens = std::move(sr.tokens);
      oro.support = sr.support;
      oro.logprobs_old = std::move(*sr.record.token_logprobs_old);
      oro.advantage = adv.reweighted;
      og.rollouts.push_back(std::move(oro));
      len_sum += static_cast<double>(sr.record.token_length);
      reward_sum += rewards[static_cast<std::size_t>(j)];
      abs_adv_sum += std::abs(adv.reweighted);
    }
  }

  LossReport rep;
  const std::vector<double> grad = policy_gradient(state.policy, groups, cfg.objective_cfg, &rep);
  if (std::abs(rep.mean_ratio - 1.0) > 1e-9)
    throw std::logic_error("train_step: sampled rollouts are not on-policy");
  for (std::size_t i = 0; i < grad.size(); ++i)
    state.policy.logits[i] -= cfg.learning_rate * grad[i];

  const double n_rollouts = static_cast<double>(n_slots);
  rec.mean_len = len_sum / n_rollouts;
  rec.mean_reward = reward_sum / n_rollouts;
  rec.mean_abs_adv = abs_adv_sum / n_rollouts;
  rec.degenerate = live_groups == 0;
  return rec;
}

/// Evaluate a policy on a task list: k tempered samples per task, majority
/// vote with ties scored incorrect.
inline EvalReport evaluate_policy(const PolicyParams& policy, std::span<const ToyTask> tasks,
                                  std::int32_t k, double temperature, std::uint64_t seed) {
  if (tasks.empty()) throw std::invalid_argument("evaluate_policy: no tasks");
  if (k < 1) throw std::invalid_argument("evaluate_policy: k must be >= 1");
  const std::int64_t n_slots = static_cast<std::int64_t>(tasks.size()) * k;
  std::vector<SampledRollout> slots(static_cast<std::size_t>(n_slots));
  parallel_for(n_slots, [&](std::int64_t i) {
    const ToyTask& task = tasks[static_cast<std::size_t>(i / k)];
    const std::int64_t j = i % k;
    SampledRollout sr = sample_rollout(
        policy, task,
        split_seed(seed ^ kEvalSalt, static_cast<std::uint64_t>(task.index),
                   static_cast<std::uint64_t>(j)),
        temperature);
    grade(task, policy.vocab_size, sr);
    slots[static_cast<std::size_t>(i)] = std::move(sr);
  });
  std::vector<QuestionSamples> samples;
  samples.reserve(tasks.size());
  for (std::size_t q = 0; q < tasks.size(); ++q) {
    QuestionSamples qs;
    qs.question_id = tasks[q].id;
    qs.reference_answer = reference_answer(tasks[q]);
    for (std::int32_t j = 0; j < k; ++j) {
      const Rollout& r = slots[q * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)].record;
      qs.answers.push_back(r.extracted_answer);
      qs.lengths.push_back(r.token_length);
    }
    samples.push_back(std::move(qs));
  }
  return evaluate(samples, k, TiePolicy::Incorrect);
}

/// Run a staged curriculum. Each stage re-filters the dataset under the
/// then-current policy, shuffles it once with a stage-specific seed, and
/// rotates fixed-size batches through it. Eval metrics are recorded every
/// eval_every in-stage steps and at the stage end, against the validation
/// list (the full unfiltered task list when none is given).
inline std::vector<TrainingCurve> run_stages(TrainerState& state, std::span<const ToyTask> tasks,
                                             std::span<const StageConfig> stages,
                                             const TrainOptions& options,
                                             std::span<const ToyTask> validation = {}) {
  validate(options);
  if (tasks.empty()) throw std::invalid_argument("run_stages: no tasks");
  if (validation.empty()) validation = tasks;
  std::vector<TrainingCurve> curves;
  curves.reserve(stages.size());
  for (const StageConfig& stage : stages) {
    validate(stage);
    const std::uint64_t ordinal = static_cast<std::uint64_t>(state.stage_ordinal++);
    TrainingCurve curve;
    curve.stage_name = stage.name;
    const std::vector<ToyTask> filtered = filter_dataset(
        tasks, stage.dataset_filter, state.policy, options.probes_per_task,
        split_seed(state.root_seed, kFilterSalt, ordinal), stage.rollout_temperature);
    if (filtered.empty()) {
      curve.dataset_empty = true;
      curves.push_back(std::move(curve));
      continue;
    }
    // Deterministic Fisher-Yates shuffle of the question order.
    std::vector<std::size_t> order(filtered.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(split_seed(state.root_seed ^ kShuffleSalt, ordinal));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = std::min(
          i - 1, static_cast<std::size_t>(next_u01(rng) * static_cast<double>(i)));
      std::swap(order[i - 1], order[j]);
    }
    const std::size_t batch_size = std::min<std::size_t>(
        static_cast<std::size_t>(stage.batch_questions), order.size());
    std::size_t cursor = 0;
    for (std::int32_t step = 1; step <= stage.steps; ++step) {
      std::vector<std::size_t> batch(batch_size);
      for (std::size_t i = 0; i < batch_size; ++i) {
        batch[i] = order[cursor];
        cursor = (cursor + 1) % order.size();
      }
      StepRecord rec = train_step(state, filtered, batch, stage);
      if (step % options.eval_every == 0 || step == stage.steps) {
        const EvalReport ev = evaluate_policy(
            state.policy, validation, options.eval_k, options.eval_temperature,
            split_seed(state.root_seed, kEvalSalt, static_cast<std::uint64_t>(state.global_step)));
        rec.pass1 = ev.pass1;
        rec.cons_k = ev.cons_k;
      }
      curve.records.push_back(rec);
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

}  // namespace leadrl
