#include "leadrl/toy_env.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

namespace leadrl {
namespace {

ToyTask make_task(std::vector<std::int32_t> pattern, std::int32_t distractors,
                  std::int32_t max_length = 32, std::int32_t index = 0) {
  ToyTask t;
  t.id = "task";
  t.index = index;
  t.target_pattern = std::move(pattern);
  t.distractor_count = distractors;
  t.difficulty_rating = 1.25 * static_cast<double>(t.target_pattern.size());
  t.max_length = max_length;
  return t;
}

TEST(TaskState, BlockLayout) {
  const ToyTask t = make_task({3, 1, 2}, 5, 32, /*index=*/2);
  EXPECT_EQ(states_per_task(12), 13);
  EXPECT_EQ(task_state(t, 12), 26);               // initial state of block 2
  EXPECT_EQ(task_state(t, 12, 5), 32);            // after emitting token 5
  EXPECT_EQ(task_state(t, 12, 0), 27);
  EXPECT_EQ(task_state(t, 12, 11), 38);
  EXPECT_THROW(task_state(t, 12, 12), std::invalid_argument);  // stop is not a state
  EXPECT_THROW(task_state(t, 12, -1), std::invalid_argument);
}

TEST(TaskSupport, PatternPlusSmallestDistractorsPlusStop) {
  const ToyTask t = make_task({3, 1, 2}, 5);
  const std::vector<std::int32_t> expected = {0, 1, 2, 3, 4, 5, 6, 7, 12};
  EXPECT_EQ(task_support(t, 12), expected);
}

TEST(TaskSupport, DistractorsSkipPatternTokens) {
  const ToyTask t = make_task({0, 2}, 2);
  const std::vector<std::int32_t> expected = {0, 1, 2, 3, 5};
  EXPECT_EQ(task_support(t, 5), expected);
}

TEST(TaskSupport, Validation) {
  EXPECT_THROW(task_support(make_task({1, 1}, 0), 12), std::invalid_argument);
  EXPECT_THROW(task_support(make_task({12}, 0), 12), std::invalid_argument);
  EXPECT_THROW(task_support(make_task({-1}, 0), 12), std::invalid_argument);
  EXPECT_THROW(task_support(make_task({0}, 12), 12), std::invalid_argument);  // only 11 left
  EXPECT_NO_THROW(task_support(make_task({0}, 11), 12));
}

TEST(SplitSeed, DistinctStreams) {
  EXPECT_EQ(split_seed(1, 2, 3, 4), split_seed(1, 2, 3, 4));
  EXPECT_NE(split_seed(1, 2, 3, 4), split_seed(1, 2, 3, 5));
  EXPECT_NE(split_seed(1, 2, 3, 4), split_seed(2, 2, 3, 4));
  EXPECT_NE(split_seed(0, 0), split_seed(0, 1));
}

TEST(SupportLogprobs, UniformPolicyIsFlat) {
  const PolicyParams policy = PolicyParams::uniform(12, 1);
  const ToyTask t = make_task({3, 1, 2}, 5);
  const std::vector<std::int32_t> support = task_support(t, 12);
  const std::vector<double> lp = support_logprobs(policy, 0, support);
  for (double v : lp) EXPECT_DOUBLE_EQ(v, -std::log(9.0));
}

TEST(SupportLogprobs, RowsNormalizeUnderAnyLogits) {
  PolicyParams policy = PolicyParams::uniform(6, 2);
  std::mt19937_64 rng(99);
  for (double& l : policy.logits) l = 4.0 * next_u01(rng) - 2.0;
  const ToyTask t = make_task({4, 0}, 3, 32, 1);
  const std::vector<std::int32_t> support = task_support(t, 6);
  for (std::int32_t state = 7; state < 14; ++state) {
    double mass = 0.0;
    for (double p : support_probs(policy, state, support)) mass += p;
    EXPECT_NEAR(mass, 1.0, 1e-12);
  }
}

TEST(SupportLogprobs, TemperatureScalesLogitGaps) {
  PolicyParams policy = PolicyParams::uniform(3, 1);
  policy.logit(0, 0) = 1.0;
  policy.logit(0, 1) = 0.0;
  const std::vector<std::int32_t> support = {0, 1};
  const std::vector<double> cold = support_logprobs(policy, 0, support, 0.5);
  const std::vector<double> base = support_logprobs(policy, 0, support, 1.0);
  const std::vector<double> hot = support_logprobs(policy, 0, support, 2.0);
  // Log-probability gap between the two actions is (logit gap) / T.
  EXPECT_NEAR(cold[0] - cold[1], 2.0, 1e-12);
  EXPECT_NEAR(base[0] - base[1], 1.0, 1e-12);
  EXPECT_NEAR(hot[0] - hot[1], 0.5, 1e-12);
}

TEST(SupportLogprobs, Validation) {
  const PolicyParams policy = PolicyParams::uniform(3, 1);
  const std::vector<std::int32_t> support = {0, 3};
  EXPECT_THROW(support_logprobs(policy, 0, support, 0.0), std::invalid_argument);
  EXPECT_THROW(support_logprobs(policy, -1, support), std::invalid_argument);
  EXPECT_THROW(support_logprobs(policy, 4, support), std::invalid_argument);
  EXPECT_THROW(support_logprobs(policy, 0, std::vector<std::int32_t>{}), std::invalid_argument);
}

TEST(RenderTokens, DashSeparated) {
  EXPECT_EQ(render_tokens(std::vector<std::int32_t>{3, 1, 2}), "3-1-2");
  EXPECT_EQ(render_tokens(std::vector<std::int32_t>{7}), "7");
  EXPECT_EQ(render_tokens(std::vector<std::int32_t>{}), "");
  EXPECT_EQ(reference_answer(make_task({10, 0, 11}, 0)), "10-0-11");
}

TEST(SampleRollout, DeterministicPerSeed) {
  const PolicyParams policy = PolicyParams::uniform(12, 1);
  const ToyTask t = make_task({3, 1, 2}, 5, 16);
  const SampledRollout a = sample_rollout(policy, t, 42, 0.6);
  const SampledRollout b = sample_rollout(policy, t, 42, 0.6);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(*a.record.token_logprobs_new, *b.record.token_logprobs_new);
  EXPECT_EQ(a.sampling_logprobs, b.sampling_logprobs);
  const SampledRollout c = sample_rollout(policy, t, 43, 0.6);
  EXPECT_NE(a.tokens, c.tokens);
}

TEST(SampleRollout, RecordsBothTemperatureTracks) {
  PolicyParams policy = PolicyParams::uniform(6, 1);
  std::mt19937_64 rng(5);
  for (double& l : policy.logits) l = 2.0 * next_u01(rng) - 1.0;
  const ToyTask t = make_task({2, 4}, 2, 10);
  const SampledRollout sr = sample_rollout(policy, t, 17, 0.6);
  ASSERT_FALSE(sr.tokens.empty());
  for (std::size_t i = 0; i < sr.tokens.size(); ++i) {
    const std::vector<double> base = support_logprobs(policy, sr.states[i], sr.support, 1.0);
    const std::vector<double> samp = support_logprobs(policy, sr.states[i], sr.support, 0.6);
    std::size_t a = 0;
    while (sr.support[a] != sr.tokens[i]) ++a;
    EXPECT_EQ(sr.record.token_logprobs_new->at(i), base[a]);
    EXPECT_EQ(sr.record.token_logprobs_old->at(i), base[a]);
    EXPECT_EQ(sr.sampling_logprobs[i], samp[a]);
  }
  EXPECT_EQ(sr.record.token_length, static_cast<std::int64_t>(sr.tokens.size()));
}

TEST(SampleRollout, FourActionUniformLogprobs) {
  const PolicyParams policy = PolicyParams::uniform(3, 1);
  const ToyTask t = make_task({1}, 2, 8);  // support {0, 1, 2, stop}
  const SampledRollout sr = sample_rollout(policy, t, 9);
  ASSERT_EQ(sr.support.size(), 4u);
  for (double lp : *sr.record.token_logprobs_new) EXPECT_DOUBLE_EQ(lp, -std::log(4.0));
}

TEST(SampleRollout, AllMassOnStopEndsImmediately) {
  PolicyParams policy = PolicyParams::uniform(12, 1);
  ToyTask t = make_task({3, 1, 2}, 5, 32);
  for (std::int32_t s = 0; s < policy.n_states; ++s) policy.logit(s, policy.stop_token()) = 50.0;
  SampledRollout sr = sample_rollout(policy, t, 1234);
  ASSERT_EQ(sr.tokens.size(), 1u);
  EXPECT_EQ(sr.tokens[0], policy.stop_token());
  EXPECT_EQ(sr.record.token_length, 1);  // the stop token itself is counted
  EXPECT_TRUE(content_tokens(sr, 12).empty());
  grade(t, 12, sr);
  EXPECT_FALSE(sr.record.extracted_answer.has_value());
  EXPECT_FALSE(sr.record.is_correct);
}

TEST(SampleRollout, LengthCapAppliesWhenStopNeverSampled) {
  PolicyParams policy = PolicyParams::uniform(4, 1);
  for (std::int32_t s = 0; s < policy.n_states; ++s) policy.logit(s, policy.stop_token()) = -60.0;
  const ToyTask t = make_task({0, 1}, 2, 6);
  const SampledRollout sr = sample_rollout(policy, t, 3);
  EXPECT_EQ(sr.tokens.size(), 6u);
  EXPECT_EQ(content_tokens(sr, 4).size(), 6u);  // no trailing stop to strip
}

SampledRollout rollout_with_tokens(std::vector<std::int32_t> tokens) {
  SampledRollout sr;
  sr.tokens = std::move(tokens);
  sr.record.token_length = static_cast<std::int64_t>(sr.tokens.size());
  return sr;
}

TEST(Grade, ContainmentAnywhereCounts) {
  const ToyTask t = make_task({3, 1, 2}, 5);
  for (const std::vector<std::int32_t>& toks :
       {std::vector<std::int32_t>{3, 1, 2, 12}, std::vector<std::int32_t>{7, 3, 1, 2, 12},
        std::vector<std::int32_t>{3, 1, 2, 7, 7, 12}, std::vector<std::int32_t>{0, 3, 1, 2, 0, 12}}) {
    SampledRollout sr = rollout_with_tokens(toks);
    grade(t, 12, sr);
    EXPECT_TRUE(sr.record.is_correct) << render_tokens(toks);
    EXPECT_EQ(sr.record.extracted_answer, "3-1-2");
  }
}

TEST(Grade, FinalWindowStandsInWhenPatternAbsent) {
  const ToyTask t = make_task({3, 1, 2}, 5);
  SampledRollout sr = rollout_with_tokens({1, 2, 3, 12});  // right tokens, wrong order
  grade(t, 12, sr);
  EXPECT_FALSE(sr.record.is_correct);
  EXPECT_EQ(sr.record.extracted_answer, "1-2-3");
}

TEST(Grade, TooShortContentExtractsNothing) {
  const ToyTask t = make_task({3, 1, 2}, 5);
  SampledRollout sr = rollout_with_tokens({3, 1, 12});
  grade(t, 12, sr);
  EXPECT_FALSE(sr.record.is_correct);
  EXPECT_FALSE(sr.record.extracted_answer.has_value());
}

TEST(Grade, ScatteredPatternIsNotContainment) {
  const ToyTask t = make_task({3, 1, 2}, 5);
  SampledRollout sr = rollout_with_tokens({3, 0, 1, 0, 2, 12});
  grade(t, 12, sr);
  EXPECT_FALSE(sr.record.is_correct);
  EXPECT_EQ(sr.record.extracted_answer, "1-0-2");
}

bool pattern_contained(const ToyTask& task, const std::vector<std::int32_t>& content) {
  return std::search(content.begin(), content.end(), task.target_pattern.begin(),
                     task.target_pattern.end()) != content.end() ||
         task.target_pattern.empty();
}

void enumerate_rollouts(const PolicyParams& policy, const ToyTask& task,
                        const std::vector<std::int32_t>& support,
                        std::optional<std::int32_t> last, std::int32_t depth, double prob,
                        std::vector<std::int32_t>& content, double& total, double& solved) {
  if (depth == task.max_length) {
    total += prob;
    if (pattern_contained(task, content)) solved += prob;
    return;
  }
  const std::int32_t state = task_state(task, policy.vocab_size, last);
  const std::vector<double> p = support_probs(policy, state, support);
  for (std::size_t i = 0; i < support.size(); ++i) {
    const double q = prob * p[i];
    if (support[i] == policy.vocab_size) {
      total += q;
      if (pattern_contained(task, content)) solved += q;
    } else {
      content.push_back(support[i]);
      enumerate_rollouts(policy, task, support, support[i], depth + 1, q, content, total, solved);
      content.pop_back();
    }
  }
}

TEST(Enumeration, TotalProbabilityMassIsOne) {
  PolicyParams policy = PolicyParams::uniform(3, 1);
  std::mt19937_64 rng(8);
  for (double& l : policy.logits) l = 2.0 * next_u01(rng) - 1.0;
  const ToyTask t = make_task({1}, 2, 4);
  const std::vector<std::int32_t> support = task_support(t, 3);
  std::vector<std::int32_t> content;
  double total = 0.0, solved = 0.0;
  enumerate_rollouts(policy, t, support, std::nullopt, 0, 1.0, content, total, solved);
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_GT(solved, 0.0);
  EXPECT_LT(solved, 1.0);
}

TEST(Enumeration, SampledRolloutProbabilityMatchesModel) {
  PolicyParams policy = PolicyParams::uniform(3, 1);
  std::mt19937_64 rng(21);
  for (double& l : policy.logits) l = 2.0 * next_u01(rng) - 1.0;
  const ToyTask t = make_task({2}, 2, 4);
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const SampledRollout sr = sample_rollout(policy, t, seed, 0.8);
    double model_lp = 0.0;
    std::optional<std::int32_t> last;
    for (std::size_t i = 0; i < sr.tokens.size(); ++i) {
      const std::int32_t state = task_state(t, 3, last);
      const std::vector<double> lp = support_logprobs(policy, state, sr.support, 0.8);
      std::size_t a = 0;
      while (sr.support[a] != sr.tokens[i]) ++a;
      model_lp += lp[a];
      if (sr.tokens[i] != policy.stop_token()) last = sr.tokens[i];
    }
    double recorded = 0.0;
    for (double v : sr.sampling_logprobs) recorded += v;
    EXPECT_DOUBLE_EQ(recorded, model_lp);
  }
}

TEST(Enumeration, ForcedPrefixSolveProbabilityIsExact) {
  // Pattern length equals max_length, so the only solving trajectory emits
  // the pattern verbatim with no room for a stop: probability (1/4)^3 under
  // a uniform policy over a 4-action support.
  const PolicyParams policy = PolicyParams::uniform(4, 1);
  const ToyTask t = make_task({0, 1, 2}, 0, 3);
  const std::vector<std::int32_t> support = task_support(t, 4);
  ASSERT_EQ(support.size(), 4u);
  std::vector<std::int32_t> content;
  double total = 0.0, solved = 0.0;
  enumerate_rollouts(policy, t, support, std::nullopt, 0, 1.0, content, total, solved);
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_NEAR(solved, 1.0 / 64.0, 1e-12);
}

TEST(MonteCarlo, LongerPatternsAreHarder) {
  const PolicyParams policy = PolicyParams::uniform(12, 2);
  const ToyTask easy = make_task({5}, 7, 32, 0);
  ToyTask hard = make_task({5, 8, 0}, 5, 32, 1);
  ASSERT_EQ(task_support(easy, 12).size(), task_support(hard, 12).size());
  int easy_hits = 0, hard_hits = 0;
  for (std::uint64_t j = 0; j < 2000; ++j) {
    SampledRollout a = sample_rollout(policy, easy, split_seed(77, 0, j));
    grade(easy, 12, a);
    easy_hits += a.record.is_correct ? 1 : 0;
    SampledRollout b = sample_rollout(policy, hard, split_seed(77, 1, j));
    grade(hard, 12, b);
    hard_hits += b.record.is_correct ? 1 : 0;
  }
  EXPECT_GT(easy_hits, hard_hits);
  EXPECT_GT(hard_hits, 0);  // hard but not impossible under the length-32 budget
}

TEST(MakeBenchmark, ShapeAndDifficultySpread) {
  const BenchmarkSpread spread;
  const std::vector<ToyTask> tasks = make_benchmark(12, spread, 7);
  ASSERT_EQ(tasks.size(), 12u);
  EXPECT_EQ(tasks[0].id, "toy-0000");
  EXPECT_EQ(tasks[11].id, "toy-0011");
  for (std::int32_t i = 0; i < 12; ++i) {
    const ToyTask& t = tasks[static_cast<std::size_t>(i)];
    const std::int32_t len = 1 + i % 5;
    EXPECT_EQ(t.index, i);
    ASSERT_EQ(static_cast<std::int32_t>(t.target_pattern.size()), len);
    EXPECT_EQ(t.distractor_count, 8 - len);
    EXPECT_DOUBLE_EQ(t.difficulty_rating, 1.25 * len);
    EXPECT_EQ(t.max_length, 32);
    // Pattern tokens are distinct and in-vocabulary; support is well formed.
    const std::vector<std::int32_t> support = task_support(t, spread.vocab_size);
    EXPECT_EQ(support.size(), 9u);
    for (std::int32_t tok : t.target_pattern) {
      EXPECT_GE(tok, 0);
      EXPECT_LT(tok, spread.vocab_size);
    }
  }
}

TEST(MakeBenchmark, DeterministicInSeed) {
  const BenchmarkSpread spread;
  const std::vector<ToyTask> a = make_benchmark(10, spread, 5);
  const std::vector<ToyTask> b = make_benchmark(10, spread, 5);
  const std::vector<ToyTask> c = make_benchmark(10, spread, 6);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].target_pattern, b[i].target_pattern);
    any_diff = any_diff || a[i].target_pattern != c[i].target_pattern;
  }
  EXPECT_TRUE(any_diff);
}

TEST(MakeBenchmark, Validation) {
  BenchmarkSpread spread;
  EXPECT_THROW(make_benchmark(0, spread, 1), std::invalid_argument);
  spread.max_pattern_length = 9;  // > support_size
  EXPECT_THROW(make_benchmark(4, spread, 1), std::invalid_argument);
  spread = BenchmarkSpread{};
  spread.support_size = 13;  // > vocab_size
  EXPECT_THROW(make_benchmark(4, spread, 1), std::invalid_argument);
  spread = BenchmarkSpread{};
  spread.max_length = 3;  // < max_pattern_length
  EXPECT_THROW(make_benchmark(4, spread, 1), std::invalid_argument);
}

}  // namespace
}  // namespace leadrl
