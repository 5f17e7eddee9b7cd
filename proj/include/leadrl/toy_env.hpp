#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "leadrl/types.hpp"
#include "leadrl/verifier.hpp"

namespace leadrl {

/// Synthetic "recite the pattern" task: the policy must emit the target token
/// pattern contiguously, then stop. Longer patterns are harder, which gives a
/// real difficulty axis for filtering and reweighting experiments.
struct ToyTask {
  std::string id;
  std::int32_t index = 0;  // dense index into the policy's per-task blocks
  std::vector<std::int32_t> target_pattern;
  std::int32_t distractor_count = 0;
  double difficulty_rating = 0.0;
  std::int32_t max_length = 32;
};

/// Tabular softmax policy. Each task owns a block of (1 + vocab_size) states:
/// one initial state plus one state per possible last-emitted token. Row
/// `state` holds vocab_size + 1 logits; action vocab_size is the stop token.
struct PolicyParams {
  std::int32_t vocab_size = 12;
  std::int32_t n_states = 0;
  std::vector<double> logits;  // row-major, width vocab_size + 1

  std::int32_t stop_token() const { return vocab_size; }
  std::int32_t row_width() const { return vocab_size + 1; }

  double& logit(std::int32_t state, std::int32_t token) {
    return logits[static_cast<std::size_t>(state) * row_width() + token];
  }
  double logit(std::int32_t state, std::int32_t token) const {
    return logits[static_cast<std::size_t>(state) * row_width() + token];
  }

  static PolicyParams uniform(std::int32_t vocab_size, std::int32_t n_tasks) {
    if (vocab_size < 1 || n_tasks < 1)
      throw std::invalid_argument("PolicyParams::uniform: vocab_size and n_tasks must be >= 1");
    PolicyParams p;
    p.vocab_size = vocab_size;
    p.n_states = n_tasks * (1 + vocab_size);
    p.logits.assign(static_cast<std::size_t>(p.n_states) * p.row_width(), 0.0);
    return p;
  }
};

inline std::int32_t states_per_task(std::int32_t vocab_size) { return 1 + vocab_size; }

/// State id for a task given the last emitted token (or nothing yet).
inline std::int32_t task_state(const ToyTask& task, std::int32_t vocab_size,
                               std::optional<std::int32_t> last_token = std::nullopt) {
  const std::int32_t base = task.index * states_per_task(vocab_size);
  if (!last_token) return base;
  if (*last_token < 0 || *last_token >= vocab_size)
    throw std::invalid_argument("task_state: last_token outside vocabulary");
  return base + 1 + *last_token;
}

/// Action support of a task: its pattern tokens, the smallest non-pattern
/// token ids as distractors, and the stop token, ascending.
inline std::vector<std::int32_t> task_support(const ToyTask& task, std::int32_t vocab_size) {
  std::vector<std::int32_t> support = task.target_pattern;
  std::sort(support.begin(), support.end());
  if (std::adjacent_find(support.begin(), support.end()) != support.end())
    throw std::invalid_argument("task_support: pattern tokens must be distinct");
  if (!support.empty() && (support.front() < 0 || support.back() >= vocab_size))
    throw std::invalid_argument("task_support: pattern token outside vocabulary");
  std::int32_t needed = task.distractor_count;
  for (std::int32_t t = 0; t < vocab_size && needed > 0; ++t) {
    if (std::find(task.target_pattern.begin(), task.target_pattern.end(), t) ==
        task.target_pattern.end()) {
      support.push_back(t);
      --needed;
    }
  }
  if (needed > 0) throw std::invalid_argument("task_support: vocabulary too small for distractors");
  support.push_back(vocab_size);  // stop
  std::sort(support.begin(), support.end());
  return support;
}

/// Deterministic seed derivation (splitmix64 over the root and three indices),
/// so every (task, rollout) pair gets an independent stream regardless of
/// sampling order or worker count.
inline std::uint64_t split_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  std::uint64_t s = mix(root);
  s = mix(s ^ mix(a + 0x6a09e667f3bcc909ULL));
  s = mix(s ^ mix(b + 0xbb67ae8584caa73bULL));
  s = mix(s ^ mix(c + 0x3c6ef372fe94f82bULL));
  return s;
}

inline double next_u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Log-probabilities of the support actions under a tempered softmax of the
/// row's logits, masked to the support.
inline std::vector<double> support_logprobs(const PolicyParams& policy, std::int32_t state,
                                            std::span<const std::int32_t> support,
                                            double temperature = 1.0) {
  if (temperature <= 0.0) throw std::invalid_argument("support_logprobs: temperature must be > 0");
  if (state < 0 || state >= policy.n_states)
    throw std::invalid_argument("support_logprobs: state out of range");
  if (support.empty()) throw std::invalid_argument("support_logprobs: empty support");
  std::vector<double> lp(support.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < support.size(); ++i) {
    lp[i] = policy.logit(state, support[i]) / temperature;
    mx = std::max(mx, lp[i]);
  }
  double z = 0.0;
  for (double& v : lp) z += std::exp(v - mx);
  const double log_z = mx + std::log(z);
  for (double& v : lp) v -= log_z;
  return lp;
}

inline std::vector<double> support_probs(const PolicyParams& policy, std::int32_t state,
                                         std::span<const std::int32_t> support,
                                         double temperature = 1.0) {
  std::vector<double> p = support_logprobs(policy, state, support, temperature);
  for (double& v : p) v = std::exp(v);
  return p;
}

inline std::string render_tokens(std::span<const std::int32_t> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back('-');
    out += std::to_string(tokens[i]);
  }
  return out;
}

inline std::string reference_answer(const ToyTask& task) {
  return render_tokens(task.target_pattern);
}

struct SampledRollout {
  Rollout record;
  std::vector<std::int32_t> tokens;  // includes the stop token when sampled
  std::vector<std::int32_t> states;  // state each action was sampled from
  std::vector<std::int32_t> support;
  std::vector<double> sampling_logprobs;  // at the sampling temperature
};

/// Sample one trajectory. Token log-probs are recorded at temperature 1 in
/// both the new and old tracks (the snapshot convention: at sampling time the
/// two policies coincide), while `sampling_logprobs` reflects the actual
/// sampling temperature. Sampling is inverse-CDF over the support so results
/// are bit-reproducible across platforms for a given seed.
inline SampledRollout sample_rollout(const PolicyParams& policy, const ToyTask& task,
                                     std::uint64_t seed, double temperature = 1.0) {
  if (task.max_length < 1) throw std::invalid_argument("sample_rollout: max_length must be >= 1");
  SampledRollout sr;
  sr.support = task_support(task, policy.vocab_size);
  sr.record.question_id = task.id;
  sr.record.token_logprobs_new.emplace();
  sr.record.token_logprobs_old.emplace();
  std::mt19937_64 rng(seed);
  std::optional<std::int32_t> last;
  for (std::int32_t step = 0; step < task.max_length; ++step) {
    const std::int32_t state = task_state(task, policy.vocab_size, last);
    const std::vector<double> base_lp = support_logprobs(policy, state, sr.support, 1.0);
    const std::vector<double> samp_lp =
        temperature == 1.0 ? base_lp : support_logprobs(policy, state, sr.support, temperature);
    const double u = next_u01(rng);
    std::size_t idx = samp_lp.size() - 1;
    double cum = 0.0;
    for (std::size_t i = 0; i < samp_lp.size(); ++i) {
      cum += std::exp(samp_lp[i]);
      if (u < cum) {
        idx = i;
        break;
      }
    }
    sr.states.push_back(state);
    sr.tokens.push_back(sr.support[idx]);
    sr.record.token_logprobs_new->push_back(base_lp[idx]);
    sr.record.token_logprobs_old->push_back(base_lp[idx]);
    sr.sampling_logprobs.push_back(samp_lp[idx]);
    if (sr.support[idx] == policy.vocab_size) break;  // stop token
    last = sr.support[idx];
  }
  sr.record.token_length = static_cast<std::int64_t>(sr.tokens.size());
  return sr;
}

/// Content tokens = sampled tokens with any terminal stop removed.
inline std::span<const std::int32_t> content_tokens(const SampledRollout& sr,
                                                    std::int32_t vocab_size) {
  std::span<const std::int32_t> all(sr.tokens);
  if (!all.empty() && all.back() == vocab_size) all = all.subspan(0, all.size() - 1);
  return all;
}

/// Grade a rollout in place: the answer counts as extracted when the target
/// pattern appears contiguously among the content tokens; otherwise the final
/// pattern-sized window stands in as the (wrong) extracted answer, and too-
/// short rollouts extract nothing.
inline void grade(const ToyTask& task, std::int32_t vocab_size, SampledRollout& sr) {
  const std::span<const std::int32_t> content = content_tokens(sr, vocab_size);
  const std::size_t m = task.target_pattern.size();
  bool contained = false;
  if (m > 0 && content.size() >= m) {
    for (std::size_t i = 0; i + m <= content.size() && !contained; ++i)
      contained = std::equal(task.target_pattern.begin(), task.target_pattern.end(),
                             content.begin() + static_cast<std::ptrdiff_t>(i));
  }
  if (contained) {
    sr.record.extracted_answer = reference_answer(task);
  } else if (content.size() >= m && m > 0) {
    sr.record.extracted_answer = render_tokens(content.subspan(content.size() - m));
  } else {
    sr.record.extracted_answer = std::nullopt;
  }
  sr.record.is_correct = is_correct(sr.record.extracted_answer, reference_answer(task));
}

struct BenchmarkSpread {
  std::int32_t vocab_size = 12;
  std::int32_t max_pattern_length = 5;
  std::int32_t support_size = 8;  // pattern tokens + distractors (stop excluded)
  std::int32_t max_length = 32;
};

/// Deterministic benchmark: pattern lengths cycle 1..max_pattern_length (so
/// difficulty is spread evenly), tokens are drawn without replacement, and
/// difficulty_rating grows linearly with pattern length (1.25 per token).
inline std::vector<ToyTask> make_benchmark(std::int32_t n_tasks, const BenchmarkSpread& spread,
                                           std::uint64_t seed) {
  if (n_tasks < 1) throw std::invalid_argument("make_benchmark: n_tasks must be >= 1");
  if (spread.max_pattern_length < 1 || spread.max_pattern_length > spread.support_size)
    throw std::invalid_argument("make_benchmark: max_pattern_length outside [1, support_size]");
  if (spread.support_size > spread.vocab_size)
    throw std::invalid_argument("make_benchmark: support_size exceeds vocab_size");
  if (spread.max_pattern_length > spread.max_length)
    throw std::invalid_argument("make_benchmark: max_pattern_length exceeds max_length");
  std::vector<ToyTask> tasks;
  tasks.reserve(static_cast<std::size_t>(n_tasks));
  for (std::int32_t i = 0; i < n_tasks; ++i) {
    const std::int32_t len = 1 + i % spread.max_pattern_length;
    std::mt19937_64 rng(split_seed(seed, static_cast<std::uint64_t>(i), 0, 0x7a5bULL));
    ToyTask t;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "toy-%04d", i);
    t.id = buf;
    t.index = i;
    // Partial Fisher-Yates draw of `len` distinct tokens.
    std::vector<std::int32_t> pool(static_cast<std::size_t>(spread.vocab_size));
    for (std::int32_t v = 0; v < spread.vocab_size; ++v) pool[static_cast<std::size_t>(v)] = v;
    for (std::int32_t j = 0; j < len; ++j) {
      const std::int32_t remaining = spread.vocab_size - j;
      const std::int32_t offset = std::min(
          remaining - 1, static_cast<std::int32_t>(next_u01(rng) * static_cast<double>(remaining)));
      std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(j + offset)]);
      t.target_pattern.push_back(pool[static_cast<std::size_t>(j)]);
    }
    t.distractor_count = spread.support_size - len;
    t.difficulty_rating = 1.25 * static_cast<double>(len);
    t.max_length = spread.max_length;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

}  // namespace leadrl
