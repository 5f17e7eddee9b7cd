#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "leadrl/verifier.hpp"

namespace leadrl {

/// What a tied majority vote means: Incorrect scores the question as failed;
/// FirstSeen lets the earliest-sampled tied answer stand.
enum class TiePolicy { Incorrect, FirstSeen };

struct VoteResult {
  std::optional<std::string> modal_answer;  // first-seen representative
  std::int32_t modal_count = 0;
  bool tied = false;
};

/// Majority vote with canonical pooling: "3/2" and "1.5" land in one cluster.
/// Absent or blank answers do not vote. The representative of each cluster is
/// the first answer string seen for it.
inline VoteResult majority_vote(std::span<const std::optional<std::string>> answers) {
  struct Cluster {
    CanonicalAnswer canon;
    std::string representative;
    std::int32_t count = 0;
  };
  std::vector<Cluster> clusters;
  for (const auto& a : answers) {
    if (!a || detail::trim(*a).empty()) continue;
    CanonicalAnswer canon = canonicalize(*a);
    bool matched = false;
    for (Cluster& c : clusters) {
      if (answers_equal(c.canon, canon)) {
        ++c.count;
        matched = true;
        break;
      }
    }
    if (!matched) clusters.push_back({std::move(canon), *a, 1});
  }
  VoteResult out;
  for (const Cluster& c : clusters) {
    if (c.count > out.modal_count) {
      out.modal_answer = c.representative;
      out.modal_count = c.count;
      out.tied = false;
    } else if (c.count == out.modal_count) {
      out.tied = true;  // keeps the first-seen representative
    }
  }
  return out;
}

/// Mean per-question correctness fraction (questions weigh equally even if
/// sample counts differ).
inline double pass_at_1(std::span<const std::vector<bool>> correct) {
  if (correct.empty()) throw std::invalid_argument("pass_at_1: no questions");
  double sum = 0.0;
  for (const auto& q : correct) {
    if (q.empty()) throw std::invalid_argument("pass_at_1: question with no samples");
    std::int64_t hits = 0;
    for (bool b : q) hits += b ? 1 : 0;
    sum += static_cast<double>(hits) / static_cast<double>(q.size());
  }
  return sum / static_cast<double>(correct.size());
}

struct QuestionSamples {
  std::string question_id;
  std::string reference_answer;
  std::vector<std::optional<std::string>> answers;
  std::vector<std::int64_t> lengths;
};

struct EvalRow {
  std::string question_id;
  double correct_frac = 0.0;
  std::optional<std::string> modal_answer;
  bool modal_correct = false;
  double mean_len = 0.0;
};

struct EvalReport {
  double pass1 = 0.0;
  double cons_k = 0.0;    // majority-vote accuracy over questions
  double len_avg = 0.0;   // pooled over all counted samples
  double any_correct = 0.0;  // fraction of questions with >= 1 correct sample
  double all_correct = 0.0;  // fraction of questions with every sample correct
  std::int32_t k = 0;
  std::vector<EvalRow> rows;
};

/// Score the first k samples of every question. Throws if any question has
/// fewer than k samples or mismatched answer/length tracks.
inline EvalReport evaluate(std::span<const QuestionSamples> samples, std::int32_t k,
                           TiePolicy tie = TiePolicy::Incorrect) {
  if (k < 1) throw std::invalid_argument("evaluate: k must be >= 1");
  if (samples.empty()) throw std::invalid_argument("evaluate: no questions");
  EvalReport rep;
  rep.k = k;
  double pass_sum = 0.0, cons_sum = 0.0, any_sum = 0.0, all_sum = 0.0, len_sum = 0.0;
  for (const QuestionSamples& q : samples) {
    if (q.answers.size() != q.lengths.size())
      throw std::invalid_argument("evaluate: answers/lengths length mismatch for " + q.question_id);
    if (static_cast<std::int32_t>(q.answers.size()) < k)
      throw std::invalid_argument("evaluate: fewer than k samples for " + q.question_id);
    EvalRow row;
    row.question_id = q.question_id;
    std::int64_t hits = 0;
    double qlen = 0.0;
    for (std::int32_t i = 0; i < k; ++i) {
      hits += is_correct(q.answers[static_cast<std::size_t>(i)], q.reference_answer) ? 1 : 0;
      qlen += static_cast<double>(q.lengths[static_cast<std::size_t>(i)]);
    }
    row.correct_frac = static_cast<double>(hits) / static_cast<double>(k);
    row.mean_len = qlen / static_cast<double>(k);
    const VoteResult vote = majority_vote(
        std::span<const std::optional<std::string>>(q.answers.data(), static_cast<std::size_t>(k)));
    row.modal_answer = vote.modal_answer;
    const bool vote_counts = vote.modal_answer && (!vote.tied || tie == TiePolicy::FirstSeen);
    row.modal_correct = vote_counts && is_correct(vote.modal_answer, q.reference_answer);
    pass_sum += row.correct_frac;
    cons_sum += row.modal_correct ? 1.0 : 0.0;
    any_sum += hits > 0 ? 1.0 : 0.0;
    all_sum += hits == k ? 1.0 : 0.0;
    len_sum += qlen;
    rep.rows.push_back(std::move(row));
  }
  const double nq = static_cast<double>(samples.size());
  rep.pass1 = pass_sum / nq;
  rep.cons_k = cons_sum / nq;
  rep.any_correct = any_sum / nq;
  rep.all_correct = all_sum / nq;
  rep.len_avg = len_sum / (nq * static_cast<double>(k));
  return rep;
}

}  // namespace leadrl
