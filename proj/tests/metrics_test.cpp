#include "leadrl/metrics.hpp"

#include <gtest/gtest.h>

#include <optional>
#include <string>
#include <vector>

namespace leadrl {
namespace {

using Answers = std::vector<std::optional<std::string>>;

TEST(MajorityVote, PoolsEquivalentForms) {
  const Answers answers = {"3/2", "1.5", "2"};
  const VoteResult v = majority_vote(answers);
  EXPECT_EQ(v.modal_answer, "3/2");  // first-seen spelling represents the cluster
  EXPECT_EQ(v.modal_count, 2);
  EXPECT_FALSE(v.tied);
}

TEST(MajorityVote, RepresentativeIsFirstSeen) {
  const Answers answers = {"1.50", "3/2", "1.5"};
  const VoteResult v = majority_vote(answers);
  EXPECT_EQ(v.modal_answer, "1.50");
  EXPECT_EQ(v.modal_count, 3);
}

TEST(MajorityVote, TiesAreFlagged) {
  const Answers two_way = {"1", "2"};
  VoteResult v = majority_vote(two_way);
  EXPECT_TRUE(v.tied);
  EXPECT_EQ(v.modal_answer, "1");
  EXPECT_EQ(v.modal_count, 1);

  const Answers two_two = {"1", "2", "2", "1"};
  v = majority_vote(two_two);
  EXPECT_TRUE(v.tied);
  EXPECT_EQ(v.modal_answer, "1");
  EXPECT_EQ(v.modal_count, 2);

  const Answers broken_tie = {"1", "2", "2"};
  v = majority_vote(broken_tie);
  EXPECT_FALSE(v.tied);
  EXPECT_EQ(v.modal_answer, "2");
}

TEST(MajorityVote, AbsentAndBlankDoNotVote) {
  const Answers answers = {std::nullopt, "   ", "", "4"};
  const VoteResult v = majority_vote(answers);
  EXPECT_EQ(v.modal_answer, "4");
  EXPECT_EQ(v.modal_count, 1);
  EXPECT_FALSE(v.tied);
}

TEST(MajorityVote, NoVotesAtAll) {
  const Answers answers = {std::nullopt, ""};
  const VoteResult v = majority_vote(answers);
  EXPECT_FALSE(v.modal_answer.has_value());
  EXPECT_EQ(v.modal_count, 0);
  EXPECT_FALSE(v.tied);
}

TEST(PassAt1, AveragesQuestionFractions) {
  const std::vector<std::vector<bool>> correct = {{true, false}, {true, true}};
  EXPECT_DOUBLE_EQ(pass_at_1(correct), 0.75);
  const std::vector<std::vector<bool>> uneven = {{true}, {false, false, false}};
  EXPECT_DOUBLE_EQ(pass_at_1(uneven), 0.5);
  EXPECT_THROW(pass_at_1(std::vector<std::vector<bool>>{}), std::invalid_argument);
  const std::vector<std::vector<bool>> holed = {{true}, {}};
  EXPECT_THROW(pass_at_1(holed), std::invalid_argument);
}

QuestionSamples make_q(std::string id, std::string ref, Answers answers,
                       std::vector<std::int64_t> lengths) {
  QuestionSamples q;
  q.question_id = std::move(id);
  q.reference_answer = std::move(ref);
  q.answers = std::move(answers);
  q.lengths = std::move(lengths);
  return q;
}

TEST(Evaluate, TwoQuestionReport) {
  const std::vector<QuestionSamples> qs = {
      make_q("q1", "3-1-2", {"3-1-2", "1-2-3"}, {4, 6}),
      make_q("q2", "5", {"5", "5"}, {2, 2}),
  };
  const EvalReport rep = evaluate(qs, 2, TiePolicy::Incorrect);
  EXPECT_EQ(rep.k, 2);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rep.rows[0].correct_frac, 0.5);
  EXPECT_DOUBLE_EQ(rep.rows[0].mean_len, 5.0);
  EXPECT_FALSE(rep.rows[0].modal_correct);  // 1-1 tie scored as incorrect
  EXPECT_TRUE(rep.rows[1].modal_correct);
  EXPECT_DOUBLE_EQ(rep.pass1, 0.75);
  EXPECT_DOUBLE_EQ(rep.cons_k, 0.5);
  EXPECT_DOUBLE_EQ(rep.any_correct, 1.0);
  EXPECT_DOUBLE_EQ(rep.all_correct, 0.5);
  EXPECT_DOUBLE_EQ(rep.len_avg, 3.5);

  // Under FirstSeen the q1 tie resolves to its first answer, which is right.
  const EvalReport lenient = evaluate(qs, 2, TiePolicy::FirstSeen);
  EXPECT_DOUBLE_EQ(lenient.cons_k, 1.0);
}

TEST(Evaluate, OnlyFirstKSamplesCount) {
  const std::vector<QuestionSamples> qs = {
      make_q("q", "7", {"0", "1", "7", "7"}, {1, 1, 1, 1})};
  const EvalReport rep = evaluate(qs, 2);
  EXPECT_DOUBLE_EQ(rep.pass1, 0.0);
  EXPECT_DOUBLE_EQ(rep.cons_k, 0.0);
  EXPECT_DOUBLE_EQ(rep.any_correct, 0.0);
}

TEST(Evaluate, ConsensusAtOneEqualsPassAtOne) {
  const std::vector<QuestionSamples> qs = {
      make_q("a", "1", {"1"}, {3}),
      make_q("b", "2", {"3"}, {4}),
      make_q("c", "4/2", {"2.0"}, {5}),
      make_q("d", "9", {std::nullopt}, {1}),
  };
  const EvalReport rep = evaluate(qs, 1);
  EXPECT_DOUBLE_EQ(rep.pass1, rep.cons_k);
  EXPECT_DOUBLE_EQ(rep.pass1, 0.5);
}

TEST(Evaluate, PoolingAppliesToVotesAndGrading) {
  const std::vector<QuestionSamples> qs = {
      make_q("q", "3/2", {"1.5", "6/4", "2"}, {1, 1, 1})};
  const EvalReport rep = evaluate(qs, 3);
  EXPECT_DOUBLE_EQ(rep.rows[0].correct_frac, 2.0 / 3.0);
  EXPECT_EQ(rep.rows[0].modal_answer, "1.5");
  EXPECT_TRUE(rep.rows[0].modal_correct);
}

TEST(Evaluate, Validation) {
  const std::vector<QuestionSamples> qs = {make_q("q", "1", {"1"}, {2})};
  EXPECT_THROW(evaluate(qs, 0), std::invalid_argument);
  EXPECT_THROW(evaluate(qs, 2), std::invalid_argument);  // fewer than k samples
  EXPECT_THROW(evaluate(std::vector<QuestionSamples>{}, 1), std::invalid_argument);
  const std::vector<QuestionSamples> bad = {make_q("q", "1", {"1", "1"}, {2})};
  EXPECT_THROW(evaluate(bad, 1), std::invalid_argument);  // track length mismatch
}

}  // namespace
}  // namespace leadrl
