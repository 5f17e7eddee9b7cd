#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "leadrl/advantage.hpp"
#include "leadrl/metrics.hpp"
#include "leadrl/reward.hpp"
#include "leadrl/toy_env.hpp"
#include "leadrl/trainer.hpp"
#include "leadrl/types.hpp"
#include "leadrl/verifier.hpp"

namespace leadrl {

// Exit-code contract shared by all commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 2;
inline constexpr int kExitConfigError = 3;
inline constexpr int kExitEmptyDataset = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// All emitted numbers use 9 significant digits so files are diff-stable
/// across platforms.
inline std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string json_quote(const std::string& s) { return nlohmann::json(s).dump(); }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

/// Write via a sibling temp file and rename, so readers never observe a
/// partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace io_detail {

using nlohmann::json;

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& ctx) {
  if (!obj.is_object()) throw ConfigError(ctx + ": expected a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(ctx + ": unknown key '" + it.key() + "'");
  }
}

inline json parse_json(const std::string& text, const std::string& ctx) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(ctx + ": malformed JSON");
  return j;
}

inline std::string read_text_file(const std::filesystem::path& path, bool config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    const std::string msg = "cannot open: " + path.string();
    if (config) throw ConfigError(msg);
    throw DataError(msg);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RewardConfig reward_config_from_json(const json& j, const std::string& ctx) {
  check_keys(j,
             {"alpha", "epsilon", "incorrect_penalty", "length_reward_enabled",
              "repetition_penalty", "repetition_ngram_n", "repetition_min_repeats",
              "repetition_penalty_enabled"},
             ctx);
  RewardConfig cfg;
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  cfg.incorrect_penalty = j.value("incorrect_penalty", cfg.incorrect_penalty);
  cfg.length_reward_enabled = j.value("length_reward_enabled", cfg.length_reward_enabled);
  cfg.repetition_penalty = j.value("repetition_penalty", cfg.repetition_penalty);
  cfg.repetition_ngram_n = j.value("repetition_ngram_n", cfg.repetition_ngram_n);
  cfg.repetition_min_repeats = j.value("repetition_min_repeats", cfg.repetition_min_repeats);
  cfg.repetition_penalty_enabled =
      j.value("repetition_penalty_enabled", cfg.repetition_penalty_enabled);
  return cfg;
}

inline ReweightConfig reweight_config_from_json(const json& j, const std::string& ctx) {
  check_keys(j, {"enabled", "A", "B", "rho0", "k"}, ctx);
  ReweightConfig cfg;
  cfg.enabled = j.value("enabled", cfg.enabled);
  cfg.A = j.value("A", cfg.A);
  cfg.B = j.value("B", cfg.B);
  cfg.rho0 = j.value("rho0", cfg.rho0);
  cfg.k = j.value("k", cfg.k);
  return cfg;
}

inline ObjectiveConfig objective_config_from_json(const json& j, const std::string& ctx) {
  check_keys(j, {"beta", "clip_epsilon", "loss_aggregation"}, ctx);
  ObjectiveConfig cfg;
  cfg.beta = j.value("beta", cfg.beta);
  if (j.contains("clip_epsilon") && !j["clip_epsilon"].is_null())
    cfg.clip_epsilon = j["clip_epsilon"].get<double>();
  const std::string agg = j.value("loss_aggregation", std::string("token_mean"));
  if (agg == "token_mean") {
    cfg.loss_aggregation = LossAggregation::TokenMean;
  } else if (agg == "sequence_mean_then_group_mean") {
    cfg.loss_aggregation = LossAggregation::SequenceMeanThenGroupMean;
  } else {
    throw ConfigError(ctx + ": unknown loss_aggregation '" + agg + "'");
  }
  return cfg;
}

inline FilterRule filter_rule_from_json(const json& j, const std::string& ctx) {
  check_keys(j, {"min_difficulty", "max_rollout_accuracy"}, ctx);
  FilterRule rule;
  if (j.contains("min_difficulty") && !j["min_difficulty"].is_null())
    rule.min_difficulty = j["min_difficulty"].get<double>();
  if (j.contains("max_rollout_accuracy") && !j["max_rollout_accuracy"].is_null())
    rule.max_rollout_accuracy = j["max_rollout_accuracy"].get<double>();
  return rule;
}

inline StageConfig stage_config_from_json(const json& j, const std::string& ctx) {
  check_keys(j,
             {"name", "steps", "batch_questions", "group_size", "learning_rate",
              "rollout_temperature", "reward", "reweight", "objective", "filter"},
             ctx);
  StageConfig cfg;
  cfg.name = j.value("name", cfg.name);
  cfg.steps = j.value("steps", cfg.steps);
  cfg.batch_questions = j.value("batch_questions", cfg.batch_questions);
  cfg.group_size = j.value("group_size", cfg.group_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.rollout_temperature = j.value("rollout_temperature", cfg.rollout_temperature);
  if (j.contains("reward")) cfg.reward_cfg = reward_config_from_json(j["reward"], ctx + ".reward");
  if (j.contains("reweight"))
    cfg.reweight_cfg = reweight_config_from_json(j["reweight"], ctx + ".reweight");
  if (j.contains("objective"))
    cfg.objective_cfg = objective_config_from_json(j["objective"], ctx + ".objective");
  if (j.contains("filter")) cfg.dataset_filter = filter_rule_from_json(j["filter"], ctx + ".filter");
  return cfg;
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Benchmark files (JSONL, one task per line)

inline std::string task_to_json_line(const ToyTask& t) {
  std::string s = "{\"id\":" + json_quote(t.id) + ",\"index\":" + std::to_string(t.index) +
                  ",\"target_pattern\":[";
  for (std::size_t i = 0; i < t.target_pattern.size(); ++i) {
    if (i) s.push_back(',');
    s += std::to_string(t.target_pattern[i]);
  }
  s += "],\"distractor_count\":" + std::to_string(t.distractor_count) +
       ",\"difficulty_rating\":" + format_g9(t.difficulty_rating) +
       ",\"max_length\":" + std::to_string(t.max_length) +
       ",\"reference_answer\":" + json_quote(reference_answer(t)) + "}";
  return s;
}

inline std::vector<ToyTask> load_benchmark(const std::filesystem::path& path) {
  const std::string text = io_detail::read_text_file(path, /*config=*/false);
  std::vector<ToyTask> tasks;
  std::istringstream in(text);
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError(ctx + ": malformed JSON");
    try {
      ToyTask t;
      t.id = j.at("id").get<std::string>();
      t.index = j.at("index").get<std::int32_t>();
      t.target_pattern = j.at("target_pattern").get<std::vector<std::int32_t>>();
      t.distractor_count = j.at("distractor_count").get<std::int32_t>();
      t.difficulty_rating = j.at("difficulty_rating").get<double>();
      t.max_length = j.at("max_length").get<std::int32_t>();
      if (t.index < 0) throw DataError(ctx + ": index must be >= 0");
      if (t.target_pattern.empty()) throw DataError(ctx + ": empty target_pattern");
      if (t.max_length < 1) throw DataError(ctx + ": max_length must be >= 1");
      if (std::cmp_greater(t.target_pattern.size(), t.max_length))
        throw DataError(ctx + ": target_pattern longer than max_length");
      tasks.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(ctx + ": " + e.what());
    }
  }
  if (tasks.empty()) throw DataError(path.string() + ": no tasks");
  return tasks;
}

// ---------------------------------------------------------------------------
// Rollout files (JSONL, one question per line)

struct RolloutSample {
  std::int64_t token_length = 0;
  std::optional<std::string> extracted_answer;
  std::optional<std::vector<std::int32_t>> tokens;
};

struct RolloutFileRecord {
  std::string question_id;
  std::string reference_answer;
  std::vector<RolloutSample> samples;
};

inline std::vector<RolloutFileRecord> parse_rollout_file(const std::filesystem::path& path) {
  const std::string text = io_detail::read_text_file(path, /*config=*/false);
  std::vector<RolloutFileRecord> records;
  std::istringstream in(text);
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError(ctx + ": malformed JSON");
    try {
      RolloutFileRecord rec;
      rec.question_id = j.at("question_id").get<std::string>();
      rec.reference_answer = j.at("reference_answer").get<std::string>();
      const nlohmann::json& samples = j.at("samples");
      if (!samples.is_array() || samples.empty())
        throw DataError(ctx + ": samples must be a non-empty array");
      for (const nlohmann::json& s : samples) {
        RolloutSample sample;
        sample.token_length = s.at("token_length").get<std::int64_t>();
        if (sample.token_length < 1) throw DataError(ctx + ": token_length must be >= 1");
        if (s.contains("extracted_answer") && !s["extracted_answer"].is_null())
          sample.extracted_answer = s["extracted_answer"].get<std::string>();
        if (s.contains("tokens") && !s["tokens"].is_null())
          sample.tokens = s["tokens"].get<std::vector<std::int32_t>>();
        rec.samples.push_back(std::move(sample));
      }
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(ctx + ": " + e.what());
    }
  }
  if (records.empty()) throw DataError(path.string() + ": no records");
  return records;
}

// ---------------------------------------------------------------------------
// Configs (JSON with explicit schema version)

struct ScoreConfig {
  RewardConfig reward;
  ReweightConfig reweight;
};

inline ScoreConfig load_score_config(const std::filesystem::path& path) {
  const std::string text = io_detail::read_text_file(path, /*config=*/true);
  const nlohmann::json j = io_detail::parse_json(text, path.string());
  io_detail::check_keys(j, {"version", "reward", "reweight"}, path.string());
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"] != 1)
    throw ConfigError(path.string() + ": missing or unsupported \"version\" (expected 1)");
  ScoreConfig cfg;
  try {
    if (j.contains("reward"))
      cfg.reward = io_detail::reward_config_from_json(j["reward"], path.string() + ".reward");
    if (j.contains("reweight"))
      cfg.reweight =
          io_detail::reweight_config_from_json(j["reweight"], path.string() + ".reweight");
    validate(cfg.reward);
    validate(cfg.reweight);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return cfg;
}

/// Where a task list comes from: an explicit JSONL file, or a generated
/// benchmark with the given size/seed/shape.
struct DatasetSpec {
  std::optional<std::string> path;
  std::int32_t n_tasks = 40;
  std::uint64_t seed = 0;
  BenchmarkSpread spread;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  std::optional<DatasetSpec> validation;
  std::string out_dir = "leadrl_run";
  TrainOptions options;
  std::vector<StageConfig> stages;
};

namespace io_detail {

inline DatasetSpec dataset_spec_from_json(const json& j, const std::string& ctx) {
  check_keys(j,
             {"path", "n_tasks", "seed", "vocab_size", "max_pattern_length", "support_size",
              "max_length"},
             ctx);
  DatasetSpec spec;
  if (j.contains("path")) spec.path = j["path"].get<std::string>();
  spec.n_tasks = j.value("n_tasks", spec.n_tasks);
  spec.seed = j.value("seed", spec.seed);
  spec.spread.vocab_size = j.value("vocab_size", spec.spread.vocab_size);
  spec.spread.max_pattern_length = j.value("max_pattern_length", spec.spread.max_pattern_length);
  spec.spread.support_size = j.value("support_size", spec.spread.support_size);
  spec.spread.max_length = j.value("max_length", spec.spread.max_length);
  return spec;
}

}  // namespace io_detail

inline RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = io_detail::read_text_file(path, /*config=*/true);
  const nlohmann::json j = io_detail::parse_json(text, path.string());
  io_detail::check_keys(j,
                        {"version", "seed", "dataset", "validation", "out_dir", "eval_every",
                         "eval_k", "eval_temperature", "probes_per_task", "stages"},
                        path.string());
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"] != 1)
    throw ConfigError(path.string() + ": missing or unsupported \"version\" (expected 1)");
  RunConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    if (!j.contains("dataset")) throw ConfigError(path.string() + ": missing \"dataset\"");
    cfg.dataset = io_detail::dataset_spec_from_json(j["dataset"], path.string() + ".dataset");
    if (j.contains("validation"))
      cfg.validation =
          io_detail::dataset_spec_from_json(j["validation"], path.string() + ".validation");
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.options.eval_every = j.value("eval_every", cfg.options.eval_every);
    cfg.options.eval_k = j.value("eval_k", cfg.options.eval_k);
    cfg.options.eval_temperature = j.value("eval_temperature", cfg.options.eval_temperature);
    cfg.options.probes_per_task = j.value("probes_per_task", cfg.options.probes_per_task);
    if (!j.contains("stages") || !j["stages"].is_array() || j["stages"].empty())
      throw ConfigError(path.string() + ": \"stages\" must be a non-empty array");
    std::size_t idx = 0;
    for (const nlohmann::json& js : j["stages"]) {
      StageConfig stage = io_detail::stage_config_from_json(
          js, path.string() + ".stages[" + std::to_string(idx) + "]");
      if (stage.name.empty()) stage.name = "stage" + std::to_string(idx + 1);
      cfg.stages.push_back(std::move(stage));
      ++idx;
    }
    validate(cfg.options);
    for (const StageConfig& s : cfg.stages) validate(s);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Policy snapshots

inline std::string policy_to_text(const PolicyParams& policy) {
  std::string out = "leadrl-policy v1\n";
  for (std::int32_t s = 0; s < policy.n_states; ++s)
    for (std::int32_t t = 0; t <= policy.vocab_size; ++t)
      out += std::to_string(s) + "," + std::to_string(t) + "," + format_g9(policy.logit(s, t)) +
             "\n";
  return out;
}

inline PolicyParams load_policy(const std::filesystem::path& path) {
  const std::string text = io_detail::read_text_file(path, /*config=*/false);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "leadrl-policy v1")
    throw DataError(path.string() + ": missing 'leadrl-policy v1' header");
  struct Row {
    std::int32_t state, token;
    double logit;
  };
  std::vector<Row> rows;
  std::int32_t max_state = -1, max_token = -1;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Row r{};
    char extra = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%lf%c", &r.state, &r.token, &r.logit, &extra) != 3)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad row");
    if (r.state < 0 || r.token < 0)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": negative index");
    max_state = std::max(max_state, r.state);
    max_token = std::max(max_token, r.token);
    rows.push_back(r);
  }
  if (rows.empty() || max_token < 1) throw DataError(path.string() + ": no parameter rows");
  PolicyParams policy;
  policy.vocab_size = max_token;  // the stop token carries the largest id
  policy.n_states = max_state + 1;
  policy.logits.assign(static_cast<std::size_t>(policy.n_states) * policy.row_width(), 0.0);
  for (const Row& r : rows) policy.logit(r.state, r.token) = r.logit;
  return policy;
}

// ---------------------------------------------------------------------------
// Commands. Each returns a process exit code per the contract above and
// reports failures on stderr.

inline int cmd_make_bench(std::int64_t n, std::uint64_t seed, const std::string& out_path,
                          std::ostream& err = std::cerr) {
  if (n < 1) {
    err << "make-bench: n must be >= 1\n";
    return kExitConfigError;
  }
  try {
    const std::vector<ToyTask> tasks =
        make_benchmark(static_cast<std::int32_t>(n), BenchmarkSpread{}, seed);
    std::string out;
    for (const ToyTask& t : tasks) out += task_to_json_line(t) + "\n";
    write_file_atomic(out_path, out);
  } catch (const std::exception& e) {
    err << "make-bench: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitOk;
}

inline int cmd_score(const std::string& rollouts_path, const std::string& config_path,
                     const std::string& out_path, std::ostream& err = std::cerr) {
  ScoreConfig cfg;
  try {
    cfg = load_score_config(config_path);
  } catch (const ConfigError& e) {
    err << "score: " << e.what() << "\n";
    return kExitConfigError;
  }
  try {
    const std::vector<RolloutFileRecord> records = parse_rollout_file(rollouts_path);
    std::string out;
    for (const RolloutFileRecord& rec : records) {
      Group group;
      group.question_id = rec.question_id;
      for (const RolloutSample& s : rec.samples) {
        Rollout r;
        r.question_id = rec.question_id;
        r.token_length = s.token_length;
        r.extracted_answer = s.extracted_answer;
        r.is_correct = is_correct(s.extracted_answer, rec.reference_answer);
        if (cfg.reward.repetition_penalty_enabled && s.tokens)
          r.has_repetition = detect_repetition(*s.tokens, cfg.reward.repetition_ngram_n,
                                               cfg.reward.repetition_min_repeats);
        group.rollouts.push_back(std::move(r));
      }
      const std::vector<RewardOutcome> outcomes = score_group(group, cfg.reward);
      std::vector<double> rewards(outcomes.size());
      for (std::size_t i = 0; i < outcomes.size(); ++i) rewards[i] = outcomes[i].reward;
      const std::vector<double> raw = normalized_advantages(group, rewards, cfg.reward.epsilon);
      const double rho = correctness_ratio(group);
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const AdvantageRecord adv = reweight(raw[i], rho, cfg.reweight);
        out += "{\"question_id\":" + json_quote(rec.question_id) +
               ",\"sample_index\":" + std::to_string(i) +
               ",\"reward\":" + format_g9(outcomes[i].reward) +
               ",\"z\":" + (outcomes[i].z ? format_g9(*outcomes[i].z) : "null") +
               ",\"raw_advantage\":" + format_g9(adv.raw) +
               ",\"reweighted_advantage\":" + format_g9(adv.reweighted) +
               ",\"rho\":" + format_g9(rho) +
               ",\"weight_applied\":" + format_g9(adv.weight_applied) + "}\n";
      }
    }
    write_file_atomic(out_path, out);
  } catch (const DataError& e) {
    err << "score: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    err << "score: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

inline int cmd_eval(const std::string& rollouts_path, std::int32_t k, const std::string& out_path,
                    std::ostream& err = std::cerr) {
  if (k < 1) {
    err << "eval: k must be >= 1\n";
    return kExitConfigError;
  }
  try {
    const std::vector<RolloutFileRecord> records = parse_rollout_file(rollouts_path);
    std::vector<QuestionSamples> samples;
    samples.reserve(records.size());
    for (const RolloutFileRecord& rec : records) {
      if (static_cast<std::int32_t>(rec.samples.size()) < k)
        throw DataError("question " + rec.question_id + " has " +
                        std::to_string(rec.samples.size()) + " samples, need k=" +
                        std::to_string(k));
      QuestionSamples qs;
      qs.question_id = rec.question_id;
      qs.reference_answer = rec.reference_answer;
      for (const RolloutSample& s : rec.samples) {
        qs.answers.push_back(s.extracted_answer);
        qs.lengths.push_back(s.token_length);
      }
      samples.push_back(std::move(qs));
    }
    const EvalReport rep = evaluate(samples, k, TiePolicy::Incorrect);

    std::string js = "{\n";
    js += "  \"pass1\": " + format_g9(rep.pass1) + ",\n";
    js += "  \"cons_k\": " + format_g9(rep.cons_k) + ",\n";
    js += "  \"len_avg\": " + format_g9(rep.len_avg) + ",\n";
    js += "  \"any_correct\": " + format_g9(rep.any_correct) + ",\n";
    js += "  \"all_correct\": " + format_g9(rep.all_correct) + ",\n";
    js += "  \"k\": " + std::to_string(rep.k) + ",\n";
    js += "  \"rows\": [\n";
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
      const EvalRow& row = rep.rows[i];
      js += "    {\"question_id\":" + json_quote(row.question_id) +
            ",\"correct_frac\":" + format_g9(row.correct_frac) + ",\"modal_answer\":" +
            (row.modal_answer ? json_quote(*row.modal_answer) : "null") +
            ",\"modal_correct\":" + (row.modal_correct ? "true" : "false") +
            ",\"mean_len\":" + format_g9(row.mean_len) + "}";
      js += i + 1 < rep.rows.size() ? ",\n" : "\n";
    }
    js += "  ]\n}\n";

    std::string csv = "question_id,correct_frac,modal_answer,modal_correct,mean_len\n";
    for (const EvalRow& row : rep.rows) {
      csv += csv_field(row.question_id) + "," + format_g9(row.correct_frac) + "," +
             csv_field(row.modal_answer ? *row.modal_answer : "") + "," +
             (row.modal_correct ? "true" : "false") + "," + format_g9(row.mean_len) + "\n";
    }

    std::filesystem::path json_path(out_path);
    std::filesystem::path csv_path(out_path);
    if (csv_path.extension() == ".json") csv_path.replace_extension(".csv");
    else csv_path += ".csv";
    write_file_atomic(json_path, js);
    write_file_atomic(csv_path, csv);
  } catch (const DataError& e) {
    err << "eval: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

namespace io_detail {

inline std::string sanitize_name(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-';
    out.push_back(ok ? c : '_');
  }
  if (out.empty()) out = "stage";
  return out;
}

inline std::vector<ToyTask> realize_dataset(const DatasetSpec& spec) {
  if (spec.path) return load_benchmark(*spec.path);
  if (spec.n_tasks < 1) throw ConfigError("dataset: n_tasks must be >= 1");
  return make_benchmark(spec.n_tasks, spec.spread, spec.seed);
}

inline void check_benchmark(const std::vector<ToyTask>& tasks, std::int32_t vocab_size,
                            std::int32_t n_task_slots, const std::string& what,
                            bool require_unique_indices) {
  std::vector<char> seen(static_cast<std::size_t>(n_task_slots), 0);
  for (const ToyTask& t : tasks) {
    if (t.index >= n_task_slots)
      throw DataError(what + ": task " + t.id + " index out of range");
    if (require_unique_indices) {
      if (seen[static_cast<std::size_t>(t.index)])
        throw DataError(what + ": duplicate task index " + std::to_string(t.index));
      seen[static_cast<std::size_t>(t.index)] = 1;
    }
    task_support(t, vocab_size);  // throws on out-of-vocab or non-distinct patterns
  }
}

}  // namespace io_detail

inline int cmd_train(const std::string& config_path,
                     std::optional<std::uint64_t> seed_override = std::nullopt,
                     std::optional<std::string> out_override = std::nullopt,
                     std::ostream& err = std::cerr) {
  RunConfig cfg;
  try {
    cfg = load_run_config(config_path);
  } catch (const ConfigError& e) {
    err << "train: " << e.what() << "\n";
    return kExitConfigError;
  }
  if (seed_override) cfg.seed = *seed_override;
  if (out_override) cfg.out_dir = *out_override;
  try {
    const std::vector<ToyTask> tasks = io_detail::realize_dataset(cfg.dataset);
    std::vector<ToyTask> validation;
    if (cfg.validation) validation = io_detail::realize_dataset(*cfg.validation);

    const std::int32_t vocab = cfg.dataset.spread.vocab_size;
    std::int32_t n_task_slots = 0;
    for (const ToyTask& t : tasks) n_task_slots = std::max(n_task_slots, t.index + 1);
    io_detail::check_benchmark(tasks, vocab, n_task_slots, "dataset", true);
    if (!validation.empty())
      io_detail::check_benchmark(validation, vocab, n_task_slots, "validation", false);

    TrainerState state;
    state.policy = PolicyParams::uniform(vocab, n_task_slots);
    state.root_seed = cfg.seed;

    std::vector<TrainingCurve> curves;
    for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
      std::vector<TrainingCurve> got =
          run_stages(state, tasks, std::span<const StageConfig>(&cfg.stages[i], 1), cfg.options,
                     validation);
      if (got[0].dataset_empty) {
        if (i == 0) {
          err << "train: stage 1 filter left an empty dataset\n";
          return kExitEmptyDataset;
        }
        err << "train: warning: stage " << i + 1 << " filter left an empty dataset; skipped\n";
      }
      curves.push_back(std::move(got[0]));
    }

    const std::filesystem::path out_dir(cfg.out_dir);
    for (std::size_t i = 0; i < curves.size(); ++i) {
      std::string csv = "step,pass1,cons_k,mean_len,mean_reward,mean_abs_adv\n";
      for (const StepRecord& rec : curves[i].records) {
        if (!rec.pass1) continue;  // one row per validation point
        csv += std::to_string(rec.step) + "," + format_g9(*rec.pass1) + "," +
               format_g9(*rec.cons_k) + "," + format_g9(rec.mean_len) + "," +
               format_g9(rec.mean_reward) + "," + format_g9(rec.mean_abs_adv) + "\n";
      }
      const std::string name =
          "curve_" + std::to_string(i + 1) + "_" + io_detail::sanitize_name(curves[i].stage_name) +
          ".csv";
      write_file_atomic(out_dir / name, csv);
    }
    write_file_atomic(out_dir / "policy.txt", policy_to_text(state.policy));
  } catch (const ConfigError& e) {
    err << "train: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const DataError& e) {
    err << "train: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::invalid_argument& e) {
    err << "train: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

}  // namespace leadrl
