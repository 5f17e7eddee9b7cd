// Command-line front end: batch scoring, toy-benchmark generation, staged
// training, and evaluation. Exit codes: 0 ok, 2 data error, 3 config/usage
// error, 4 empty filtered dataset in stage 1.

#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "leadrl/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"leadrl: group-relative policy optimization toolkit (toy scale)"};
  app.require_subcommand(1);

  std::string score_rollouts, score_config, score_out;
  CLI::App* score = app.add_subcommand("score", "Score a JSONL rollout file into rewards and advantages");
  score->add_option("rollouts", score_rollouts, "Input rollout JSONL")->required();
  score->add_option("--config", score_config, "Scoring config JSON")->required();
  score->add_option("--out", score_out, "Output JSONL path")->required();

  std::string train_config, train_out;
  std::uint64_t train_seed = 0;
  CLI::App* train = app.add_subcommand("train", "Run a staged training curriculum from a config");
  train->add_option("--config", train_config, "Run config JSON")->required();
  CLI::Option* train_seed_opt = train->add_option("--seed", train_seed, "Override the config seed");
  CLI::Option* train_out_opt = train->add_option("--out", train_out, "Override the output directory");

  std::string eval_rollouts, eval_out;
  std::int32_t eval_k = 8;
  CLI::App* eval = app.add_subcommand("eval", "Compute Pass@1 / Cons@k over a rollout file");
  eval->add_option("rollouts", eval_rollouts, "Input rollout JSONL")->required();
  eval->add_option("--k", eval_k, "Samples per question to score (default 8)");
  eval->add_option("--out", eval_out, "Output report path (JSON; CSV written alongside)")
      ->required();

  std::int64_t bench_n = 0;
  std::uint64_t bench_seed = 0;
  std::string bench_out;
  CLI::App* bench = app.add_subcommand("make-bench", "Generate a toy benchmark JSONL");
  bench->add_option("n", bench_n, "Number of tasks")->required();
  bench->add_option("--seed", bench_seed, "Generation seed (default 0)");
  bench->add_option("--out", bench_out, "Output JSONL path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : leadrl::kExitConfigError;
  }

  if (score->parsed()) return leadrl::cmd_score(score_rollouts, score_config, score_out);
  if (train->parsed()) {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    if (train_seed_opt->count() > 0) seed = train_seed;
    if (train_out_opt->count() > 0) out = train_out;
    return leadrl::cmd_train(train_config, seed, out);
  }
  if (eval->parsed()) return leadrl::cmd_eval(eval_rollouts, eval_k, eval_out);
  if (bench->parsed()) return leadrl::cmd_make_bench(bench_n, bench_seed, bench_out);
  return leadrl::kExitConfigError;
}
