// grouprl command-line front end.
//
// Subcommands: train, eval, gradcheck, env-gen,
//              corpus {split-captions, clean, dedup, sample, cluster}.
// Exit codes: 0 success, 1 validation error, 2 runtime error, 3 check failure.

#include <CLI11.hpp>

#include "grouprl/checkpoint.hpp"
#include "grouprl/config.hpp"
#include "grouprl/corpus.hpp"
#include "grouprl/env.hpp"
#include "grouprl/errors.hpp"
#include "grouprl/gradcheck.hpp"
#include "grouprl/trainer.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace grouprl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitCheckFailure = 3;

struct TrainArgs {
  std::string config_path;
  std::string dataset_path;
  std::string out_dir = "run";
  int gen_items = 0;
  int prompt_len = 10;
  std::optional<uint64_t> seed_override;
  std::optional<int> workers_override;
  std::optional<std::string> init_override;
};

int cmd_train(const TrainArgs& args) {
  TrainConfig cfg = load_config(args.config_path);
  if (args.seed_override) cfg.seed = *args.seed_override;
  if (args.workers_override) cfg.workers = *args.workers_override;
  if (args.init_override) {
    if (*args.init_override == "zero")
      cfg.init = PolicyInit::kZero;
    else if (*args.init_override == "template")
      cfg.init = PolicyInit::kTemplate;
    else
      throw ConfigError("field 'init': expected zero or template, got '" + *args.init_override +
                        "'");
  }
  cfg.validate();

  PolicyModel model(Vocabulary::task_vocab(), 8, cfg.lengths.l_hard);

  std::vector<McqItem> dataset;
  if (!args.dataset_path.empty()) {
    dataset = load_dataset(args.dataset_path, model.vocab);
  } else {
    const int count = args.gen_items > 0 ? args.gen_items : 256;
    dataset = generate_dataset(model.vocab, cfg.seed, count, args.prompt_len);
  }
  if (dataset.empty()) throw ConfigError("dataset is empty");

  fs::create_directories(args.out_dir);
  {
    std::ofstream snap(fs::path(args.out_dir) / "config.snapshot",
                       std::ios::binary | std::ios::trunc);
    if (!snap) throw ConfigError("cannot write config snapshot in '" + args.out_dir + "'");
    snap << serialize_config(cfg);
  }

  const auto start = std::chrono::steady_clock::now();
  TrainResult result = run_training(model, cfg, dataset, make_initial_params(model, cfg.init));
  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_metrics((fs::path(args.out_dir) / "metrics.tsv").string(), result.metrics);
  save_checkpoint((fs::path(args.out_dir) / "final.ckpt").string(), model, result.params);

  EvalReport eval = evaluate(model, result.params, dataset, EvalMode::kSampled, cfg.seed);
  std::cout << "updates=" << result.metrics.size() << " skipped_steps=" << result.skipped_steps
            << "\n";
  std::cout << "final accuracy_rate=" << eval.accuracy_rate
            << " format_rate=" << eval.format_rate << "\n";
  std::cerr << "wall_s=" << wall_s << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_path,
             const std::string& mode, uint64_t seed) {
  LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  std::vector<McqItem> items = load_dataset(dataset_path, ckpt.model.vocab);
  EvalMode m = mode == "greedy" ? EvalMode::kGreedy : EvalMode::kSampled;
  EvalReport report = evaluate(ckpt.model, ckpt.params, items, m, seed);
  std::cout << "accuracy_rate=" << report.accuracy_rate
            << " format_rate=" << report.format_rate << "\n";
  return kExitOk;
}

int cmd_gradcheck(uint64_t seed, int instances, double step, double tol, bool corrupt) {
  GradCheckOptions options;
  options.seed = seed;
  options.instances = instances;
  options.fd_step = step;
  options.corrupt = corrupt;
  GradCheckReport report = run_gradcheck(options);
  std::cout << report.summary() << "\n";
  if (!report.pass(tol)) {
    std::cout << "FAIL: max relative error " << report.worst() << " exceeds " << tol << "\n";
    return kExitCheckFailure;
  }
  std::cout << "OK: all gradients within " << tol << "\n";
  return kExitOk;
}

int cmd_env_gen(const std::string& out, int items, int prompt_len, int strata, uint64_t seed) {
  Vocabulary vocab = Vocabulary::task_vocab();
  std::vector<McqItem> dataset = generate_dataset(vocab, seed, items, prompt_len, strata);
  save_dataset(out, vocab, dataset);
  std::cerr << "records out=" << dataset.size() << "\n";
  return kExitOk;
}

// ---- corpus subcommands ---------------------------------------------------

corpus::CorpusReadResult read_corpus_arg(const std::string& in, bool strict) {
  if (in == "-") return corpus::load_corpus_stream(std::cin, "<stdin>", strict);
  return corpus::load_corpus(in, strict);
}

void write_corpus_arg(const std::string& out, const std::vector<corpus::CaptionRecord>& records) {
  if (out == "-")
    corpus::save_corpus_stream(std::cout, records);
  else
    corpus::save_corpus(out, records);
}

int cmd_corpus_split(const std::string& in, const std::string& out, bool strict) {
  corpus::CorpusReadResult input = read_corpus_arg(in, strict);
  std::vector<corpus::CaptionRecord> output;
  long split_count = 0;
  for (const corpus::CaptionRecord& rec : input.records) {
    corpus::PanelSplit split = corpus::parse_multipanel_caption(rec.text);
    if (!split.matched) {
      output.push_back(rec);
      continue;
    }
    ++split_count;
    for (const corpus::Panel& panel : split.panels) {
      corpus::CaptionRecord r = rec;
      r.id = rec.id + ":" + panel.label;
      r.text = panel.subcaption;
      output.push_back(std::move(r));
    }
  }
  write_corpus_arg(out, output);
  std::cerr << "records in=" << input.records.size() << " out=" << output.size()
            << " split=" << split_count << " skipped=" << input.skipped << "\n";
  return kExitOk;
}

int cmd_corpus_clean(const std::string& in, const std::string& out, int threshold, bool strict) {
  corpus::CorpusReadResult input = read_corpus_arg(in, strict);
  std::vector<corpus::CaptionRecord> output;
  long flagged_repetition = 0;
  long flagged_nonlatin = 0;
  long rewritten = 0;
  for (const corpus::CaptionRecord& rec : input.records) {
    if (corpus::detect_repetition(rec.text, threshold).flagged) {
      ++flagged_repetition;
      continue;
    }
    if (corpus::detect_residual_nonlatin(rec.text).flagged) {
      ++flagged_nonlatin;
      continue;
    }
    corpus::CaptionRecord r = rec;
    r.text = corpus::replace_reference_terms(rec.text);
    rewritten += r.text != rec.text ? 1 : 0;
    output.push_back(std::move(r));
  }
  write_corpus_arg(out, output);
  std::cerr << "records in=" << input.records.size() << " out=" << output.size()
            << " flagged=" << flagged_repetition + flagged_nonlatin
            << " (repetition=" << flagged_repetition << ", nonlatin=" << flagged_nonlatin
            << ", rewritten=" << rewritten << ") skipped=" << input.skipped << "\n";
  return kExitOk;
}

int cmd_corpus_dedup(const std::string& in, const std::string& out, int prefix, bool strict) {
  corpus::CorpusReadResult input = read_corpus_arg(in, strict);
  std::vector<corpus::CaptionRecord> kept = corpus::dedup_by_prefix(input.records, prefix);
  write_corpus_arg(out, kept);
  std::cerr << "records in=" << input.records.size() << " out=" << kept.size()
            << " removed=" << input.records.size() - kept.size() << " skipped=" << input.skipped
            << "\n";
  return kExitOk;
}

int cmd_corpus_sample(const std::string& in, const std::string& out, int total, bool strict) {
  corpus::CorpusReadResult input = read_corpus_arg(in, strict);
  std::vector<corpus::CaptionRecord> sampled = corpus::stratified_sample(input.records, total);
  write_corpus_arg(out, sampled);
  std::cerr << "records in=" << input.records.size() << " out=" << sampled.size()
            << " skipped=" << input.skipped << "\n";
  return kExitOk;
}

int cmd_corpus_cluster(const std::string& in, const std::string& out, int k, uint64_t seed,
                       int max_iter, double tol, bool strict) {
  corpus::CorpusReadResult input = read_corpus_arg(in, strict);
  std::vector<corpus::CaptionRecord> usable;
  long missing = 0;
  for (corpus::CaptionRecord& rec : input.records) {
    if (rec.embedding.empty()) {
      if (strict) throw ConfigError("record '" + rec.id + "' lacks an embedding");
      ++missing;
      continue;
    }
    usable.push_back(std::move(rec));
  }
  if (usable.empty()) throw ConfigError("no records with embeddings to cluster");

  std::vector<std::vector<double>> vectors;
  vectors.reserve(usable.size());
  for (const corpus::CaptionRecord& rec : usable) vectors.push_back(rec.embedding);
  RngStream rng = derive_stream(seed, 0xC1u);
  corpus::KmeansResult result = corpus::kmeans3(vectors, k, rng, max_iter, tol);
  for (size_t i = 0; i < usable.size(); ++i) usable[i].cluster = result.assignments[i];

  write_corpus_arg(out, usable);
  std::cerr << "records in=" << input.records.size() << " out=" << usable.size()
            << " missing_embedding=" << missing << " iterations=" << result.iterations
            << " skipped=" << input.skipped << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"group-relative RL post-training engine with verifiable rewards"};
  app.require_subcommand(1);

  // train
  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "run RL training from a config file");
  train->add_option("--config", train_args.config_path, "config file (key = value lines)")
      ->required();
  train->add_option("--dataset", train_args.dataset_path, "MCQ dataset file (JSON lines)");
  train->add_option("--gen-items", train_args.gen_items,
                    "generate a synthetic dataset of this size when --dataset is absent");
  train->add_option("--prompt-len", train_args.prompt_len,
                    "prompt length for generated datasets (default 10)");
  train->add_option("--out", train_args.out_dir,
                    "output directory for metrics.tsv, final.ckpt, config.snapshot");
  uint64_t train_seed = 0;
  int train_workers = 0;
  std::string train_init;
  CLI::Option* seed_opt = train->add_option("--seed", train_seed, "override the config seed");
  CLI::Option* workers_opt =
      train->add_option("--workers", train_workers, "override the config worker count");
  CLI::Option* init_opt =
      train->add_option("--init", train_init, "override policy init (zero|template)");
  std::string keys;
  for (const std::string& k : config_keys()) keys += "  " + k + "\n";
  train->footer("Config file keys:\n" + keys);

  // eval
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_dataset, eval_mode = "sampled";
  uint64_t eval_seed = 0;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "MCQ dataset file")->required();
  eval_cmd->add_option("--mode", eval_mode, "sampled|greedy (default sampled)")
      ->check(CLI::IsMember({"sampled", "greedy"}));
  eval_cmd->add_option("--seed", eval_seed, "evaluation seed (default 0)");

  // gradcheck
  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  uint64_t grad_seed = 1;
  int grad_instances = 20;
  double grad_step = 1e-5;
  double grad_tol = 1e-5;
  bool grad_corrupt = false;
  grad->add_option("--seed", grad_seed, "instance seed (default 1)");
  grad->add_option("--instances", grad_instances, "instances per objective (default 20)")
      ->check(CLI::PositiveNumber);
  grad->add_option("--step", grad_step, "central-difference step (default 1e-5)");
  grad->add_option("--tol", grad_tol, "max relative error tolerance (default 1e-5)");
  grad->add_flag("--corrupt", grad_corrupt,
                 "negative control: perturb the analytic gradient and expect failure");

  // env-gen
  CLI::App* env_gen = app.add_subcommand("env-gen", "generate a synthetic MCQ dataset");
  std::string env_out;
  int env_items = 1000;
  int env_prompt_len = 10;
  int env_strata = 6;
  uint64_t env_seed = 1;
  env_gen->add_option("--out", env_out, "output dataset path")->required();
  env_gen->add_option("--items", env_items, "item count (default 1000)")
      ->check(CLI::PositiveNumber);
  env_gen->add_option("--prompt-len", env_prompt_len, "symbols per prompt (default 10)");
  env_gen->add_option("--strata", env_strata, "number of synthetic strata (default 6)")
      ->check(CLI::PositiveNumber);
  env_gen->add_option("--seed", env_seed, "generation seed (default 1)");

  // corpus
  CLI::App* corpus_cmd = app.add_subcommand("corpus", "corpus curation tools");
  corpus_cmd->require_subcommand(1);
  struct {
    std::string in = "-";
    std::string out = "-";
    bool strict = false;
    int threshold = 15;
    int prefix = 50;
    int total = 0;
    int k = 3;
    uint64_t seed = 1;
    int max_iter = 100;
    double tol = 1e-9;
  } ca;

  auto add_io = [&](CLI::App* sub) {
    sub->add_option("--in", ca.in, "input corpus file ('-' = stdin)");
    sub->add_option("--out", ca.out, "output corpus file ('-' = stdout)");
    sub->add_flag("--strict", ca.strict, "abort on malformed records instead of skipping");
  };
  CLI::App* split = corpus_cmd->add_subcommand(
      "split-captions", "split multi-panel captions, sharing the prefix across panels");
  add_io(split);
  CLI::App* clean = corpus_cmd->add_subcommand(
      "clean", "drop repetition/non-Latin flagged records, rewrite reference terms");
  add_io(clean);
  clean->add_option("--threshold", ca.threshold,
                    "consecutive-repetition threshold (flag when exceeded, default 15)");
  CLI::App* dedup = corpus_cmd->add_subcommand("dedup", "drop records sharing a text prefix");
  add_io(dedup);
  dedup->add_option("--prefix", ca.prefix, "prefix length in characters (default 50)");
  CLI::App* sample =
      corpus_cmd->add_subcommand("sample", "proportionate stratified sampling by stratum");
  add_io(sample);
  sample->add_option("--total", ca.total, "total records to select")->required();
  CLI::App* cluster = corpus_cmd->add_subcommand("cluster", "k-means over record embeddings");
  add_io(cluster);
  cluster->add_option("--k", ca.k, "cluster count (default 3)")->check(CLI::PositiveNumber);
  cluster->add_option("--seed", ca.seed, "seeding stream (default 1)");
  cluster->add_option("--max-iter", ca.max_iter, "iteration cap (default 100)");
  cluster->add_option("--tol", ca.tol, "centroid movement tolerance (default 1e-9)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (*seed_opt) train_args.seed_override = train_seed;
      if (*workers_opt) train_args.workers_override = train_workers;
      if (*init_opt) train_args.init_override = train_init;
      return cmd_train(train_args);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_dataset, eval_mode, eval_seed);
    if (grad->parsed())
      return cmd_gradcheck(grad_seed, grad_instances, grad_step, grad_tol, grad_corrupt);
    if (env_gen->parsed())
      return cmd_env_gen(env_out, env_items, env_prompt_len, env_strata, env_seed);
    if (corpus_cmd->parsed()) {
      if (split->parsed()) return cmd_corpus_split(ca.in, ca.out, ca.strict);
      if (clean->parsed()) return cmd_corpus_clean(ca.in, ca.out, ca.threshold, ca.strict);
      if (dedup->parsed()) return cmd_corpus_dedup(ca.in, ca.out, ca.prefix, ca.strict);
      if (sample->parsed()) return cmd_corpus_sample(ca.in, ca.out, ca.total, ca.strict);
      if (cluster->parsed())
        return cmd_corpus_cluster(ca.in, ca.out, ca.k, ca.seed, ca.max_iter, ca.tol, ca.strict);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
