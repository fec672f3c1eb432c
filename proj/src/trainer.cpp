#include "grouprl/trainer.hpp"

#include "grouprl/checkpoint.hpp"
#include "grouprl/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>

namespace grouprl {

namespace {

constexpr uint64_t kPermLane = 0xC0FFEE;

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Ascent step: params move along +gradient.
  virtual void step(Matrix& weights, const Matrix& gradient) = 0;
};

class SgdOptimizer final : public Optimizer {
 public:
  explicit SgdOptimizer(double lr) : lr_(lr) {}
  void step(Matrix& weights, const Matrix& gradient) override {
    for (size_t i = 0; i < weights.data.size(); ++i) weights.data[i] += lr_ * gradient.data[i];
  }

 private:
  double lr_;
};

class AdamOptimizer final : public Optimizer {
 public:
  AdamOptimizer(double lr, int rows, int cols)
      : lr_(lr), m_(rows, cols), v_(rows, cols) {}

  void step(Matrix& weights, const Matrix& gradient) override {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    for (size_t i = 0; i < weights.data.size(); ++i) {
      const double g = gradient.data[i];
      m_.data[i] = kBeta1 * m_.data[i] + (1.0 - kBeta1) * g;
      v_.data[i] = kBeta2 * v_.data[i] + (1.0 - kBeta2) * g * g;
      const double mhat = m_.data[i] / bc1;
      const double vhat = v_.data[i] / bc2;
      weights.data[i] += lr_ * mhat / (std::sqrt(vhat) + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  Matrix m_;
  Matrix v_;
  long t_ = 0;
};

// Deterministic infinite prompt stream: epoch e is a seeded Fisher-Yates
// permutation of the dataset, consumed in order. Refill draws advance the
// same cursor, so every draw has a unique global position.
class PromptStream {
 public:
  PromptStream(const std::vector<McqItem>& dataset, uint64_t seed)
      : dataset_(dataset), seed_(seed) {}

  const McqItem* next() {
    const size_t n = dataset_.size();
    size_t epoch = cursor_ / n;
    if (epoch != perm_epoch_ || perm_.empty()) reshuffle(epoch);
    const McqItem* item = &dataset_[perm_[cursor_ % n]];
    ++cursor_;
    return item;
  }

  uint64_t cursor() const { return cursor_; }

 private:
  void reshuffle(size_t epoch) {
    const size_t n = dataset_.size();
    perm_.resize(n);
    std::iota(perm_.begin(), perm_.end(), size_t{0});
    RngStream rng = derive_stream(seed_, kPermLane, epoch);
    for (size_t i = n; i > 1; --i) {
      size_t j = rng.next_below(i);
      std::swap(perm_[i - 1], perm_[j]);
    }
    perm_epoch_ = epoch;
  }

  const std::vector<McqItem>& dataset_;
  uint64_t seed_;
  uint64_t cursor_ = 0;
  std::vector<size_t> perm_;
  size_t perm_epoch_ = static_cast<size_t>(-1);
};

struct ResponseTally {
  long responses = 0;
  long correct = 0;
  long formatted = 0;
  double reward_sum = 0.0;

  void add(const RolloutGroup& group) {
    for (const Rollout& r : group.rollouts) {
      ++responses;
      correct += r.reward.acc;
      formatted += r.reward.fmt;
      reward_sum += r.reward.combined;
    }
  }
};

void score_group(const Vocabulary& vocab, RolloutGroup& group, Algorithm algorithm,
                 const Lengths& lengths, double eps_sigma) {
  std::vector<double> rewards;
  rewards.reserve(group.rollouts.size());
  for (Rollout& r : group.rollouts) {
    r.reward = score_response(vocab, r.seq, group.ground_truth_option, algorithm,
                              lengths.l_max, lengths.l_cache);
    rewards.push_back(r.reward.combined);
  }
  group.advantages = group_advantages(rewards, eps_sigma);
}

}  // namespace

std::vector<RolloutGroup> sample_groups(const PolicyModel& model, const PolicyParams& params,
                                        const std::vector<const McqItem*>& prompts,
                                        uint64_t first_prompt_counter, int group_size, int l_hard,
                                        uint64_t seed, int workers) {
  const size_t n_jobs = prompts.size() * static_cast<size_t>(group_size);
  std::vector<RolloutGroup> groups(prompts.size());
  for (size_t p = 0; p < prompts.size(); ++p) {
    groups[p].prompt = prompts[p]->prompt;
    groups[p].ground_truth_option = prompts[p]->answer_option;
    groups[p].rollouts.resize(static_cast<size_t>(group_size));
  }

  auto run_job = [&](size_t job) {
    const size_t p = job / static_cast<size_t>(group_size);
    const int k = static_cast<int>(job % static_cast<size_t>(group_size));
    RngStream rng = derive_stream(seed, kRolloutLane,
                                  first_prompt_counter + static_cast<uint64_t>(p),
                                  static_cast<uint64_t>(k));
    SampledSequence s = sample_sequence(model, params, prompts[p]->prompt, rng, l_hard);
    Rollout& slot = groups[p].rollouts[static_cast<size_t>(k)];
    slot.seq = std::move(s.seq);
    slot.old_logprobs = std::move(s.logprobs);
  };

  const int n_workers = std::min<int>(workers, static_cast<int>(n_jobs));
  if (n_workers <= 1) {
    for (size_t job = 0; job < n_jobs; ++job) run_job(job);
  } else {
    // Striped assignment; every job writes only its own slot, so results are
    // independent of scheduling.
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        for (size_t job = static_cast<size_t>(w); job < n_jobs;
             job += static_cast<size_t>(n_workers))
          run_job(job);
      });
    }
    for (std::thread& t : pool) t.join();
  }
  return groups;
}

PolicyParams make_initial_params(const PolicyModel& model, PolicyInit init) {
  switch (init) {
    case PolicyInit::kZero:
      return PolicyParams::zeros(model.fmap);
    case PolicyInit::kTemplate:
      return template_params(model);
  }
  throw ContractViolation("unhandled policy init");
}

TrainResult run_training(const PolicyModel& model, const TrainConfig& config,
                         const std::vector<McqItem>& dataset, PolicyParams initial_params) {
  config.validate();
  if (dataset.empty()) throw ContractViolation("run_training requires a nonempty dataset");
  if (initial_params.weights.rows != model.fmap.vocab_size ||
      initial_params.weights.cols != model.fmap.dim())
    throw ContractViolation("initial params shape does not match model");

  TrainResult result;
  result.params = std::move(initial_params);
  const PolicyParams ref_params = result.params;  // frozen for the whole run
  result.ref_fingerprint = params_fingerprint(ref_params);

  std::unique_ptr<Optimizer> opt;
  if (config.optimizer == OptimizerKind::kSgd) {
    opt = std::make_unique<SgdOptimizer>(config.learning_rate);
  } else {
    opt = std::make_unique<AdamOptimizer>(config.learning_rate, model.fmap.vocab_size,
                                          model.fmap.dim());
  }

  PromptStream prompt_stream(dataset, config.seed);
  const long steps_per_epoch =
      std::max<long>(1, static_cast<long>(dataset.size()) / config.generation_batch);
  const long outer_steps = static_cast<long>(config.epochs) * steps_per_epoch;

  int update_counter = 0;
  for (long step = 0; step < outer_steps; ++step) {
    const auto step_start = std::chrono::steady_clock::now();
    const PolicyParams old_params = result.params;  // pi_old frozen for this step

    auto draw_and_score = [&](int count) {
      std::vector<const McqItem*> prompts;
      prompts.reserve(static_cast<size_t>(count));
      const uint64_t first_counter = prompt_stream.cursor();
      for (int i = 0; i < count; ++i) prompts.push_back(prompt_stream.next());
      std::vector<RolloutGroup> groups =
          sample_groups(model, old_params, prompts, first_counter, config.group_size,
                        config.lengths.l_hard, config.seed, config.workers);
      for (RolloutGroup& g : groups)
        score_group(model.vocab, g, config.algorithm, config.lengths, config.eps_sigma);
      return groups;
    };

    ResponseTally tally;
    std::vector<RolloutGroup> train_groups;
    int kept_count = 0;
    int dropped_count = 0;

    if (config.algorithm == Algorithm::kGrpo) {
      train_groups = draw_and_score(config.generation_batch);
      for (const RolloutGroup& g : train_groups) tally.add(g);
      kept_count = static_cast<int>(train_groups.size());
    } else {
      std::vector<RolloutGroup> generated = draw_and_score(config.generation_batch);
      for (const RolloutGroup& g : generated) tally.add(g);
      auto [kept, dropped] = dynamic_sampling_filter(model.vocab, std::move(generated));
      dropped_count = static_cast<int>(dropped.size());
      kept_count = static_cast<int>(kept.size());
      train_groups = std::move(kept);

      int rounds = 0;
      while (static_cast<int>(train_groups.size()) < config.train_batch &&
             rounds < config.max_refill_rounds) {
        ++rounds;
        const int shortfall = config.train_batch - static_cast<int>(train_groups.size());
        std::vector<RolloutGroup> extra = draw_and_score(shortfall);
        for (const RolloutGroup& g : extra) tally.add(g);
        auto [kept2, dropped2] = dynamic_sampling_filter(model.vocab, std::move(extra));
        kept_count += static_cast<int>(kept2.size());
        dropped_count += static_cast<int>(dropped2.size());
        for (RolloutGroup& g : kept2) train_groups.push_back(std::move(g));
      }
      if (static_cast<int>(train_groups.size()) > config.train_batch)
        train_groups.resize(static_cast<size_t>(config.train_batch));
    }

    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - step_start)
            .count();

    if (train_groups.empty()) {
      // Refill exhausted with nothing usable; record the step and move on.
      ++result.skipped_steps;
      StepMetrics m;
      m.step = ++update_counter;
      m.mean_reward =
          tally.responses > 0 ? tally.reward_sum / static_cast<double>(tally.responses) : 0.0;
      m.accuracy_rate =
          tally.responses > 0 ? static_cast<double>(tally.correct) / tally.responses : 0.0;
      m.format_rate =
          tally.responses > 0 ? static_cast<double>(tally.formatted) / tally.responses : 0.0;
      m.kept_groups = kept_count;
      m.dropped_groups = dropped_count;
      m.wall_ms = wall_ms;
      result.metrics.push_back(m);
      continue;
    }

    for (int pass = 0; pass < config.opt_epochs_per_batch; ++pass) {
      ObjectiveReport report;
      try {
        report = config.algorithm == Algorithm::kGrpo
                     ? grpo_objective(model, train_groups, result.params, ref_params, config.clip)
                     : dapo_objective(model, train_groups, result.params, config.clip);
      } catch (const NumericalError& e) {
        std::ostringstream diag;
        diag << e.what() << " [step " << step << ", update " << update_counter + 1
             << ", groups " << train_groups.size() << ", params fingerprint "
             << params_fingerprint(result.params) << "]";
        throw NumericalError(diag.str());
      }

      opt->step(result.params.weights, report.gradient);

      StepMetrics m;
      m.step = ++update_counter;
      m.mean_reward =
          tally.responses > 0 ? tally.reward_sum / static_cast<double>(tally.responses) : 0.0;
      m.accuracy_rate =
          tally.responses > 0 ? static_cast<double>(tally.correct) / tally.responses : 0.0;
      m.format_rate =
          tally.responses > 0 ? static_cast<double>(tally.formatted) / tally.responses : 0.0;
      m.mean_kl = report.diagnostics.mean_token_kl;
      m.clip_fraction = report.diagnostics.clip_fraction;
      m.mean_entropy = report.diagnostics.mean_entropy;
      m.kept_groups = kept_count;
      m.dropped_groups = dropped_count;
      m.wall_ms = wall_ms;
      result.metrics.push_back(m);
    }
  }
  return result;
}

EvalReport evaluate(const PolicyModel& model, const PolicyParams& params,
                    const std::vector<McqItem>& items, EvalMode mode, uint64_t seed) {
  if (items.empty()) throw ContractViolation("evaluate requires a nonempty item list");
  if (!model.vocab.has_full_task_shape())
    throw ContractViolation("evaluate requires the full task vocabulary");

  long correct = 0;
  long formatted = 0;
  for (size_t i = 0; i < items.size(); ++i) {
    const McqItem& item = items[i];
    RngStream rng = derive_stream(seed, 0xE7A1u, static_cast<uint64_t>(i));

    SampledSequence rollout =
        mode == EvalMode::kSampled
            ? sample_sequence(model, params, item.prompt, rng, model.fmap.l_hard)
            : greedy_sequence(model, params, item.prompt, model.fmap.l_hard);
    formatted += format_reward(model.vocab, rollout.seq);

    // Answer probe: canonical skeleton prefix, answer slot restricted to the
    // six options and renormalized.
    TokenSeq prefix;
    prefix.ids = {model.vocab.think_open(), model.vocab.think_close(), model.vocab.ans_open()};
    std::vector<double> phi = featurize(model, item.prompt, prefix, 3);
    std::vector<double> dist = token_distribution(model, params, phi);

    double option_mass = 0.0;
    for (int o = 0; o < kNumOptions; ++o)
      option_mass += dist[static_cast<size_t>(model.vocab.option(o))];

    int choice = 0;
    if (mode == EvalMode::kGreedy) {
      for (int o = 1; o < kNumOptions; ++o)
        if (dist[static_cast<size_t>(model.vocab.option(o))] >
            dist[static_cast<size_t>(model.vocab.option(choice))])
          choice = o;
    } else {
      const double u = rng.next_double() * option_mass;
      double cum = 0.0;
      choice = kNumOptions - 1;
      for (int o = 0; o < kNumOptions; ++o) {
        cum += dist[static_cast<size_t>(model.vocab.option(o))];
        if (u < cum) {
          choice = o;
          break;
        }
      }
    }
    correct += choice == item.answer_option ? 1 : 0;
  }

  EvalReport report;
  report.accuracy_rate = static_cast<double>(correct) / static_cast<double>(items.size());
  report.format_rate = static_cast<double>(formatted) / static_cast<double>(items.size());
  return report;
}

void write_metrics(const std::string& path, const std::vector<StepMetrics>& metrics) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "step\tmean_reward\taccuracy_rate\tformat_rate\tmean_kl\tclip_fraction\t"
         "mean_entropy\tkept_groups\tdropped_groups\n";
  char buf[512];
  for (const StepMetrics& m : metrics) {
    std::snprintf(buf, sizeof(buf),
                  "%d\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%d\t%d\n", m.step,
                  m.mean_reward, m.accuracy_rate, m.format_rate, m.mean_kl, m.clip_fraction,
                  m.mean_entropy, m.kept_groups, m.dropped_groups);
    out << buf;
  }
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

}  // namespace grouprl
