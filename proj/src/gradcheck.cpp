#include "grouprl/gradcheck.hpp"

#include "grouprl/rlcore.hpp"
#include "grouprl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

namespace grouprl {

namespace {

double frobenius(const Matrix& m) {
  double s = 0.0;
  for (double x : m.data) s += x * x;
  return std::sqrt(s);
}

double relative_error(const Matrix& analytic, const Matrix& fd) {
  double diff = 0.0;
  for (size_t i = 0; i < analytic.data.size(); ++i) {
    double d = analytic.data[i] - fd.data[i];
    diff += d * d;
  }
  double scale = std::max({frobenius(analytic), frobenius(fd), 1e-12});
  return std::sqrt(diff) / scale;
}

Matrix central_difference(const PolicyParams& params, double h,
                          const std::function<double(const PolicyParams&)>& value) {
  Matrix fd(params.weights.rows, params.weights.cols);
  PolicyParams probe = params;
  for (size_t i = 0; i < probe.weights.data.size(); ++i) {
    const double original = probe.weights.data[i];
    probe.weights.data[i] = original + h;
    const double plus = value(probe);
    probe.weights.data[i] = original - h;
    const double minus = value(probe);
    probe.weights.data[i] = original;
    fd.data[i] = (plus - minus) / (2.0 * h);
  }
  return fd;
}

struct Instance {
  PolicyModel model;
  PolicyParams params;
  PolicyParams old_params;
  PolicyParams ref_params;
  std::vector<RolloutGroup> groups;
  ClipConfig grpo_clip;
  ClipConfig dapo_clip;
};

PolicyParams random_params(const FeatureMap& fmap, RngStream& rng, double scale) {
  PolicyParams p = PolicyParams::zeros(fmap);
  for (double& w : p.weights.data) w = scale * rng.next_gaussian();
  return p;
}

Instance draw_instance(uint64_t seed, uint64_t index) {
  RngStream rng = derive_stream(seed, 0x6D0C, index);

  const int prompt_symbols = 1 + static_cast<int>(rng.next_below(5));  // V = 12..16
  std::vector<Token> tokens;
  tokens.push_back({"<eos>", TokenRole::kEos, 0});
  tokens.push_back({"<think>", TokenRole::kThinkOpen, 0});
  tokens.push_back({"</think>", TokenRole::kThinkClose, 0});
  tokens.push_back({"<answer>", TokenRole::kAnsOpen, 0});
  tokens.push_back({"</answer>", TokenRole::kAnsClose, 0});
  for (int i = 0; i < kNumOptions; ++i)
    tokens.push_back({std::string(1, option_letter(i)), TokenRole::kOption, i});
  for (int i = 0; i < prompt_symbols; ++i)
    tokens.push_back({"S" + std::to_string(i), TokenRole::kPromptSymbol, i});

  const int buckets = 4 + static_cast<int>(rng.next_below(5));  // 4..8
  const int l_hard = 8 + static_cast<int>(rng.next_below(5));   // 8..12
  Instance inst{PolicyModel(Vocabulary(std::move(tokens)), buckets, l_hard),
                PolicyParams{},
                PolicyParams{},
                PolicyParams{},
                {},
                ClipConfig{},
                ClipConfig{}};

  inst.params = random_params(inst.model.fmap, rng, 0.4);
  inst.old_params = inst.params;
  for (double& w : inst.old_params.weights.data) w += 0.05 * rng.next_gaussian();
  inst.ref_params = random_params(inst.model.fmap, rng, 0.4);

  inst.grpo_clip = ClipConfig{0.2, 0.2, 0.05 + 0.1 * rng.next_double()};
  inst.dapo_clip = ClipConfig{0.2, 0.28, 0.0};

  const int n_groups = 1 + static_cast<int>(rng.next_below(3));
  for (int g = 0; g < n_groups; ++g) {
    RolloutGroup group;
    const int prompt_len = 3 + static_cast<int>(rng.next_below(4));
    for (int i = 0; i < prompt_len; ++i)
      group.prompt.ids.push_back(
          inst.model.vocab.prompt_symbol(static_cast<int>(rng.next_below(prompt_symbols))));
    group.ground_truth_option = static_cast<int>(rng.next_below(kNumOptions));

    // Responses are built so every group mixes correct and incorrect
    // answers, keeping it valid input for the token-mean objective.
    auto formatted_response = [&](int option_idx) {
      TokenSeq s;
      s.ids.push_back(inst.model.vocab.think_open());
      const int think_len = static_cast<int>(rng.next_below(3));
      for (int t = 0; t < think_len; ++t)
        s.ids.push_back(
            inst.model.vocab.prompt_symbol(static_cast<int>(rng.next_below(prompt_symbols))));
      s.ids.push_back(inst.model.vocab.think_close());
      s.ids.push_back(inst.model.vocab.ans_open());
      s.ids.push_back(inst.model.vocab.option(option_idx));
      s.ids.push_back(inst.model.vocab.ans_close());
      if (rng.next_below(2) == 0) {
        s.ids.push_back(inst.model.vocab.eos());
        s.terminated = true;
      }
      return s;
    };

    const int group_size = 2 + static_cast<int>(rng.next_below(3));  // G = 2..4
    std::vector<double> rewards;
    for (int i = 0; i < group_size; ++i) {
      Rollout r;
      if (i == 0) {
        r.seq = formatted_response(group.ground_truth_option);
      } else if (i == 1) {
        r.seq = formatted_response(
            (group.ground_truth_option + 1 + static_cast<int>(rng.next_below(5))) % kNumOptions);
      } else if (rng.next_below(2) == 0) {
        r.seq = formatted_response(static_cast<int>(rng.next_below(kNumOptions)));
      } else {
        r.seq = sample_sequence(inst.model, inst.old_params, group.prompt, rng,
                                inst.model.fmap.l_hard)
                    .seq;
      }
      r.old_logprobs =
          sequence_token_logprobs(inst.model, inst.old_params, group.prompt, r.seq);
      rewards.push_back(rng.next_gaussian());
      group.rollouts.push_back(std::move(r));
    }
    group.advantages = group_advantages(rewards, 1e-8);
    inst.groups.push_back(std::move(group));
  }
  return inst;
}

// True when any token ratio sits within `margin` of a clip bound for a
// response with nonzero advantage.
bool near_kink(const Instance& inst, double margin) {
  const double bounds[4] = {1.0 - inst.grpo_clip.eps_low, 1.0 + inst.grpo_clip.eps_high,
                            1.0 - inst.dapo_clip.eps_low, 1.0 + inst.dapo_clip.eps_high};
  for (const RolloutGroup& group : inst.groups) {
    for (size_t i = 0; i < group.rollouts.size(); ++i) {
      if (std::abs(group.advantages[i]) < 1e-12) continue;
      const Rollout& r = group.rollouts[i];
      std::vector<double> new_lp =
          sequence_token_logprobs(inst.model, inst.params, group.prompt, r.seq);
      for (size_t t = 0; t < new_lp.size(); ++t) {
        const double ratio = importance_ratio(new_lp[t], r.old_logprobs[t]);
        for (double b : bounds)
          if (std::abs(ratio - b) <= margin) return true;
      }
    }
  }
  return false;
}

}  // namespace

double GradCheckReport::worst() const {
  return std::max({max_err_logprob, max_err_grpo, max_err_dapo});
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os.precision(3);
  os << "gradcheck over " << instances << " instances: "
     << "max rel err logprob=" << max_err_logprob << " grpo=" << max_err_grpo
     << " dapo=" << max_err_dapo;
  return os.str();
}

GradCheckReport run_gradcheck(const GradCheckOptions& options) {
  GradCheckReport report;
  report.instances = options.instances;

  uint64_t draw = 0;
  for (int k = 0; k < options.instances; ++k) {
    Instance inst = draw_instance(options.seed, draw++);
    while (near_kink(inst, options.kink_margin)) inst = draw_instance(options.seed, draw++);

    // Sequence log-probability.
    {
      const RolloutGroup& group = inst.groups.front();
      const Rollout& rollout = group.rollouts.front();
      Matrix analytic = grad_log_prob(inst.model, inst.params, group.prompt, rollout.seq);
      if (options.corrupt) analytic.data[analytic.data.size() / 2] += 1e-3;
      Matrix fd = central_difference(inst.params, options.fd_step, [&](const PolicyParams& p) {
        double sum = 0.0;
        for (double lp : sequence_token_logprobs(inst.model, p, group.prompt, rollout.seq))
          sum += lp;
        return sum;
      });
      report.max_err_logprob = std::max(report.max_err_logprob, relative_error(analytic, fd));
    }

    // Group-mean objective with KL.
    {
      ObjectiveReport obj =
          grpo_objective(inst.model, inst.groups, inst.params, inst.ref_params, inst.grpo_clip);
      Matrix analytic = obj.gradient;
      if (options.corrupt) analytic.data[0] += 1e-3;
      Matrix fd = central_difference(inst.params, options.fd_step, [&](const PolicyParams& p) {
        return grpo_objective(inst.model, inst.groups, p, inst.ref_params, inst.grpo_clip).value;
      });
      report.max_err_grpo = std::max(report.max_err_grpo, relative_error(analytic, fd));
    }

    // Token-mean objective, asymmetric bounds. Groups mix correct and
    // incorrect answers by construction, so all of them conform.
    {
      ObjectiveReport obj = dapo_objective(inst.model, inst.groups, inst.params, inst.dapo_clip);
      Matrix analytic = obj.gradient;
      if (options.corrupt) analytic.data[0] += 1e-3;
      Matrix fd = central_difference(inst.params, options.fd_step, [&](const PolicyParams& p) {
        return dapo_objective(inst.model, inst.groups, p, inst.dapo_clip).value;
      });
      report.max_err_dapo = std::max(report.max_err_dapo, relative_error(analytic, fd));
    }
  }
  return report;
}

}  // namespace grouprl
