#include "grouprl/rlcore.hpp"

#include "grouprl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace grouprl {

std::vector<double> group_advantages(const std::vector<double>& rewards, double eps_sigma) {
  const size_t g = rewards.size();
  if (g < 2) throw ContractViolation("group_advantages requires G >= 2");

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);

  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);
  double sigma = std::sqrt(var);

  std::vector<double> adv(g, 0.0);
  if (sigma < eps_sigma) return adv;
  for (size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / sigma;
  return adv;
}

double importance_ratio(double new_logprob, double old_logprob) {
  if (!std::isfinite(new_logprob) || !std::isfinite(old_logprob))
    throw ContractViolation("importance_ratio requires finite log-probabilities");
  return std::exp(new_logprob - old_logprob);
}

double clipped_term(double ratio, double adv, double eps_low, double eps_high) {
  double clamped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
  return std::min(ratio * adv, clamped * adv);
}

double token_kl(const std::vector<double>& pi_new, const std::vector<double>& pi_ref) {
  if (pi_new.size() != pi_ref.size())
    throw ContractViolation("token_kl: distributions differ in size");
  double kl = 0.0;
  for (size_t v = 0; v < pi_new.size(); ++v) {
    if (pi_new[v] == 0.0) continue;
    if (pi_ref[v] == 0.0)
      throw NumericalError("token_kl undefined: reference assigns zero mass to token " +
                           std::to_string(v));
    kl += pi_new[v] * std::log(pi_new[v] / pi_ref[v]);
  }
  return kl;
}

int correct_count(const Vocabulary& vocab, const RolloutGroup& group) {
  int n = 0;
  for (const Rollout& r : group.rollouts)
    n += accuracy_reward(extract_answer(vocab, r.seq), group.ground_truth_option);
  return n;
}

namespace {

struct TokenAccumulator {
  long tokens = 0;
  double ratio_sum = 0.0;
  long clipped = 0;
  double kl_sum = 0.0;
  double entropy_sum = 0.0;
};

double group_reward_mean(const std::vector<RolloutGroup>& groups) {
  double sum = 0.0;
  long n = 0;
  for (const RolloutGroup& g : groups)
    for (const Rollout& r : g.rollouts) {
      sum += r.reward.combined;
      ++n;
    }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

void check_group_shapes(const std::vector<RolloutGroup>& groups) {
  if (groups.empty()) throw ContractViolation("objective requires at least one group");
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    const RolloutGroup& g = groups[gi];
    if (g.group_size() < 2)
      throw ContractViolation("group " + std::to_string(gi) + " has fewer than 2 rollouts");
    if (g.advantages.size() != g.rollouts.size())
      throw ContractViolation("group " + std::to_string(gi) + " is missing advantages");
    for (const Rollout& r : g.rollouts)
      if (r.old_logprobs.size() != r.seq.ids.size())
        throw ContractViolation("group " + std::to_string(gi) +
                                " has old_logprobs of mismatched length");
  }
}

}  // namespace

ObjectiveReport grpo_objective(const PolicyModel& model, const std::vector<RolloutGroup>& groups,
                               const PolicyParams& params, const PolicyParams& ref_params,
                               const ClipConfig& cfg) {
  if (cfg.eps_low != cfg.eps_high)
    throw ContractViolation("grpo_objective uses a symmetric clip range");
  check_group_shapes(groups);

  const int v_count = model.fmap.vocab_size;
  const int dim = model.fmap.dim();
  ObjectiveReport report;
  report.gradient = Matrix(v_count, dim);
  TokenAccumulator acc;

  const double group_weight = 1.0 / static_cast<double>(groups.size());

  for (const RolloutGroup& group : groups) {
    const double resp_weight = group_weight / static_cast<double>(group.group_size());
    for (size_t i = 0; i < group.rollouts.size(); ++i) {
      const Rollout& rollout = group.rollouts[i];
      const double adv = group.advantages[i];
      if (rollout.seq.empty()) continue;
      const double token_weight = resp_weight / static_cast<double>(rollout.seq.length());

      TokenSeq prefix;
      for (int t = 0; t < rollout.seq.length(); ++t) {
        std::vector<double> phi = featurize(model, group.prompt, prefix, t);
        std::vector<double> logp = token_log_distribution(model, params, phi);
        std::vector<double> p(logp.size());
        for (size_t v = 0; v < logp.size(); ++v) p[v] = std::exp(logp[v]);

        const TokenId tok = rollout.seq.ids[static_cast<size_t>(t)];
        const double ratio =
            importance_ratio(logp[static_cast<size_t>(tok)],
                             rollout.old_logprobs[static_cast<size_t>(t)]);

        const double unclipped = ratio * adv;
        const double clipped =
            std::clamp(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high) * adv;
        const bool use_unclipped = unclipped <= clipped;
        const double surrogate = use_unclipped ? unclipped : clipped;

        std::vector<double> ref_p = token_distribution(model, ref_params, phi);
        std::vector<double> ref_logp(ref_p.size());
        for (size_t v = 0; v < ref_p.size(); ++v) ref_logp[v] = std::log(ref_p[v]);
        const double kl = token_kl(p, ref_p);

        report.value += token_weight * (surrogate - cfg.beta * kl);

        // Surrogate gradient: adv * ratio * (e_tok - p) phi^T on the
        // unclipped branch; the clipped branch is constant in params.
        const double surr_coeff = use_unclipped ? adv * ratio : 0.0;

        // KL gradient per row k: p_k ((log p_k - log q_k) - KL) phi^T.
        double entropy = 0.0;
        for (int v = 0; v < v_count; ++v) {
          const double pv = p[static_cast<size_t>(v)];
          double coeff = surr_coeff * ((v == tok ? 1.0 : 0.0) - pv);
          coeff -= cfg.beta * pv * ((logp[static_cast<size_t>(v)] -
                                     ref_logp[static_cast<size_t>(v)]) - kl);
          coeff *= token_weight;
          double* row = &report.gradient.data[static_cast<size_t>(v) * dim];
          for (int d = 0; d < dim; ++d) row[d] += coeff * phi[static_cast<size_t>(d)];
          entropy -= pv * logp[static_cast<size_t>(v)];
        }

        acc.tokens += 1;
        acc.ratio_sum += ratio;
        acc.clipped += use_unclipped ? 0 : 1;
        acc.kl_sum += kl;
        acc.entropy_sum += entropy;
        prefix.ids.push_back(tok);
      }
    }
  }

  for (double g : report.gradient.data)
    if (!std::isfinite(g)) throw NumericalError("grpo_objective produced a non-finite gradient");

  report.diagnostics.token_count = acc.tokens;
  if (acc.tokens > 0) {
    report.diagnostics.mean_ratio = acc.ratio_sum / static_cast<double>(acc.tokens);
    report.diagnostics.clip_fraction =
        static_cast<double>(acc.clipped) / static_cast<double>(acc.tokens);
    report.diagnostics.mean_token_kl = acc.kl_sum / static_cast<double>(acc.tokens);
    report.diagnostics.mean_entropy = acc.entropy_sum / static_cast<double>(acc.tokens);
  }
  report.diagnostics.mean_reward = group_reward_mean(groups);
  report.diagnostics.kept_groups = static_cast<int>(groups.size());
  return report;
}

ObjectiveReport dapo_objective(const PolicyModel& model, const std::vector<RolloutGroup>& groups,
                               const PolicyParams& params, const ClipConfig& cfg) {
  check_group_shapes(groups);
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    int correct = correct_count(model.vocab, groups[gi]);
    if (correct <= 0 || correct >= groups[gi].group_size())
      throw ContractViolation("group " + std::to_string(gi) +
                              " violates the mixed-correctness constraint (correct=" +
                              std::to_string(correct) + " of " +
                              std::to_string(groups[gi].group_size()) + ")");
  }

  const int v_count = model.fmap.vocab_size;
  const int dim = model.fmap.dim();
  ObjectiveReport report;
  report.gradient = Matrix(v_count, dim);
  TokenAccumulator acc;

  const double group_weight = 1.0 / static_cast<double>(groups.size());

  for (const RolloutGroup& group : groups) {
    long total_tokens = 0;
    for (const Rollout& r : group.rollouts) total_tokens += r.seq.length();
    if (total_tokens == 0) continue;
    const double token_weight = group_weight / static_cast<double>(total_tokens);

    for (size_t i = 0; i < group.rollouts.size(); ++i) {
      const Rollout& rollout = group.rollouts[i];
      const double adv = group.advantages[i];

      TokenSeq prefix;
      for (int t = 0; t < rollout.seq.length(); ++t) {
        std::vector<double> phi = featurize(model, group.prompt, prefix, t);
        std::vector<double> logp = token_log_distribution(model, params, phi);

        const TokenId tok = rollout.seq.ids[static_cast<size_t>(t)];
        const double ratio =
            importance_ratio(logp[static_cast<size_t>(tok)],
                             rollout.old_logprobs[static_cast<size_t>(t)]);

        const double unclipped = ratio * adv;
        const double clipped =
            std::clamp(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high) * adv;
        const bool use_unclipped = unclipped <= clipped;
        report.value += token_weight * (use_unclipped ? unclipped : clipped);

        const double surr_coeff = use_unclipped ? adv * ratio : 0.0;
        double entropy = 0.0;
        for (int v = 0; v < v_count; ++v) {
          const double pv = std::exp(logp[static_cast<size_t>(v)]);
          const double coeff =
              token_weight * surr_coeff * ((v == tok ? 1.0 : 0.0) - pv);
          double* row = &report.gradient.data[static_cast<size_t>(v) * dim];
          for (int d = 0; d < dim; ++d) row[d] += coeff * phi[static_cast<size_t>(d)];
          entropy -= pv * logp[static_cast<size_t>(v)];
        }

        acc.tokens += 1;
        acc.ratio_sum += ratio;
        acc.clipped += use_unclipped ? 0 : 1;
        acc.entropy_sum += entropy;
        prefix.ids.push_back(tok);
      }
    }
  }

  for (double g : report.gradient.data)
    if (!std::isfinite(g)) throw NumericalError("dapo_objective produced a non-finite gradient");

  report.diagnostics.token_count = acc.tokens;
  if (acc.tokens > 0) {
    report.diagnostics.mean_ratio = acc.ratio_sum / static_cast<double>(acc.tokens);
    report.diagnostics.clip_fraction =
        static_cast<double>(acc.clipped) / static_cast<double>(acc.tokens);
    report.diagnostics.mean_entropy = acc.entropy_sum / static_cast<double>(acc.tokens);
  }
  report.diagnostics.mean_reward = group_reward_mean(groups);
  report.diagnostics.kept_groups = static_cast<int>(groups.size());
  return report;
}

std::pair<std::vector<RolloutGroup>, std::vector<RolloutGroup>> dynamic_sampling_filter(
    const Vocabulary& vocab, std::vector<RolloutGroup> groups) {
  std::vector<RolloutGroup> kept;
  std::vector<RolloutGroup> dropped;
  for (RolloutGroup& g : groups) {
    int correct = correct_count(vocab, g);
    if (correct > 0 && correct < g.group_size())
      kept.push_back(std::move(g));
    else
      dropped.push_back(std::move(g));
  }
  return {std::move(kept), std::move(dropped)};
}

}  // namespace grouprl
