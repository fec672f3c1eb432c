#include "grouprl/policy.hpp"

#include "grouprl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace grouprl {

std::vector<double> featurize(const PolicyModel& model, const TokenSeq& prompt,
                              const TokenSeq& prefix, int position) {
  if (position != prefix.length())
    throw ContractViolation("featurize: position " + std::to_string(position) +
                            " != prefix length " + std::to_string(prefix.length()));
  if (position >= model.fmap.l_hard)
    throw ContractViolation("featurize: position " + std::to_string(position) +
                            " not below hard cap " + std::to_string(model.fmap.l_hard));

  const FeatureMap& fmap = model.fmap;
  std::vector<double> phi(static_cast<size_t>(fmap.dim()), 0.0);

  int symbol_total = 0;
  int counts[kNumPromptSymbols] = {0};
  for (TokenId id : prompt.ids) {
    const Token& t = model.vocab.token(id);
    if (t.role == TokenRole::kPromptSymbol) {
      ++counts[t.arg];
      ++symbol_total;
    }
  }
  if (symbol_total > 0) {
    for (int s = 0; s < kNumPromptSymbols; ++s)
      phi[static_cast<size_t>(s)] = static_cast<double>(counts[s]) / symbol_total;
  }

  if (position > 0) {
    TokenId last = prefix.ids.back();
    if (last < 0 || last >= fmap.vocab_size)
      throw ContractViolation("featurize: token id " + std::to_string(last) + " out of range");
    phi[static_cast<size_t>(fmap.last_token_col(last))] = 1.0;
  }

  phi[static_cast<size_t>(fmap.bucket_col(fmap.bucket_of(position)))] = 1.0;
  phi[static_cast<size_t>(fmap.bias_col())] = 1.0;
  return phi;
}

std::vector<double> token_log_distribution(const PolicyModel& model, const PolicyParams& params,
                                           const std::vector<double>& features) {
  const int v_count = model.fmap.vocab_size;
  const int dim = model.fmap.dim();
  if (params.weights.rows != v_count || params.weights.cols != dim)
    throw ContractViolation("params shape does not match model");
  if (static_cast<int>(features.size()) != dim)
    throw ContractViolation("feature vector has wrong dimension");

  std::vector<double> logits(static_cast<size_t>(v_count), 0.0);
  for (int v = 0; v < v_count; ++v) {
    double acc = 0.0;
    const double* row = &params.weights.data[static_cast<size_t>(v) * dim];
    for (int d = 0; d < dim; ++d) acc += row[d] * features[static_cast<size_t>(d)];
    if (!std::isfinite(acc))
      throw NumericalError("non-finite logit for token row " + std::to_string(v) + " ('" +
                           model.vocab.token(v).name + "')");
    logits[static_cast<size_t>(v)] = acc;
  }

  double max_logit = logits[0];
  for (double l : logits) max_logit = std::max(max_logit, l);
  double sum_exp = 0.0;
  for (double l : logits) sum_exp += std::exp(l - max_logit);
  double lse = max_logit + std::log(sum_exp);

  for (double& l : logits) l -= lse;
  return logits;
}

std::vector<double> token_distribution(const PolicyModel& model, const PolicyParams& params,
                                       const std::vector<double>& features) {
  std::vector<double> p = token_log_distribution(model, params, features);
  for (double& x : p) x = std::exp(x);
  return p;
}

namespace {

TokenId inverse_cdf_pick(const std::vector<double>& probs, double u) {
  double cum = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(probs.size() - 1);  // rounding guard
}

TokenId argmax_lowest_id(const std::vector<double>& probs) {
  TokenId best = 0;
  for (size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[static_cast<size_t>(best)]) best = static_cast<TokenId>(i);
  return best;
}

}  // namespace

SampledSequence sample_sequence(const PolicyModel& model, const PolicyParams& params,
                                const TokenSeq& prompt, RngStream& rng, int l_hard) {
  if (l_hard < 1) throw ContractViolation("sample_sequence: l_hard must be >= 1");
  SampledSequence out;
  for (int pos = 0; pos < l_hard; ++pos) {
    std::vector<double> phi = featurize(model, prompt, out.seq, pos);
    std::vector<double> logp = token_log_distribution(model, params, phi);
    std::vector<double> p(logp.size());
    for (size_t i = 0; i < logp.size(); ++i) p[i] = std::exp(logp[i]);
    TokenId pick = inverse_cdf_pick(p, rng.next_double());
    out.seq.ids.push_back(pick);
    out.logprobs.push_back(logp[static_cast<size_t>(pick)]);
    if (pick == model.vocab.eos()) {
      out.seq.terminated = true;
      break;
    }
  }
  return out;
}

SampledSequence greedy_sequence(const PolicyModel& model, const PolicyParams& params,
                                const TokenSeq& prompt, int l_hard) {
  if (l_hard < 1) throw ContractViolation("greedy_sequence: l_hard must be >= 1");
  SampledSequence out;
  for (int pos = 0; pos < l_hard; ++pos) {
    std::vector<double> phi = featurize(model, prompt, out.seq, pos);
    std::vector<double> logp = token_log_distribution(model, params, phi);
    TokenId pick = argmax_lowest_id(logp);
    out.seq.ids.push_back(pick);
    out.logprobs.push_back(logp[static_cast<size_t>(pick)]);
    if (pick == model.vocab.eos()) {
      out.seq.terminated = true;
      break;
    }
  }
  return out;
}

Matrix grad_log_prob(const PolicyModel& model, const PolicyParams& params, const TokenSeq& prompt,
                     const TokenSeq& seq) {
  const int dim = model.fmap.dim();
  Matrix grad(model.fmap.vocab_size, dim);
  TokenSeq prefix;
  for (int pos = 0; pos < seq.length(); ++pos) {
    std::vector<double> phi = featurize(model, prompt, prefix, pos);
    std::vector<double> p = token_distribution(model, params, phi);
    TokenId target = seq.ids[static_cast<size_t>(pos)];
    for (int v = 0; v < model.fmap.vocab_size; ++v) {
      double coeff = (v == target ? 1.0 : 0.0) - p[static_cast<size_t>(v)];
      double* row = &grad.data[static_cast<size_t>(v) * dim];
      for (int d = 0; d < dim; ++d) row[d] += coeff * phi[static_cast<size_t>(d)];
    }
    prefix.ids.push_back(target);
  }
  return grad;
}

std::vector<double> sequence_token_logprobs(const PolicyModel& model, const PolicyParams& params,
                                            const TokenSeq& prompt, const TokenSeq& seq) {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(seq.length()));
  TokenSeq prefix;
  for (int pos = 0; pos < seq.length(); ++pos) {
    std::vector<double> phi = featurize(model, prompt, prefix, pos);
    std::vector<double> logp = token_log_distribution(model, params, phi);
    TokenId target = seq.ids[static_cast<size_t>(pos)];
    if (target < 0 || target >= model.fmap.vocab_size)
      throw ContractViolation("sequence token id out of range");
    out.push_back(logp[static_cast<size_t>(target)]);
    prefix.ids.push_back(target);
  }
  return out;
}

PolicyParams template_params(const PolicyModel& model, double skeleton_gain, double option_gain) {
  if (!model.vocab.has_full_task_shape())
    throw ContractViolation("template_params requires the full task vocabulary");
  PolicyParams p = PolicyParams::zeros(model.fmap);
  const FeatureMap& fmap = model.fmap;
  const Vocabulary& vocab = model.vocab;

  // Position 0 (and its bucket) opens the think block; every later move is
  // keyed off the last emitted token with twice the gain so it wins the
  // bucket-0 overlap at position 1.
  p.weights.at(vocab.think_open(), fmap.bucket_col(0)) = skeleton_gain;
  p.weights.at(vocab.think_close(), fmap.last_token_col(vocab.think_open())) = 2.0 * skeleton_gain;
  p.weights.at(vocab.ans_open(), fmap.last_token_col(vocab.think_close())) = 2.0 * skeleton_gain;
  for (int o = 0; o < kNumOptions; ++o)
    p.weights.at(vocab.option(o), fmap.last_token_col(vocab.ans_open())) = option_gain;
  for (int o = 0; o < kNumOptions; ++o)
    p.weights.at(vocab.ans_close(), fmap.last_token_col(vocab.option(o))) = 2.0 * skeleton_gain;
  p.weights.at(vocab.eos(), fmap.last_token_col(vocab.ans_close())) = 2.0 * skeleton_gain;
  return p;
}

}  // namespace grouprl
