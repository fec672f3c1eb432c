#pragma once

#include "grouprl/rng.hpp"
#include "grouprl/vocab.hpp"

#include <cstdint>
#include <vector>

namespace grouprl {

// Dense row-major matrix of doubles. Deliberately minimal: the policy is
// small enough that plain loops beat any linear-algebra dependency, and the
// explicit loops make accumulation order (and hence bit-reproducibility)
// obvious.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

// The policy conditions on (prompt, generated prefix, position) through an
// explicit feature vector with four blocks:
//
//   [0, 6)            normalized prompt-symbol counts
//   [6, 6+V)          one-hot of the last emitted token (all zero at pos 0)
//   [6+V, 6+V+P)      one-hot position bucket, bucket = floor(pos*P/L_hard)
//   [6+V+P]           constant bias 1
//
// so D = 6 + V + P + 1.
struct FeatureMap {
  int vocab_size = 0;
  int position_buckets = 8;
  int l_hard = 12;

  int dim() const { return kNumPromptSymbols + vocab_size + position_buckets + 1; }
  int bias_col() const { return dim() - 1; }
  int last_token_col(TokenId id) const { return kNumPromptSymbols + id; }
  int bucket_col(int bucket) const { return kNumPromptSymbols + vocab_size + bucket; }
  int bucket_of(int position) const {
    int b = position * position_buckets / l_hard;
    return b < position_buckets ? b : position_buckets - 1;
  }
};

// Weight matrix of the linear-softmax policy, shape V x D. A frozen copy of
// the same struct serves as the reference policy.
struct PolicyParams {
  Matrix weights;
  int32_t version = 1;

  static PolicyParams zeros(const FeatureMap& fmap) {
    PolicyParams p;
    p.weights = Matrix(fmap.vocab_size, fmap.dim());
    return p;
  }
};

// Architecture bundle shared by every operation that re-evaluates the policy.
struct PolicyModel {
  Vocabulary vocab;
  FeatureMap fmap;

  explicit PolicyModel(Vocabulary v, int position_buckets = 8, int l_hard = 12)
      : vocab(std::move(v)), fmap{vocab.size(), position_buckets, l_hard} {}
};

// position must equal prefix.length() and lie below L_hard.
std::vector<double> featurize(const PolicyModel& model, const TokenSeq& prompt,
                              const TokenSeq& prefix, int position);

// Log-probabilities over the vocabulary via stable log-sum-exp.
std::vector<double> token_log_distribution(const PolicyModel& model, const PolicyParams& params,
                                           const std::vector<double>& features);

// Probability vector: entries positive, summing to 1 within 1e-12.
std::vector<double> token_distribution(const PolicyModel& model, const PolicyParams& params,
                                       const std::vector<double>& features);

struct SampledSequence {
  TokenSeq seq;
  std::vector<double> logprobs;  // one per emitted token, under the sampling params
};

// Inverse-CDF categorical sampling in token-id order; stops at EOS or after
// l_hard tokens. Cached logprobs equal a recomputation via
// token_log_distribution bit-for-bit (same code path).
SampledSequence sample_sequence(const PolicyModel& model, const PolicyParams& params,
                                const TokenSeq& prompt, RngStream& rng, int l_hard);

// Greedy decode; probability ties break toward the lowest token id.
SampledSequence greedy_sequence(const PolicyModel& model, const PolicyParams& params,
                                const TokenSeq& prompt, int l_hard);

// Exact gradient of log pi(seq | prompt) with respect to the weight matrix:
//   sum_t (e_{o_t} - pi(.|s_t)) phi_t^T
Matrix grad_log_prob(const PolicyModel& model, const PolicyParams& params, const TokenSeq& prompt,
                     const TokenSeq& seq);

// Log-probabilities of each token of seq under params, recomputed from the
// matching states. Used for importance ratios and consistency checks.
std::vector<double> sequence_token_logprobs(const PolicyModel& model, const PolicyParams& params,
                                            const TokenSeq& prompt, const TokenSeq& seq);

// Template initialization: deterministic skeleton
// <think></think><answer> X </answer><eos> with the answer slot uniform over
// the six options. Gives a format-capable but answer-agnostic starting point
// for RL, playing the part of an instruction-tuned checkpoint.
PolicyParams template_params(const PolicyModel& model, double skeleton_gain = 10.0,
                             double option_gain = 4.0);

}  // namespace grouprl
