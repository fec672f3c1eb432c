#pragma once

#include "grouprl/policy.hpp"
#include "grouprl/rng.hpp"
#include "grouprl/vocab.hpp"

#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

namespace testutil {

using namespace grouprl;

// Brute-force recognizer for the response grammar, independent of the
// production automaton: tries every split point of
//   THINK_OPEN body1 THINK_CLOSE ANS_OPEN body2 ANS_CLOSE [EOS]
// and accepts when some split has tag-free bodies.
inline int oracle_format(const std::vector<TokenRole>& roles_in) {
  std::vector<TokenRole> roles = roles_in;
  if (!roles.empty() && roles.back() == TokenRole::kEos) roles.pop_back();
  const size_t n = roles.size();
  if (n < 4) return 0;
  if (roles.front() != TokenRole::kThinkOpen) return 0;
  if (roles.back() != TokenRole::kAnsClose) return 0;
  for (size_t i = 1; i + 2 < n; ++i) {
    if (roles[i] != TokenRole::kThinkClose) continue;
    if (roles[i + 1] != TokenRole::kAnsOpen) continue;
    bool clean = true;
    for (size_t t = 1; t < i && clean; ++t) clean = !is_tag_role(roles[t]);
    for (size_t t = i + 2; t + 1 < n && clean; ++t) clean = !is_tag_role(roles[t]);
    if (clean) return 1;
  }
  return 0;
}

// Reduced fixture alphabet used for exhaustive grammar checks: the five
// structural tokens plus two options and one filler.
inline Vocabulary tiny_vocab() {
  std::vector<Token> tokens = {
      {"<eos>", TokenRole::kEos, 0},        {"<think>", TokenRole::kThinkOpen, 0},
      {"</think>", TokenRole::kThinkClose, 0}, {"<answer>", TokenRole::kAnsOpen, 0},
      {"</answer>", TokenRole::kAnsClose, 0},  {"A", TokenRole::kOption, 0},
      {"B", TokenRole::kOption, 1},         {"x", TokenRole::kFiller, 0},
  };
  return Vocabulary(std::move(tokens));
}

// Reduced vocabulary for gradient tests (fewer prompt symbols keeps D small).
inline Vocabulary small_vocab(int prompt_symbols) {
  std::vector<Token> tokens = {
      {"<eos>", TokenRole::kEos, 0},        {"<think>", TokenRole::kThinkOpen, 0},
      {"</think>", TokenRole::kThinkClose, 0}, {"<answer>", TokenRole::kAnsOpen, 0},
      {"</answer>", TokenRole::kAnsClose, 0},
  };
  for (int i = 0; i < kNumOptions; ++i)
    tokens.push_back({std::string(1, option_letter(i)), TokenRole::kOption, i});
  for (int i = 0; i < prompt_symbols; ++i)
    tokens.push_back({"S" + std::to_string(i), TokenRole::kPromptSymbol, i});
  return Vocabulary(std::move(tokens));
}

inline PolicyParams gaussian_params(const FeatureMap& fmap, RngStream& rng, double scale) {
  PolicyParams p = PolicyParams::zeros(fmap);
  for (double& w : p.weights.data) w = scale * rng.next_gaussian();
  return p;
}

inline double frobenius(const Matrix& m) {
  double s = 0.0;
  for (double x : m.data) s += x * x;
  return std::sqrt(s);
}

inline double matrix_rel_error(const Matrix& a, const Matrix& b) {
  double diff = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - b.data[i];
    diff += d * d;
  }
  double scale = std::max({frobenius(a), frobenius(b), 1e-12});
  return std::sqrt(diff) / scale;
}

// Central differences of a scalar function of the params, entry by entry.
inline Matrix central_difference(const PolicyParams& params, double h,
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

// Unique temp path under the system temp dir; removed by the caller.
inline std::string temp_path(const std::string& tag) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() / "grouprl_tests";
  std::filesystem::create_directories(dir);
  return (dir / (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++)))
      .string();
}

inline std::string read_file(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return {};
  std::string data;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) data.append(buf, n);
  std::fclose(f);
  return data;
}

inline void write_file(const std::string& path, const std::string& data) {
  FILE* f = std::fopen(path.c_str(), "wb");
  std::fwrite(data.data(), 1, data.size(), f);
  std::fclose(f);
}

}  // namespace testutil
