#include "grouprl/corpus.hpp"

#include "grouprl/errors.hpp"
#include "grouprl/utf8.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace grouprl::corpus {

using nlohmann::json;

namespace {

constexpr const char* kCorpusFormat = "grouprl.corpus";
constexpr int kCorpusVersion = 1;

struct TokenSpan {
  size_t begin = 0;
  size_t end = 0;  // one past the last byte
};

std::vector<TokenSpan> whitespace_tokens(const std::string& text) {
  std::vector<TokenSpan> tokens;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    size_t begin = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    tokens.push_back({begin, i});
  }
  return tokens;
}

std::string normalize_ws(const std::string& text) {
  std::string out;
  bool in_space = true;  // swallow leading whitespace
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(c);
  }
  return out;
}

std::string trim(const std::string& s) {
  size_t a = 0;
  size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string lower_ascii(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Letter index when the token is this style's label, else -1.
int match_label(LabelStyle style, const std::string& token) {
  auto letter_at = [&](size_t pos, bool upper) -> int {
    if (pos >= token.size()) return -1;
    char c = token[pos];
    if (upper && c >= 'A' && c <= 'Z') return c - 'A';
    if (!upper && c >= 'a' && c <= 'z') return c - 'a';
    return -1;
  };
  switch (style) {
    case LabelStyle::kUpperComma:
      if (token.size() == 2 && token[1] == ',') return letter_at(0, true);
      return -1;
    case LabelStyle::kUpperDot:
      if (token.size() == 2 && token[1] == '.') return letter_at(0, true);
      return -1;
    case LabelStyle::kUpperColon:
      if (token.size() == 2 && token[1] == ':') return letter_at(0, true);
      return -1;
    case LabelStyle::kLowerParen:
      if (token.size() == 3 && token[0] == '(' && token[2] == ')') return letter_at(1, false);
      return -1;
    case LabelStyle::kLowerCloseParen:
      if (token.size() == 2 && token[1] == ')') return letter_at(0, false);
      return -1;
    case LabelStyle::kUpperParen:
      if (token.size() == 3 && token[0] == '(' && token[2] == ')') return letter_at(1, true);
      return -1;
  }
  return -1;
}

char style_letter(LabelStyle style, int index) {
  bool upper = style == LabelStyle::kUpperComma || style == LabelStyle::kUpperDot ||
               style == LabelStyle::kUpperColon || style == LabelStyle::kUpperParen;
  return static_cast<char>((upper ? 'A' : 'a') + index);
}

bool is_alpha_token(const std::string& tok) {
  if (tok.size() < 2) return false;
  for (char c : tok)
    if (!std::isalpha(static_cast<unsigned char>(c))) return false;
  return true;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

}  // namespace

const std::vector<LabelStyle>& default_label_styles() {
  static const std::vector<LabelStyle> styles = {
      LabelStyle::kUpperComma,     LabelStyle::kUpperDot,   LabelStyle::kUpperColon,
      LabelStyle::kLowerParen,     LabelStyle::kLowerCloseParen,
      LabelStyle::kUpperParen,
  };
  return styles;
}

std::string render_label(LabelStyle style, int letter_index) {
  char letter = style_letter(style, letter_index);
  switch (style) {
    case LabelStyle::kUpperComma:
      return std::string(1, letter) + ",";
    case LabelStyle::kUpperDot:
      return std::string(1, letter) + ".";
    case LabelStyle::kUpperColon:
      return std::string(1, letter) + ":";
    case LabelStyle::kLowerParen:
    case LabelStyle::kUpperParen:
      return "(" + std::string(1, letter) + ")";
    case LabelStyle::kLowerCloseParen:
      return std::string(1, letter) + ")";
  }
  return "";
}

PanelSplit parse_multipanel_caption(const std::string& text,
                                    const std::vector<LabelStyle>& styles) {
  const std::vector<TokenSpan> tokens = whitespace_tokens(text);

  for (LabelStyle style : styles) {
    std::vector<TokenSpan> labels;
    bool broken = false;
    for (const TokenSpan& tok : tokens) {
      const std::string word = text.substr(tok.begin, tok.end - tok.begin);
      int idx = match_label(style, word);
      if (idx < 0) continue;
      if (idx == static_cast<int>(labels.size())) {
        labels.push_back(tok);
      } else {
        broken = true;  // labels out of sequence
        break;
      }
    }
    if (broken || labels.size() < 2) continue;

    PanelSplit split;
    split.matched = true;
    split.style = style;
    split.shared_prefix = trim(text.substr(0, labels[0].begin));
    for (size_t i = 0; i < labels.size(); ++i) {
      const size_t content_begin = labels[i].end;
      const size_t content_end = i + 1 < labels.size() ? labels[i + 1].begin : text.size();
      std::string content = trim(text.substr(content_begin, content_end - content_begin));
      Panel panel;
      panel.label = std::string(1, style_letter(style, static_cast<int>(i)));
      panel.subcaption = split.shared_prefix.empty()
                             ? content
                             : (content.empty() ? split.shared_prefix
                                                : split.shared_prefix + " " + content);
      split.panels.push_back(std::move(panel));
    }
    return split;
  }

  PanelSplit whole;
  whole.matched = false;
  whole.panels.push_back({"", text});
  return whole;
}

std::string reconstruct_caption(const PanelSplit& split) {
  if (!split.matched) return normalize_ws(split.panels.at(0).subcaption);
  std::string out = split.shared_prefix;
  for (size_t i = 0; i < split.panels.size(); ++i) {
    std::string content = split.panels[i].subcaption;
    if (!split.shared_prefix.empty()) {
      // Strip the prepended shared prefix back off.
      content = trim(content.substr(std::min(content.size(), split.shared_prefix.size())));
    }
    if (!out.empty()) out += " ";
    out += render_label(split.style, static_cast<int>(i));
    if (!content.empty()) out += " " + content;
  }
  return normalize_ws(out);
}

RepetitionFlag detect_repetition(const std::string& text, int threshold) {
  if (threshold < 2) throw ContractViolation("detect_repetition requires threshold >= 2");
  RepetitionFlag flag;
  std::string run_token;
  int run_len = 0;
  for (const TokenSpan& span : whitespace_tokens(text)) {
    std::string word = text.substr(span.begin, span.end - span.begin);
    if (!is_alpha_token(word)) {
      run_token.clear();
      run_len = 0;
      continue;
    }
    std::string folded = lower_ascii(word);
    if (folded == run_token) {
      ++run_len;
    } else {
      run_token = folded;
      run_len = 1;
    }
    if (run_len > threshold && run_len > flag.count) {
      flag.flagged = true;
      flag.token = run_token;
      flag.count = run_len;
    }
  }
  return flag;
}

NonLatinFlag detect_residual_nonlatin(const std::string& text) {
  size_t pos = 0;
  while (pos < text.size()) {
    const size_t at = pos;
    const uint32_t cp = utf8::decode(text, pos);
    const bool cjk = (cp >= 0x4E00 && cp <= 0x9FFF) ||    // base block
                     (cp >= 0x3400 && cp <= 0x4DBF) ||    // extension A
                     (cp >= 0x20000 && cp <= 0x2EBEF) ||  // extensions B-F
                     (cp >= 0xF900 && cp <= 0xFAFF) ||    // compatibility
                     (cp >= 0x2F800 && cp <= 0x2FA1F);    // compatibility supplement
    if (cjk) return {true, cp, at};
  }
  return {};
}

std::vector<CaptionRecord> dedup_by_prefix(const std::vector<CaptionRecord>& records, int n) {
  if (n < 1) throw ContractViolation("dedup_by_prefix requires n >= 1");
  std::vector<CaptionRecord> kept;
  std::unordered_set<std::string> seen;
  for (const CaptionRecord& rec : records) {
    const size_t bytes = utf8::prefix_bytes(rec.text, static_cast<size_t>(n));
    std::string key = rec.text.substr(0, bytes);
    if (seen.insert(std::move(key)).second) kept.push_back(rec);
  }
  return kept;
}

std::vector<std::pair<std::string, std::string>> default_reference_substitutions() {
  return {{"description", "image"}, {"mention", "image"}, {"mentioned", "shown"}};
}

std::string replace_reference_terms(
    const std::string& text, const std::vector<std::pair<std::string, std::string>>& table) {
  std::unordered_map<std::string, std::string> lookup;
  for (const auto& [from, to] : table) lookup[lower_ascii(from)] = to;

  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    if (!std::isalpha(static_cast<unsigned char>(text[i]))) {
      out.push_back(text[i]);
      ++i;
      continue;
    }
    size_t begin = i;
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
    std::string word = text.substr(begin, i - begin);
    auto it = lookup.find(lower_ascii(word));
    if (it == lookup.end()) {
      out += word;
      continue;
    }
    std::string replacement = it->second;
    if (std::isupper(static_cast<unsigned char>(word[0])) && !replacement.empty())
      replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
    out += replacement;
  }
  return out;
}

std::vector<CaptionRecord> stratified_sample(const std::vector<CaptionRecord>& records,
                                             int total) {
  if (total < 0) throw ContractViolation("stratified_sample requires total >= 0");
  if (total > static_cast<int>(records.size()))
    throw ConfigError("stratified_sample: total " + std::to_string(total) +
                      " exceeds record count " + std::to_string(records.size()));

  // Stratum -> record indices, strata ordered by label for deterministic
  // remainder tie-breaks.
  std::unordered_map<std::string, std::vector<size_t>> by_stratum;
  for (size_t i = 0; i < records.size(); ++i) by_stratum[records[i].stratum].push_back(i);
  std::vector<std::string> strata;
  strata.reserve(by_stratum.size());
  for (const auto& [label, _] : by_stratum) strata.push_back(label);
  std::sort(strata.begin(), strata.end());

  // Largest-remainder quotas. Whenever a quota exceeds its stratum size the
  // stratum is capped and removed, and the rest is redistributed among the
  // remaining strata.
  std::unordered_map<std::string, int> quota;
  std::vector<std::string> open = strata;
  int remaining_total = total;
  while (remaining_total > 0 && !open.empty()) {
    long open_size = 0;
    for (const std::string& s : open) open_size += static_cast<long>(by_stratum[s].size());

    struct Share {
      std::string stratum;
      int allotted;
      double remainder;
      long size;
    };
    std::vector<Share> shares;
    long base_sum = 0;
    for (const std::string& s : open) {
      const long size = static_cast<long>(by_stratum[s].size());
      const double exact =
          static_cast<double>(remaining_total) * static_cast<double>(size) / open_size;
      Share share{s, static_cast<int>(std::floor(exact)), exact - std::floor(exact), size};
      base_sum += share.allotted;
      shares.push_back(std::move(share));
    }
    int leftover = remaining_total - static_cast<int>(base_sum);
    std::sort(shares.begin(), shares.end(), [](const Share& a, const Share& b) {
      if (a.remainder != b.remainder) return a.remainder > b.remainder;
      if (a.size != b.size) return a.size > b.size;
      return a.stratum < b.stratum;
    });
    for (Share& s : shares) {
      if (leftover <= 0) break;
      ++s.allotted;
      --leftover;
    }

    std::vector<std::string> next_open;
    bool any_capped = false;
    for (const Share& s : shares) {
      if (s.allotted > s.size) {
        quota[s.stratum] = static_cast<int>(s.size);
        remaining_total -= static_cast<int>(s.size);
        any_capped = true;
      } else {
        next_open.push_back(s.stratum);
      }
    }
    if (!any_capped) {
      for (const Share& s : shares) quota[s.stratum] = s.allotted;
      remaining_total = 0;
    } else {
      std::sort(next_open.begin(), next_open.end());
      open = std::move(next_open);
    }
  }

  // Within each stratum: longest caption first, ties by ascending id.
  std::vector<char> selected(records.size(), 0);
  for (const std::string& s : strata) {
    const int q = quota.count(s) ? quota[s] : 0;
    if (q <= 0) continue;
    std::vector<size_t> order = by_stratum[s];
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      const size_t la = records[a].text.size();
      const size_t lb = records[b].text.size();
      if (la != lb) return la > lb;
      return records[a].id < records[b].id;
    });
    for (int i = 0; i < q && i < static_cast<int>(order.size()); ++i) selected[order[static_cast<size_t>(i)]] = 1;
  }

  std::vector<CaptionRecord> out;
  for (size_t i = 0; i < records.size(); ++i)
    if (selected[i]) out.push_back(records[i]);
  return out;
}

KmeansResult kmeans3(const std::vector<std::vector<double>>& vectors, int k, RngStream& rng,
                     int max_iter, double tol) {
  if (vectors.empty()) throw ContractViolation("kmeans3 requires at least one vector");
  if (k < 1 || k > static_cast<int>(vectors.size()))
    throw ContractViolation("kmeans3 requires 1 <= k <= vector count");
  const size_t dim = vectors[0].size();
  for (const auto& v : vectors)
    if (v.size() != dim) throw ContractViolation("kmeans3: vectors differ in dimension");

  const size_t n = vectors.size();
  KmeansResult result;
  result.centroids.reserve(static_cast<size_t>(k));

  // Farthest-point seeding: random first pick, then repeated max-min.
  result.centroids.push_back(vectors[rng.next_below(n)]);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(result.centroids.size()) < k) {
    size_t far = 0;
    double far_d = -1.0;
    for (size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(vectors[i], result.centroids.back()));
      if (nearest[i] > far_d) {
        far_d = nearest[i];
        far = i;
      }
    }
    result.centroids.push_back(vectors[far]);
  }

  result.assignments.assign(n, 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    // Assign: nearest centroid, ties to the lowest index.
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(vectors[i], result.centroids[0]);
      for (int c = 1; c < k; ++c) {
        double d = sq_dist(vectors[i], result.centroids[static_cast<size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      result.assignments[i] = best;
    }

    // Repair empty clusters with the globally farthest point from a cluster
    // that can spare one.
    std::vector<int> sizes(static_cast<size_t>(k), 0);
    for (int a : result.assignments) ++sizes[static_cast<size_t>(a)];
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<size_t>(c)] > 0) continue;
      size_t far = n;
      double far_d = -1.0;
      for (size_t i = 0; i < n; ++i) {
        if (sizes[static_cast<size_t>(result.assignments[i])] <= 1) continue;
        double d = sq_dist(vectors[i],
                           result.centroids[static_cast<size_t>(result.assignments[i])]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) break;  // nothing sparable
      --sizes[static_cast<size_t>(result.assignments[far])];
      result.assignments[far] = c;
      ++sizes[static_cast<size_t>(c)];
    }

    // Update step.
    std::vector<std::vector<double>> next(static_cast<size_t>(k),
                                          std::vector<double>(dim, 0.0));
    for (size_t i = 0; i < n; ++i) {
      auto& acc = next[static_cast<size_t>(result.assignments[i])];
      for (size_t d = 0; d < dim; ++d) acc[d] += vectors[i][d];
    }
    double movement = 0.0;
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<size_t>(c)] == 0) {
        next[static_cast<size_t>(c)] = result.centroids[static_cast<size_t>(c)];
        continue;
      }
      for (size_t d = 0; d < dim; ++d)
        next[static_cast<size_t>(c)][d] /= static_cast<double>(sizes[static_cast<size_t>(c)]);
      movement = std::max(movement,
                          std::sqrt(sq_dist(next[static_cast<size_t>(c)],
                                            result.centroids[static_cast<size_t>(c)])));
    }
    result.centroids = std::move(next);

    double wcss = 0.0;
    for (size_t i = 0; i < n; ++i)
      wcss += sq_dist(vectors[i], result.centroids[static_cast<size_t>(result.assignments[i])]);
    result.wcss_history.push_back(wcss);
    result.iterations = iter + 1;

    if (movement < tol) break;
  }
  return result;
}

CorpusReadResult load_corpus_stream(std::istream& in, const std::string& origin, bool strict) {
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw ParseError(origin, 1, "missing header line");
  ++line_no;
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(origin, line_no, std::string("bad header: ") + e.what());
  }
  if (!header.contains("format") || header["format"] != kCorpusFormat)
    throw ParseError(origin, line_no, "not a corpus file");
  if (!header.contains("version") || !header["version"].is_number_integer())
    throw ParseError(origin, line_no, "header lacks integer version");
  if (header["version"].get<int>() != kCorpusVersion)
    throw VersionError(origin + ": unsupported corpus version " + header["version"].dump());

  CorpusReadResult result;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json rec = json::parse(line);
      CaptionRecord r;
      r.id = rec.at("id").get<std::string>();
      r.text = rec.at("text").get<std::string>();
      r.stratum = rec.value("stratum", std::string{});
      if (rec.contains("embedding"))
        r.embedding = rec["embedding"].get<std::vector<double>>();
      if (rec.contains("cluster")) r.cluster = rec["cluster"].get<int>();
      result.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      if (strict) throw ParseError(origin, line_no, std::string("malformed record: ") + e.what());
      ++result.skipped;
    }
  }
  return result;
}

CorpusReadResult load_corpus(const std::string& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
  return load_corpus_stream(in, path, strict);
}

void save_corpus_stream(std::ostream& out, const std::vector<CaptionRecord>& records) {
  json header;
  header["format"] = kCorpusFormat;
  header["version"] = kCorpusVersion;
  out << header.dump() << "\n";
  for (const CaptionRecord& r : records) {
    json rec;
    rec["id"] = r.id;
    rec["text"] = r.text;
    rec["stratum"] = r.stratum;
    if (!r.embedding.empty()) rec["embedding"] = r.embedding;
    if (r.cluster >= 0) rec["cluster"] = r.cluster;
    out << rec.dump() << "\n";
  }
}

void save_corpus(const std::string& path, const std::vector<CaptionRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  save_corpus_stream(out, records);
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

}  // namespace grouprl::corpus
