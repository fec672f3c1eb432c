#pragma once

#include "grouprl/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace grouprl::corpus {

struct CaptionRecord {
  std::string id;
  std::string text;
  std::string stratum;
  std::vector<double> embedding;  // empty when absent
  int cluster = -1;               // assignment output; -1 = unset
};

// -------------------------------------------------------------------------
// Multi-panel caption splitting
// -------------------------------------------------------------------------

// Sub-figure label styles, in default precedence order. Rendering for the
// first panel: "A," "A." "A:" "(a)" "a)" "(A)".
enum class LabelStyle {
  kUpperComma,
  kUpperDot,
  kUpperColon,
  kLowerParen,
  kLowerCloseParen,
  kUpperParen,
};

const std::vector<LabelStyle>& default_label_styles();
std::string render_label(LabelStyle style, int letter_index);

struct Panel {
  std::string label;  // "a", "b", ... (empty for a whole-caption result)
  std::string subcaption;
};

struct PanelSplit {
  bool matched = false;  // false: whole caption came back as a single panel
  LabelStyle style = LabelStyle::kUpperComma;
  std::string shared_prefix;
  std::vector<Panel> panels;
};

// Detects the first style whose labels occur, at whitespace-token
// boundaries, in strict alphabetic sequence from the first letter. Text
// before the first label is shared content, prepended to every subcaption.
// Out-of-sequence labels or no style match yield a single-panel result.
PanelSplit parse_multipanel_caption(const std::string& text,
                                    const std::vector<LabelStyle>& styles =
                                        default_label_styles());

// Shared-prefix + labels + per-panel remainders, whitespace-normalized.
// Equals the normalized input; used as the reconstruction check.
std::string reconstruct_caption(const PanelSplit& split);

// -------------------------------------------------------------------------
// Cleaning filters
// -------------------------------------------------------------------------

struct RepetitionFlag {
  bool flagged = false;
  std::string token;  // offending token, lower-cased
  int count = 0;      // length of the longest offending run
};

// Flags a whitespace-delimited alphabetic token (>= 2 letters) repeated more
// than `threshold` times in direct succession, case-insensitively.
RepetitionFlag detect_repetition(const std::string& text, int threshold = 15);

struct NonLatinFlag {
  bool flagged = false;
  uint32_t code_point = 0;
  size_t byte_offset = 0;
};

// Flags the first code point inside the CJK Unified Ideographs ranges
// (base block, extensions A-F, compatibility ideographs).
NonLatinFlag detect_residual_nonlatin(const std::string& text);

// Keeps the first record of every group sharing its first `n` characters
// (code points); shorter texts key on the whole text. Idempotent.
std::vector<CaptionRecord> dedup_by_prefix(const std::vector<CaptionRecord>& records, int n = 50);

// Whole-word, case-insensitive substitutions, first-letter capitalization
// preserved. Default table: description->image, mention->image,
// mentioned->shown.
std::vector<std::pair<std::string, std::string>> default_reference_substitutions();
std::string replace_reference_terms(
    const std::string& text,
    const std::vector<std::pair<std::string, std::string>>& table =
        default_reference_substitutions());

// -------------------------------------------------------------------------
// Sampling and clustering
// -------------------------------------------------------------------------

// Proportionate stratified sampling with largest-remainder rounding; quotas
// capped at stratum size with the shortfall redistributed. Within a stratum,
// records rank by descending text length, ties by ascending id. Output
// preserves input order.
std::vector<CaptionRecord> stratified_sample(const std::vector<CaptionRecord>& records,
                                             int total);

struct KmeansResult {
  std::vector<int> assignments;
  std::vector<std::vector<double>> centroids;
  std::vector<double> wcss_history;  // one entry per Lloyd iteration
  int iterations = 0;
};

// Lloyd iterations with farthest-point seeding from the stream; empty
// clusters are repaired by reassigning the point farthest from its centroid.
KmeansResult kmeans3(const std::vector<std::vector<double>>& vectors, int k, RngStream& rng,
                     int max_iter = 100, double tol = 1e-9);

// -------------------------------------------------------------------------
// Corpus files: JSON lines with a self-describing header
// -------------------------------------------------------------------------

struct CorpusReadResult {
  std::vector<CaptionRecord> records;
  long skipped = 0;  // malformed records skipped (lenient mode only)
};

CorpusReadResult load_corpus(const std::string& path, bool strict = false);
CorpusReadResult load_corpus_stream(std::istream& in, const std::string& origin, bool strict);
void save_corpus(const std::string& path, const std::vector<CaptionRecord>& records);
void save_corpus_stream(std::ostream& out, const std::vector<CaptionRecord>& records);

}  // namespace grouprl::corpus
