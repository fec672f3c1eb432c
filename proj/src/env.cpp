#include "grouprl/env.hpp"

#include "grouprl/errors.hpp"

#include <json.hpp>

#include <fstream>

namespace grouprl {

using nlohmann::json;

namespace {

constexpr const char* kDatasetFormat = "grouprl.dataset";
constexpr int kDatasetVersion = 1;

// One boosted symbol guarantees a clear majority most draws; ties redraw.
constexpr double kBoostProbability = 0.5;

}  // namespace

McqItem generate_item(const Vocabulary& vocab, RngStream& rng, int n, const std::string& stratum,
                      const std::string& id) {
  if (n < 3) throw ContractViolation("generate_item requires n >= 3");
  if (!vocab.has_full_task_shape())
    throw ContractViolation("generate_item requires the full task vocabulary");

  McqItem item;
  item.id = id;
  item.stratum = stratum;

  const int designated = static_cast<int>(rng.next_below(kNumPromptSymbols));
  for (;;) {
    std::vector<TokenId> ids;
    int counts[kNumPromptSymbols] = {0};
    ids.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      int symbol = rng.next_double() < kBoostProbability
                       ? designated
                       : static_cast<int>(rng.next_below(kNumPromptSymbols));
      ids.push_back(vocab.prompt_symbol(symbol));
      ++counts[symbol];
    }
    int best = 0;
    bool tie = false;
    for (int s = 1; s < kNumPromptSymbols; ++s) {
      if (counts[s] > counts[best]) {
        best = s;
        tie = false;
      } else if (counts[s] == counts[best]) {
        tie = true;
      }
    }
    if (tie) continue;
    item.prompt.ids = std::move(ids);
    item.answer_option = best;
    return item;
  }
}

std::vector<McqItem> generate_dataset(const Vocabulary& vocab, uint64_t seed, int count,
                                      int prompt_len, int strata_count) {
  std::vector<McqItem> items;
  items.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    RngStream rng = derive_stream(seed, 0x17E5u, static_cast<uint64_t>(i));
    std::string stratum = "sf" + std::to_string(i % strata_count);
    items.push_back(generate_item(vocab, rng, prompt_len, stratum, "item-" + std::to_string(i)));
  }
  return items;
}

bool is_equivalent(const Vocabulary& vocab, int answer_option, const TokenSeq& response) {
  AnswerExtraction ex = extract_answer(vocab, response);
  return ex.found && ex.option_index == answer_option;
}

void save_dataset(const std::string& path, const Vocabulary& vocab,
                  const std::vector<McqItem>& items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");

  json header;
  header["format"] = kDatasetFormat;
  header["version"] = kDatasetVersion;
  out << header.dump() << "\n";

  for (const McqItem& item : items) {
    json rec;
    rec["id"] = item.id;
    json prompt = json::array();
    for (TokenId id : item.prompt.ids) prompt.push_back(vocab.token(id).name);
    rec["prompt"] = std::move(prompt);
    rec["answer"] = std::string(1, item.answer_letter());
    rec["stratum"] = item.stratum;
    out << rec.dump() << "\n";
  }
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

std::vector<McqItem> load_dataset(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header line");
  ++line_no;
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(path, line_no, std::string("bad header: ") + e.what());
  }
  if (!header.contains("format") || header["format"] != kDatasetFormat)
    throw ParseError(path, line_no, "not a dataset file");
  if (!header.contains("version") || !header["version"].is_number_integer())
    throw ParseError(path, line_no, "header lacks integer version");
  if (header["version"].get<int>() != kDatasetVersion)
    throw VersionError(path + ": unsupported dataset version " +
                       header["version"].dump() + " (expected " +
                       std::to_string(kDatasetVersion) + ")");

  std::vector<McqItem> items;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
      McqItem item;
      item.id = rec.at("id").get<std::string>();
      item.stratum = rec.at("stratum").get<std::string>();
      std::string answer = rec.at("answer").get<std::string>();
      if (answer.size() != 1 || option_index_from_letter(answer[0]) < 0)
        throw ParseError(path, line_no, "answer must be a letter A..F");
      item.answer_option = option_index_from_letter(answer[0]);
      for (const auto& name : rec.at("prompt")) {
        TokenId id = vocab.id_of(name.get<std::string>());
        if (id < 0)
          throw ParseError(path, line_no, "unknown token '" + name.get<std::string>() + "'");
        item.prompt.ids.push_back(id);
      }
      if (item.prompt.empty()) throw ParseError(path, line_no, "empty prompt");
      items.push_back(std::move(item));
    } catch (const ParseError&) {
      throw;
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, std::string("malformed record: ") + e.what());
    }
  }
  return items;
}

}  // namespace grouprl
