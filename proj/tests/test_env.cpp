#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grouprl/env.hpp"
#include "grouprl/errors.hpp"
#include "grouprl/trainer.hpp"

#include "support/test_util.hpp"

#include <filesystem>
#include <map>

using namespace grouprl;
using namespace testutil;

TEST_CASE("generate_item") {
  Vocabulary vocab = Vocabulary::task_vocab();

  SUBCASE("answer maps the strict-majority symbol through A..F") {
    RngStream rng = derive_stream(1, 2, 3);
    McqItem item = generate_item(vocab, rng, 10, "sf0", "x");
    std::map<int, int> counts;
    for (TokenId id : item.prompt.ids) counts[vocab.token(id).arg]++;
    int best_symbol = -1;
    int best = -1;
    int ties = 0;
    for (auto [sym, c] : counts) {
      if (c > best) {
        best = c;
        best_symbol = sym;
        ties = 1;
      } else if (c == best) {
        ++ties;
      }
    }
    CHECK(ties == 1);
    CHECK(item.answer_option == best_symbol);
    CHECK(item.answer_letter() == option_letter(best_symbol));
  }

  SUBCASE("every generated item has a unique majority") {
    for (int i = 0; i < 500; ++i) {
      RngStream rng = derive_stream(7, static_cast<uint64_t>(i));
      McqItem item = generate_item(vocab, rng, 10, "sf0", "x");
      std::map<int, int> counts;
      for (TokenId id : item.prompt.ids) counts[vocab.token(id).arg]++;
      const int answer_count = counts[item.answer_option];
      int at_max = 0;
      for (auto [sym, c] : counts) at_max += c == answer_count ? 1 : 0;
      CHECK(at_max == 1);
      CHECK(item.prompt.length() == 10);
    }
  }

  SUBCASE("deterministic per stream") {
    RngStream a = derive_stream(9, 4);
    RngStream b = derive_stream(9, 4);
    McqItem ia = generate_item(vocab, a, 12, "sf1", "x");
    McqItem ib = generate_item(vocab, b, 12, "sf1", "x");
    CHECK(ia.prompt.ids == ib.prompt.ids);
    CHECK(ia.answer_option == ib.answer_option);
  }

  SUBCASE("requires at least three symbols") {
    RngStream rng = derive_stream(1, 1);
    CHECK_THROWS_AS(generate_item(vocab, rng, 2, "sf0", "x"), ContractViolation);
  }
}

TEST_CASE("is_equivalent ties the extracted letter to the ground truth") {
  Vocabulary vocab = Vocabulary::task_vocab();
  TokenSeq with_b = make_seq({vocab.think_open(), vocab.think_close(), vocab.ans_open(),
                              vocab.option(1), vocab.ans_close()});
  CHECK(is_equivalent(vocab, 1, with_b));
  CHECK_FALSE(is_equivalent(vocab, 3, with_b));
  TokenSeq no_span = make_seq({vocab.think_open(), vocab.option(1)});
  CHECK_FALSE(is_equivalent(vocab, 1, no_span));
}

TEST_CASE("dataset round-trip") {
  Vocabulary vocab = Vocabulary::task_vocab();

  SUBCASE("empty list survives") {
    std::string path = temp_path("ds_empty");
    save_dataset(path, vocab, {});
    CHECK(load_dataset(path, vocab).empty());
    std::filesystem::remove(path);
  }

  SUBCASE("1000 random items come back field-by-field equal") {
    std::vector<McqItem> items = generate_dataset(vocab, 5, 1000, 10);
    std::string path = temp_path("ds_big");
    save_dataset(path, vocab, items);
    std::vector<McqItem> back = load_dataset(path, vocab);
    REQUIRE(back.size() == items.size());
    for (size_t i = 0; i < items.size(); ++i) {
      CHECK(back[i].id == items[i].id);
      CHECK(back[i].prompt.ids == items[i].prompt.ids);
      CHECK(back[i].answer_option == items[i].answer_option);
      CHECK(back[i].stratum == items[i].stratum);
    }
    std::filesystem::remove(path);
  }

  SUBCASE("truncated final line reports its line number") {
    std::vector<McqItem> items = generate_dataset(vocab, 6, 3, 10);
    std::string path = temp_path("ds_trunc");
    save_dataset(path, vocab, items);
    std::string data = read_file(path);
    write_file(path, data.substr(0, data.size() - 20));
    try {
      load_dataset(path, vocab);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);  // header + 3 records; the last is mangled
    }
    std::filesystem::remove(path);
  }

  SUBCASE("version mismatch is an explicit version error") {
    std::string path = temp_path("ds_ver");
    write_file(path, "{\"format\":\"grouprl.dataset\",\"version\":99}\n");
    CHECK_THROWS_AS(load_dataset(path, vocab), VersionError);
    std::filesystem::remove(path);
  }
}

TEST_CASE("zero policy probes at chance accuracy over 10k items") {
  PolicyModel model(Vocabulary::task_vocab(), 8, 12);
  PolicyParams params = PolicyParams::zeros(model.fmap);
  std::vector<McqItem> items = generate_dataset(model.vocab, 11, 10000, 10);
  EvalReport report = evaluate(model, params, items, EvalMode::kSampled, 3);
  CHECK(report.accuracy_rate >= 1.0 / 6.0 - 0.03);
  CHECK(report.accuracy_rate <= 1.0 / 6.0 + 0.03);
}

TEST_CASE("hand-built params solve the task exactly") {
  PolicyModel model(Vocabulary::task_vocab(), 8, 12);
  // Start from the template skeleton and wire the count block straight into
  // the option logits. The bias column suppresses options everywhere; the
  // last=ANS_OPEN column lifts them back at the answer slot only, where the
  // majority symbol count then decides.
  PolicyParams params = template_params(model, 12.0, 4.0);
  for (int o = 0; o < kNumOptions; ++o) {
    params.weights.at(model.vocab.option(o), o) = 40.0;
    params.weights.at(model.vocab.option(o), model.fmap.bias_col()) = -60.0;
    params.weights.at(model.vocab.option(o),
                      model.fmap.last_token_col(model.vocab.ans_open())) = 70.0;
  }

  std::vector<McqItem> items = generate_dataset(model.vocab, 13, 500, 10);
  EvalReport sampled = evaluate(model, params, items, EvalMode::kSampled, 1);
  EvalReport greedy = evaluate(model, params, items, EvalMode::kGreedy, 1);
  CHECK(greedy.accuracy_rate == 1.0);
  CHECK(greedy.format_rate == 1.0);
  CHECK(sampled.accuracy_rate >= 0.99);
  CHECK(sampled.format_rate >= 0.99);
}

TEST_CASE("zero policy greedy probe repeats one letter") {
  PolicyModel model(Vocabulary::task_vocab(), 8, 12);
  PolicyParams params = PolicyParams::zeros(model.fmap);

  // All options tie under zero weights; the probe picks the lowest id, A.
  std::vector<McqItem> all_a;
  std::vector<McqItem> no_a;
  for (const McqItem& item : generate_dataset(model.vocab, 17, 400, 10)) {
    if (item.answer_option == 0)
      all_a.push_back(item);
    else
      no_a.push_back(item);
  }
  REQUIRE(!all_a.empty());
  REQUIRE(!no_a.empty());
  CHECK(evaluate(model, params, all_a, EvalMode::kGreedy).accuracy_rate == 1.0);
  CHECK(evaluate(model, params, no_a, EvalMode::kGreedy).accuracy_rate == 0.0);
}
