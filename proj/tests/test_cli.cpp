#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grouprl/checkpoint.hpp"
#include "grouprl/config.hpp"

#include "support/test_util.hpp"

#include <cstdio>
#include <filesystem>
#include <string>

#include <sys/wait.h>

using namespace grouprl;
using testutil::read_file;
using testutil::temp_path;
using testutil::write_file;

namespace {

#ifndef GROUPRL_CLI_PATH
#error "GROUPRL_CLI_PATH must be defined by the build"
#endif

const std::string kCli = GROUPRL_CLI_PATH;

struct CmdResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr interleaved
};

CmdResult run_cmd(const std::string& args) {
  CmdResult result;
  std::string full = kCli + " " + args + " 2>&1";
  FILE* pipe = popen(full.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) result.output.append(buf, n);
  int rc = pclose(pipe);
  result.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return result;
}

std::string tiny_train_config() {
  return "algorithm = grpo\n"
         "G = 4\n"
         "generation_batch = 8\n"
         "train_batch = 8\n"
         "epochs = 1\n"
         "learning_rate = 0.05\n"
         "optimizer = adam\n"
         "clip.beta = 0.04\n"
         "lengths.L_hard = 12\n"
         "lengths.L_max = 10\n"
         "lengths.L_cache = 4\n"
         "seed = 5\n";
}

}  // namespace

TEST_CASE("train rejects a missing config file and names the path") {
  CmdResult r = run_cmd("train --config /no/such/config.cfg --out " + temp_path("cli_run"));
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("/no/such/config.cfg") != std::string::npos);
}

TEST_CASE("train produces metrics, a loadable checkpoint, and a config snapshot") {
  std::string cfg_path = temp_path("cli_cfg");
  write_file(cfg_path, tiny_train_config());
  std::string out_dir = temp_path("cli_run");

  CmdResult r = run_cmd("train --config " + cfg_path + " --gen-items 32 --out " + out_dir);
  REQUIRE(r.exit_code == 0);

  std::string metrics = read_file(out_dir + "/metrics.tsv");
  CHECK(metrics.find("step\t") == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') >= 2);  // header + >= 1 record

  LoadedCheckpoint ckpt = load_checkpoint(out_dir + "/final.ckpt");
  CHECK(ckpt.model.vocab.size() == 17);

  std::string snapshot = read_file(out_dir + "/config.snapshot");
  CHECK(snapshot.find("seed = 5") != std::string::npos);

  SUBCASE("--seed override lands in the snapshot") {
    std::string out2 = temp_path("cli_run_seeded");
    CmdResult r2 =
        run_cmd("train --config " + cfg_path + " --gen-items 32 --seed 99 --out " + out2);
    REQUIRE(r2.exit_code == 0);
    CHECK(read_file(out2 + "/config.snapshot").find("seed = 99") != std::string::npos);
    std::filesystem::remove_all(out2);
  }

  SUBCASE("identical invocations produce byte-identical artifacts") {
    std::string out_a = temp_path("cli_rep_a");
    std::string out_b = temp_path("cli_rep_b");
    std::string out_c = temp_path("cli_rep_c");
    REQUIRE(run_cmd("train --config " + cfg_path + " --gen-items 32 --out " + out_a).exit_code ==
            0);
    REQUIRE(run_cmd("train --config " + cfg_path + " --gen-items 32 --out " + out_b).exit_code ==
            0);
    CHECK(read_file(out_a + "/metrics.tsv") == read_file(out_b + "/metrics.tsv"));
    CHECK(read_file(out_a + "/final.ckpt") == read_file(out_b + "/final.ckpt"));
    CHECK(read_file(out_a + "/config.snapshot") == read_file(out_b + "/config.snapshot"));

    // A different worker count must not change the artifacts (the snapshot
    // records the override, so compare the other two).
    REQUIRE(run_cmd("train --config " + cfg_path + " --gen-items 32 --workers 4 --out " +
                    out_c)
                .exit_code == 0);
    CHECK(read_file(out_a + "/metrics.tsv") == read_file(out_c + "/metrics.tsv"));
    CHECK(read_file(out_a + "/final.ckpt") == read_file(out_c + "/final.ckpt"));
    std::filesystem::remove_all(out_a);
    std::filesystem::remove_all(out_b);
    std::filesystem::remove_all(out_c);
  }

  SUBCASE("eval loads the trained checkpoint") {
    std::string ds = temp_path("cli_eval_ds");
    REQUIRE(run_cmd("env-gen --out " + ds + " --items 64 --seed 3").exit_code == 0);
    CmdResult ev = run_cmd("eval --checkpoint " + out_dir + "/final.ckpt --dataset " + ds +
                           " --mode greedy");
    CHECK(ev.exit_code == 0);
    CHECK(ev.output.find("accuracy_rate=") != std::string::npos);
    CHECK(ev.output.find("format_rate=") != std::string::npos);
    std::filesystem::remove(ds);
  }

  std::filesystem::remove(cfg_path);
  std::filesystem::remove_all(out_dir);
}

TEST_CASE("train help enumerates every config key") {
  CmdResult r = run_cmd("train --help");
  CHECK(r.exit_code == 0);
  for (const std::string& key : config_keys()) {
    INFO("key ", key);
    CHECK(r.output.find(key) != std::string::npos);
  }
  for (const std::string& flag : {"--config", "--dataset", "--gen-items", "--out", "--seed",
                                  "--workers", "--init"}) {
    INFO("flag ", flag);
    CHECK(r.output.find(flag) != std::string::npos);
  }
}

TEST_CASE("gradcheck") {
  SUBCASE("default run passes and is reproducible") {
    CmdResult a = run_cmd("gradcheck --instances 4 --seed 11");
    CmdResult b = run_cmd("gradcheck --instances 4 --seed 11");
    CHECK(a.exit_code == 0);
    CHECK(a.output == b.output);
    CHECK(a.output.find("max rel err") != std::string::npos);
  }

  SUBCASE("corrupted gradient is caught") {
    CmdResult r = run_cmd("gradcheck --instances 2 --seed 11 --corrupt");
    CHECK(r.exit_code == 3);
  }
}

TEST_CASE("env-gen output is deterministic and loadable") {
  std::string a = temp_path("cli_env_a");
  std::string b = temp_path("cli_env_b");
  REQUIRE(run_cmd("env-gen --out " + a + " --items 100 --seed 42").exit_code == 0);
  REQUIRE(run_cmd("env-gen --out " + b + " --items 100 --seed 42").exit_code == 0);
  CHECK(read_file(a) == read_file(b));
  CHECK(read_file(a).find("grouprl.dataset") != std::string::npos);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("corpus pipeline commands") {
  std::string in_path = temp_path("cli_corpus_in");
  std::string repeated;
  for (int i = 0; i < 16; ++i) repeated += "cell ";
  write_file(in_path,
             "{\"format\":\"grouprl.corpus\",\"version\":1}\n"
             "{\"id\":\"1\",\"text\":\"" + repeated + "\",\"stratum\":\"a\"}\n"
             "{\"id\":\"2\",\"text\":\"the description shows necrosis\",\"stratum\":\"a\"}\n"
             "{\"id\":\"3\",\"text\":\"clean caption text\",\"stratum\":\"b\"}\n");

  SUBCASE("clean flags the repeated-token record and rewrites terms") {
    std::string out_path = temp_path("cli_corpus_clean");
    CmdResult r = run_cmd("corpus clean --in " + in_path + " --out " + out_path);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("flagged=1") != std::string::npos);
    std::string cleaned = read_file(out_path);
    CHECK(cleaned.find("the image shows necrosis") != std::string::npos);
    CHECK(cleaned.find("cell cell") == std::string::npos);
    std::filesystem::remove(out_path);
  }

  SUBCASE("dedup is idempotent through the CLI") {
    std::string dup_in = temp_path("cli_dup_in");
    std::string prefix(60, 'z');
    write_file(dup_in,
               "{\"format\":\"grouprl.corpus\",\"version\":1}\n"
               "{\"id\":\"1\",\"text\":\"" + prefix + " one\",\"stratum\":\"a\"}\n"
               "{\"id\":\"2\",\"text\":\"" + prefix + " two\",\"stratum\":\"a\"}\n"
               "{\"id\":\"3\",\"text\":\"different\",\"stratum\":\"a\"}\n");
    std::string once = temp_path("cli_dup_once");
    std::string twice = temp_path("cli_dup_twice");
    CmdResult r1 = run_cmd("corpus dedup --in " + dup_in + " --out " + once);
    CHECK(r1.exit_code == 0);
    CHECK(r1.output.find("removed=1") != std::string::npos);
    CmdResult r2 = run_cmd("corpus dedup --in " + once + " --out " + twice);
    CHECK(r2.exit_code == 0);
    CHECK(r2.output.find("removed=0") != std::string::npos);
    CHECK(read_file(once) == read_file(twice));
    for (const std::string& p : {dup_in, once, twice}) std::filesystem::remove(p);
  }

  SUBCASE("sample rejects an oversized total") {
    CmdResult r = run_cmd("corpus sample --in " + in_path + " --out - --total 50");
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("exceeds") != std::string::npos);
  }

  SUBCASE("split-captions emits one record per panel") {
    std::string split_in = temp_path("cli_split_in");
    write_file(split_in,
               "{\"format\":\"grouprl.corpus\",\"version\":1}\n"
               "{\"id\":\"fig1\",\"text\":\"Overview. (a) cortex. (b) medulla.\","
               "\"stratum\":\"a\"}\n");
    CmdResult r = run_cmd("corpus split-captions --in " + split_in + " --out -");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("fig1:a") != std::string::npos);
    CHECK(r.output.find("Overview. cortex.") != std::string::npos);
    CHECK(r.output.find("Overview. medulla.") != std::string::npos);
    std::filesystem::remove(split_in);
  }

  SUBCASE("cluster assigns every embedded record") {
    std::string cl_in = temp_path("cli_cluster_in");
    std::string content = "{\"format\":\"grouprl.corpus\",\"version\":1}\n";
    for (int i = 0; i < 30; ++i) {
      double cx = i % 3 == 0 ? 0.0 : (i % 3 == 1 ? 10.0 : -10.0);
      content += "{\"id\":\"" + std::to_string(i) + "\",\"text\":\"t\",\"stratum\":\"s\"," +
                 "\"embedding\":[" + std::to_string(cx + 0.01 * i) + ",1.0]}\n";
    }
    write_file(cl_in, content);
    std::string cl_out = temp_path("cli_cluster_out");
    CmdResult r = run_cmd("corpus cluster --in " + cl_in + " --out " + cl_out + " --k 3");
    CHECK(r.exit_code == 0);
    std::string clustered = read_file(cl_out);
    CHECK(clustered.find("\"cluster\":") != std::string::npos);
    std::filesystem::remove(cl_in);
    std::filesystem::remove(cl_out);
  }

  std::filesystem::remove(in_path);
}

TEST_CASE("unknown config keys fail validation through the CLI") {
  std::string cfg_path = temp_path("cli_badcfg");
  write_file(cfg_path, "algorithm = grpo\nnot_a_key = 3\n");
  CmdResult r = run_cmd("train --config " + cfg_path + " --out " + temp_path("cli_bad_out"));
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("not_a_key") != std::string::npos);
  std::filesystem::remove(cfg_path);
}
