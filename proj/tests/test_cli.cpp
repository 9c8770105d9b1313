#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "protohead/trainer.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "protohead_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(PROTOHEAD_CLI) + " " + args + " >" + (kWork / "stdout.txt").string() + " 2>" +
                          (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string w(const std::string& name) { return (kWork / name).string(); }

struct Workdir {
  Workdir() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Workdir, "synth output is byte-identical for a fixed seed") {
  REQUIRE(run("synth --samples 20 --dim 6 --seed 3 --texts --out " + w("a.plm1")) == 0);
  REQUIRE(run("synth --samples 20 --dim 6 --seed 3 --texts --out " + w("b.plm1")) == 0);
  REQUIRE(run("synth --samples 20 --dim 6 --seed 4 --texts --out " + w("c.plm1")) == 0);
  CHECK(slurp(w("a.plm1")) == slurp(w("b.plm1")));
  CHECK(slurp(w("a.plm1")) != slurp(w("c.plm1")));
  CHECK(fs::exists(w("a.plm1.provenance.json")));
}

TEST_CASE_FIXTURE(Workdir, "exit codes") {
  REQUIRE(run("synth --samples 10 --dim 4 --out " + w("d.plm1")) == 0);
  // Lambdas summing to 0.9 are a configuration error.
  CHECK(run("train --data " + w("d.plm1") + " --lambda0 0.3 --lambda1 0.3 --lambda2 0.3 --out " + w("m.plmc")) == 1);
  CHECK(slurp(w("stderr.txt")).find("lambda") != std::string::npos);
  CHECK_FALSE(fs::exists(w("m.plmc")));
  // Missing checkpoint is an I/O error.
  CHECK(run("eval --checkpoint " + w("missing.plmc") + " --data " + w("d.plm1")) == 2);
  // Corrupt dataset is a format error.
  std::ofstream(w("bad.plm1")) << "not a dataset";
  CHECK(run("train --data " + w("bad.plm1") + " --out " + w("m.plmc")) == 2);
  CHECK(run("train --data " + w("d.plm1") + " --N 5 --out " + w("m.plmc")) == 1);
  CHECK(run("no-such-command") == 1);
}

TEST_CASE_FIXTURE(Workdir, "end-to-end pipeline") {
  REQUIRE(run("synth --samples 40 --dim 6 --seed 1 --texts --out " + w("train.plm1")) == 0);
  REQUIRE(run("synth --samples 20 --dim 6 --seed 2 --texts --out " + w("test.plm1")) == 0);
  REQUIRE(run("train --data " + w("train.plm1") + " --eval " + w("test.plm1") +
              " --N 4 --K 1 --epochs 5 --batch-size 16 --lr 0.01 --seed 7 --out " + w("m.plmc")) == 0);
  CHECK(fs::exists(w("m.plmc")));

  std::ifstream metrics(w("m.plmc.metrics.jsonl"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(metrics, line)) ++lines;
  CHECK(lines == 6);  // provenance + 5 epochs

  REQUIRE(run("eval --checkpoint " + w("m.plmc") + " --data " + w("test.plm1") + " --out " + w("eval.json")) == 0);
  const auto ev = nlohmann::json::parse(slurp(w("eval.json")));
  CHECK(ev.at("count") == 40);
  CHECK(ev.at("accuracy").get<double>() >= 0.0);
  CHECK(ev.contains("provenance"));

  REQUIRE(run("project --checkpoint " + w("m.plmc") + " --data " + w("train.plm1") + " --out " + w("proj.csv") +
              " --distributions " + w("dist.csv")) == 0);
  const auto proj = slurp(w("proj.csv"));
  CHECK(proj.find("# uniqueness") != std::string::npos);
  CHECK(proj.find("[0.") != std::string::npos);  // attended text rendering
  CHECK(fs::file_size(w("dist.csv")) > 0);

  REQUIRE(run("faithfulness --checkpoint " + w("m.plmc") + " --data " + w("test.plm1") + " --out " + w("f.csv") +
              " --summary " + w("fs.csv") + " --k-list 25,50") == 0);
  CHECK(slurp(w("f.csv")).find("sample_id,k,direction") != std::string::npos);
  CHECK(slurp(w("fs.csv")).find("50") != std::string::npos);

  REQUIRE(run("export-space --checkpoint " + w("m.plmc") + " --data " + w("test.plm1") +
              " --proto-a 0 --proto-b 2 --out " + w("space.csv")) == 0);
  CHECK(run("export-space --checkpoint " + w("m.plmc") + " --data " + w("test.plm1") +
            " --proto-a 0 --proto-b 0") == 1);

  // Identical inputs, identical bytes.
  REQUIRE(run("train --data " + w("train.plm1") + " --eval " + w("test.plm1") +
              " --N 4 --K 1 --epochs 5 --batch-size 16 --lr 0.01 --seed 7 --out " + w("m1.plmc")) == 0);
  CHECK(slurp(w("m.plmc")) == slurp(w("m1.plmc")));
  REQUIRE(run("project --checkpoint " + w("m1.plmc") + " --data " + w("train.plm1") + " --out " + w("proj1.csv")) == 0);
  CHECK(slurp(w("proj.csv")) == slurp(w("proj1.csv")));

  // Same seed, same numbers regardless of thread count. The bytes differ only
  // in the recorded "threads" setting.
  REQUIRE(run("train --data " + w("train.plm1") + " --eval " + w("test.plm1") +
              " --N 4 --K 1 --epochs 5 --batch-size 16 --lr 0.01 --seed 7 --threads 2 --out " + w("m2.plmc")) == 0);
  const auto a = protohead::load_checkpoint(w("m.plmc"));
  const auto b = protohead::load_checkpoint(w("m2.plmc"));
  CHECK(a.params == b.params);
  CHECK(a.adam == b.adam);
  CHECK(a.rng_state == b.rng_state);
  CHECK(b.config.threads == 2);
}

TEST_CASE_FIXTURE(Workdir, "gradcheck subcommand") {
  REQUIRE(run("gradcheck --instances 4 --seed 3 --out " + w("gc.json")) == 0);
  const auto j = nlohmann::json::parse(slurp(w("gc.json")));
  CHECK(j.dump().find("passed") != std::string::npos);
}
