#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "essc/io.hpp"
#include "helpers.hpp"

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "essc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = essc::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::size_t line_count(const std::filesystem::path& p) {
  const auto s = essc::io::read_text(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("synth is byte-identical across runs") {
  testing::TempDir a("cli-a"), b("cli-b");
  for (const auto* d : {&a, &b}) {
    const auto r = cli({"--seed", "5", "--out-dir", d->path().string(), "synth", "--epochs-per-stage", "1"});
    CHECK(r.code == 0);
  }
  CHECK(essc::io::read_file(a / "synth.edf") == essc::io::read_file(b / "synth.edf"));
  CHECK(essc::io::read_file(a / "synth.hyp") == essc::io::read_file(b / "synth.hyp"));
  CHECK(line_count(a / "synth.hyp") == 5);
}

TEST_CASE("invalid sample rate is reported with its error kind") {
  testing::TempDir d("cli-fs");
  const auto r = cli({"--out-dir", d.path().string(), "synth", "--fs", "32"});
  CHECK(r.code == 1);
  CHECK(r.err.find("error[InvalidSpec]") != std::string::npos);
  CHECK(!std::filesystem::exists(d / "synth.edf"));
}

TEST_CASE("outputs are never overwritten without --force") {
  testing::TempDir d("cli-force");
  const std::string dir = d.path().string();
  REQUIRE(cli({"--out-dir", dir, "synth", "--epochs-per-stage", "1"}).code == 0);
  const auto before = essc::io::read_file(d / "synth.edf");
  const auto r = cli({"--seed", "9", "--out-dir", dir, "synth", "--epochs-per-stage", "1"});
  CHECK(r.code == 1);
  CHECK(r.err.find("error[IoError]") != std::string::npos);
  CHECK(essc::io::read_file(d / "synth.edf") == before);
  CHECK(cli({"--force", "--seed", "9", "--out-dir", dir, "synth", "--epochs-per-stage", "1"}).code == 0);
  CHECK(essc::io::read_file(d / "synth.edf") != before);
}

TEST_CASE("usage errors and help") {
  CHECK(cli({"synth", "--no-such-flag"}).code == 2);
  CHECK(cli({}).code == 2);
  const auto h = cli({"--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("preprocess") != std::string::npos);
}

TEST_CASE("full command chain") {
  testing::TempDir d("cli-chain");
  const std::string dir = d.path().string();
  auto in = [&](const char* name) { return (d / name).string(); };

  REQUIRE(cli({"--seed", "3", "--out-dir", dir, "synth", "--epochs-per-stage", "2"}).code == 0);
  const auto prep = cli({"--seed", "3", "--out-dir", dir, "preprocess", "--edf", in("synth.edf"), "--hypnogram",
                         in("synth.hyp"), "--ae-epochs", "2", "--jobs", "2"});
  REQUIRE(prep.code == 0);
  CHECK(prep.out.find("W=2") != std::string::npos);
  CHECK(std::filesystem::exists(d / "dataset.ae"));

  REQUIRE(cli({"--seed", "3", "--out-dir", dir, "train", "--cache", in("dataset.essc"), "--epochs", "1"}).code == 0);
  CHECK(line_count(d / "history.csv") == 2);

  REQUIRE(cli({"--out-dir", dir, "eval", "--model", in("model.essm"), "--cache", in("dataset.essc")}).code == 0);
  CHECK(std::filesystem::exists(d / "metrics.json"));
  CHECK(std::filesystem::exists(d / "metrics.csv"));

  REQUIRE(cli({"--out-dir", dir, "classify", "--model", in("model.essm"), "--cache", in("dataset.essc")}).code == 0);
  CHECK(line_count(d / "predictions.csv") == 1 + 10);

  const auto few = cli({"--out-dir", dir, "kfold", "--cache", in("dataset.essc"), "--k", "20", "--epochs", "1"});
  CHECK(few.code == 1);
  CHECK(few.err.find("error[TooFewItems]") != std::string::npos);

  REQUIRE(cli({"--seed", "3", "--out-dir", dir, "kfold", "--cache", in("dataset.essc"), "--k", "2", "--epochs", "1",
               "--jobs", "2"})
              .code == 0);
  CHECK(line_count(d / "kfold.csv") == 1 + 2 + 2);
}
