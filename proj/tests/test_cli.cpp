#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "marn/binary_io.hpp"
#include "marn/cli.hpp"
#include "marn/config.hpp"
#include "marn/error.hpp"
#include "nlohmann/json.hpp"

using namespace marn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int rc;
  std::string out;
  std::string err;
};

Run marn_cli(std::vector<std::string> args) {
  std::vector<const char*> argv{"marn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {rc, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("marn_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kSmallConfig = R"({"seed": 3,
 "model": {"proj_dim": 8, "hidden_dim": 8, "attn_dim": 8, "embed_dim": 8, "memdec_attn_dim": 8},
 "train": {"epochs": 3, "base_lr": 0.01, "eval_every": 0},
 "memory_train": {"epochs": 2, "base_lr": 0.01, "eval_every": 0},
 "memory": {"k": 2},
 "decode": {"max_len": 8}})";

}  // namespace

TEST_CASE("usage errors exit 1") {
  Run none = marn_cli({});
  CHECK(none.rc == 1);
  CHECK(marn_cli({"frobnicate"}).rc == 1);
  CHECK(marn_cli({"train-basis", "--no-such-flag"}).rc == 1);
  CHECK(marn_cli({"eval", "--lambda", "1.5", "--out", scratch("lam").string()}).rc == 1);
  CHECK(marn_cli({"synth"}).rc == 1);
  CHECK(marn_cli({"--help"}).rc == 0);
}

TEST_CASE("gradcheck subcommand") {
  Run r = marn_cli({"gradcheck", "--seed", "7"});
  CHECK(r.rc == 0);
  CHECK(r.out.find("max") != std::string::npos);
}

TEST_CASE("config files are strict") {
  fs::path dir = scratch("config");
  io::write_text(dir / "bad.json", R"({"seed": 1, "trian": {}})");
  Run r = marn_cli({"gradcheck", "--config", (dir / "bad.json").string()});
  CHECK(r.rc == 1);
  CHECK(r.err.find("trian") != std::string::npos);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"memory": {"k": 0}})", "x").validate(), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json("{not json", "x"), ConfigError);

  RunConfig c = RunConfig::from_json(kSmallConfig, "small");
  c.resolve();
  CHECK(c.basis_train.epochs == 3);
  CHECK(c.basis_train.seed == 3);
  RunConfig again = RunConfig::from_json(c.to_json(), "again");
  again.resolve();
  CHECK(again.to_json() == c.to_json());

  ModelDims d;
  parse_dims("4,5,6,7", d);
  CHECK(d.proj_dim == 4);
  CHECK(d.hidden_dim == 5);
  CHECK(d.attn_dim == 6);
  CHECK(d.embed_dim == 7);
  CHECK_THROWS_AS(parse_dims("4,5,6", d), ConfigError);
}

TEST_CASE("synth is reproducible") {
  fs::path a = scratch("synth_a"), b = scratch("synth_b");
  REQUIRE(marn_cli({"synth", "--seed", "4", "--out", a.string()}).rc == 0);
  REQUIRE(marn_cli({"synth", "--seed", "4", "--out", b.string()}).rc == 0);
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    CHECK(io::read_file(entry.path()) == io::read_file(b / fs::relative(entry.path(), a)));
  }
  CHECK(files == 30 + 2);
}

TEST_CASE("missing feature file exits 2 and names the path") {
  fs::path data = scratch("missing_data");
  REQUIRE(marn_cli({"synth", "--out", data.string()}).rc == 0);
  fs::remove(data / "features" / "vid0002.marnf");
  Run r = marn_cli({"train-basis", "--data", (data / "manifest.json").string(), "--out", scratch("missing_out").string()});
  CHECK(r.rc == 2);
  CHECK(r.err.find("vid0002.marnf") != std::string::npos);
}

TEST_CASE("pipeline end to end") {
  fs::path root = scratch("pipeline");
  const std::string cfg = (root / "run.json").string(), data = (root / "data").string(),
                    manifest = data + "/manifest.json", out = (root / "out").string();
  io::write_text(cfg, kSmallConfig);
  REQUIRE(marn_cli({"synth", "--config", cfg, "--out", data}).rc == 0);
  REQUIRE(marn_cli({"train-basis", "--config", cfg, "--data", manifest, "--out", out}).rc == 0);
  REQUIRE(marn_cli({"build-memory", "--config", cfg, "--data", manifest, "--out", out}).rc == 0);
  REQUIRE(marn_cli({"train-memory", "--config", cfg, "--data", manifest, "--out", out}).rc == 0);
  Run ev = marn_cli({"eval", "--config", cfg, "--data", manifest, "--out", out});
  REQUIRE(ev.rc == 0);
  CHECK(ev.out.find("CIDEr") != std::string::npos);
  for (const char* f : {"basis.marnc", "vocab.txt", "basis_report.json", "memory.marnm", "memdec.marnc",
                        "memdec_report.json", "fusion.json", "eval_test.json", "eval_test.tsv", "run_config.json",
                        "digests.json"})
    CHECK_MESSAGE(fs::exists(fs::path(out) / f), f);

  Run basis_only = marn_cli({"eval", "--config", cfg, "--data", manifest, "--out", out, "--basis-only"});
  CHECK(basis_only.rc == 0);
  CHECK(fs::exists(fs::path(out) / "eval_test_basis.json"));
  Run cap = marn_cli({"caption", "--config", cfg, "--data", manifest, "--out", out, "--split", "val", "--beam", "3"});
  CHECK(cap.rc == 0);
  CHECK(std::count(cap.out.begin(), cap.out.end(), '\n') == 3);

  // A memory built from another basis is refused.
  const std::string other = (root / "other").string();
  REQUIRE(marn_cli({"train-basis", "--config", cfg, "--data", manifest, "--out", other, "--seed", "9"}).rc == 0);
  Run mismatch = marn_cli({"train-memory", "--config", cfg, "--data", manifest, "--out", other, "--memory", out});
  CHECK(mismatch.rc == 2);
  CHECK(mismatch.err.find("refusing") != std::string::npos);

  // A truncated checkpoint is a data error.
  std::vector<char> bytes = io::read_file(fs::path(out) / "basis.marnc");
  bytes.resize(bytes.size() / 2);
  io::write_file(fs::path(out) / "basis.marnc", bytes);
  Run broken = marn_cli({"eval", "--config", cfg, "--data", manifest, "--out", out});
  CHECK(broken.rc == 2);
  CHECK(broken.err.find("offset") != std::string::npos);
  fs::remove_all(root);
}
