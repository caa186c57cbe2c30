#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <regex>
#include <set>
#include <sstream>

#include "ddi/config.hpp"
#include "ddi/error.hpp"
#include "ddi/manifest.hpp"

#ifndef DDI_CLI_PATH
#error "DDI_CLI_PATH must name the ddi executable"
#endif
#ifndef DDI_README_PATH
#error "DDI_README_PATH must name the README"
#endif

namespace fs = std::filesystem;
using namespace ddi;

namespace {

struct Result {
  int status = -1;
  std::string output;  // stdout and stderr interleaved
};

Result run(const std::string& args) {
  const std::string cmd = std::string(DDI_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  for (std::size_t n; (n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0;) r.output.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ddi_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

const char* kSmallModel =
    "--set model.word_dim=8 --set model.char_dim=4 --set model.char_filters=4 --set model.hidden=8 "
    "--set model.rel_filters=4 --set train.epochs=1 --set train.dev_labels=1";

}  // namespace

TEST_CASE("every flag in the help text is documented") {
  const std::string readme = slurp(DDI_README_PATH);
  REQUIRE_FALSE(readme.empty());
  const std::vector<std::string> subs{"generate", "map-nlm180",     "encode", "roundtrip", "train",
                                      "bootstrap", "predict", "ensemble-merge", "score"};
  const std::regex flag("--[a-z][a-z0-9-]*");
  std::set<std::string> flags;
  const auto top = run("--help");
  CHECK(top.status == 0);
  for (const auto& s : subs) {
    CHECK(top.output.find(s) != std::string::npos);
    CHECK(readme.find("ddi " + s) != std::string::npos);
    const auto h = run(s + " --help");
    CHECK(h.status == 0);
    for (std::sregex_iterator it(h.output.begin(), h.output.end(), flag), end; it != end; ++it) flags.insert(it->str());
  }
  CHECK(flags.count("--merge-coordination"));
  for (const auto& f : flags) {
    INFO(f);
    CHECK(readme.find("`" + f) != std::string::npos);
  }
  for (const auto& key : cli::config_keys()) {
    INFO(key);
    CHECK(readme.find("`" + key + "`") != std::string::npos);
  }
}

TEST_CASE("exit codes separate usage from data problems") {
  TempDir dir;
  CHECK(run("--version").output.find(std::string(cli::kToolVersion)) != std::string::npos);
  CHECK(run("").status == 1);
  CHECK(run("generate").status == 1);
  CHECK(run("generate " + (dir / "c.json") + " --no-such-flag").status == 1);
  CHECK(run("score " + (dir / "missing.json") + " " + (dir / "missing.json")).status == 1);
  CHECK(run("generate " + (dir / "c.json") + " --set model.nothing=1").status == 1);
  CHECK(run("generate " + (dir / "c.json") + " --set model.hidden=abc").status == 1);

  std::ofstream(dir / "bad.json") << "{\"version\": \"ddi-corpus/1\", ";
  const auto bad = run("roundtrip " + (dir / "bad.json"));
  CHECK(bad.status == 2);
  CHECK(bad.output.find("error:") != std::string::npos);
  std::ofstream(dir / "bad.cfg") << "version = ddi-config/1\nmodel.hidden = 3\nmodel.hidden = 4\n";
  CHECK(run("generate " + (dir / "c.json") + " --config " + (dir / "bad.cfg")).status == 2);
}

TEST_CASE("generate, roundtrip and score") {
  TempDir dir;
  const auto gen = run("generate " + (dir / "c.json") + " --labels 3 --sentences-per-label 10 --seed 4");
  REQUIRE(gen.status == 0);
  REQUIRE(fs::exists(dir / "c.json"));

  const auto manifest = nlohmann::json::parse(slurp(cli::manifest_path(dir / "c.json")));
  CHECK(manifest["command"] == "generate");
  CHECK(manifest["seed"] == 4);
  REQUIRE(manifest["outputs"].size() == 1);
  CHECK(manifest["outputs"][0]["sha256"] == cli::sha256_file(dir / "c.json"));

  const auto again = run("generate " + (dir / "d.json") + " --labels 3 --sentences-per-label 10 --seed 4");
  REQUIRE(again.status == 0);
  CHECK(slurp(dir / "c.json") == slurp(dir / "d.json"));

  const auto rt = run("roundtrip " + (dir / "c.json") + " --json " + (dir / "rt.json"));
  REQUIRE(rt.status == 0);
  CHECK(rt.output.find("100.00") != std::string::npos);
  CHECK(fs::exists(dir / "rt.json"));
  CHECK(fs::exists(cli::manifest_path(dir / "rt.json")));

  const auto sc = run("score " + (dir / "c.json") + " " + (dir / "d.json") + " --breakdown");
  REQUIRE(sc.status == 0);
  std::size_t perfect = 0;
  for (std::size_t at = 0; (at = sc.output.find("100.00", at)) != std::string::npos; ++at) ++perfect;
  CHECK(perfect >= 12);
}

TEST_CASE("train, predict and merge end to end") {
  TempDir dir;
  REQUIRE(run("generate " + (dir / "c.json") + " --labels 3 --sentences-per-label 4").status == 0);
  const std::string common = std::string(" --ensemble 2 --seed 9 ") + kSmallModel;
  REQUIRE(run("train " + (dir / "c.json") + " " + (dir / "a") + common).status == 0);
  REQUIRE(run("train " + (dir / "c.json") + " " + (dir / "b") + common).status == 0);
  for (const auto* name : {"model-01.ckpt", "model-02.ckpt", "model-01.report.json"})
    CHECK(slurp(dir.path / "a" / name) == slurp(dir.path / "b" / name));
  CHECK(slurp(dir.path / "a" / "model-01.ckpt") != slurp(dir.path / "a" / "model-02.ckpt"));
  const auto manifest = nlohmann::json::parse(slurp(cli::manifest_path((dir.path / "a" / "train").string())));
  CHECK(manifest["outputs"].size() == 4);

  for (const auto* m : {"1", "2"}) {
    const auto p = run("predict " + (dir.path / "a" / (std::string("model-0") + m + ".ckpt")).string() + " " +
                       (dir / "c.json") + " " + (dir / (std::string("p") + m + ".json")));
    REQUIRE(p.status == 0);
  }
  REQUIRE(run("ensemble-merge " + (dir / "m.json") + " " + (dir / "p1.json") + " " + (dir / "p2.json") +
              " --min-votes 2")
              .status == 0);
  CHECK(fs::exists(dir / "m.json.tally.txt"));
  CHECK(run("score " + (dir / "c.json") + " " + (dir / "m.json")).status == 0);
  CHECK(run("ensemble-merge " + (dir / "m.json") + " " + (dir / "p1.json") + " --min-votes 2").status == 1);
}

TEST_CASE("configuration text round-trips") {
  cli::RunConfig c;
  cli::set_config_value(c, "model.rel_windows", "2, 3");
  cli::set_config_value(c, "infer.coordination", "true");
  cli::apply_override(c, "ensemble.size=4");
  const auto text = cli::serialize_config(c);
  CHECK(cli::serialize_config(cli::parse_config(text)) == text);
  CHECK(cli::parse_config(text).model.rel_windows == std::vector<std::size_t>{2, 3});
  CHECK(cli::config_entries(c).size() == cli::config_keys().size());
  CHECK_THROWS_AS(cli::parse_config("model.hidden = 3\n"), ParseError);
  CHECK_THROWS_AS(cli::apply_override(c, "no-equals"), UsageError);
}

TEST_CASE("digests") {
  CHECK(cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(cli::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK_THROWS_AS(cli::sha256_file("/nonexistent/ddi"), DataError);
}
