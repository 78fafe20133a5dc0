#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "colay/json_io.hpp"

namespace fs = std::filesystem;
using colay::json;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const auto out = fs::temp_directory_path() / "colay_cli_stdout.txt";
  const std::string cmd = env + " \"" COLAY_CLI "\" " + args + " > \"" + out.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream s;
  s << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, s.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("colay_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kTinyVae = R"({"model": {"latent_dim": 4, "layers": 1, "heads": 2, "width": 16, "mlp": 32}})";
const char* kTinyDiffusion =
    R"({"encoders": {"width": 16, "heads": 2, "mlp": 32, "layers": 1},
        "denoiser": {"width": 16, "heads": 2, "mlp": 32, "layers": 1}, "diffusion_steps": 20})";

// Corpus plus tiny VAE and diffusion checkpoints, built once.
const fs::path& pipeline() {
  static const fs::path dir = [] {
    const auto d = scratch("pipeline");
    std::ofstream(d / "vae.json") << kTinyVae;
    std::ofstream(d / "diffusion.json") << kTinyDiffusion;
    REQUIRE(run("generate-corpus --count 80 --eval-fraction 0.25 --out " + (d / "corpus").string()).code == 0);
    REQUIRE(run("train-vae --corpus " + (d / "corpus/train").string() + " --out " + (d / "vae.ckpt").string() +
                " --steps 6 --batch 8 --config " + (d / "vae.json").string())
                .code == 0);
    REQUIRE(run("train-diffusion --corpus " + (d / "corpus/train").string() + " --vae " + (d / "vae.ckpt").string() +
                " --out " + (d / "model.ckpt").string() + " --steps 50 --batch 4 --log " + (d / "log.jsonl").string() +
                " --config " + (d / "diffusion.json").string())
                .code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("").code != 0);
  CHECK(run("no-such-command").code == 2);
  CHECK(run("sample --count 2").code == 2);
  CHECK(run("--schema nope stats --corpus x").code == 2);
}

TEST_CASE("generate-corpus and stats") {
  const auto d = scratch("corpus");
  const auto r = run("--seed 3 generate-corpus --count 30 --out " + (d / "c").string());
  REQUIRE(r.code == 0);
  CHECK(fs::exists(d / "c"));
  const auto s = run("stats --corpus " + (d / "c").string() + " --out " + (d / "stats.json").string());
  REQUIRE(s.code == 0);
  std::ifstream in(d / "stats.json");
  const auto stats = json::parse(in);
  CHECK(stats.dump().find("30") != std::string::npos);

  const auto again = scratch("corpus2");
  REQUIRE(run("--seed 3 generate-corpus --count 30 --out " + (again / "c").string()).code == 0);
  for (const auto& e : fs::directory_iterator(d / "c")) CHECK(slurp(e.path()) == slurp(again / "c" / e.path().filename()));
}

TEST_CASE("missing artifacts exit with code 3") {
  const auto d = scratch("missing");
  REQUIRE(run("generate-corpus --count 10 --out " + (d / "c").string()).code == 0);
  const auto r = run("train-diffusion --corpus " + (d / "c").string() + " --vae " + (d / "none.ckpt").string() +
                     " --out " + (d / "m.ckpt").string() + " --steps 1");
  CHECK(r.code == 3);
  CHECK(r.out.find("stage-1 VAE checkpoint not found") != std::string::npos);
  CHECK(run("sample --checkpoint " + (d / "none.ckpt").string() + " --out " + (d / "o").string()).code == 3);
  CHECK(run("stats --corpus " + (d / "nothing").string()).code == 3);
}

TEST_CASE("invalid conditions exit with code 2") {
  const auto& d = pipeline();
  std::ofstream(d / "bad.json") << R"({"class_count": [1, 2]})";
  const auto r = run("sample --checkpoint " + (d / "model.ckpt").string() + " --conditions " + (d / "bad.json").string() +
                     " --steps 2 --out " + (d / "bad_out").string());
  CHECK(r.code == 2);
  CHECK(r.out.find("class_count") != std::string::npos);
}

TEST_CASE("training writes a loss log") {
  const auto& d = pipeline();
  std::ifstream in(d / "log.jsonl");
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(json::parse(line).contains("loss"));
}

TEST_CASE("sample is byte-identical for a fixed seed") {
  const auto& d = pipeline();
  std::ofstream(d / "cond.json") << R"({"class_count": [1, 1, 0, 1], "guidelines": [{"axis": "x", "pos": 8}]})";
  for (const char* name : {"a", "b"})
    REQUIRE(run("--seed 4 sample --checkpoint " + (d / "model.ckpt").string() + " --conditions " +
                (d / "cond.json").string() + " --count 2 --steps 5 --out " + (d / name).string())
                .code == 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(d / "a")) {
    ++files;
    CHECK(slurp(e.path()) == slurp(d / "b" / e.path().filename()));
  }
  CHECK(files == 4);
  CHECK(fs::exists(d / "a" / "sample_0000.png"));
}

TEST_CASE("relative paths resolve under COLAY_HOME") {
  const auto& d = pipeline();
  const auto r = run("sample --checkpoint model.ckpt --steps 2 --out home_out", "COLAY_HOME=\"" + d.string() + "\"");
  CHECK(r.code == 0);
  CHECK(fs::exists(d / "home_out" / "sample_0000.json"));
}

TEST_CASE("eval writes a report") {
  const auto& d = pipeline();
  const auto r = run("eval --checkpoint " + (d / "model.ckpt").string() + " --corpus " + (d / "corpus/eval").string() +
                     " --mode G --count 4 --k 3 --steps 3 --out " + (d / "report.json").string());
  REQUIRE(r.code == 0);
  std::ifstream in(d / "report.json");
  const auto rep = json::parse(in);
  CHECK(rep["mode"] == "G");
  CHECK(rep["metrics"]["g_usage"].is_number());
  CHECK(rep["metrics"]["c_usage"].is_null());
}
