#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

namespace {

struct Outcome {
  int status = -1;
  std::string output;  // stdout and stderr
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(VEGA_CLI_PATH) + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) o.output.append(buf, n);
  const int raw = pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const char* kSmall = "--convs 10 --utts 5 --dims 8,6,5 --anchor-dim 8 --anchors-per-class 3";

}  // namespace

TEST_CASE("synth") {
  TempDir dir;
  auto a = run("synth " + std::string(kSmall) + " --out " + (dir / "a").string());
  INFO(a.output);
  REQUIRE(a.status == 0);
  CHECK(a.output.find("wrote 10 conversations x 5 utterances") != std::string::npos);
  for (const char* f : {"manifest.json", "anchors.vea", "features_T.vft", "features_A.vft", "features_V.vft"})
    CHECK(std::filesystem::exists(dir / "a" / f));

  REQUIRE(run("synth " + std::string(kSmall) + " --out " + (dir / "b").string()).status == 0);
  for (const char* f : {"anchors.vea", "features_T.vft", "features_A.vft", "features_V.vft"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));

  CHECK(run("synth --sep -1 --out " + (dir / "c").string()).status != 0);
  CHECK(run("synth").status != 0);
}

TEST_CASE("anchors") {
  TempDir dir;
  REQUIRE(run("synth " + std::string(kSmall) + " --out " + dir.path().string()).status == 0);
  auto stats = run("anchors stats --in " + (dir / "anchors.vea").string());
  CHECK(stats.status == 0);
  CHECK(stats.output.find("intra_cos") != std::string::npos);
  CHECK(stats.output.find("class5") != std::string::npos);

  auto center = run("anchors center --in " + (dir / "anchors.vea").string() + " --out " + (dir / "c.vea").string());
  CHECK(center.status == 0);
  auto again = run("anchors stats --in " + (dir / "c.vea").string());
  CHECK(again.output.find("     1 ") != std::string::npos);

  CHECK(run("anchors stats --in " + (dir / "missing.vea").string()).status != 0);
  CHECK(run("anchors stats --in " + (dir / "manifest.json").string()).status != 0);
}

TEST_CASE("train then eval") {
  TempDir dir;
  REQUIRE(run("synth " + std::string(kSmall) + " --out " + (dir / "d").string()).status == 0);
  const std::string common = "train --manifest " + (dir / "d" / "manifest.json").string() +
                             " --epochs 2 --hidden 8 --heads 2 --seeds 0..1";
  auto t = run(common + " --out " + (dir / "run").string());
  INFO(t.output);
  REQUIRE(t.status == 0);
  CHECK(t.output.find("test over 2 seeds") != std::string::npos);
  for (const char* s : {"seed_0", "seed_1"})
    for (const char* f : {"run.json", "log.jsonl", "checkpoint.vck", "metrics.json"})
      CHECK(std::filesystem::exists(dir / "run" / s / f));

  auto metrics = nlohmann::json::parse(slurp(dir / "run" / "seed_0" / "metrics.json"));
  CHECK(metrics.contains("test"));
  std::istringstream log(slurp(dir / "run" / "seed_0" / "log.jsonl"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    CHECK(nlohmann::json::accept(line));
    ++lines;
  }
  CHECK(lines > 2);

  // Same command, same checkpoint bytes.
  REQUIRE(run(common + " --out " + (dir / "run2").string()).status == 0);
  CHECK(slurp(dir / "run" / "seed_1" / "checkpoint.vck") == slurp(dir / "run2" / "seed_1" / "checkpoint.vck"));

  auto e = run("eval --checkpoint " + (dir / "run" / "seed_0" / "checkpoint.vck").string() + " --run " +
               (dir / "run" / "seed_0" / "run.json").string() + " --split test");
  CHECK(e.status == 0);
  char want[64];
  std::snprintf(want, sizeof want, "%8.2f", 100.0 * metrics["test"]["acc"].get<double>());
  const auto overall = e.output.substr(e.output.find("overall"));
  CHECK(overall.find(want) != std::string::npos);

  CHECK(run(common + " --ablation bogus --out " + (dir / "bad").string()).status != 0);
  CHECK(run("train --manifest " + (dir / "nope.json").string()).status != 0);
}

TEST_CASE("gradcheck") {
  auto g = run("gradcheck --count 1");
  CHECK(g.status == 0);
  CHECK(g.output.find("0 failure(s)") != std::string::npos);
}
