#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "macn/experiment.hpp"

using namespace macn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string error_of(const std::string& text) {
  try {
    parse_experiment(text);
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("macn_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Runs the CLI with stdout and stderr captured in files under `dir`.
int cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string("\"") + MACN_CLI_PATH + "\" " + args + " >\"" + (dir / "stdout").string() +
                          "\" 2>\"" + (dir / "stderr").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("minimal grid config fills the defaults") {
  const ExperimentConfig c = parse_experiment(R"({"task":"grid","size":16})");
  CHECK(c.data.task == Task::Grid);
  CHECK(c.model.vi.iterations == 20);
  CHECK(c.model.memory.slots == 32);
  CHECK(c.model.memory.word_size == 8);
  CHECK(c.model.memory.read_heads == 4);
  CHECK(c.train.learning_rate == 1e-4);
  CHECK(c.step_cap == 40);
  CHECK(c.model.height == 16);
  CHECK(c.model.variant == Variant::Macn);
}

TEST_CASE("task defaults") {
  const ExperimentConfig big = parse_experiment(R"({"task":"grid","size":32})");
  CHECK(big.model.vi.iterations == 40);
  CHECK(big.step_cap == 60);
  const ExperimentConfig graph = parse_experiment(R"({"task":"graph","nodes":9})");
  CHECK(graph.model.actions == 9);
  CHECK(graph.step_cap == 18);
  CHECK(graph.model.centered_crops);
  CHECK_FALSE(big.model.centered_crops);
  CHECK(graph.model.height == graph_image_side(9));
  const ExperimentConfig tunnel = parse_experiment(R"({"task":"tunnel","size":16,"tunnel_length":8})");
  CHECK(tunnel.model.memory.read_heads == 1);
  CHECK(tunnel.train.l2_access > 0.0);
}

TEST_CASE("config errors name the offending field") {
  CHECK(error_of(R"({"task":"grid","sizee":16})").find("sizee") != std::string::npos);
  CHECK(error_of(R"({"task":"grid","model":{"slotz":4}})").find("slotz") != std::string::npos);
  CHECK(error_of(R"({"task":"grid","size":"big"})").find("size") != std::string::npos);
  CHECK(error_of(R"({"task":"maze"})").find("maze") != std::string::npos);
  CHECK(error_of(R"({"task":"grid","step_cap":41})").find("step") != std::string::npos);
  CHECK_FALSE(error_of("{not json").empty());
  CHECK_THROWS(load_config("/nonexistent/macn.json"));
}

TEST_CASE("dump is canonical and stable") {
  for (const char* text : {R"({"task":"grid","size":16})", R"({"task":"tunnel","tunnel_length":10,"seed":3})",
                           R"({"task":"graph","nodes":9,"model":{"variant":"vin"}})"}) {
    CAPTURE(text);
    const std::string once = dump_experiment(parse_experiment(text));
    CHECK(dump_experiment(parse_experiment(once)) == once);
  }
}

TEST_CASE("set_variant keeps the config valid") {
  ExperimentConfig c = default_experiment(Task::Grid);
  for (Variant v : {Variant::MacnLstm, Variant::CnnMemory, Variant::VinOnly, Variant::Macn}) {
    set_variant(c, v);
    CHECK(c.model.variant == v);
    CHECK_NOTHROW(c.validate());
  }
}

TEST_CASE("cli") {
  SUBCASE("selftest passes") {
    const fs::path d = scratch("selftest");
    CHECK(cli("selftest", d) == 0);
    fs::remove_all(d);
  }
  SUBCASE("eval without a checkpoint fails") {
    const fs::path d = scratch("eval");
    CHECK(cli("eval --checkpoint \"" + (d / "missing.bin").string() + "\"", d) != 0);
    CHECK(slurp(d / "stderr").find("checkpoint not found") != std::string::npos);
    fs::remove_all(d);
  }
  SUBCASE("gen-data twice with the same seed gives identical files") {
    const fs::path d = scratch("gen");
    std::ofstream(d / "c.json") << R"({"task":"grid","size":8,"dataset_worlds":30})";
    const std::string base = "gen-data --config \"" + (d / "c.json").string() + "\" --seed 7 --out ";
    REQUIRE(cli(base + "\"" + (d / "a").string() + "\"", d) == 0);
    REQUIRE(cli(base + "\"" + (d / "b").string() + "\" --jobs 1", d) == 0);
    for (const char* f : {"train.jsonl", "test.jsonl", "manifest.json"}) {
      CAPTURE(f);
      CHECK_FALSE(slurp(d / "a" / f).empty());
      CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
    }
    fs::remove_all(d);
  }
  SUBCASE("unknown subcommands and bad configs exit nonzero") {
    const fs::path d = scratch("bad");
    CHECK(cli("frobnicate", d) != 0);
    std::ofstream(d / "c.json") << R"({"task":"grid","sizee":16})";
    CHECK(cli("gen-data --config \"" + (d / "c.json").string() + "\"", d) != 0);
    CHECK(slurp(d / "stderr").find("sizee") != std::string::npos);
    fs::remove_all(d);
  }
}
