#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "macn/trainer.hpp"

using namespace macn;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny(int side) {
  ModelConfig c;
  c.height = c.width = side;
  c.hidden = 16;
  c.memory = {8, 4, 1};
  c.vi.iterations = 6;
  c.vi.hidden_channels = 10;
  return c;
}

void fill(const Tensor& t, double v) {
  Tensor m = t;
  for (double& x : m.data()) x = v;
}

// Straight corridor run to the right: every label is Right.
EpisodeSample rightward(int side) {
  Scenario sc;
  sc.grid = GridWorld(side, side);
  sc.grid.start = {side / 2, 0};
  sc.grid.goal = {side / 2, side - 1};
  return demonstrate(sc, 0);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("loss_episode") {
  const EpisodeSample e = rightward(8);
  REQUIRE(e.actions.size() == 7);
  for (int a : e.actions) REQUIRE(a == static_cast<int>(Action::Right));
  Model m(tiny(8), 1);
  Tape tape(false);

  SUBCASE("a margin of 100 on the label gives near-zero loss") {
    fill(m.params().at("output.weight"), 0.0);
    Tensor b = m.params().at("output.bias");
    fill(b, 0.0);
    b[static_cast<std::size_t>(Action::Right)] = 100.0;
    CHECK(loss_episode(tape, m, e).item() < 1e-3);
  }
  SUBCASE("uniform logits give ln 4") {
    fill(m.params().at("output.weight"), 0.0);
    fill(m.params().at("output.bias"), 0.0);
    CHECK(loss_episode(tape, m, e).item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("the access penalty only adds") {
    const double plain = loss_episode(tape, m, e).item();
    CHECK(loss_episode(tape, m, e, 0.0).item() == plain);
    CHECK(loss_episode(tape, m, e, 1e-2).item() > plain);
    Model vin([] {
      ModelConfig c = tiny(8);
      c.variant = Variant::VinOnly;
      return c;
    }(), 2);
    CHECK(loss_episode(tape, vin, e, 1.0).item() == loss_episode(tape, vin, e).item());
  }
  SUBCASE("empty episodes are rejected") {
    EpisodeSample empty;
    CHECK_THROWS_AS(loss_episode(tape, m, empty), std::invalid_argument);
  }
}

TEST_CASE("curriculum_next") {
  const std::vector<CurriculumStep> s{{0, 0}, {1, 5}, {2, 10}};
  CHECK(curriculum_next(0, 7, s) == 1);
  CHECK(curriculum_next(1, 4, s) == 0);
  CHECK(curriculum_next(0, 10, s) == 2);
  CHECK(curriculum_next(0, 99, s) == 2);
  CHECK(curriculum_next(3, 7, {}) == 0);
}

TEST_CASE("TrainConfig validation") {
  TrainConfig c;
  c.schedule = {{1, 5}, {0, 10}};
  CHECK_THROWS(c.validate());
  c.schedule = {};
  c.learning_rate = 0.0;
  CHECK_THROWS(c.validate());
  c.learning_rate = 1e-4;
  c.epochs = -1;
  CHECK_THROWS(c.validate());
}

TEST_CASE("train") {
  DataConfig d;
  d.size = 8;
  d.level = 1;
  TrainConfig c;
  c.train_worlds = 4;
  c.test_worlds = 3;
  c.seed = 5;

  SUBCASE("zero epochs leave the parameters unchanged") {
    c.epochs = 0;
    Model m(tiny(8), 3);
    const Model before(tiny(8), 3);
    const TrainReport r = train(m, d, c);
    CHECK(r.epochs.empty());
    for (std::size_t k = 0; k < m.params().entries().size(); ++k) {
      const auto& a = m.params().entries()[k].value;
      const auto& b = before.params().entries()[k].value;
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
  }
  SUBCASE("same seed, identical checkpoints and logs") {
    c.epochs = 2;
    const fs::path a = fs::temp_directory_path() / "macn_train_a", b = fs::temp_directory_path() / "macn_train_b";
    fs::remove_all(a);
    fs::remove_all(b);
    Model ma(tiny(8), 3), mb(tiny(8), 3);
    const TrainReport ra = train(ma, d, c, a), rb = train(mb, d, c, b);
    CHECK(slurp(a / "checkpoint.bin") == slurp(b / "checkpoint.bin"));
    CHECK(slurp(a / "model.json") == slurp(b / "model.json"));
    REQUIRE(ra.epochs.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) CHECK(ra.epochs[i].train_loss == rb.epochs[i].train_loss);
    std::ifstream log(a / "train_log.csv");
    std::string header;
    std::getline(log, header);
    CHECK(header == "epoch,train_loss,test_error,curriculum_level,wall_seconds");
    fs::remove_all(a);
    fs::remove_all(b);
  }
  SUBCASE("the curriculum advances on schedule") {
    c.epochs = 3;
    c.schedule = {{0, 0}, {1, 1}, {2, 2}};
    Model m(tiny(8), 4);
    const TrainReport r = train(m, d, c);
    REQUIRE(r.epochs.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(r.epochs[static_cast<std::size_t>(i)].curriculum_level == i);
  }
}

TEST_CASE("training data never touches held-out worlds") {
  DataConfig d;
  d.level = 2;
  for (const auto& s : training_scenarios(d, 100, 1)) CHECK_FALSE(s.is_test(d.test_percent));
  for (const auto& s : held_out_scenarios(d, 30, 1)) CHECK(s.is_test(d.test_percent));
}

TEST_CASE("test_error") {
  const EpisodeSample e = rightward(8);
  Model m(tiny(8), 6);
  fill(m.params().at("output.weight"), 0.0);
  Tensor b = m.params().at("output.bias");
  fill(b, 0.0);
  b[static_cast<std::size_t>(Action::Right)] = 1.0;
  CHECK(test_error(m, {e}) == 0.0);
  b[static_cast<std::size_t>(Action::Up)] = 2.0;
  CHECK(test_error(m, {e, e}, 2) == 1.0);
  CHECK(test_error(m, {}) == 0.0);
}

TEST_CASE("300 episodes on one 16x16 world drive the loss below 0.05") {
  DataConfig d;
  d.level = 3;
  TrainConfig c;
  c.train_worlds = 1;
  c.test_worlds = 0;
  c.epochs = 300;
  c.seed = 9;
  Model m(ModelConfig{}, 7);
  const TrainReport r = train(m, d, c);
  CHECK(r.epochs.back().train_loss < 0.05);
}
