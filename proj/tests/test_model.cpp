#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "macn/checks.hpp"
#include "macn/expert.hpp"
#include "macn/model.hpp"
#include "macn/trainer.hpp"

using namespace macn;

namespace {

ModelConfig small(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.height = c.width = 10;
  c.hidden = 12;
  c.memory = {6, 4, 2};
  c.vi.iterations = 4;
  c.vi.hidden_channels = 8;
  return c;
}

std::vector<double> logits_of(const Model& m, const EpisodeSample& e) {
  Tape tape(false);
  ModelState s = m.init_state();
  std::vector<double> out;
  for (std::size_t t = 0; t < e.obs.size(); ++t) {
    StepOutput o = m.forward_step(tape, e.obs[t], e.agents[t], s);
    out.insert(out.end(), o.logits.data().begin(), o.logits.data().end());
    s = std::move(o.state);
  }
  return out;
}

EpisodeSample sample(std::uint64_t seed, int size = 10) {
  DataConfig d;
  d.size = size;
  d.level = 2;
  return demonstrate(make_scenario(d, seed), seed);
}

}  // namespace

TEST_CASE("init_state") {
  SUBCASE("default MACN: 4 read vectors of 8 zeros") {
    const Model m(ModelConfig{}, 1);
    const ModelState s = m.init_state();
    REQUIRE(s.memory.read_vectors.size() == 4);
    std::size_t entries = 0;
    for (const auto& r : s.memory.read_vectors) {
      entries += r.size();
      for (double v : r.data()) CHECK(v == 0.0);
    }
    CHECK(entries == 32);
    CHECK(s.memory.memory.shape() == Shape{32, 8});
  }
  SUBCASE("two calls agree") {
    const Model m(small(Variant::Macn), 2);
    const ModelState a = m.init_state(), b = m.init_state();
    for (std::size_t i = 0; i < a.h.size(); ++i) CHECK(a.h[i] == b.h[i]);
    CHECK(memory_invariant_violations(a.memory).empty());
  }
  SUBCASE("VIN-only carries no state") {
    const ModelState s = Model(small(Variant::VinOnly), 3).init_state();
    CHECK_FALSE(s.h.defined());
    CHECK_FALSE(s.memory.memory.defined());
  }
}

TEST_CASE("forward_step") {
  const EpisodeSample e = sample(4);
  for (Variant v : {Variant::Macn, Variant::MacnLstm, Variant::CnnMemory, Variant::VinOnly}) {
    CAPTURE(variant_name(v));
    const Model m(small(v), 5);
    Tape tape(false);
    const StepOutput a = m.forward_step(tape, e.obs[0], e.agents[0], m.init_state());
    const StepOutput b = m.forward_step(tape, e.obs[0], e.agents[0], m.init_state());
    REQUIRE(a.logits.size() == 4);
    double z = 0.0, mx = *std::max_element(a.logits.data().begin(), a.logits.data().end());
    for (double l : a.logits.data()) z += std::exp(l - mx);
    double total = 0.0;
    for (double l : a.logits.data()) total += std::exp(l - mx) / z;
    CHECK(total == doctest::Approx(1.0));
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.logits[i] == b.logits[i]);
    CHECK_THROWS(m.forward_step(tape, Tensor({2, 9, 10}), e.agents[0], m.init_state()));
  }
}

TEST_CASE("VIN-only is a function of the current observation") {
  const EpisodeSample e = sample(6);
  const Model m(small(Variant::VinOnly), 7);
  Tape tape(false);
  ModelState s = m.init_state();
  for (std::size_t t = 0; t < e.obs.size(); ++t) {
    const StepOutput carried = m.forward_step(tape, e.obs[t], e.agents[t], s);
    const StepOutput fresh = m.forward_step(tape, e.obs[t], e.agents[t], m.init_state());
    for (std::size_t i = 0; i < 4; ++i) CHECK(carried.logits[i] == fresh.logits[i]);
    s = carried.state;
  }
}

TEST_CASE("episode isolation") {
  const EpisodeSample a = sample(8), b = sample(9);
  const Model m(small(Variant::Macn), 10);
  const auto fresh = logits_of(m, b);
  (void)logits_of(m, a);
  CHECK(logits_of(m, b) == fresh);
  const Model other(small(Variant::Macn), 10);
  CHECK(logits_of(other, b) == fresh);
}

TEST_CASE("build_variant") {
  SUBCASE("same seed, same parameters") {
    const ParameterSet a = build_variant(small(Variant::Macn), 11), b = build_variant(small(Variant::Macn), 11);
    REQUIRE(a.entries().size() == b.entries().size());
    for (std::size_t k = 0; k < a.entries().size(); ++k) {
      const auto& x = a.entries()[k].value;
      const auto& y = b.entries()[k].value;
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i] == y[i]);
    }
    CHECK(a.count() == b.count());
  }
  SUBCASE("MACN and MACN-LSTM differ only in the memory pathway") {
    std::map<std::string, Shape> macn, lstm;
    const ParameterSet a = build_variant(small(Variant::Macn), 1), b = build_variant(small(Variant::MacnLstm), 1);
    for (const auto& e : a.entries()) macn[e.name] = e.value.shape();
    for (const auto& e : b.entries()) lstm[e.name] = e.value.shape();
    for (const auto& [name, shape] : macn) {
      if (name.rfind("interface.", 0) == 0) {
        CHECK(lstm.count(name) == 0);
      } else {
        REQUIRE(lstm.count(name) == 1);
        CHECK(lstm[name] == shape);
      }
    }
    for (const auto& [name, shape] : lstm) {
      if (name.rfind("memlstm.", 0) != 0) CHECK(macn.count(name) == 1);
    }
  }
  SUBCASE("checkpoint round trip keeps names and values") {
    Model m(small(Variant::CnnMemory), 12);
    std::stringstream buf;
    write_checkpoint(buf, m.params());
    const Model back(m.config(), read_checkpoint(buf));
    REQUIRE(back.params().entries().size() == m.params().entries().size());
    for (std::size_t k = 0; k < m.params().entries().size(); ++k) {
      const auto& a = m.params().entries()[k];
      const auto& b = back.params().entries()[k];
      CHECK(a.name == b.name);
      for (std::size_t i = 0; i < a.value.size(); ++i) CHECK(b.value[i] == static_cast<double>(static_cast<float>(a.value[i])));
    }
  }
}

TEST_CASE("every submodule receives gradient") {
  const EpisodeSample e = sample(13);
  Model m(small(Variant::Macn), 14);
  m.params().zero_grad();
  Tape tape;
  tape.backward(loss_episode(tape, m, e));
  std::map<std::string, bool> any;
  for (const auto& p : m.params().entries()) {
    const std::string module = p.name.substr(0, p.name.rfind('.'));
    bool nz = false;
    for (double g : p.value.grad()) nz = nz || g != 0.0;
    any[module] = any[module] || nz;
  }
  for (const char* module : {"vi.hidden", "vi.reward", "vi.q0", "vi.q", "controller", "interface", "output"}) {
    CAPTURE(module);
    CHECK(any[module]);
  }
}

TEST_CASE("full MACN step passes the finite difference check") {
  const auto results = checks::gradient_suite(7);
  const auto it = std::find_if(results.begin(), results.end(), [](const auto& r) { return r.name == "macn_forward_step"; });
  REQUIRE(it != results.end());
  INFO(it->detail);
  CHECK(it->passed);
}

TEST_CASE("graph observations") {
  GraphWorld g = generate_graph_world(2, 10);
  const Tensor obs = graph_obs_stack(observe(g, 3), 10);
  // 10 nodes pad to a 4x4 image
  CHECK(obs.shape() == Shape{2, 4, 4});
  for (int j = 0; j < 10; ++j) CHECK(obs[static_cast<std::size_t>(j)] == (g.edge(3, j) ? 1.0 : 0.0));
  for (int j = 10; j < 16; ++j) CHECK(obs[static_cast<std::size_t>(j)] == 0.0);
  CHECK(obs[16 + static_cast<std::size_t>(g.goal)] == 1.0);
  CHECK(graph_node_cell(7, 10) == Cell{1, 3});
}

TEST_CASE("centered crops ignore the agent position in the value crop") {
  const EpisodeSample e = sample(4);
  for (bool centered : {false, true}) {
    ModelConfig c = small(Variant::Macn);
    c.centered_crops = centered;
    const Model m(c, 3);
    Tape tape(false);
    const StepOutput a = m.forward_step(tape, e.obs[0], {1, 1}, m.init_state());
    const StepOutput b = m.forward_step(tape, e.obs[0], {8, 6}, m.init_state());
    CAPTURE(centered);
    const auto same = [](const Tensor& x, const Tensor& y) { return std::ranges::equal(x.data(), y.data()); };
    CHECK(same(a.value_crop, b.value_crop) == centered);
    CHECK_FALSE(same(a.logits, b.logits));  // coordinates still differ
  }
}

TEST_CASE("model config JSON round trip") {
  ModelConfig c = small(Variant::MacnLstm);
  c.centered_crops = true;
  const ModelConfig back = model_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.variant == Variant::MacnLstm);
  CHECK(back.memory.read_heads == 2);
  CHECK(back.centered_crops);
}
