#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "fxpath/simulator.hpp"

using namespace fxpath;

namespace {

std::string read_data(const std::string& name) {
  std::ifstream in(std::string(FXPATH_DATA_DIR) + "/" + name);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

InputVector zeros(const DataFlowGraph& g) {
  InputVector in;
  for (const Node& n : g.nodes)
    if (n.kind == NodeKind::input) in.raws[n.id] = 0;
  return in;
}

InputVector max_positive(const DataFlowGraph& g) {
  InputVector in;
  for (const Node& n : g.nodes)
    if (n.kind == NodeKind::input) in.raws[n.id] = n.declared->raw_max();
  return in;
}

// Enumerates every combination of symmetric raw inputs and checks each node's
// deviation against its bound and each stored raw against its format.
void exhaust(const DataFlowGraph& g, const AllocationReport& alloc) {
  std::vector<const Node*> inputs;
  for (const Node& n : g.nodes)
    if (n.kind == NodeKind::input) inputs.push_back(&n);
  std::vector<mpz_class> lo(inputs.size()), hi(inputs.size());
  for (size_t i = 0; i < inputs.size(); ++i) {
    hi[i] = inputs[i]->declared->raw_max();
    lo[i] = inputs[i]->declared->is_signed ? mpz_class(-hi[i]) : mpz_class(0);
  }
  InputVector in;
  std::vector<mpz_class> cur(lo);
  long combos = 0;
  while (true) {
    for (size_t i = 0; i < inputs.size(); ++i) in.raws[inputs[i]->id] = cur[i];
    SimulationResult sim = run_fixed(g, alloc, in);  // throws on any range violation
    ++combos;
    for (const NodeSim& n : sim.nodes) {
      const NodeAllocation* na = alloc.find(n.id);
      if (n.deviation > na->error_bound) {
        CAPTURE(n.id, n.deviation.to_terms(), na->error_bound.to_terms());
        FAIL("deviation exceeds bound");
      }
    }
    size_t k = 0;
    while (k < cur.size() && cur[k] == hi[k]) {
      cur[k] = lo[k];
      ++k;
    }
    if (k == cur.size()) break;
    ++cur[k];
  }
  CAPTURE(combos);
  CHECK(combos > 0);
}

}  // namespace

TEST_CASE("reference execution is exact") {
  DataFlowGraph g = parse_dfg(read_data("fir5.dfg"));
  auto ref = run_reference(g, zeros(g));
  for (const Dyadic& v : ref) CHECK(v.is_zero());

  DataFlowGraph p = parse_dfg("word 16\ninput a 1/7/0\noutput y a\n");
  InputVector in;
  in.raws["a"] = 42;
  auto pref = run_reference(p, in);
  CHECK(pref[0] == Dyadic(42, 0));
  CHECK(pref[1] == Dyadic(42, 0));

  // definitional: an add node's reference is the sum of its operands'
  DataFlowGraph s = parse_dfg(
      "word 16\ninput a 1/3/4\ninput b 1/3/4\nnode t = add a b\nnode u = sub a b\n"
      "node m = mul a b\noutput y t\noutput z u\noutput w m\n");
  InputVector si;
  si.raws["a"] = 77;
  si.raws["b"] = -50;
  auto sref = run_reference(s, si);
  CHECK(sref[s.find("t")] == sref[s.find("a")] + sref[s.find("b")]);
  CHECK(sref[s.find("u")] == sref[s.find("a")] - sref[s.find("b")]);
  CHECK(sref[s.find("m")] == sref[s.find("a")] * sref[s.find("b")]);
}

TEST_CASE("all-zero inputs store zeros with zero deviation") {
  DataFlowGraph g = parse_dfg(read_data("fir5.dfg"));
  AllocationReport alloc = assign_formats(g);
  SimulationResult sim = run_fixed(g, alloc, zeros(g));
  for (const NodeSim& n : sim.nodes) {
    CHECK(n.raw == 0);
    CHECK(n.deviation.is_zero());
  }
}

TEST_CASE("maximal inputs stay within every bound") {
  DataFlowGraph g = parse_dfg(read_data("fir5.dfg"));
  AllocationReport alloc = assign_formats(g);
  SimulationResult sim = run_fixed(g, alloc, max_positive(g));
  const NodeSim* n9 = sim.find("n9");
  REQUIRE(n9);
  CHECK(n9->deviation <= Dyadic::pow2(-16) + Dyadic::pow2(-17) + Dyadic::pow2(-18));
  for (const NodeSim& n : sim.nodes) CHECK(n.deviation <= alloc.find(n.id)->error_bound);
}

TEST_CASE("adding 125 and 5 stores 130 in nine data bits") {
  DataFlowGraph g = parse_dfg(read_data("add2.dfg"));
  AllocationReport alloc = assign_formats(g);
  CHECK(alloc.find("s")->format.data_bits() == 8);  // (1/8/0) minimal, padded
  InputVector in;
  in.raws["a"] = 125;
  in.raws["b"] = 5;
  SimulationResult sim = run_fixed(g, alloc, in);
  CHECK(sim.find("s")->raw == 130);
  CHECK(sim.find("s")->deviation.is_zero());
  CHECK(mpz_sizeinbase(sim.find("s")->raw.get_mpz_t(), 2) == 8);  // 130 data bits
}

TEST_CASE("constants evaluate exactly") {
  DataFlowGraph g = parse_dfg(
      "word 16\nconst half 0.5 1/0/15\ninput a 1/0/15\nnode p = mul a half\noutput y p\n");
  AllocationReport alloc = assign_formats(g);
  InputVector in;
  in.raws["a"] = 2000;
  SimulationResult sim = run_fixed(g, alloc, in);
  CHECK(sim.find("half")->raw == 16384);
  CHECK(sim.find("p")->deviation.is_zero());
}

TEST_CASE("random trials respect the FIR bounds and are deterministic") {
  DataFlowGraph g = parse_dfg(read_data("fir5.dfg"));
  AllocationReport alloc = assign_formats(g);
  BoundsVerdict v1 = verify_bounds(g, alloc, 2000, 42);
  CHECK(v1.ok);
  CHECK(!v1.counterexample.has_value());
  BoundsVerdict v2 = verify_bounds(g, alloc, 2000, 42);
  REQUIRE(v1.stats.size() == v2.stats.size());
  for (size_t i = 0; i < v1.stats.size(); ++i)
    CHECK(v1.stats[i].max_deviation == v2.stats[i].max_deviation);
  // a different seed explores different corners but still verifies
  CHECK(verify_bounds(g, alloc, 500, 7).ok);
}

TEST_CASE("an understated bound is caught with a counterexample") {
  DataFlowGraph g = parse_dfg(read_data("fir5.dfg"));
  AllocationReport alloc = assign_formats(g);
  for (NodeAllocation& n : alloc.nodes)
    if (n.id == "n6") n.error_bound = Dyadic::pow2(-20);
  BoundsVerdict v = verify_bounds(g, alloc, 200, 1);
  CHECK(!v.ok);
  REQUIRE(v.counterexample.has_value());
  CHECK(v.counterexample->node == "n6");
  CHECK(v.counterexample->deviation > v.counterexample->bound);
}

TEST_CASE("a corrupted allocation aborts loudly") {
  DataFlowGraph g = parse_dfg(read_data("add2.dfg"));
  AllocationReport alloc = assign_formats(g);
  for (NodeAllocation& n : alloc.nodes)
    if (n.id == "s") n.format.int_bits = 6;  // pretend the sum fits 6 integer bits
  InputVector in;
  in.raws["a"] = 125;
  in.raws["b"] = 5;
  CHECK_THROWS_AS(run_fixed(g, alloc, in), overflow_violation);
}

TEST_CASE("simulation inputs outside the symmetric range are rejected") {
  DataFlowGraph g = parse_dfg(read_data("add2.dfg"));
  AllocationReport alloc = assign_formats(g);
  InputVector in;
  in.raws["a"] = -128;  // storable, but outside the growth model's range
  in.raws["b"] = 0;
  CHECK_THROWS_AS(run_fixed(g, alloc, in), input_error);
}

TEST_CASE("exhaustive soundness on 4-bit FIR variants") {
  SECTION("three taps, exact products") {
    DataFlowGraph g = parse_dfg(read_data("fir3_w4.dfg"));
    exhaust(g, assign_formats(g));
  }
  SECTION("two taps with product truncation") {
    DataFlowGraph g = parse_dfg(
        "word 4\ninput x0 1/0/2\ninput x1 1/0/2\ninput w0 1/0/2\ninput w1 1/0/2\n"
        "node p0 = mul x0 w0\nnode p1 = mul x1 w1\nnode s1 = add p0 p1\noutput y s1\n");
    AllocationReport alloc = assign_formats(g);
    CHECK(alloc.find("p0")->error_bound == Dyadic::pow2(-4));  // one trimmed LSB
    exhaust(g, alloc);
  }
}

TEST_CASE("rescaled chain outputs feeding another add stay sound") {
  // s1 and s2 both rescale; t sees externals at scale 1 and falls back to the
  // per-step worst case, which costs an alignment-aware fresh term
  DataFlowGraph g = parse_dfg(
      "word 4\ninput i0 1/0/3\ninput i1 1/0/3\ninput i2 1/0/3\ninput i3 1/0/3\n"
      "node s1 = add i0 i1\nnode s2 = add i2 i3\nnode t = add s1 s2\noutput y t\n");
  AllocationReport alloc = assign_formats(g);
  CHECK(alloc.find("s1")->scale_exp == 1);
  CHECK(alloc.find("s1")->error_bound == Dyadic::pow2(-4));
  CHECK(alloc.find("t")->format.str() == "(1/1/2)");
  CHECK(alloc.find("t")->scale_exp == 1);
  CHECK(alloc.find("t")->error_bound == Dyadic::pow2(-2));
  exhaust(g, alloc);  // 15^4 input combinations
}

TEST_CASE("accumulation harness reproduces the 10000-step table") {
  GrowthProfile p = accumulate_harness(OperandWidth(7), 10000);
  CHECK(p.overflow_positions ==
        std::vector<long>{1, 2, 4, 8, 16, 32, 64, 128, 257, 514, 1028, 2056, 4112, 8224});
  REQUIRE(p.bit_lengths.size() == 14);
  CHECK(p.bit_lengths.front() == 9);
  CHECK(p.bit_lengths.back() == 22);

  CHECK(accumulate_harness(OperandWidth(7), 1).overflow_positions == std::vector<long>{1});
}

TEST_CASE("harness positions for 4-bit operands match a literal rerun") {
  // independent brute force: repeated addition, recording bit-length growth
  mpz_class acc = 15;
  std::vector<long> expected;
  size_t last = 4;
  for (long s = 1; s <= 100; ++s) {
    acc += 15;
    size_t bl = mpz_sizeinbase(acc.get_mpz_t(), 2);
    if (bl > last) {
      expected.push_back(s);
      last = bl;
    }
  }
  CHECK(expected == std::vector<long>{1, 2, 4, 8, 17, 34, 68});
  CHECK(accumulate_harness(OperandWidth(3), 100).overflow_positions == expected);
}

TEST_CASE("harness and closed-form profile agree for N >= 1") {
  for (int n = 1; n <= 12; ++n) {
    GrowthProfile h = accumulate_harness(OperandWidth(n), 600);
    GrowthProfile p = profile(OperandWidth(n), 600);
    CHECK(h.overflow_positions == p.overflow_positions);
    CHECK(h.bit_lengths == p.bit_lengths);
    for (size_t k = 0; k < h.overflow_positions.size(); ++k)
      CHECK(mpz_class(h.overflow_positions[k]) ==
            overflow_step(OperandWidth(n), static_cast<int>(k) + 1));
  }
}

TEST_CASE("the documented single-bit divergence at N = 0") {
  GrowthProfile h = accumulate_harness(OperandWidth(0), 40);
  CHECK(h.overflow_positions == std::vector<long>{1, 3, 7, 15, 31});
  for (size_t k = 0; k < h.overflow_positions.size(); ++k)
    CHECK(mpz_class(h.overflow_positions[k]) + 1 ==
          overflow_step(OperandWidth(0), static_cast<int>(k) + 1));
}

TEST_CASE("csv input parsing") {
  DataFlowGraph g = parse_dfg(read_data("add2.dfg"));
  auto trials = parse_inputs_csv("a,b\nraw:125,raw:+5\n0.0,raw:-127\n", g);
  REQUIRE(trials.size() == 2);
  CHECK(trials[0].raws.at("a") == 125);
  CHECK(trials[0].raws.at("b") == 5);
  CHECK(trials[1].raws.at("a") == 0);
  CHECK(trials[1].raws.at("b") == -127);

  CHECK_THROWS_AS(parse_inputs_csv("a\nraw:1\n", g), input_error);          // missing column
  CHECK_THROWS_AS(parse_inputs_csv("a,b,c\n1,2,3\n", g), input_error);      // unknown column
  CHECK_THROWS_AS(parse_inputs_csv("a,b\nraw:1\n", g), input_error);        // short row
  CHECK_THROWS_AS(parse_inputs_csv("a,b\nraw:999,raw:0\n", g), input_error);
  CHECK_THROWS_AS(parse_inputs_csv("a,b\nraw:-128,raw:0\n", g), input_error);
  CHECK_THROWS_AS(parse_inputs_csv("a,b\n", g), input_error);               // no rows
  CHECK_THROWS_AS(parse_inputs_csv("a,b\nfoo,raw:0\n", g), input_error);
}

TEST_CASE("json input parsing") {
  DataFlowGraph g = parse_dfg(read_data("add2.dfg"));
  auto trials = parse_inputs_json(R"([{"a": "raw:125", "b": "5"}])", g);
  REQUIRE(trials.size() == 1);
  CHECK(trials[0].raws.at("a") == 125);
  CHECK(trials[0].raws.at("b") == 5);

  CHECK_THROWS_AS(parse_inputs_json("{}", g), input_error);
  CHECK_THROWS_AS(parse_inputs_json(R"([{"a": "1"}])", g), input_error);
  CHECK_THROWS_AS(parse_inputs_json(R"([{"a": "1", "b": "2", "z": "3"}])", g), input_error);
  CHECK_THROWS_AS(parse_inputs_json("not json", g), input_error);
}

TEST_CASE("decimal inputs quantize by truncation") {
  DataFlowGraph g = parse_dfg("word 16\ninput a 1/3/4\noutput y a\n");
  auto trials = parse_inputs_csv("a\n0.3\n", g);
  CHECK(trials[0].raws.at("a") == 4);  // floor(0.3 * 16)
  AllocationReport alloc = assign_formats(g);
  SimulationResult sim = run_fixed(g, alloc, trials[0]);
  CHECK(sim.find("a")->deviation.is_zero());  // deviation excludes input quantization
}
