#pragma once

// Bit-accurate execution of an allocated graph against an exact-rational
// reference, error-bound verification with deterministic pseudo-random
// inputs, and the standalone consecutive-addition accumulation harness.

#include <gmpxx.h>

#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fxpath/allocator.hpp"
#include "fxpath/bitgrowth.hpp"
#include "fxpath/dfg.hpp"
#include "fxpath/dyadic.hpp"
#include "fxpath/fxformat.hpp"

namespace fxpath {

// Raised when a stored raw violates its format range: the allocator promised
// that can never happen, so this must surface loudly.
class overflow_violation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class input_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One raw value per input node, already quantized to the declared format.
// Simulation inputs are restricted to the symmetric range +-(2^D - 1): the
// chain growth model and the minimal product format both assume operand
// magnitudes of at most 2^(N+1) - 1, and the lone two's-complement value
// -2^D breaks that premise ((-2^Da)*(-2^Db) = +2^(Da+Db)).
struct InputVector {
  std::map<std::string, mpz_class> raws;
};

namespace detail {

inline void check_simulation_range(const mpz_class& raw, const Format& f,
                                   const std::string& id) {
  mpz_class lo = f.is_signed ? mpz_class(-f.raw_max()) : mpz_class(0);
  if (raw < lo || raw > f.raw_max())
    throw input_error("input '" + id + "': raw " + raw.get_str() +
                      " outside the simulation range [" + lo.get_str() + ", " +
                      f.raw_max().get_str() + "] of " + f.str());
}

inline const mpz_class& input_raw(const InputVector& in, const std::string& id) {
  auto it = in.raws.find(id);
  if (it == in.raws.end()) throw input_error("no value bound for input '" + id + "'");
  return it->second;
}

}  // namespace detail

// Exact (ideal-arithmetic) value of every node, with inputs first quantized
// to their declared formats so deviations isolate data-path truncation.
inline std::vector<Dyadic> run_reference(const DataFlowGraph& g, const InputVector& in) {
  std::vector<Dyadic> ref(g.nodes.size());
  for (size_t i : topological_order(g)) {
    const Node& n = g.nodes[i];
    switch (n.kind) {
      case NodeKind::input: {
        const mpz_class& raw = detail::input_raw(in, n.id);
        detail::check_simulation_range(raw, *n.declared, n.id);
        ref[i] = Dyadic(raw, -n.declared->frac_bits);
        break;
      }
      case NodeKind::constant:
        ref[i] = *n.const_value;
        break;
      case NodeKind::add:
        ref[i] = ref[n.operands[0]] + ref[n.operands[1]];
        break;
      case NodeKind::sub:
        ref[i] = ref[n.operands[0]] - ref[n.operands[1]];
        break;
      case NodeKind::mul:
        ref[i] = ref[n.operands[0]] * ref[n.operands[1]];
        break;
      case NodeKind::output:
        ref[i] = ref[n.operands[0]];
        break;
    }
  }
  return ref;
}

struct NodeSim {
  std::string id;
  mpz_class raw;     // stored payload
  Dyadic stored;     // raw * 2^(scale - F), the represented real value
  Dyadic reference;  // exact value under ideal arithmetic
  Dyadic deviation;  // |raw * 2^-F - reference / 2^scale|, stored units
};

struct SimulationResult {
  std::vector<NodeSim> nodes;  // topological order

  const NodeSim* find(const std::string& id) const {
    for (const NodeSim& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }
};

// Executes the graph with exact integers under the allocation's formats.
// Mul nodes floor the exact product of their operands' stored values onto the
// assigned grid; each addition chain keeps an exact accumulator of its
// external operands' stored values and applies the allocator's accumulated
// rescale shift at every member, which is where the predicted one-LSB-per-
// rescale truncation cost is actually paid. Every stored raw is checked
// against its format range.
inline SimulationResult run_fixed(const DataFlowGraph& g, const AllocationReport& alloc,
                                  const InputVector& in) {
  std::vector<const NodeAllocation*> na(g.nodes.size());
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    na[i] = alloc.find(g.nodes[i].id);
    if (!na[i]) throw std::invalid_argument("allocation does not cover node " + g.nodes[i].id);
  }

  std::vector<AdditionChain> chains = allocate_chains(g);
  std::vector<std::pair<size_t, long>> chain_pos(g.nodes.size(), {DataFlowGraph::npos, 0});
  for (size_t ci = 0; ci < chains.size(); ++ci)
    for (size_t s = 0; s < chains[ci].members.size(); ++s)
      chain_pos[chains[ci].members[s]] = {ci, static_cast<long>(s) + 1};
  std::vector<Dyadic> chain_acc(chains.size());

  std::vector<Dyadic> ref = run_reference(g, in);
  std::vector<Dyadic> stored_val(g.nodes.size());  // raw * 2^-F, pre-scale
  SimulationResult result;
  result.nodes.reserve(g.nodes.size());

  auto store = [&](size_t i, const Dyadic& exact_scaled) {
    const NodeAllocation& a = *na[i];
    NodeSim sim;
    sim.id = g.nodes[i].id;
    sim.raw = exact_scaled.floor_to_exp(a.scale_exp - a.format.frac_bits);
    if (sim.raw < a.format.raw_min() || sim.raw > a.format.raw_max())
      throw overflow_violation("node '" + sim.id + "': stored raw " + sim.raw.get_str() +
                               " violates format " + a.format.str() +
                               " — allocation is unsound for these inputs");
    stored_val[i] = Dyadic(sim.raw, -a.format.frac_bits);
    sim.stored = Dyadic(sim.raw, a.scale_exp - a.format.frac_bits);
    sim.reference = ref[i];
    sim.deviation = (stored_val[i] - ref[i].mul_pow2(-a.scale_exp)).abs();
    result.nodes.push_back(std::move(sim));
  };

  for (size_t i : topological_order(g)) {
    const Node& n = g.nodes[i];
    switch (n.kind) {
      case NodeKind::input:
      case NodeKind::constant:
        store(i, ref[i]);  // inputs are pre-quantized; consts are exact
        break;

      case NodeKind::mul:
        store(i, stored_val[n.operands[0]].mul_pow2(na[n.operands[0]]->scale_exp) *
                     stored_val[n.operands[1]].mul_pow2(na[n.operands[1]]->scale_exp));
        break;

      case NodeKind::add:
      case NodeKind::sub: {
        auto [ci, step] = chain_pos[i];
        Dyadic acc;
        auto stored_scaled = [&](size_t op) {
          return stored_val[op].mul_pow2(na[op]->scale_exp);
        };
        if (step == 1) {
          const Dyadic& a = stored_scaled(n.operands[0]);
          const Dyadic& b = stored_scaled(n.operands[1]);
          acc = n.kind == NodeKind::sub ? a - b : a + b;
        } else {
          size_t ext = chains[ci].externals[step - 1][0];
          Dyadic e = stored_scaled(ext);
          // the chain predecessor may sit in either operand slot of a sub
          bool prev_first = n.operands[0] == chains[ci].members[step - 2];
          if (n.kind == NodeKind::sub)
            acc = prev_first ? chain_acc[ci] - e : e - chain_acc[ci];
          else
            acc = chain_acc[ci] + e;
        }
        chain_acc[ci] = acc;
        store(i, acc);
        break;
      }

      case NodeKind::output:
        store(i, stored_val[n.operands[0]].mul_pow2(na[n.operands[0]]->scale_exp));
        break;
    }
  }
  return result;
}

// Deterministic uniform draw over [lo, hi] via GMP's Mersenne Twister state,
// so results are identical across platforms and standard libraries.
class InputSampler {
 public:
  explicit InputSampler(unsigned long seed) {
    gmp_randinit_mt(state_);
    gmp_randseed_ui(state_, seed);
  }

  ~InputSampler() { gmp_randclear(state_); }

  InputSampler(const InputSampler&) = delete;
  InputSampler& operator=(const InputSampler&) = delete;

  mpz_class uniform(const mpz_class& lo, const mpz_class& hi) {
    mpz_class span = hi - lo + 1;
    mpz_class r;
    mpz_urandomm(r.get_mpz_t(), state_, span.get_mpz_t());
    return lo + r;
  }

  // Symmetric draw over the format's data range.
  mpz_class draw(const Format& f) {
    mpz_class hi = f.raw_max();
    mpz_class lo = f.is_signed ? mpz_class(-hi) : mpz_class(0);
    return uniform(lo, hi);
  }

  InputVector draw_inputs(const DataFlowGraph& g) {
    InputVector in;
    for (const Node& n : g.nodes)
      if (n.kind == NodeKind::input) in.raws[n.id] = draw(*n.declared);
    return in;
  }

 private:
  gmp_randstate_t state_;
};

struct NodeBoundStats {
  std::string id;
  Dyadic max_deviation;
  Dyadic bound;

  // max_deviation / bound with three decimals, "-" when the bound is zero.
  std::string tightness() const {
    if (bound.is_zero()) return max_deviation.is_zero() ? "-" : "inf";
    Dyadic num = max_deviation * Dyadic(1000, 0);
    mpz_class q = num.floor_to_exp(bound.exponent());
    q /= bound.mantissa();
    std::string s = q.get_str();
    if (s.size() < 4) s.insert(0, 4 - s.size(), '0');
    s.insert(s.size() - 3, ".");
    return s;
  }
};

struct Counterexample {
  long trial = 0;
  std::string node;
  Dyadic deviation;
  Dyadic bound;
  InputVector inputs;
};

struct BoundsVerdict {
  long trials = 0;
  bool ok = true;
  std::vector<NodeBoundStats> stats;  // topological order
  std::optional<Counterexample> counterexample;
};

// Runs `trials` seeded-random input vectors through run_fixed and checks the
// observed deviation of every node against its allocated error bound.
inline BoundsVerdict verify_bounds(const DataFlowGraph& g, const AllocationReport& alloc,
                                   long trials, unsigned long seed) {
  if (trials < 1) throw std::invalid_argument("trial count must be >= 1");
  InputSampler rng(seed);
  BoundsVerdict verdict;
  verdict.trials = trials;
  for (const NodeAllocation& n : alloc.nodes)
    verdict.stats.push_back(NodeBoundStats{n.id, Dyadic(), n.error_bound});

  for (long t = 0; t < trials; ++t) {
    InputVector in = rng.draw_inputs(g);
    SimulationResult sim = run_fixed(g, alloc, in);
    for (size_t k = 0; k < sim.nodes.size(); ++k) {
      NodeBoundStats& st = verdict.stats[k];
      if (sim.nodes[k].deviation > st.max_deviation) st.max_deviation = sim.nodes[k].deviation;
      if (sim.nodes[k].deviation > st.bound) {
        verdict.ok = false;
        if (!verdict.counterexample)
          verdict.counterexample =
              Counterexample{t, st.id, sim.nodes[k].deviation, st.bound, in};
      }
    }
  }
  return verdict;
}

// Literal accumulation of maximal all-ones operands, recording every step
// where the sum's bit length grows. Independent of the closed-form route.
inline GrowthProfile accumulate_harness(OperandWidth w, long steps) {
  if (steps < 1) throw std::invalid_argument("step count must be >= 1");
  GrowthProfile p{w, steps, {}, {}};
  mpz_class operand = w.max_operand();
  mpz_class acc = operand;
  size_t last = mpz_sizeinbase(acc.get_mpz_t(), 2);
  for (long s = 1; s <= steps; ++s) {
    acc += operand;
    size_t bl = mpz_sizeinbase(acc.get_mpz_t(), 2);
    if (bl > last) {
      p.overflow_positions.push_back(s);
      p.bit_lengths.push_back(static_cast<int>(bl));
      last = bl;
    }
  }
  return p;
}

// ---- input-file parsing ----------------------------------------------------

namespace detail {

inline mpz_class parse_cell(const std::string& cell, const Node& input_node) {
  const Format& f = *input_node.declared;
  if (cell.rfind("raw:", 0) == 0) {
    std::string digits = cell.substr(4);
    bool neg = false;
    if (!digits.empty() && (digits[0] == '-' || digits[0] == '+')) {
      neg = digits[0] == '-';
      digits.erase(0, 1);
    }
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
      throw input_error("malformed raw value '" + cell + "'");
    mpz_class raw(digits, 10);
    if (neg) raw = -raw;
    check_simulation_range(raw, f, input_node.id);
    return raw;
  }
  try {
    mpz_class raw = encode_decimal(cell, f).value.raw;
    check_simulation_range(raw, f, input_node.id);
    return raw;
  } catch (const format_error& e) {
    throw input_error(e.what());
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    size_t b = cell.find_first_not_of(" \t\r");
    size_t e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return cells;
}

}  // namespace detail

// CSV: header row of input node ids, one trial per row; cells are decimals
// or "raw:<integer>".
inline std::vector<InputVector> parse_inputs_csv(std::string_view text, const DataFlowGraph& g) {
  std::istringstream ss{std::string(text)};
  std::string line;
  std::vector<std::string> header;
  while (std::getline(ss, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = detail::split_csv_line(line);
    break;
  }
  if (header.empty()) throw input_error("input file has no header row");

  std::vector<const Node*> cols;
  for (const std::string& id : header) {
    size_t i = g.find(id);
    if (i == DataFlowGraph::npos || g.nodes[i].kind != NodeKind::input)
      throw input_error("header column '" + id + "' is not an input node");
    cols.push_back(&g.nodes[i]);
  }
  size_t input_count = 0;
  for (const Node& n : g.nodes)
    if (n.kind == NodeKind::input) ++input_count;
  if (cols.size() != input_count)
    throw input_error("header must name every input node exactly once");

  std::vector<InputVector> trials;
  while (std::getline(ss, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != cols.size())
      throw input_error("row " + std::to_string(trials.size() + 1) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(cols.size()));
    InputVector in;
    for (size_t c = 0; c < cols.size(); ++c)
      in.raws[cols[c]->id] = detail::parse_cell(cells[c], *cols[c]);
    trials.push_back(std::move(in));
  }
  if (trials.empty()) throw input_error("input file has no trial rows");
  return trials;
}

// JSON equivalent: an array of objects keyed by input id, values as the same
// cell strings the CSV form uses.
inline std::vector<InputVector> parse_inputs_json(std::string_view text, const DataFlowGraph& g) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("invalid JSON input file: ") + e.what());
  }
  if (!j.is_array() || j.empty()) throw input_error("JSON input must be a non-empty array");
  std::vector<InputVector> trials;
  for (const auto& row : j) {
    if (!row.is_object()) throw input_error("JSON trial rows must be objects");
    InputVector in;
    for (const Node& n : g.nodes) {
      if (n.kind != NodeKind::input) continue;
      if (!row.contains(n.id)) throw input_error("trial missing input '" + n.id + "'");
      const auto& v = row.at(n.id);
      std::string cell = v.is_string() ? v.get<std::string>() : v.dump();
      in.raws[n.id] = detail::parse_cell(cell, n);
    }
    if (row.size() != in.raws.size())
      throw input_error("trial row names a non-input key");
    trials.push_back(std::move(in));
  }
  return trials;
}

}  // namespace fxpath
