#pragma once

// Chain-aware fixed-point format assignment. Walks the graph in topological
// order, predicts width growth along addition chains instead of assuming the
// worst case at every step, and fits every node into the machine word either
// by widening the integer part (while the word has room) or by a one-bit
// right-shift rescale whose truncation cost is tracked as an exact dyadic
// error bound.

#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fxpath/bitgrowth.hpp"
#include "fxpath/dfg.hpp"
#include "fxpath/dyadic.hpp"
#include "fxpath/fxformat.hpp"

namespace fxpath {

class infeasible_error : public std::runtime_error {
 public:
  infeasible_error(std::string node, const std::string& msg)
      : std::runtime_error("node '" + node + "': " + msg), node_(std::move(node)) {}

  const std::string& node() const { return node_; }

 private:
  std::string node_;
};

struct NodeAllocation {
  std::string id;
  Format format;       // always exactly word wide
  long scale_exp = 0;  // power-of-two rescales applied so far
  bool overflow = false;
  Dyadic error_bound;  // worst-case |stored - ideal/2^scale|, stored units

  friend bool operator==(const NodeAllocation& a, const NodeAllocation& b) {
    return a.id == b.id && a.format == b.format && a.scale_exp == b.scale_exp &&
           a.overflow == b.overflow && a.error_bound == b.error_bound;
  }
};

struct ChainSummary {
  std::vector<std::string> members;
  std::optional<int> base_n;
  std::vector<long> overflow_steps;

  friend bool operator==(const ChainSummary&, const ChainSummary&) = default;
};

struct AllocationReport {
  std::string graph;
  int word = 0;
  std::vector<NodeAllocation> nodes;  // topological order
  std::vector<ChainSummary> chains;

  const NodeAllocation* find(const std::string& id) const {
    for (const NodeAllocation& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }

  friend bool operator==(const AllocationReport&, const AllocationReport&) = default;
};

namespace detail {

// Fits a minimal format into the word, trimming fraction LSBs when the word
// is too small. Returns the fitted format and the fresh truncation error in
// units of the value's own scale.
inline std::pair<Format, Dyadic> fit_or_trim(const Format& minimal, int word,
                                             const std::string& node_id) {
  WordFit wf = fit_to_word(minimal, word);
  if (wf.fits) return {wf.format, Dyadic()};
  if (wf.deficit > minimal.frac_bits)
    throw infeasible_error(node_id, "integer bits of " + minimal.str() + " exceed the " +
                                        std::to_string(word) + "-bit word");
  auto [trimmed, err] = truncate_lsbs(minimal, wf.deficit);
  return {fit_to_word(trimmed, word).format, err};
}

}  // namespace detail

inline AllocationReport assign_formats(const DataFlowGraph& g) {
  AllocationReport report;
  report.graph = g.name;
  report.word = g.word;

  std::vector<AdditionChain> chains = allocate_chains(g);
  // node index -> (chain index, 1-based step)
  std::vector<std::pair<size_t, long>> chain_pos(g.nodes.size(), {DataFlowGraph::npos, 0});
  for (size_t ci = 0; ci < chains.size(); ++ci)
    for (size_t s = 0; s < chains[ci].members.size(); ++s)
      chain_pos[chains[ci].members[s]] = {ci, static_cast<long>(s) + 1};

  struct ChainState {
    Format format;  // current data layout of the chain nodes
    long scale = 0;
    int prev_growth = 0;
    bool demoted = false;  // fell back to per-step worst case
  };
  std::vector<std::optional<ChainState>> state(chains.size());

  std::vector<NodeAllocation> alloc(g.nodes.size());
  auto order = topological_order(g);

  // Worst-case add outside any homogeneous chain: one extra integer bit, with
  // exact accounting of any fraction trim and of operand grid alignment.
  auto allocate_worst_case_add = [&](const Node& n, NodeAllocation& out) {
    const NodeAllocation& a = alloc[n.operands[0]];
    const NodeAllocation& b = alloc[n.operands[1]];
    Format fa = a.format.data_format();
    Format fb = b.format.data_format();
    if (fa.is_signed != fb.is_signed) {
      fa = to_signed(fa);
      fb = to_signed(fb);
    }
    Format minimal = add_min_format(fa, fb);
    long scale = std::max(a.scale_exp, b.scale_exp);
    auto [fitted, trim_err] = detail::fit_or_trim(minimal, g.word, n.id);
    // Finest grid (value units) either operand lives on; flooring the exact
    // sum onto the coarser output grid can drop at most one output LSB minus
    // one input LSB.
    long grid_a = a.scale_exp - a.format.frac_bits;
    long grid_b = b.scale_exp - b.format.frac_bits;
    long grid_in = std::min(grid_a, grid_b);
    long grid_out = scale - fitted.frac_bits;
    Dyadic fresh;
    if (grid_out > grid_in)
      fresh = Dyadic::pow2(-fitted.frac_bits) - Dyadic::pow2(grid_in - scale);
    out.format = fitted;
    out.scale_exp = scale;
    out.overflow = true;  // width assumed to grow at every such step
    out.error_bound = a.error_bound + b.error_bound + fresh;
    (void)trim_err;  // already covered by `fresh`, which accounts the full drop
  };

  for (size_t i : order) {
    const Node& n = g.nodes[i];
    NodeAllocation& out = alloc[i];
    out.id = n.id;

    switch (n.kind) {
      case NodeKind::input:
      case NodeKind::constant: {
        const Format& f = *n.declared;
        if (f.width() == g.word) {
          out.format = f;
        } else {
          WordFit wf = fit_to_word(f.data_format(), g.word);
          if (!wf.fits)
            throw infeasible_error(n.id, "declared format " + f.str() + " does not fit the " +
                                             std::to_string(g.word) + "-bit word");
          out.format = wf.format;
        }
        break;
      }

      case NodeKind::mul: {
        const NodeAllocation& a = alloc[n.operands[0]];
        const NodeAllocation& b = alloc[n.operands[1]];
        Format minimal = mul_min_format(a.format.data_format(), b.format.data_format());
        auto [fitted, fresh] = detail::fit_or_trim(minimal, g.word, n.id);
        out.format = fitted;
        out.scale_exp = a.scale_exp + b.scale_exp;
        out.error_bound = a.error_bound + b.error_bound + fresh;
        break;
      }

      case NodeKind::add:
      case NodeKind::sub: {
        auto [ci, step] = chain_pos[i];
        const AdditionChain& chain = chains[ci];
        bool chained = chain.homogeneous();
        if (chained && step == 1) {
          ChainState st;
          auto [fitted, err] = detail::fit_or_trim(*chain.operand_format, g.word,
                                                   g.nodes[chain.members[0]].id);
          // The externals carry the same trim in their own bounds; the chain
          // accumulator starts on their stored grid.
          (void)err;
          st.format = fitted;
          state[ci] = st;
        }
        if (chained && !state[ci]->demoted) {
          // A chain step only stays predictable while its externals sit at
          // scale 0; anything else falls back to per-step worst case.
          for (size_t ext : chain.externals[step - 1])
            if (alloc[ext].scale_exp != 0) state[ci]->demoted = true;
        }
        if (!chained || state[ci]->demoted) {
          allocate_worst_case_add(n, out);
          break;
        }

        ChainState& st = *state[ci];
        OperandWidth base(*chain.base_n);
        int growth = growth_at_step(base, step);
        bool grew = growth > st.prev_growth;
        bool rescaled = false;
        if (grew) {
          Format wider = st.format;
          wider.int_bits += 1;
          if (wider.min_sign_bits() + wider.data_bits() <= g.word) {
            st.format = wider;  // policy GROW: widen while the word has room
          } else {
            st.scale += 1;  // policy RESCALE: shift right, format unchanged
            rescaled = true;
          }
        }
        st.prev_growth = growth;

        Dyadic e_in;
        if (step == 1) {
          e_in = alloc[chain.externals[0][0]].error_bound +
                 alloc[chain.externals[0][1]].error_bound;
        } else {
          e_in = alloc[chain.members[step - 2]].error_bound +
                 alloc[chain.externals[step - 1][0]].error_bound;
        }
        out.error_bound =
            rescaled ? e_in.half() + Dyadic::pow2(-(st.format.frac_bits + 1)) : e_in;
        out.format = fit_to_word(st.format, g.word).format;
        out.scale_exp = st.scale;
        out.overflow = grew;
        break;
      }

      case NodeKind::output: {
        const NodeAllocation& src = alloc[n.operands[0]];
        out.format = src.format;
        out.scale_exp = src.scale_exp;
        out.error_bound = src.error_bound;
        out.overflow = false;
        break;
      }
    }
  }

  report.nodes.reserve(g.nodes.size());
  for (size_t i : order) report.nodes.push_back(alloc[i]);

  for (const AdditionChain& c : chains) {
    ChainSummary s;
    for (size_t m : c.members) s.members.push_back(g.nodes[m].id);
    s.base_n = c.base_n;
    if (c.homogeneous()) {
      GrowthProfile p = profile(OperandWidth(*c.base_n), static_cast<long>(c.members.size()));
      s.overflow_steps = p.overflow_positions;
    }
    report.chains.push_back(std::move(s));
  }
  return report;
}

inline std::string error_decimal_str(const Dyadic& e) {
  return e.is_zero() ? "0" : e.to_decimal(9);
}

enum class ReportMode { text, csv, json };

inline std::string render_report(const AllocationReport& r, ReportMode mode) {
  if (mode == ReportMode::text) {
    std::ostringstream out;
    out << "graph " << (r.graph.empty() ? "<unnamed>" : r.graph) << ", word " << r.word << "\n";
    size_t idw = 4, fw = 8;
    for (const NodeAllocation& n : r.nodes) {
      idw = std::max(idw, n.id.size());
      fw = std::max(fw, n.format.str().size());
    }
    for (const NodeAllocation& n : r.nodes) {
      std::string line = n.id + std::string(idw - n.id.size() + 2, ' ');
      std::string f = n.format.str();
      line += f + std::string(fw - f.size() + 2, ' ');
      if (n.scale_exp != 0) line += "scale=" + std::to_string(n.scale_exp) + "  ";
      if (n.overflow) line += "overflow  ";
      if (!n.error_bound.is_zero())
        line += "error: " + n.error_bound.to_terms() + " = " + n.error_bound.to_decimal(9);
      while (!line.empty() && line.back() == ' ') line.pop_back();
      out << line << "\n";
    }
    for (size_t c = 0; c < r.chains.size(); ++c) {
      const ChainSummary& s = r.chains[c];
      out << "chain " << c + 1 << ":";
      for (const std::string& m : s.members) out << " " << m;
      if (s.base_n) {
        out << " (N=" << *s.base_n << ")";
        if (!s.overflow_steps.empty()) {
          out << ", overflows at steps ";
          for (size_t k = 0; k < s.overflow_steps.size(); ++k)
            out << (k ? ", " : "") << s.overflow_steps[k];
        } else {
          out << ", no overflows";
        }
      } else {
        out << " (mixed operand formats)";
      }
      out << "\n";
    }
    return out.str();
  }

  if (mode == ReportMode::csv) {
    std::ostringstream out;
    out << "node,notation,scale_exp,overflow,error_terms,error_decimal\n";
    for (const NodeAllocation& n : r.nodes)
      out << n.id << "," << n.format.str() << "," << n.scale_exp << ","
          << (n.overflow ? "true" : "false") << "," << n.error_bound.to_terms() << ","
          << error_decimal_str(n.error_bound) << "\n";
    return out.str();
  }

  nlohmann::ordered_json j;
  j["graph"] = r.graph;
  j["word"] = r.word;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const NodeAllocation& n : r.nodes) {
    nlohmann::ordered_json jn;
    jn["id"] = n.id;
    jn["notation"] = n.format.str();
    jn["signed"] = n.format.is_signed;
    jn["scale_exp"] = n.scale_exp;
    jn["overflow"] = n.overflow;
    auto terms = nlohmann::ordered_json::array();
    if (!n.error_bound.is_zero()) {
      std::string all = n.error_bound.to_terms();
      size_t pos = 0;
      while (pos <= all.size()) {
        size_t plus = all.find('+', pos);
        terms.push_back(all.substr(pos, plus == std::string::npos ? plus : plus - pos));
        if (plus == std::string::npos) break;
        pos = plus + 1;
      }
    }
    jn["error_terms"] = terms;
    jn["error_decimal"] = error_decimal_str(n.error_bound);
    j["nodes"].push_back(std::move(jn));
  }
  j["chains"] = nlohmann::ordered_json::array();
  for (const ChainSummary& s : r.chains) {
    nlohmann::ordered_json jc;
    jc["members"] = s.members;
    if (s.base_n)
      jc["base_N"] = *s.base_n;
    else
      jc["base_N"] = nullptr;
    jc["overflow_steps"] = s.overflow_steps;
    j["chains"].push_back(std::move(jc));
  }
  return j.dump(2) + "\n";
}

// Inverse of the JSON rendering; used by consumers and the round-trip tests.
inline AllocationReport parse_report_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  AllocationReport r;
  r.graph = j.at("graph").get<std::string>();
  r.word = j.at("word").get<int>();
  for (const auto& jn : j.at("nodes")) {
    NodeAllocation n;
    n.id = jn.at("id").get<std::string>();
    auto f = Format::parse(jn.at("notation").get<std::string>());
    if (!f) throw std::runtime_error("bad notation in report: " + jn.at("notation").dump());
    n.format = *f;
    n.format.is_signed = jn.at("signed").get<bool>();  // disambiguates padded formats
    if (!n.format.is_signed) n.format.two_field = false;
    n.scale_exp = jn.at("scale_exp").get<long>();
    n.overflow = jn.at("overflow").get<bool>();
    Dyadic e;
    for (const auto& t : jn.at("error_terms")) {
      auto term = Dyadic::parse_terms(t.get<std::string>());
      if (!term) throw std::runtime_error("bad error term in report");
      e = e + *term;
    }
    n.error_bound = e;
    r.nodes.push_back(std::move(n));
  }
  for (const auto& jc : j.at("chains")) {
    ChainSummary s;
    for (const auto& m : jc.at("members")) s.members.push_back(m.get<std::string>());
    if (!jc.at("base_N").is_null()) s.base_n = jc.at("base_N").get<int>();
    for (const auto& o : jc.at("overflow_steps")) s.overflow_steps.push_back(o.get<long>());
    r.chains.push_back(std::move(s));
  }
  return r;
}

}  // namespace fxpath
