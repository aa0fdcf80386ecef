#pragma once

// Dataflow-graph model, the line-oriented .dfg parser, and the allocator of
// maximal chains of consecutive additions.
//
// File grammar (UTF-8, one directive per line, '#' starts a comment):
//   word <W>                          machine word length, first directive
//   input <id> <S>/<I>/<F>            declared input
//   const <id> <value> <S>/<I>/<F>    constant, exactly representable
//   node <id> = <add|sub|mul> <a> <b>
//   output <id> <node>

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fxpath/dyadic.hpp"
#include "fxpath/fxformat.hpp"

namespace fxpath {

class parse_error : public std::runtime_error {
 public:
  parse_error(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

enum class NodeKind { input, constant, add, sub, mul, output };

inline bool is_arith(NodeKind k) {
  return k == NodeKind::add || k == NodeKind::sub || k == NodeKind::mul;
}

inline bool is_addsub(NodeKind k) { return k == NodeKind::add || k == NodeKind::sub; }

inline const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::input: return "input";
    case NodeKind::constant: return "const";
    case NodeKind::add: return "add";
    case NodeKind::sub: return "sub";
    case NodeKind::mul: return "mul";
    case NodeKind::output: return "output";
  }
  return "?";
}

struct Node {
  std::string id;
  NodeKind kind = NodeKind::input;
  std::vector<size_t> operands;       // indices into DataFlowGraph::nodes
  std::optional<Format> declared;     // input/const only
  std::optional<Dyadic> const_value;  // const only
  int line = 0;
};

struct DataFlowGraph {
  std::string name;
  int word = 0;
  std::vector<Node> nodes;  // file order; operands always precede their users
  std::unordered_map<std::string, size_t> index;
  std::vector<std::string> warnings;

  size_t find(const std::string& id) const {
    auto it = index.find(id);
    return it == index.end() ? npos : it->second;
  }

  static constexpr size_t npos = static_cast<size_t>(-1);
};

namespace detail {

inline std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> toks;
  std::istringstream ss{std::string(line)};
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

inline size_t resolve(const DataFlowGraph& g, const std::string& id, int line) {
  size_t i = g.find(id);
  if (i == DataFlowGraph::npos) throw parse_error(line, "unknown node reference '" + id + "'");
  if (g.nodes[i].kind == NodeKind::output)
    throw parse_error(line, "output '" + id + "' cannot be used as an operand");
  return i;
}

inline Format parse_format_token(const std::string& tok, int line) {
  auto f = Format::parse(tok);
  if (!f) throw parse_error(line, "malformed format '" + tok + "'");
  return *f;
}

}  // namespace detail

inline DataFlowGraph parse_dfg(std::string_view text, std::string name = "") {
  DataFlowGraph g;
  g.name = std::move(name);
  bool word_seen = false;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto toks = detail::tokenize(line);
    if (toks.empty()) continue;

    const std::string& dir = toks[0];
    if (dir == "word") {
      if (word_seen) throw parse_error(line_no, "duplicate word directive");
      if (toks.size() != 2 || toks[1].find_first_not_of("0123456789") != std::string::npos ||
          toks[1].size() > 6)
        throw parse_error(line_no, "usage: word <W>");
      g.word = std::stoi(toks[1]);
      if (g.word < 1) throw parse_error(line_no, "word length must be >= 1");
      word_seen = true;
      continue;
    }
    if (!word_seen) throw parse_error(line_no, "missing word directive (must come first)");

    Node n;
    n.line = line_no;
    if (dir == "input") {
      if (toks.size() != 3) throw parse_error(line_no, "usage: input <id> <S>/<I>/<F>");
      n.kind = NodeKind::input;
      n.id = toks[1];
      n.declared = detail::parse_format_token(toks[2], line_no);
    } else if (dir == "const") {
      if (toks.size() != 4) throw parse_error(line_no, "usage: const <id> <value> <S>/<I>/<F>");
      n.kind = NodeKind::constant;
      n.id = toks[1];
      n.declared = detail::parse_format_token(toks[3], line_no);
      try {
        DecimalEncoding enc = encode_decimal(toks[2], *n.declared);
        if (!enc.exact)
          throw parse_error(line_no, "const value " + toks[2] + " is not exactly representable in " +
                                         n.declared->str());
        n.const_value = enc.value.value();
      } catch (const format_error& e) {
        throw parse_error(line_no, e.what());
      }
    } else if (dir == "node") {
      if (toks.size() != 6 || toks[2] != "=")
        throw parse_error(line_no, "usage: node <id> = <add|sub|mul> <a> <b>");
      n.id = toks[1];
      if (toks[3] == "add")
        n.kind = NodeKind::add;
      else if (toks[3] == "sub")
        n.kind = NodeKind::sub;
      else if (toks[3] == "mul")
        n.kind = NodeKind::mul;
      else
        throw parse_error(line_no, "unknown operation '" + toks[3] + "'");
      n.operands.push_back(detail::resolve(g, toks[4], line_no));
      n.operands.push_back(detail::resolve(g, toks[5], line_no));
    } else if (dir == "output") {
      if (toks.size() != 3) throw parse_error(line_no, "usage: output <id> <node>");
      n.kind = NodeKind::output;
      n.id = toks[1];
      n.operands.push_back(detail::resolve(g, toks[2], line_no));
    } else {
      throw parse_error(line_no, "unknown directive '" + dir + "'");
    }

    if (g.index.count(n.id)) throw parse_error(n.line, "duplicate id '" + n.id + "'");
    g.index[n.id] = g.nodes.size();
    g.nodes.push_back(std::move(n));
  }

  if (!word_seen) throw parse_error(line_no, "missing word directive");
  bool has_output = false;
  std::vector<int> fanout(g.nodes.size(), 0);
  for (const Node& n : g.nodes) {
    if (n.kind == NodeKind::output) has_output = true;
    for (size_t op : n.operands) ++fanout[op];
  }
  if (!has_output) throw parse_error(line_no, "graph has no output");
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].kind != NodeKind::output && fanout[i] == 0)
      g.warnings.push_back("node '" + g.nodes[i].id + "' (line " +
                           std::to_string(g.nodes[i].line) + ") is never used");
  }
  return g;
}

inline std::string render_dfg(const DataFlowGraph& g) {
  std::ostringstream out;
  out << "word " << g.word << "\n";
  auto fmt_str = [](const Format& f) {
    std::string s = f.str();
    return s.substr(1, s.size() - 2);  // grammar uses the bare S/I/F spelling
  };
  for (const Node& n : g.nodes) {
    switch (n.kind) {
      case NodeKind::input:
        out << "input " << n.id << " " << fmt_str(*n.declared) << "\n";
        break;
      case NodeKind::constant:
        out << "const " << n.id << " " << n.const_value->to_exact_decimal() << " "
            << fmt_str(*n.declared) << "\n";
        break;
      case NodeKind::add:
      case NodeKind::sub:
      case NodeKind::mul:
        out << "node " << n.id << " = " << kind_name(n.kind) << " "
            << g.nodes[n.operands[0]].id << " " << g.nodes[n.operands[1]].id << "\n";
        break;
      case NodeKind::output:
        out << "output " << n.id << " " << g.nodes[n.operands[0]].id << "\n";
        break;
    }
  }
  return out.str();
}

// Kahn's algorithm with a smallest-file-index ready set, so independents keep
// file order. Parsing already forces operands before users; the cycle check
// stays as a guard for programmatically built graphs.
inline std::vector<size_t> topological_order(const DataFlowGraph& g) {
  std::vector<int> indeg(g.nodes.size(), 0);
  std::vector<std::vector<size_t>> users(g.nodes.size());
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    indeg[i] = static_cast<int>(g.nodes[i].operands.size());
    for (size_t op : g.nodes[i].operands) users[op].push_back(i);
  }
  std::set<size_t> ready;
  for (size_t i = 0; i < g.nodes.size(); ++i)
    if (indeg[i] == 0) ready.insert(i);
  std::vector<size_t> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    size_t i = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(i);
    for (size_t u : users[i])
      if (--indeg[u] == 0) ready.insert(u);
  }
  if (order.size() != g.nodes.size()) throw std::logic_error("cycle detected in dataflow graph");
  return order;
}

// Minimal (worst-case) data format of every node, independent of any word
// constraint: declared for inputs/consts, sum of data lengths for mul, one
// extra integer bit for add/sub.
inline std::vector<Format> minimal_formats(const DataFlowGraph& g) {
  std::vector<Format> out(g.nodes.size());
  for (size_t i : topological_order(g)) {
    const Node& n = g.nodes[i];
    switch (n.kind) {
      case NodeKind::input:
      case NodeKind::constant:
        out[i] = n.declared->data_format();
        break;
      case NodeKind::mul:
        out[i] = mul_min_format(out[n.operands[0]], out[n.operands[1]]);
        break;
      case NodeKind::add:
      case NodeKind::sub: {
        Format a = out[n.operands[0]];
        Format b = out[n.operands[1]];
        if (a.is_signed != b.is_signed) {
          a = to_signed(a);
          b = to_signed(b);
        }
        out[i] = add_min_format(a, b);
        break;
      }
      case NodeKind::output:
        out[i] = out[n.operands[0]];
        break;
    }
  }
  return out;
}

// A maximal run of add/sub nodes each consuming the previous one's output.
// base_n is set when all external operands share one minimal data format
// (the premise of the chain growth prediction); a lone add whose operand
// formats differ still forms a (heterogeneous) singleton chain.
struct AdditionChain {
  std::vector<size_t> members;
  std::vector<std::vector<size_t>> externals;  // non-chain operands per step
  std::optional<Format> operand_format;        // shared minimal external format
  std::optional<int> base_n;

  bool homogeneous() const { return base_n.has_value(); }
};

inline std::vector<AdditionChain> allocate_chains(const DataFlowGraph& g) {
  std::vector<Format> minfmt = minimal_formats(g);
  std::vector<int> fanout(g.nodes.size(), 0);
  for (const Node& n : g.nodes)
    for (size_t op : n.operands) ++fanout[op];

  std::vector<AdditionChain> chains;
  std::vector<size_t> chain_of(g.nodes.size(), DataFlowGraph::npos);

  for (size_t v : topological_order(g)) {
    const Node& n = g.nodes[v];
    if (!is_addsub(n.kind)) continue;

    // A chain tail is extendable when this node is its only consumer and the
    // incoming external operand matches the chain's shared format.
    auto extendable = [&](size_t op, size_t other) {
      if (!is_addsub(g.nodes[op].kind)) return false;
      size_t ci = chain_of[op];
      const AdditionChain& c = chains[ci];
      if (c.members.back() != op || fanout[op] != 1) return false;
      if (!c.homogeneous()) return false;
      return minfmt[other] == *c.operand_format;
    };

    size_t a = n.operands[0];
    size_t b = n.operands[1];
    size_t into = DataFlowGraph::npos;
    size_t ext = DataFlowGraph::npos;
    if (extendable(a, b)) {  // first-listed operand wins a tie
      into = chain_of[a];
      ext = b;
    } else if (extendable(b, a)) {
      into = chain_of[b];
      ext = a;
    }

    if (into != DataFlowGraph::npos) {
      chains[into].members.push_back(v);
      chains[into].externals.push_back({ext});
      chain_of[v] = into;
    } else {
      AdditionChain c;
      c.members.push_back(v);
      c.externals.push_back({a, b});
      if (minfmt[a] == minfmt[b] && minfmt[a].data_bits() >= 1) {
        c.operand_format = minfmt[a];
        c.base_n = minfmt[a].data_bits() - 1;
      }
      chain_of[v] = chains.size();
      chains.push_back(std::move(c));
    }
  }
  return chains;
}

}  // namespace fxpath
