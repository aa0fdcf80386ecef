// fxpath — analyzer and bit-accurate simulator for fixed-point data paths.
//
// Subcommands:
//   predict     step of the n-th carry-out (or growth after s steps) in a
//               chain of consecutive additions
//   accumulate  run the consecutive-addition experiment and tabulate every
//               step where the result width grows
//   chains      list the maximal addition chains of a graph
//   analyze     assign word-fitted formats, scales and error bounds
//   simulate    execute a graph bit-accurately and check error bounds
//
// Exit codes: 0 success, 1 analysis/verification failure, 2 usage or parse
// failure. Diagnostics go to stderr; stdout carries only the artifact.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fxpath/allocator.hpp"
#include "fxpath/bitgrowth.hpp"
#include "fxpath/dfg.hpp"
#include "fxpath/simulator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAnalysis = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fxpath::input_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string graph_name(const std::string& path) {
  size_t slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  size_t dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

fxpath::DataFlowGraph load_graph(const std::string& path) {
  fxpath::DataFlowGraph g = fxpath::parse_dfg(read_file(path), graph_name(path));
  for (const std::string& w : g.warnings) std::cerr << "warning: " << w << "\n";
  return g;
}

fxpath::ReportMode parse_mode(const std::string& s) {
  if (s == "text") return fxpath::ReportMode::text;
  if (s == "csv") return fxpath::ReportMode::csv;
  return fxpath::ReportMode::json;
}

void echo_width(int operand_bits) {
  std::cerr << "B=" << operand_bits << ", N=" << operand_bits - 1 << "\n";
}

int cmd_predict(int operand_bits, std::optional<long> overflow_index, std::optional<long> steps) {
  echo_width(operand_bits);
  fxpath::OperandWidth w(operand_bits - 1);
  if (overflow_index) {
    std::cout << fxpath::overflow_step(w, static_cast<int>(*overflow_index)).get_str() << "\n";
  } else {
    int growth = fxpath::growth_at_step(w, *steps);
    std::cout << "growth " << growth << ", bit-length " << w.bit_length() + growth << "\n";
  }
  return kExitOk;
}

int cmd_accumulate(int operand_bits, long steps, const std::string& mode) {
  echo_width(operand_bits);
  fxpath::GrowthProfile p = fxpath::accumulate_harness(fxpath::OperandWidth(operand_bits - 1), steps);
  if (mode == "json") {
    nlohmann::ordered_json j;
    j["operand_bits"] = operand_bits;
    j["highest_bit"] = operand_bits - 1;
    j["steps"] = steps;
    j["rows"] = nlohmann::ordered_json::array();
    for (size_t i = 0; i < p.overflow_positions.size(); ++i)
      j["rows"].push_back({{"position", p.overflow_positions[i]},
                           {"k", i + 1},
                           {"bit_length", p.bit_lengths[i]}});
    std::cout << j.dump(2) << "\n";
    return kExitOk;
  }
  const char* sep = mode == "csv" ? "," : "\t";
  std::cout << "position" << sep << "k" << sep << "bit_length\n";
  for (size_t i = 0; i < p.overflow_positions.size(); ++i)
    std::cout << p.overflow_positions[i] << sep << i + 1 << sep << p.bit_lengths[i] << "\n";
  return kExitOk;
}

int cmd_chains(const std::string& path) {
  fxpath::DataFlowGraph g = load_graph(path);
  fxpath::AllocationReport r = fxpath::assign_formats(g);
  if (r.chains.empty()) {
    std::cout << "no chains\n";
    return kExitOk;
  }
  for (size_t c = 0; c < r.chains.size(); ++c) {
    const fxpath::ChainSummary& s = r.chains[c];
    std::cout << "chain " << c + 1 << ":";
    for (const std::string& m : s.members) std::cout << " " << m;
    if (s.base_n) {
      std::cout << " (N=" << *s.base_n << ")";
      if (s.overflow_steps.empty()) {
        std::cout << ", no overflows";
      } else {
        std::cout << ", overflows at steps ";
        for (size_t k = 0; k < s.overflow_steps.size(); ++k)
          std::cout << (k ? ", " : "") << s.overflow_steps[k];
      }
    } else {
      std::cout << " (mixed operand formats)";
    }
    std::cout << "\n";
  }
  return kExitOk;
}

int cmd_analyze(const std::string& path, const std::string& mode) {
  fxpath::DataFlowGraph g = load_graph(path);
  fxpath::AllocationReport r = fxpath::assign_formats(g);
  std::cout << fxpath::render_report(r, parse_mode(mode));
  return kExitOk;
}

void print_simulation(const fxpath::SimulationResult& sim, long trial, const std::string& mode) {
  if (mode == "csv") {
    for (const fxpath::NodeSim& n : sim.nodes)
      std::cout << trial << "," << n.id << "," << n.raw.get_str() << ","
                << n.stored.to_exact_decimal() << "," << n.deviation.to_terms() << "\n";
    return;
  }
  std::cout << "# trial " << trial << "\n";
  for (const fxpath::NodeSim& n : sim.nodes)
    std::cout << n.id << "  raw=" << n.raw.get_str() << "  stored=" << n.stored.to_exact_decimal()
              << "  deviation=" << n.deviation.to_terms() << "\n";
}

nlohmann::ordered_json simulation_json(const fxpath::SimulationResult& sim, long trial) {
  nlohmann::ordered_json jt;
  jt["trial"] = trial;
  jt["nodes"] = nlohmann::ordered_json::array();
  for (const fxpath::NodeSim& n : sim.nodes)
    jt["nodes"].push_back({{"id", n.id},
                           {"raw", n.raw.get_str()},
                           {"stored", n.stored.to_exact_decimal()},
                           {"deviation", n.deviation.to_terms()}});
  return jt;
}

int cmd_simulate(const std::string& path, const std::string& inputs_file, long random_trials,
                 unsigned long seed, bool check_bounds, const std::string& mode) {
  fxpath::DataFlowGraph g = load_graph(path);
  fxpath::AllocationReport alloc = fxpath::assign_formats(g);

  if (random_trials > 0) {
    fxpath::BoundsVerdict v = fxpath::verify_bounds(g, alloc, random_trials, seed);
    if (mode == "json") {
      nlohmann::ordered_json j;
      j["rng"] = "gmp-mt19937";
      j["seed"] = seed;
      j["trials"] = v.trials;
      j["ok"] = v.ok;
      j["nodes"] = nlohmann::ordered_json::array();
      for (const fxpath::NodeBoundStats& st : v.stats)
        j["nodes"].push_back({{"id", st.id},
                              {"max_deviation", st.max_deviation.to_terms()},
                              {"bound", st.bound.to_terms()},
                              {"tightness", st.tightness()}});
      std::cout << j.dump(2) << "\n";
    } else {
      const char* sep = mode == "csv" ? "," : "  ";
      if (mode == "csv")
        std::cerr << "# rng=gmp-mt19937 seed=" << seed << " trials=" << v.trials << "\n";
      else
        std::cout << "# rng=gmp-mt19937 seed=" << seed << " trials=" << v.trials << "\n";
      std::cout << "node" << sep << "max_deviation" << sep << "bound" << sep << "tightness\n";
      for (const fxpath::NodeBoundStats& st : v.stats)
        std::cout << st.id << sep << st.max_deviation.to_terms() << sep << st.bound.to_terms()
                  << sep << st.tightness() << "\n";
    }
    if (check_bounds && !v.ok) {
      const fxpath::Counterexample& ce = *v.counterexample;
      std::cerr << "bound violation at trial " << ce.trial << ", node '" << ce.node
                << "': deviation " << ce.deviation.to_terms() << " exceeds bound "
                << ce.bound.to_terms() << "\ninputs:";
      for (const auto& [id, raw] : ce.inputs.raws) std::cerr << " " << id << "=raw:" << raw.get_str();
      std::cerr << "\n";
      return kExitAnalysis;
    }
    return kExitOk;
  }

  std::string text = read_file(inputs_file);
  bool json_input = !text.empty() && (text.find_first_not_of(" \t\r\n") != std::string::npos) &&
                    text[text.find_first_not_of(" \t\r\n")] == '[';
  std::vector<fxpath::InputVector> trials =
      json_input ? fxpath::parse_inputs_json(text, g) : fxpath::parse_inputs_csv(text, g);

  if (mode == "csv") std::cout << "trial,node,raw,stored,deviation\n";
  nlohmann::ordered_json jout = nlohmann::ordered_json::array();
  bool violated = false;
  for (size_t t = 0; t < trials.size(); ++t) {
    fxpath::SimulationResult sim = fxpath::run_fixed(g, alloc, trials[t]);
    if (mode == "json")
      jout.push_back(simulation_json(sim, static_cast<long>(t)));
    else
      print_simulation(sim, static_cast<long>(t), mode);
    if (!check_bounds) continue;
    for (const fxpath::NodeSim& n : sim.nodes) {
      const fxpath::NodeAllocation* na = alloc.find(n.id);
      if (n.deviation > na->error_bound) {
        violated = true;
        std::cerr << "bound violation at trial " << t << ", node '" << n.id << "': deviation "
                  << n.deviation.to_terms() << " exceeds bound " << na->error_bound.to_terms()
                  << "\n";
      }
    }
  }
  if (mode == "json") std::cout << jout.dump(2) << "\n";
  return violated ? kExitAnalysis : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fixed-point data-path analyzer"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::simple);

  int operand_bits = 0;
  std::optional<long> overflow_index;
  std::optional<long> steps_opt;
  auto* predict = app.add_subcommand("predict", "predict carry-out steps in an addition chain");
  predict->add_option("--operand-bits", operand_bits, "operand data width B (N = B - 1)")
      ->required()
      ->check(CLI::PositiveNumber);
  auto* n_opt = predict->add_option("--overflow-index", overflow_index, "overflow index n >= 1")
                    ->check(CLI::PositiveNumber);
  auto* s_opt = predict->add_option("--steps", steps_opt, "number of additions s >= 0")
                    ->check(CLI::NonNegativeNumber);
  n_opt->excludes(s_opt);
  s_opt->excludes(n_opt);

  int acc_bits = 0;
  long acc_steps = 0;
  std::string acc_mode = "text";
  auto* accumulate = app.add_subcommand("accumulate", "tabulate width growth over consecutive additions");
  accumulate->add_option("--operand-bits", acc_bits, "operand data width B")
      ->required()
      ->check(CLI::PositiveNumber);
  accumulate->add_option("--steps", acc_steps, "number of additions s >= 1")
      ->required()
      ->check(CLI::PositiveNumber);
  accumulate->add_option("--format", acc_mode, "text|csv|json")
      ->check(CLI::IsMember({"text", "csv", "json"}));

  std::string chains_path;
  auto* chains = app.add_subcommand("chains", "list maximal addition chains of a graph");
  chains->add_option("path", chains_path, "graph description file")->required();

  std::string analyze_path;
  std::string analyze_mode = "text";
  auto* analyze = app.add_subcommand("analyze", "assign formats, scales and error bounds");
  analyze->add_option("path", analyze_path, "graph description file")->required();
  analyze->add_option("--format", analyze_mode, "text|csv|json")
      ->check(CLI::IsMember({"text", "csv", "json"}));

  std::string sim_path, sim_inputs, sim_mode = "text";
  long sim_random = 0;
  unsigned long sim_seed = 0;
  bool sim_check = false;
  auto* simulate = app.add_subcommand("simulate", "execute a graph bit-accurately");
  simulate->add_option("path", sim_path, "graph description file")->required();
  auto* in_opt = simulate->add_option("--inputs", sim_inputs, "CSV or JSON input vectors");
  auto* rnd_opt = simulate->add_option("--random", sim_random, "number of random trials")
                      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim_seed, "random seed (default 0)");
  simulate->add_flag("--check-bounds", sim_check, "fail when a deviation exceeds its bound");
  in_opt->excludes(rnd_opt);
  rnd_opt->excludes(in_opt);
  simulate->add_option("--format", sim_mode, "text|csv|json")
      ->check(CLI::IsMember({"text", "csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (predict->parsed()) {
      if (overflow_index.has_value() == steps_opt.has_value()) {
        std::cerr << "predict needs exactly one of --overflow-index or --steps\n";
        return kExitUsage;
      }
      return cmd_predict(operand_bits, overflow_index, steps_opt);
    }
    if (accumulate->parsed()) return cmd_accumulate(acc_bits, acc_steps, acc_mode);
    if (chains->parsed()) return cmd_chains(chains_path);
    if (analyze->parsed()) return cmd_analyze(analyze_path, analyze_mode);
    if (simulate->parsed()) {
      if (sim_inputs.empty() && sim_random == 0) {
        std::cerr << "simulate needs --inputs or --random\n";
        return kExitUsage;
      }
      return cmd_simulate(sim_path, sim_inputs, sim_random, sim_seed, sim_check, sim_mode);
    }
  } catch (const fxpath::infeasible_error& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitAnalysis;
  } catch (const fxpath::overflow_violation& e) {
    std::cerr << "overflow violation: " << e.what() << "\n";
    return kExitAnalysis;
  } catch (const fxpath::parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fxpath::input_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fxpath::format_error& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
