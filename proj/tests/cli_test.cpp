#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

// Runs the CLI and captures stdout; stderr goes to /dev/null unless merged.
RunResult run_cli(const std::string& args, bool merge_stderr = false) {
  std::string cmd = std::string(FXPATH_CLI_PATH) + " " + args +
                    (merge_stderr ? " 2>&1" : " 2>/dev/null");
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string data(const std::string& name) { return std::string(FXPATH_DATA_DIR) + "/" + name; }

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream(path) << content;
  return path;
}

}  // namespace

TEST_CASE("predict prints the requested artifact on stdout") {
  RunResult r = run_cli("predict --operand-bits 8 --overflow-index 4");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "8\n");

  CHECK(run_cli("predict --operand-bits 8 --overflow-index 9").out == "257\n");
  CHECK(run_cli("predict --operand-bits 8 --steps 10000").out == "growth 14, bit-length 22\n");
  CHECK(run_cli("predict --operand-bits 8 --steps 0").out == "growth 0, bit-length 8\n");
}

TEST_CASE("predict echoes both width conventions on stderr") {
  RunResult r = run_cli("predict --operand-bits 8 --overflow-index 4", true);
  CHECK(r.out.find("B=8, N=7") != std::string::npos);
}

TEST_CASE("predict usage errors exit 2") {
  CHECK(run_cli("predict --operand-bits 8").exit_code == 2);
  CHECK(run_cli("predict --operand-bits 8 --overflow-index 4 --steps 3").exit_code == 2);
  CHECK(run_cli("predict --operand-bits 0 --overflow-index 4").exit_code == 2);
  CHECK(run_cli("predict --overflow-index 4").exit_code == 2);
  CHECK(run_cli("frobnicate").exit_code == 2);
}

TEST_CASE("accumulate tabulates growth positions") {
  RunResult r = run_cli("accumulate --operand-bits 8 --steps 10000");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("position\tk\tbit_length\n1\t1\t9\n") != std::string::npos);
  CHECK(r.out.find("\n8224\t14\t22\n") != std::string::npos);

  RunResult single = run_cli("accumulate --operand-bits 8 --steps 1");
  CHECK(single.out.find("1\t1\t9") != std::string::npos);
  CHECK(single.out.find("\n2\t") == std::string::npos);

  RunResult tiny = run_cli("accumulate --operand-bits 1 --steps 10 --format csv");
  CHECK(tiny.out == "position,k,bit_length\n1,1,2\n3,2,3\n7,3,4\n");

  CHECK(run_cli("accumulate --operand-bits 8 --steps 0").exit_code == 2);
  CHECK(run_cli("accumulate --operand-bits 8").exit_code == 2);
}

TEST_CASE("analyze renders the allocation report") {
  RunResult r = run_cli("analyze " + data("fir5.dfg"));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("n6") != std::string::npos);
  CHECK(r.out.find("error: 2^-16 = 0.000015259") != std::string::npos);
  CHECK(r.out.find("error: 2^-16+2^-17+2^-18 = 0.000026703") != std::string::npos);

  RunResult csv = run_cli("analyze " + data("fir5.dfg") + " --format csv");
  CHECK(csv.out.find("n9,(1/0/15),3,true,2^-16+2^-17+2^-18,0.000026703") != std::string::npos);
}

TEST_CASE("analyze exit codes distinguish parse from allocation failures") {
  std::string empty = write_temp("fxpath_empty.dfg", "");
  CHECK(run_cli("analyze " + empty).exit_code == 2);
  RunResult diag = run_cli("analyze " + empty, true);
  CHECK(diag.out.find("missing word directive") != std::string::npos);

  RunResult infeasible = run_cli("analyze " + data("infeasible.dfg"), true);
  CHECK(infeasible.exit_code == 1);
  CHECK(infeasible.out.find("'p'") != std::string::npos);

  CHECK(run_cli("analyze " + data("no_such_file.dfg")).exit_code == 2);
}

TEST_CASE("chains lists members, base width and overflow steps") {
  RunResult r = run_cli("chains " + data("fir5.dfg"));
  CHECK(r.exit_code == 0);
  CHECK(r.out == "chain 1: n6 n7 n8 n9 (N=14), overflows at steps 1, 2, 4\n");

  std::string no_adds = write_temp("fxpath_noadds.dfg",
                                   "word 16\ninput a 1/3/0\ninput b 1/3/0\n"
                                   "node m = mul a b\noutput y m\n");
  CHECK(run_cli("chains " + no_adds).out == "no chains\n");

  std::string tree = write_temp("fxpath_tree.dfg",
                                "word 32\ninput a 0/8/0\ninput b 0/8/0\ninput c 0/8/0\n"
                                "input d 0/8/0\nnode s1 = add a b\nnode s2 = add c d\n"
                                "node t = add s1 s2\noutput y t\n");
  RunResult tr = run_cli("chains " + tree);
  CHECK(tr.out.find("chain 1: s1 (N=7)") != std::string::npos);
  CHECK(tr.out.find("chain 2: s2 (N=7)") != std::string::npos);
  CHECK(tr.out.find("chain 3: t (N=8)") != std::string::npos);
}

TEST_CASE("simulate runs supplied input vectors") {
  RunResult r = run_cli("simulate " + data("fir5.dfg") + " --inputs " + data("fir5_zeros.csv"));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("y  raw=0  stored=0  deviation=0") != std::string::npos);

  RunResult add = run_cli("simulate " + data("add2.dfg") + " --inputs " + data("add2_values.csv"));
  CHECK(add.out.find("s  raw=130  stored=130  deviation=0") != std::string::npos);
}

TEST_CASE("simulate verifies bounds over random trials") {
  RunResult r = run_cli("simulate " + data("fir5.dfg") + " --random 500 --seed 42 --check-bounds");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("# rng=gmp-mt19937 seed=42 trials=500") != std::string::npos);
  CHECK(r.out.find("n9") != std::string::npos);
}

TEST_CASE("identical seeds produce byte-identical output") {
  std::string args = "simulate " + data("fir5.dfg") + " --random 300 --seed 7 --format json";
  RunResult a = run_cli(args);
  RunResult b = run_cli(args);
  CHECK(a.out == b.out);
  CHECK(!a.out.empty());
}

TEST_CASE("simulate rejects malformed input files") {
  std::string bad = write_temp("fxpath_bad.csv", "a,b\nfoo,bar\n");
  CHECK(run_cli("simulate " + data("add2.dfg") + " --inputs " + bad).exit_code == 2);
  std::string short_row = write_temp("fxpath_short.csv", "a\nraw:1\n");
  CHECK(run_cli("simulate " + data("add2.dfg") + " --inputs " + short_row).exit_code == 2);
  CHECK(run_cli("simulate " + data("add2.dfg")).exit_code == 2);  // no inputs given
}

TEST_CASE("simulate accepts json input vectors") {
  std::string j = write_temp("fxpath_in.json", R"([{"a": "raw:125", "b": "raw:5"}])");
  RunResult r = run_cli("simulate " + data("add2.dfg") + " --inputs " + j + " --format csv");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("0,s,130,130,0") != std::string::npos);
}

TEST_CASE("json report output is schema-shaped") {
  RunResult r = run_cli("analyze " + data("fir5.dfg") + " --format json");
  CHECK(r.out.find("\"graph\": \"fir5\"") != std::string::npos);
  CHECK(r.out.find("\"word\": 16") != std::string::npos);
  CHECK(r.out.find("\"notation\": \"(1/0/15)\"") != std::string::npos);
  CHECK(r.out.find("\"error_terms\": [") != std::string::npos);
  CHECK(r.out.find("\"base_N\": 14") != std::string::npos);
  CHECK(r.out.find("\"overflow_steps\": [") != std::string::npos);
}
