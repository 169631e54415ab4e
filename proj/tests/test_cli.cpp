#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sensflow/blackbox.hpp"

using namespace sensflow;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "sensflow-test-cli";

int run(const std::string& args, const fs::path& log = kRoot / "stderr.txt") {
  fs::create_directories(kRoot);
  const std::string cmd =
      std::string(SENSFLOW_CLI_PATH) + " " + args + " > /dev/null 2> " + log.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh(const std::string& name) {
  const auto d = kRoot / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("xi on a csv") {
  const auto dir = fresh("xi");
  save_csv(GFunctionBox(2, 5).sample(300, Seed{1}), dir / "data.csv");
  REQUIRE(run("--out-dir " + dir.string() + " xi --data " + (dir / "data.csv").string()) == 0);
  const auto text = slurp(dir / "xi.csv");
  CHECK(text.rfind("feature_name,feature_index,xi_hat\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
  CHECK(fs::exists(dir / "manifest.ini"));
}

TEST_CASE("unknown flag is a one-line usage error") {
  const auto log = kRoot / "unknown.txt";
  CHECK(run("xi --bogus 3", log) != 0);
  const auto text = slurp(log);
  CHECK(text.rfind("error: usage:", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
}

TEST_CASE("oracle selection needs indices") {
  const auto dir = fresh("oracle");
  const auto log = kRoot / "oracle.txt";
  save_csv(GFunctionBox(2, 5).sample(100, Seed{1}), dir / "data.csv");
  CHECK(run("--out-dir " + dir.string() + " run-flow --data " + (dir / "data.csv").string() +
                " --selection oracle --n0 5 --nf 10 --m 50 --d 2",
            log) == 1);
  CHECK(slurp(log).rfind("error: runtime:", 0) == 0);
}

TEST_CASE("manifest re-feed reproduces the output") {
  const auto a = fresh("manifest-a"), b = fresh("manifest-b");
  REQUIRE(run("--seed 7 --out-dir " + a.string() +
              " compare-methods --preset g4 --runs 1 --methods 3,4 --nf 20 --m 100 --n-test 100") ==
          0);
  REQUIRE(run("--config " + (a / "manifest.ini").string() + " --out-dir " + b.string()) == 0);
  CHECK(slurp(a / "comparison.csv") == slurp(b / "comparison.csv"));
  CHECK(slurp(a / "comparison_mean.csv") == slurp(b / "comparison_mean.csv"));
}

TEST_CASE("conjecture writes both tables") {
  const auto dir = fresh("conjecture");
  REQUIRE(run("--out-dir " + dir.string() +
              " conjecture --sweep both --Nmin 50 --Nmax 200 --points 3 --k 10 --N 100 --kmax 6 --P 2") ==
          0);
  CHECK(slurp(dir / "gamma.csv").rfind("mode,batch,N,k,xi_max,gamma\n", 0) == 0);
  const auto ols = slurp(dir / "ols.csv");
  CHECK(ols.find("alpha1,") != std::string::npos);
  CHECK(ols.find("beta1,") != std::string::npos);
}

TEST_CASE("gfun-gen and gp-check") {
  const auto dir = fresh("gen");
  REQUIRE(run("--out-dir " + dir.string() + " gfun-gen --d 3 --D 8 --n 40") == 0);
  const auto back = load_csv(dir / "gfunction.csv", "y");
  CHECK(back.n() == 40);
  CHECK(back.d_total() == 8);
  REQUIRE(run("--out-dir " + dir.string() + " gp-check --n 30 --n-test 50 --d 2") == 0);
  CHECK(slurp(dir / "gp_check.csv").rfind("quantity,value\n", 0) == 0);
}
