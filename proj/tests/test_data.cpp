#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "sensflow/data.hpp"

using namespace sensflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "sensflow-test-data";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

SampleSet random_set(std::size_t n, std::size_t d, Rng& rng) {
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = (rng.uniform() - 0.5) * std::pow(10.0, rng.index(12) - 6.0);
    y(i) = rng.normal() * 1e3;
  }
  return SampleSet(x, y, SampleSet::default_names(d));
}

}  // namespace

TEST_CASE("load_csv reads a small table") {
  const auto p = scratch("small.csv");
  write_file(p, "x1,x2,y\n1,2,3\n4,5,6\n7,8,9\n");
  const auto s = load_csv(p, "y");
  CHECK(s.n() == 3);
  CHECK(s.d_total() == 2);
  CHECK(s.feature_names() == std::vector<std::string>{"x1", "x2"});
  CHECK(s.features()(2, 1) == 8.0);
  CHECK(s.outputs()(1) == 6.0);
}

TEST_CASE("output column may sit anywhere in the header") {
  const auto p = scratch("middle.csv");
  write_file(p, "a,out,b\n1,10,2\n3,30,4\n");
  const auto s = load_csv(p, "out");
  CHECK(s.feature_names() == std::vector<std::string>{"a", "b"});
  CHECK(s.features()(1, 1) == 4.0);
  CHECK(s.outputs()(1) == 30.0);
}

TEST_CASE("load_csv errors") {
  const auto p = scratch("bad.csv");
  write_file(p, "x1,y\n1,abc\n");
  CHECK_THROWS_WITH_AS(load_csv(p, "y"), doctest::Contains("non-numeric cell"), Error);

  write_file(p, "x1,y\n1,2\n");
  CHECK_THROWS_WITH_AS(load_csv(p, "z"), doctest::Contains("missing column"), Error);
  CHECK_THROWS_WITH_AS(load_csv(scratch("nope.csv"), "y"), doctest::Contains("missing file"), Error);

  write_file(p, "x1,y\n1,2,3\n");
  CHECK_THROWS_AS(load_csv(p, "y"), Error);

  write_file(p, "");
  CHECK_THROWS_AS(load_csv(p, "y"), Error);
}

TEST_CASE("non-finite rows are skipped and counted") {
  const auto p = scratch("nan.csv");
  write_file(p, "x,y\n1,2\nnan,3\n4,inf\n5,6\n");
  std::size_t rejected = 0;
  const auto s = load_csv(p, "y", &rejected);
  CHECK(s.n() == 2);
  CHECK(rejected == 2);
}

TEST_CASE("SampleSet validation") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 2, 3, 4;
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  CHECK_THROWS_AS(SampleSet(x, y, {"a", "b"}), Error);
  Eigen::VectorXd y2(2);
  y2 << 1, 2;
  CHECK_THROWS_AS(SampleSet(x, y2, {"a", "a"}), Error);
  x(0, 0) = std::nan("");
  CHECK_THROWS_AS(SampleSet(x, y2, {"a", "b"}), Error);
}

TEST_CASE("append and row subsets") {
  auto s = SampleSet::empty(SampleSet::default_names(3));
  CHECK(s.n() == 0);
  CHECK(s.d_total() == 3);
  Eigen::VectorXd a(3), b(3);
  a << 1, 2, 3;
  b << 4, 5, 6;
  s.append(a, 10);
  s.append(b, 20);
  CHECK(s.n() == 2);
  const std::vector<std::size_t> pick{1};
  const auto sub = s.rows(pick);
  CHECK(sub.n() == 1);
  CHECK(sub.outputs()(0) == 20.0);
  const std::vector<std::size_t> cols{2, 0};
  const auto c = s.columns(cols);
  CHECK(c(0, 0) == 3.0);
  CHECK(c(1, 1) == 4.0);
}

TEST_CASE("save/load round-trip is exact (property)") {
  Rng rng(Seed{11}, "roundtrip");
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = random_set(1 + rng.index(30), 1 + rng.index(6), rng);
    const auto p = scratch("rt.csv");
    save_csv(s, p);
    const auto back = load_csv(p, "y");
    REQUIRE(back.n() == s.n());
    CHECK(back.features() == s.features());
    CHECK(back.outputs() == s.outputs());
    CHECK(back.feature_names() == s.feature_names());
  }
}

TEST_CASE("split sizes and disjointness") {
  Rng rng(Seed{3});
  const auto s = random_set(100, 2, rng);
  const auto sp = split(s, 0.75, Seed{9});
  CHECK(sp.train.n() == 75);
  CHECK(sp.test.n() == 25);
  std::set<std::size_t> all(sp.train_indices.begin(), sp.train_indices.end());
  all.insert(sp.test_indices.begin(), sp.test_indices.end());
  CHECK(all.size() == 100);

  const auto tiny = split(random_set(2, 1, rng), 0.5, Seed{1});
  CHECK(tiny.train.n() == 1);
  CHECK(tiny.test.n() == 1);
  CHECK(tiny.train_indices[0] != tiny.test_indices[0]);
}

TEST_CASE("split is a pure function of (set, ratio, seed)") {
  Rng rng(Seed{5});
  const auto s = random_set(57, 3, rng);
  const auto a = split(s, 0.75, Seed{42});
  const auto b = split(s, 0.75, Seed{42});
  CHECK(a.train_indices == b.train_indices);
  CHECK(a.test_indices == b.test_indices);
  const auto c = split(s, 0.75, Seed{43});
  CHECK(a.train_indices != c.train_indices);
}

TEST_CASE("named streams are independent and reproducible") {
  Rng a(Seed{1}, "selection"), b(Seed{1}, "selection"), c(Seed{1}, "acquisition");
  const auto x = a.next();
  CHECK(x == b.next());
  CHECK(x != c.next());
  CHECK(derive_seed(Seed{1}, "run", 0) != derive_seed(Seed{1}, "run", 1));
  CHECK(derive_seed(Seed{1}, "run", 0) == derive_seed(Seed{1}, "run", 0));
}

TEST_CASE("uniform and index ranges (property)") {
  Rng r(Seed{77});
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    const auto k = r.index(7);
    CHECK(k < 7);
  }
}

TEST_CASE("index list helpers") {
  const std::vector<std::size_t> v{3, 0, 12};
  CHECK(join(v) == "3;0;12");
  CHECK(parse_index_list("3;0;12") == v);
  CHECK(parse_index_list("3,0,12") == v);
  CHECK(parse_index_list("").empty());
  CHECK_THROWS_AS(parse_index_list("1;x"), Error);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456789.123456789}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}
