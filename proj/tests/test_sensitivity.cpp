#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "sensflow/blackbox.hpp"
#include "sensflow/sensitivity.hpp"

using namespace sensflow;

namespace {

std::vector<double> uniform_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  return v;
}

// rank by the literal count, in the given order
std::vector<std::int64_t> brute_ranks(const std::vector<double>& y) {
  std::vector<std::int64_t> r(y.size(), 0);
  for (std::size_t j = 0; j < y.size(); ++j) {
    for (std::size_t k = 0; k < y.size(); ++k) r[j] += y[k] <= y[j];
  }
  return r;
}

}  // namespace

TEST_CASE("monotone examples") {
  const std::vector<double> x{0.3, 0.1, 0.5, 0.2, 0.4};
  std::vector<double> neg(x.size());
  std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });
  CHECK(chatterjee_xi(x, x) == 0.5);
  CHECK(chatterjee_xi(x, neg) == 0.5);
  for (std::size_t n : {2u, 3u, 17u, 1000u}) {
    std::vector<double> v(n);
    std::iota(v.begin(), v.end(), 0.0);
    CHECK(chatterjee_xi(v, v) == 1.0 - 3.0 / (static_cast<double>(n) + 1.0));
  }
}

TEST_CASE("output ranks follow the <= count (property)") {
  Rng rng(Seed{4});
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> y(1 + rng.index(30));
    for (auto& v : y) v = static_cast<double>(rng.index(6));  // plenty of ties
    CHECK(output_ranks(y) == brute_ranks(y));
  }
}

TEST_CASE("independent inputs average near zero") {
  Rng rng(Seed{12}, "independent");
  double sum = 0.0;
  for (int rep = 0; rep < 500; ++rep) {
    const auto x = uniform_vec(10000, rng), y = uniform_vec(10000, rng);
    sum += chatterjee_xi(x, y);
  }
  CHECK(std::abs(sum / 500.0) < 0.002);
}

TEST_CASE("invariance under increasing transforms (property)") {
  Rng rng(Seed{5});
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.index(200);
    const auto x = uniform_vec(n, rng), y = uniform_vec(n, rng);
    std::vector<double> fx(n), gy(n);
    for (std::size_t i = 0; i < n; ++i) {
      fx[i] = std::exp(3.0 * x[i]) - 7.0;
      gy[i] = std::pow(y[i], 3) + 2.0 * y[i];
    }
    CHECK(chatterjee_xi(x, y) == chatterjee_xi(fx, gy));
  }
}

TEST_CASE("the estimator is not symmetric in its arguments") {
  // y = x^2 on a symmetric grid: y is a function of x, x is not a function of y
  std::vector<double> x, y;
  for (int i = -10; i <= 10; ++i) {
    x.push_back(i / 10.0);
    y.push_back((i / 10.0) * (i / 10.0));
  }
  const double xy = chatterjee_xi(x, y), yx = chatterjee_xi(y, x, Seed{3});
  CHECK(xy > 0.6);
  CHECK(yx < xy - 0.3);
}

TEST_CASE("ties in x: seeded, reproducible, and within bounds") {
  Rng rng(Seed{6});
  std::vector<double> x(300), y(300);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<double>(rng.index(4));
    y[i] = rng.uniform();
  }
  const double a = chatterjee_xi(x, y, Seed{1});
  CHECK(a == chatterjee_xi(x, y, Seed{1}));
  CHECK(a <= 1.0);
  CHECK(a >= -2.0);
}

TEST_CASE("constant output gives one and a degenerate report") {
  const std::vector<double> x{0.1, 0.7, 0.3}, y{2.0, 2.0, 2.0};
  CHECK(chatterjee_xi(x, y) == 1.0);
  Eigen::MatrixXd f(3, 1);
  f << 0.1, 0.7, 0.3;
  const SampleSet s(f, Eigen::VectorXd::Constant(3, 2.0), {"a"});
  CHECK(select_features(s, 1, Seed{1}).degenerate);
}

TEST_CASE("estimator input checks") {
  const std::vector<double> one{1.0}, two{1.0, 2.0}, three{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(chatterjee_xi(one, one), Error);
  CHECK_THROWS_AS(chatterjee_xi(two, three), Error);
  const std::vector<double> bad{1.0, std::nan("")};
  CHECK_THROWS_AS(chatterjee_xi(bad, two), Error);
}

TEST_CASE("G-function selection at N = 22500, D = 450") {
  GFunctionBox box(4, 450);
  const auto s = box.sample(22500, Seed{21});
  const auto rep = select_features(s, 4, Seed{1});
  CHECK(std::set<std::size_t>(rep.selected.begin(), rep.selected.end()) ==
        std::set<std::size_t>{0, 1, 2, 3});
  // brute-force: every significant estimate beats every noisy one
  double noisy_max = -1.0, sig_min = 2.0;
  for (const auto& e : rep.estimates) {
    if (e.feature_index < 4) sig_min = std::min(sig_min, e.xi_hat);
    else noisy_max = std::max(noisy_max, e.xi_hat);
  }
  CHECK(sig_min > noisy_max);
  CHECK(rep.threshold == doctest::Approx(noise_threshold(22500, 446)));
}

TEST_CASE("d = D keeps everything, ordered by estimate") {
  GFunctionBox box(2, 6);
  const auto s = box.sample(500, Seed{2});
  const auto rep = select_features(s, 6, Seed{1});
  REQUIRE(rep.selected.size() == 6);
  for (std::size_t i = 0; i + 1 < 6; ++i) {
    CHECK(rep.estimates[rep.selected[i]].xi_hat >= rep.estimates[rep.selected[i + 1]].xi_hat);
  }
  CHECK(std::isnan(rep.threshold));
  CHECK_THROWS_AS(select_features(s, 7, Seed{1}), Error);
  CHECK_THROWS_AS(select_features(s, 0, Seed{1}), Error);
}

TEST_CASE("identical columns tie, lower index first") {
  Rng rng(Seed{8});
  Eigen::MatrixXd f(200, 3);
  Eigen::VectorXd y(200);
  for (int i = 0; i < 200; ++i) {
    f(i, 0) = rng.uniform();
    f(i, 1) = rng.uniform();
    f(i, 2) = f(i, 1);
    y(i) = f(i, 1) + 0.1 * rng.uniform();
  }
  const auto rep = select_features(SampleSet(f, y, {"a", "b", "c"}), 2, Seed{1});
  CHECK(rep.estimates[1].xi_hat == rep.estimates[2].xi_hat);
  CHECK(rep.selected == std::vector<std::size_t>{1, 2});
}

TEST_CASE("threaded selection matches serial") {
  GFunctionBox box(3, 40);
  const auto s = box.sample(800, Seed{9});
  const auto a = select_features(s, 5, Seed{2}, 1), b = select_features(s, 5, Seed{2}, 3);
  CHECK(a.selected == b.selected);
  for (std::size_t i = 0; i < a.estimates.size(); ++i) {
    CHECK(a.estimates[i].xi_hat == b.estimates[i].xi_hat);
  }
}

TEST_CASE("noise threshold values") {
  CHECK(noise_threshold(10000, 100) == doctest::Approx(0.019194).epsilon(1e-4));
  CHECK(noise_threshold(40000, 100) == doctest::Approx(noise_threshold(10000, 100) / 2));
  CHECK(noise_threshold(10000, 10000) == doctest::Approx(0.027145).epsilon(1e-4));
  CHECK_THROWS_AS(noise_threshold(100, 1), Error);
  CHECK_THROWS_AS(noise_threshold(0, 5), Error);
}

TEST_CASE("xi_max") {
  GFunctionBox box(1, 101);
  const auto s = box.sample(10000, Seed{3});
  const std::vector<std::size_t> one{7};
  CHECK(xi_max(s, one, Seed{1}) ==
        chatterjee_xi(std::vector<double>(s.features().col(7).data(), s.features().col(7).data() + 10000),
                      std::vector<double>(s.outputs().data(), s.outputs().data() + 10000), Seed{1}));

  std::vector<std::size_t> noisy(100);
  std::iota(noisy.begin(), noisy.end(), 1);
  const double thr = noise_threshold(10000, 100);
  const double m = xi_max(s, noisy);
  CHECK(m / thr > 0.2);
  CHECK(m / thr < 2.5);
  const std::vector<std::size_t> sig{0};
  CHECK(xi_max(s, sig) > 10 * thr);
}

TEST_CASE("ols on an exact line") {
  const std::vector<double> x{0, 1, 2, 3, 4};
  std::vector<double> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return 0.5 * v + 1.0; });
  const auto f = ols_fit(x, y);
  CHECK(f.slope == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(f.intercept == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK(f.slope_ci95.first == doctest::Approx(0.5));
  CHECK(f.slope_ci95.second == doctest::Approx(0.5));

  const std::vector<double> c{3, 3, 3, 3, 3};
  CHECK(ols_fit(x, c).slope == 0.0);
  CHECK_THROWS_AS(ols_fit(c, x), Error);
}

TEST_CASE("ols interval brackets the truth under noise") {
  Rng rng(Seed{10});
  int covered = 0;
  for (int rep = 0; rep < 400; ++rep) {
    std::vector<double> x(30), y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      x[i] = rng.uniform() * 4.0;
      y[i] = -0.5 * x[i] + 2.0 + 0.3 * rng.normal();
    }
    const auto f = ols_fit(x, y);
    covered += f.slope_ci95.first <= -0.5 && -0.5 <= f.slope_ci95.second;
  }
  // nominal 95%, t vs normal quantile at 28 dof costs about a point
  CHECK(covered > 360);
}

TEST_CASE("gumbel constants and KS distance") {
  const auto [a, b] = gumbel_constants(3.0);
  CHECK(a == doctest::Approx(std::sqrt(2.0 * std::log(3.0))).epsilon(1e-14));
  CHECK(a == doctest::Approx(1.48230).epsilon(1e-5));
  CHECK(b == doctest::Approx(a - (std::log(4.0 * M_PI) + std::log(std::log(3.0))) / (2.0 * a)));
  CHECK(gumbel_cdf(0.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(ks_distance({0.0}, gumbel_cdf) == doctest::Approx(1.0 - std::exp(-1.0)));

  // exact Gumbel draws by inversion stay close
  Rng rng(Seed{2});
  std::vector<double> g(4000);
  for (auto& v : g) v = -std::log(-std::log(rng.uniform() * 0.999998 + 1e-6));
  CHECK(ks_distance(g, gumbel_cdf) < 0.03);
}

TEST_CASE("report csv columns") {
  GFunctionBox box(1, 3);
  const auto s = box.sample(50, Seed{1});
  const auto rep = select_features(s, 1, Seed{1});
  const auto p = std::filesystem::temp_directory_path() / "sensflow-report.csv";
  write_report_csv(rep, s.feature_names(), p);
  std::ifstream in(p);
  std::string header;
  std::getline(in, header);
  CHECK(header == "feature_name,feature_index,xi_hat,selected,threshold");
}
