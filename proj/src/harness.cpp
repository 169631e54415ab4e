#include "sensflow/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "sensflow/parallel.hpp"

namespace sensflow {

double r2_score(std::span<const double> y_test, std::span<const double> predictions) {
  if (y_test.empty() || y_test.size() != predictions.size()) {
    throw Error("r2_score needs equal non-zero lengths");
  }
  const double mean =
      std::accumulate(y_test.begin(), y_test.end(), 0.0) / static_cast<double>(y_test.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t j = 0; j < y_test.size(); ++j) {
    ss_res += (y_test[j] - predictions[j]) * (y_test[j] - predictions[j]);
    ss_tot += (y_test[j] - mean) * (y_test[j] - mean);
  }
  if (ss_tot == 0.0) throw Error("r2_score: constant y_test");
  return 1.0 - ss_res / ss_tot;
}

std::string method_label(int number) { return "method" + std::to_string(number); }

std::size_t MethodComparison::method_index(std::string_view label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error("unknown method label: " + std::string(label));
  return static_cast<std::size_t>(it - labels.begin());
}

double MethodComparison::mean_at(std::string_view label, std::size_t budget) const {
  const auto it = std::find(budgets.begin(), budgets.end(), budget);
  if (it == budgets.end()) throw Error("budget not on the evaluation grid");
  return mean[method_index(label)][static_cast<std::size_t>(it - budgets.begin())];
}

void MethodComparison::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "method,run,N,r2\n";
  for (std::size_t m = 0; m < labels.size(); ++m) {
    for (std::size_t r = 0; r < curves[m].size(); ++r) {
      if (!curves[m][r]) continue;
      for (std::size_t b = 0; b < budgets.size(); ++b) {
        out << labels[m] << ',' << r << ',' << budgets[b] << ','
            << format_double((*curves[m][r])[b]) << '\n';
      }
    }
  }
}

void MethodComparison::write_mean_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "method,N,mean_r2,runs\n";
  for (std::size_t m = 0; m < labels.size(); ++m) {
    const auto done = std::count_if(curves[m].begin(), curves[m].end(),
                                    [](const auto& c) { return c.has_value(); });
    for (std::size_t b = 0; b < budgets.size(); ++b) {
      out << labels[m] << ',' << budgets[b] << ',' << format_double(mean[m][b]) << ',' << done
          << '\n';
    }
  }
}

namespace {

struct PreparedSource {
  std::unique_ptr<BlackBox> prototype;
  SampleSet test;
  std::vector<std::size_t> oracle;
};

PreparedSource prepare(const Source& source, const FlowConfig& base, Seed seed) {
  PreparedSource out;
  if (const auto* g = std::get_if<GeneratorSource>(&source)) {
    GFunctionBox box(g->d_significant, g->d_total);
    out.test = box.sample(g->n_test, derive_seed(seed, "test"));
    if (base.d <= g->d_significant) {
      out.oracle.resize(base.d);
      std::iota(out.oracle.begin(), out.oracle.end(), 0);
    }
    out.prototype = std::make_unique<GFunctionBox>(box);
  } else {
    const auto& ds = std::get<DatasetSource>(source);
    auto parts = split(ds.data, ds.train_ratio, derive_seed(seed, "split"));
    out.oracle =
        select_features(ds.data, std::min(base.d, ds.data.d_total()), derive_seed(seed, "oracle"))
            .selected;
    out.test = std::move(parts.test);
    out.prototype = std::make_unique<PoolBox>(std::move(parts.train));
  }
  if (!base.oracle_indices.empty()) out.oracle = base.oracle_indices;
  return out;
}

}  // namespace

MethodComparison compare_methods(const ComparisonSetup& setup) {
  if (setup.runs < 1) throw Error("runs must be >= 1");
  std::vector<MethodSpec> specs = setup.custom;
  if (specs.empty()) {
    for (int number : setup.methods) {
      MethodSpec spec{method_label(number), setup.base, std::nullopt};
      spec.config.set_method(Method::from_number(number));
      specs.push_back(std::move(spec));
    }
  }
  if (specs.empty()) throw Error("no methods to compare");

  const auto prepared = prepare(setup.source, setup.base, setup.seed);
  for (auto& spec : specs) {
    if (spec.config.oracle_indices.empty()) spec.config.oracle_indices = prepared.oracle;
    if (spec.config.selection == Selection::Oracle &&
        spec.config.oracle_indices.size() != spec.config.d) {
      throw Error("oracle needs d <= number of significant features");
    }
    spec.config.validate(prepared.prototype->dimension());
  }

  MethodComparison out;
  out.runs = setup.runs;
  out.budgets = evaluation_budgets(setup.base.n0, setup.base.nf, setup.base.eval_every);
  for (const auto& s : specs) out.labels.push_back(s.label);
  out.curves.assign(specs.size(),
                    std::vector<std::optional<std::vector<double>>>(setup.runs));
  std::vector<std::string> errors(specs.size() * setup.runs);

  parallel_for(specs.size() * setup.runs, setup.threads, [&](std::size_t job) {
    const std::size_t m = job / setup.runs;
    const std::size_t r = job % setup.runs;
    const auto& spec = specs[m];
    try {
      auto box = prepared.prototype->clone();
      Rng init_rng(setup.seed, "init", r);
      const auto init = initial_samples(*box, spec.config.n0, init_rng);
      const Seed run_seed = derive_seed(setup.seed, "run", r);
      const auto trace =
          spec.random_until
              ? run_hybrid_flow(spec.config, *spec.random_until, *box, init, run_seed,
                                &prepared.test)
              : run_active_flow(spec.config, *box, init, run_seed, &prepared.test);
      std::map<std::size_t, double> by_n;
      for (const auto& e : trace.evaluations) by_n[e.n] = e.r2;
      std::vector<double> curve;
      for (auto b : out.budgets) {
        const auto it = by_n.find(b);
        if (it == by_n.end()) throw Error("no evaluation at N=" + std::to_string(b));
        curve.push_back(it->second);
      }
      out.curves[m][r] = std::move(curve);
    } catch (const std::exception& e) {
      errors[job] = spec.label + " run " + std::to_string(r) + ": " + e.what();
    }
  });
  for (auto& e : errors) {
    if (!e.empty()) out.failures.push_back(std::move(e));
  }

  out.mean.assign(specs.size(),
                  std::vector<double>(out.budgets.size(), std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t m = 0; m < specs.size(); ++m) {
    for (std::size_t b = 0; b < out.budgets.size(); ++b) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& c : out.curves[m]) {
        if (!c) continue;
        sum += (*c)[b];
        ++count;
      }
      if (count) out.mean[m][b] = sum / static_cast<double>(count);
    }
  }
  return out;
}

std::vector<std::size_t> log_grid(std::size_t lo, std::size_t hi, std::size_t points) {
  if (lo < 1 || hi < lo || points < 1) throw Error("bad grid bounds");
  std::set<std::size_t> values;
  if (points == 1 || lo == hi) {
    values.insert(hi);
  } else {
    const double step = std::log(double(hi) / double(lo)) / double(points - 1);
    for (std::size_t i = 0; i < points; ++i) {
      values.insert(static_cast<std::size_t>(std::llround(double(lo) * std::exp(step * double(i)))));
    }
  }
  return {values.begin(), values.end()};
}

double ConjectureStudy::fraction_within(double lo, double hi) const {
  if (samples.empty()) return 0.0;
  const auto inside = std::count_if(samples.begin(), samples.end(), [&](const GammaSample& s) {
    return s.gamma >= lo && s.gamma <= hi;
  });
  return static_cast<double>(inside) / static_cast<double>(samples.size());
}

void ConjectureStudy::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "mode,batch,N,k,xi_max,gamma\n";
  for (const auto& s : samples) {
    out << (s.mode == SweepMode::N ? "N" : "k") << ',' << s.batch << ',' << s.n << ',' << s.k
        << ',' << format_double(s.xi_max) << ',' << format_double(s.gamma) << '\n';
  }
}

ConjectureStudy conjecture_tightness(const ConjectureParams& params) {
  if (params.batches < 1) throw Error("need at least one batch");
  if (params.n_values.empty() || params.k_values.empty()) throw Error("empty sweep grid");
  auto ns = params.n_values;
  auto ks = params.k_values;
  std::sort(ns.begin(), ns.end());
  std::sort(ks.begin(), ks.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ns.front() < 2) throw Error("sample sizes must be >= 2");
  if (ks.front() < 2) throw Error("feature counts must be >= 2");
  if (params.mode == SweepMode::N && ks.size() != 1) throw Error("sweep-N takes a single k");
  if (params.mode == SweepMode::K && ns.size() != 1) throw Error("sweep-k takes a single N");

  const std::size_t n_max = ns.back();
  const std::size_t k_max = ks.back();
  std::vector<std::vector<GammaSample>> per_batch(params.batches);

  parallel_for(params.batches, params.threads, [&](std::size_t b) {
    Rng rng(params.seed, params.mode == SweepMode::N ? "conjecture-N" : "conjecture-k", b);
    std::vector<double> y(n_max);
    for (auto& v : y) v = rng.uniform();
    std::vector<std::vector<double>> x(k_max, std::vector<double>(n_max));
    for (auto& col : x) {
      for (auto& v : col) v = rng.uniform();
    }
    auto& out = per_batch[b];
    if (params.mode == SweepMode::N) {
      const std::size_t k = k_max;
      for (auto n : ns) {
        const auto ranks = output_ranks(std::span<const double>(y.data(), n));
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i) {
          best = std::max(best, chatterjee_xi_ranked(std::span<const double>(x[i].data(), n),
                                                     ranks, derive_seed(params.seed, "ties", i)));
        }
        out.push_back({SweepMode::N, b, n, k, best, best / noise_threshold(n, k)});
      }
    } else {
      const std::size_t n = n_max;
      const auto ranks = output_ranks(y);
      double best = -std::numeric_limits<double>::infinity();
      std::size_t next = 0;
      for (std::size_t i = 0; i < k_max; ++i) {
        best = std::max(best, chatterjee_xi_ranked(x[i], ranks, derive_seed(params.seed, "ties", i)));
        if (next < ks.size() && ks[next] == i + 1) {
          out.push_back({SweepMode::K, b, n, i + 1, best, best / noise_threshold(n, i + 1)});
          ++next;
        }
      }
    }
  });

  ConjectureStudy study;
  for (auto& batch : per_batch) {
    study.samples.insert(study.samples.end(), batch.begin(), batch.end());
  }
  return study;
}

ConjectureFits conjecture_regression(const ConjectureStudy& study) {
  ConjectureFits fits;
  std::vector<double> xn, yn, xk, yk;
  std::set<std::size_t> distinct_n, distinct_k;
  for (const auto& s : study.samples) {
    if (!(s.xi_max > 0.0)) {
      ++fits.dropped;
      continue;
    }
    if (s.mode == SweepMode::N) {
      xn.push_back(std::log(5.0 * static_cast<double>(s.n) / 2.0));
      yn.push_back(std::log(s.xi_max));
      distinct_n.insert(s.n);
    } else {
      xk.push_back(std::log(2.0 * std::log(static_cast<double>(s.k))));
      yk.push_back(std::log(s.xi_max));
      distinct_k.insert(s.k);
    }
  }
  if (distinct_n.size() >= 3) {
    auto fit = ols_fit(xn, yn);
    fit.slope = -fit.slope;
    fit.slope_ci95 = {-fit.slope_ci95.second, -fit.slope_ci95.first};
    fits.alpha1 = fit;
  }
  if (distinct_k.size() >= 3) fits.beta1 = ols_fit(xk, yk);
  if (!fits.alpha1 && !fits.beta1) throw Error("insufficient grid: need 3 distinct N or k values");
  return fits;
}

void write_ols_csv(const ConjectureFits& fits, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "target,slope,lo,hi,r2\n";
  auto row = [&](const char* name, const std::optional<OlsFit>& f) {
    if (!f) return;
    out << name << ',' << format_double(f->slope) << ',' << format_double(f->slope_ci95.first)
        << ',' << format_double(f->slope_ci95.second) << ',' << format_double(f->r2) << '\n';
  };
  row("alpha1", fits.alpha1);
  row("beta1", fits.beta1);
}

ComparisonSetup appendix_setup(const AppendixParams& params) {
  if (params.preset != "g4-low-dim" && params.preset != "g4-hybrid") {
    throw Error("unknown preset: " + params.preset);
  }
  ComparisonSetup setup;
  setup.source = GeneratorSource{4, 4, params.n_test.value_or(1000)};
  setup.seed = params.seed;
  setup.threads = params.threads;
  setup.runs = params.runs.value_or(50);

  FlowConfig base;
  base.n0 = 1;
  base.nf = params.nf.value_or(200);
  base.m = params.m.value_or(100000);
  base.d = 4;
  base.oracle_indices = {0, 1, 2, 3};
  base.selection = Selection::Oracle;
  setup.base = base;

  auto spec = [&](std::string label, Acquisition a, std::optional<std::size_t> until) {
    MethodSpec s{std::move(label), base, until};
    s.config.acquisition = a;
    return s;
  };
  setup.custom.push_back(spec("active", Acquisition::MaxVariance, std::nullopt));
  setup.custom.push_back(spec("random", Acquisition::Random, std::nullopt));
  if (params.preset == "g4-hybrid") {
    for (std::size_t n1 : {20u, 40u}) {
      if (n1 <= base.nf) {
        setup.custom.push_back(
            spec("hybrid-" + std::to_string(n1), Acquisition::MaxVariance, n1));
      }
    }
  }
  return setup;
}

MethodComparison appendix_validation(const AppendixParams& params) {
  return compare_methods(appendix_setup(params));
}

}  // namespace sensflow
