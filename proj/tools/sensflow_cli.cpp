// sensflow: command-line entry point for the sensitivity-guided sampling
// experiments and their building blocks.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sensflow/blackbox.hpp"
#include "sensflow/data.hpp"
#include "sensflow/harness.hpp"
#include "sensflow/metrics.hpp"
#include "sensflow/parallel.hpp"
#include "sensflow/sampler.hpp"
#include "sensflow/sensitivity.hpp"
#include "sensflow/surrogate.hpp"

namespace fs = std::filesystem;
using namespace sensflow;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Globals {
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::size_t threads = default_threads();
  bool timing = false;
};

// Flow flags shared by run-flow and compare-methods. Unset flags keep the
// preset's value.
struct FlowFlags {
  std::optional<std::size_t> n0, nf, m, d, refit_period, batch, eval_every;
  std::optional<int> method;
  std::optional<std::string> selection, acquisition, oracle_indices;

  void add_to(CLI::App* app) {
    app->add_option("--n0", n0, "initial sample count");
    app->add_option("--nf", nf, "final sample count");
    app->add_option("--m", m, "candidates per acquisition step");
    app->add_option("--d", d, "number of selected features");
    app->add_option("--method", method, "method number 1..6")->check(CLI::Range(1, 6));
    app->add_option("--selection", selection, "gsa | oracle | random");
    app->add_option("--acquisition", acquisition, "maxvar | random");
    app->add_option("--refit-period", refit_period, "iterations between refits");
    app->add_option("--batch", batch, "points added per iteration");
    app->add_option("--oracle-indices", oracle_indices, "0-based indices, ',' or ';' separated");
    app->add_option("--eval-every", eval_every, "R2 evaluation cadence");
  }

  void apply(FlowConfig& c) const {
    if (n0) c.n0 = *n0;
    if (nf) c.nf = *nf;
    if (m) c.m = *m;
    if (d) c.d = *d;
    if (method) c.set_method(Method::from_number(*method));
    if (selection) c.selection = parse_selection(*selection);
    if (acquisition) c.acquisition = parse_acquisition(*acquisition);
    if (refit_period) c.refit_period = *refit_period;
    if (batch) c.batch = *batch;
    if (oracle_indices) c.oracle_indices = parse_index_list(*oracle_indices);
    if (eval_every) c.eval_every = *eval_every;
  }
};

struct Preset {
  bool pool = false;
  std::size_t d_significant = 4;
  std::size_t d_total = 450;
  std::size_t n_test = 1000;
  std::size_t runs = 20;
  FlowConfig base;
};

Preset preset_by_name(const std::string& name) {
  Preset p;
  p.base.n0 = 10;
  p.base.nf = 200;
  p.base.m = 10000;
  if (name == "g4") {
    p.base.d = 4;
  } else if (name == "g10") {
    p.d_significant = 10;
    p.d_total = 10000;
    p.base.d = 10;
  } else if (name == "pool") {
    p.pool = true;
    p.base.d = 4;
  } else if (name == "g4-low-dim" || name == "g4-hybrid") {
    const auto setup = appendix_setup(AppendixParams{name});
    const auto& g = std::get<GeneratorSource>(setup.source);
    p.d_significant = g.d_significant;
    p.d_total = g.d_total;
    p.n_test = g.n_test;
    p.runs = setup.runs;
    p.base = setup.base;
  } else {
    throw Error("unknown preset: " + name);
  }
  return p;
}

SampleSet load_data(const std::string& path, const std::string& output) {
  std::size_t rejected = 0;
  auto set = load_csv(path, output, &rejected);
  if (rejected > 0) {
    std::cerr << "warning: skipped " << rejected << " rows with non-finite values\n";
  }
  return set;
}

fs::path out_path(const Globals& g, const std::string& file) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / file;
}

void write_manifest(const CLI::App& app, const Globals& g) {
  std::ofstream out(out_path(g, "manifest.ini"));
  out << "; sensflow " << kVersion << '\n'
      << "; eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
      << EIGEN_MINOR_VERSION << ", CLI11 " << CLI11_VERSION << '\n'
      << "; seed " << g.seed << '\n'
      << app.config_to_str(false, false);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sensitivity-guided active sampling experiments"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "read flags from an INI file (e.g. a manifest)");
  app.require_subcommand(1);

  Globals g;
  if (const char* env = std::getenv("SENSFLOW_OUT_DIR")) g.out_dir = env;
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out-dir", g.out_dir, "output directory (default $SENSFLOW_OUT_DIR or .)");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--timing", g.timing, "add wall-clock columns to traces");

  // xi / select
  std::string data_path, output_column = "y";
  std::size_t select_d = 4;
  auto* xi = app.add_subcommand("xi", "per-feature xi estimates for a CSV table")->configurable();
  xi->add_option("--data", data_path, "input CSV")->required();
  xi->add_option("--output", output_column, "output column name");

  auto* sel = app.add_subcommand("select", "top-d feature selection")->configurable();
  sel->add_option("--data", data_path, "input CSV")->required();
  sel->add_option("--output", output_column, "output column name");
  sel->add_option("--d", select_d, "number of features to keep");

  // gfun-gen
  std::size_t gen_d = 4, gen_big_d = 450, gen_n = 30000;
  auto* gen = app.add_subcommand("gfun-gen", "dump a G-function dataset")->configurable();
  gen->add_option("--d", gen_d, "significant features");
  gen->add_option("--D", gen_big_d, "total features");
  gen->add_option("--n", gen_n, "rows");

  // run-flow
  std::string flow_preset = "g4";
  std::optional<std::size_t> flow_n1, flow_n_test;
  FlowFlags flow_flags;
  auto* flow = app.add_subcommand("run-flow", "one sampling flow, trace CSV")->configurable();
  flow->add_option("--preset", flow_preset, "g4 | g10 | pool | g4-low-dim | g4-hybrid");
  flow->add_option("--data", data_path, "pool CSV (preset pool)");
  flow->add_option("--output", output_column, "output column name");
  flow->add_option("--n1", flow_n1, "random acquisition until this many samples");
  flow->add_option("--n-test", flow_n_test, "test rows for R2 (generator presets; 0 = off)");
  flow_flags.add_to(flow);

  // compare-methods
  std::string cmp_preset = "g4";
  std::optional<std::size_t> cmp_runs, cmp_n_test;
  std::vector<int> cmp_methods;
  FlowFlags cmp_flags;
  auto* cmp = app.add_subcommand("compare-methods", "mean R2(N) curves per method")->configurable();
  cmp->add_option("--preset", cmp_preset, "g4 | g10 | pool");
  cmp->add_option("--data", data_path, "pool CSV (preset pool)");
  cmp->add_option("--output", output_column, "output column name");
  cmp->add_option("--runs", cmp_runs, "runs per method");
  cmp->add_option("--methods", cmp_methods, "method numbers (default 1..6)")
      ->delimiter(',')->check(CLI::Range(1, 6));
  cmp->add_option("--n-test", cmp_n_test, "test rows (generator presets)");
  cmp_flags.add_to(cmp);

  // conjecture
  std::string sweep = "N";
  std::size_t conj_nmin = 100, conj_nmax = 10000, conj_points = 8, conj_k = 100, conj_n = 2000,
              conj_kmax = 100, conj_p = 100;
  auto* conj = app.add_subcommand("conjecture", "xi_max scaling study")->configurable();
  conj->add_option("--sweep", sweep, "N | k | both")
      ->check(CLI::IsMember({"N", "k", "both"}));
  conj->add_option("--Nmin", conj_nmin, "smallest N (sweep N)");
  conj->add_option("--Nmax", conj_nmax, "largest N (sweep N)");
  conj->add_option("--points", conj_points, "log-spaced N values (sweep N)");
  conj->add_option("--k", conj_k, "noise features (sweep N)");
  conj->add_option("--N", conj_n, "sample size (sweep k)");
  conj->add_option("--kmax", conj_kmax, "largest k; every k in 2..kmax is kept (sweep k)");
  conj->add_option("--P", conj_p, "independent batches");

  // gp-check
  std::size_t gp_n = 100, gp_test = 1000, gp_dim = 4;
  auto* gp = app.add_subcommand("gp-check", "GP fit diagnostics on G-function data")->configurable();
  gp->add_option("--n", gp_n, "training rows");
  gp->add_option("--n-test", gp_test, "test rows");
  gp->add_option("--d", gp_dim, "dimension (all significant)");

  // appendix
  AppendixParams ap;
  auto* apx = app.add_subcommand("appendix", "active vs random (vs hybrid) in low dimension")
                  ->configurable();
  apx->add_option("--preset", ap.preset, "g4-low-dim | g4-hybrid");
  apx->add_option("--m", ap.m, "candidates per step");
  apx->add_option("--runs", ap.runs, "runs per method");
  apx->add_option("--nf", ap.nf, "final sample count");
  apx->add_option("--n-test", ap.n_test, "test rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.get_name() << ": " << e.what() << '\n';
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  const Seed seed{g.seed};
  try {
    if (*xi) {
      const auto set = load_data(data_path, output_column);
      const auto report = select_features(set, set.d_total(), seed, g.threads);
      std::ofstream out(out_path(g, "xi.csv"));
      out << "feature_name,feature_index,xi_hat\n";
      for (const auto& e : report.estimates) {
        out << set.feature_names()[e.feature_index] << ',' << e.feature_index << ','
            << format_double(e.xi_hat) << '\n';
      }
    } else if (*sel) {
      const auto set = load_data(data_path, output_column);
      const auto report = select_features(set, select_d, seed, g.threads);
      write_report_csv(report, set.feature_names(), out_path(g, "select.csv"));
      if (report.degenerate) std::cerr << "warning: constant output column\n";
    } else if (*gen) {
      GFunctionBox box(gen_d, gen_big_d);
      save_csv(box.sample(gen_n, seed), out_path(g, "gfunction.csv"));
    } else if (*flow) {
      const auto preset = preset_by_name(flow_preset);
      FlowConfig config = preset.base;
      config.threads = g.threads;
      flow_flags.apply(config);
      std::unique_ptr<BlackBox> box;
      SampleSet test;
      if (preset.pool) {
        if (data_path.empty()) throw Error("preset pool needs --data");
        const auto parts = split(load_data(data_path, output_column), 0.75,
                                 derive_seed(seed, "split"));
        box = std::make_unique<PoolBox>(parts.train);
        test = parts.test;
      } else {
        GFunctionBox gbox(preset.d_significant, preset.d_total);
        const std::size_t n_test = flow_n_test.value_or(preset.n_test);
        if (n_test > 0) test = gbox.sample(n_test, derive_seed(seed, "test"));
        box = std::make_unique<GFunctionBox>(gbox);
      }
      config.validate(box->dimension());
      Rng init_rng(seed, "init", 0);
      const auto init = initial_samples(*box, config.n0, init_rng);
      const Seed run_seed = derive_seed(seed, "run", 0);
      const SampleSet* test_ptr = test.n() > 0 ? &test : nullptr;
      const auto trace = flow_n1
                             ? run_hybrid_flow(config, *flow_n1, *box, init, run_seed, test_ptr)
                             : run_active_flow(config, *box, init, run_seed, test_ptr);
      trace.write_csv(out_path(g, "trace.csv"), g.timing);
      if (trace.exhausted) std::cerr << "warning: pool exhausted at N=" << trace.samples.n() << '\n';
    } else if (*cmp) {
      const auto preset = preset_by_name(cmp_preset);
      ComparisonSetup setup;
      setup.base = preset.base;
      cmp_flags.apply(setup.base);
      setup.runs = cmp_runs.value_or(preset.runs);
      setup.seed = seed;
      setup.threads = g.threads;
      if (!cmp_methods.empty()) setup.methods = cmp_methods;
      if (preset.pool) {
        if (data_path.empty()) throw Error("preset pool needs --data");
        setup.source = DatasetSource{load_data(data_path, output_column), 0.75};
      } else {
        setup.source = GeneratorSource{preset.d_significant, preset.d_total,
                                       cmp_n_test.value_or(preset.n_test)};
      }
      const auto result = compare_methods(setup);
      result.write_csv(out_path(g, "comparison.csv"));
      result.write_mean_csv(out_path(g, "comparison_mean.csv"));
      for (const auto& f : result.failures) std::cerr << "warning: run failed: " << f << '\n';
    } else if (*conj) {
      ConjectureStudy study;
      auto run = [&](SweepMode mode) {
        ConjectureParams p;
        p.mode = mode;
        p.batches = conj_p;
        p.seed = seed;
        p.threads = g.threads;
        if (mode == SweepMode::N) {
          p.n_values = log_grid(conj_nmin, conj_nmax, conj_points);
          p.k_values = {conj_k};
        } else {
          if (conj_kmax < 2) throw Error("--kmax must be >= 2");
          p.n_values = {conj_n};
          p.k_values.resize(conj_kmax - 1);
          std::iota(p.k_values.begin(), p.k_values.end(), std::size_t{2});
        }
        const auto part = conjecture_tightness(p);
        study.samples.insert(study.samples.end(), part.samples.begin(), part.samples.end());
      };
      if (sweep != "k") run(SweepMode::N);
      if (sweep != "N") run(SweepMode::K);
      study.write_csv(out_path(g, "gamma.csv"));
      write_ols_csv(conjecture_regression(study), out_path(g, "ols.csv"));
    } else if (*gp) {
      GFunctionBox box(gp_dim, gp_dim);
      const auto train = box.sample(gp_n, derive_seed(seed, "train"));
      const auto test = box.sample(gp_test, derive_seed(seed, "test"));
      const auto fit = fit_hyperparameters(train.features(), train.outputs());
      const auto model = gp_fit(train.features(), train.outputs(), fit.kernel);
      const Eigen::VectorXd at_train = model.mean(train.features());
      const Eigen::VectorXd var_train = model.variance(train.features());
      const Eigen::VectorXd pred = model.mean(test.features());
      const double interp =
          ((at_train - train.outputs()).cwiseAbs().array() /
           train.outputs().cwiseAbs().array().max(1.0)).maxCoeff();
      std::ofstream out(out_path(g, "gp_check.csv"));
      out << "quantity,value\n"
          << "signal_variance," << format_double(fit.kernel.signal_variance) << '\n'
          << "lengthscale," << format_double(fit.kernel.lengthscales.front()) << '\n'
          << "jitter," << format_double(model.kernel().jitter) << '\n'
          << "lml," << format_double(fit.lml) << '\n'
          << "max_rel_interpolation_error," << format_double(interp) << '\n'
          << "max_train_variance," << format_double(var_train.maxCoeff()) << '\n'
          << "test_r2,"
          << format_double(r2_score({test.outputs().data(), std::size_t(test.n())},
                                    {pred.data(), std::size_t(pred.size())}))
          << '\n';
    } else if (*apx) {
      ap.seed = seed;
      ap.threads = g.threads;
      const auto result = appendix_validation(ap);
      result.write_csv(out_path(g, "comparison.csv"));
      result.write_mean_csv(out_path(g, "comparison_mean.csv"));
      for (const auto& f : result.failures) std::cerr << "warning: run failed: " << f << '\n';
    }
    write_manifest(app, g);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "error: runtime: " << msg << '\n';
    return 1;
  }
  return 0;
}
