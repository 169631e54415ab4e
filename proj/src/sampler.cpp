#include "sensflow/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "sensflow/metrics.hpp"
#include "sensflow/sensitivity.hpp"

namespace sensflow {

std::string to_string(Selection s) {
  switch (s) {
    case Selection::Gsa: return "gsa";
    case Selection::Oracle: return "oracle";
    case Selection::Random: return "random";
  }
  return "?";
}

std::string to_string(Acquisition a) {
  return a == Acquisition::MaxVariance ? "maxvar" : "random";
}

Selection parse_selection(std::string_view text) {
  if (text == "gsa") return Selection::Gsa;
  if (text == "oracle") return Selection::Oracle;
  if (text == "random") return Selection::Random;
  throw Error("unknown selection: " + std::string(text));
}

Acquisition parse_acquisition(std::string_view text) {
  if (text == "maxvar") return Acquisition::MaxVariance;
  if (text == "random") return Acquisition::Random;
  throw Error("unknown acquisition: " + std::string(text));
}

Method Method::from_number(int number) {
  if (number < 1 || number > 6) throw Error("method number must be 1..6");
  static constexpr Selection sel[] = {Selection::Gsa, Selection::Oracle, Selection::Random};
  const int i = number - 1;
  return Method{sel[i / 2], i % 2 == 0 ? Acquisition::MaxVariance : Acquisition::Random};
}

int Method::number() const {
  const int s = selection == Selection::Gsa ? 0 : selection == Selection::Oracle ? 1 : 2;
  return 2 * s + (acquisition == Acquisition::MaxVariance ? 1 : 2);
}

void FlowConfig::set_method(Method method) {
  selection = method.selection;
  acquisition = method.acquisition;
}

void FlowConfig::validate(std::size_t d_total) const {
  if (n0 < 1) throw Error("n0 must be >= 1");
  if (nf < n0) throw Error("nf must be >= n0");
  if (m < 1) throw Error("m must be >= 1");
  if (d < 1 || d > d_total) throw Error("d out of range");
  if (refit_period < 1) throw Error("refit_period must be >= 1");
  if (batch < 1) throw Error("batch must be >= 1");
  if (eval_every < 1) throw Error("eval_every must be >= 1");
  if (selection == Selection::Oracle) {
    if (oracle_indices.size() != d) throw Error("oracle method needs oracle_indices of length d");
  }
  std::vector<bool> seen(d_total, false);
  for (auto i : oracle_indices) {
    if (i >= d_total) throw Error("oracle index out of range");
    if (seen[i]) throw Error("duplicate oracle index");
    seen[i] = true;
  }
}

std::string FlowConfig::to_kv() const {
  std::ostringstream out;
  out << "n0=" << n0 << '\n'
      << "nf=" << nf << '\n'
      << "m=" << m << '\n'
      << "d=" << d << '\n'
      << "selection=" << to_string(selection) << '\n'
      << "acquisition=" << to_string(acquisition) << '\n'
      << "refit_period=" << refit_period << '\n'
      << "batch=" << batch << '\n'
      << "oracle_indices=" << join(oracle_indices, ',') << '\n'
      << "eval_every=" << eval_every << '\n'
      << "threads=" << threads << '\n'
      << "grid.variance_points=" << grid.variance_points << '\n'
      << "grid.lengthscale_points=" << grid.lengthscale_points << '\n'
      << "grid.variance_lo=" << format_double(grid.variance_lo) << '\n'
      << "grid.variance_hi=" << format_double(grid.variance_hi) << '\n'
      << "grid.lengthscale_lo=" << format_double(grid.lengthscale_lo) << '\n'
      << "grid.lengthscale_hi=" << format_double(grid.lengthscale_hi) << '\n'
      << "grid.refinements=" << grid.refinements << '\n'
      << "grid.nugget=" << format_double(grid.nugget) << '\n';
  return out.str();
}

FlowConfig FlowConfig::from_kv(std::string_view text) {
  FlowConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  auto to_size = [](const std::string& key, const std::string& v) -> std::size_t {
    try {
      std::size_t pos = 0;
      const auto out = std::stoull(v, &pos);
      if (pos != v.size()) throw Error("");
      return out;
    } catch (...) {
      throw Error("bad value for " + key + ": " + v);
    }
  };
  auto to_real = [](const std::string& key, const std::string& v) -> double {
    try {
      std::size_t pos = 0;
      const auto out = std::stod(v, &pos);
      if (pos != v.size()) throw Error("");
      return out;
    } catch (...) {
      throw Error("bad value for " + key + ": " + v);
    }
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("bad config line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string v = line.substr(eq + 1);
    if (key == "n0") c.n0 = to_size(key, v);
    else if (key == "nf") c.nf = to_size(key, v);
    else if (key == "m") c.m = to_size(key, v);
    else if (key == "d") c.d = to_size(key, v);
    else if (key == "selection") c.selection = parse_selection(v);
    else if (key == "acquisition") c.acquisition = parse_acquisition(v);
    else if (key == "method") c.set_method(Method::from_number(static_cast<int>(to_size(key, v))));
    else if (key == "refit_period") c.refit_period = to_size(key, v);
    else if (key == "batch") c.batch = to_size(key, v);
    else if (key == "oracle_indices") c.oracle_indices = parse_index_list(v);
    else if (key == "eval_every") c.eval_every = to_size(key, v);
    else if (key == "threads") c.threads = to_size(key, v);
    else if (key == "grid.variance_points") c.grid.variance_points = to_size(key, v);
    else if (key == "grid.lengthscale_points") c.grid.lengthscale_points = to_size(key, v);
    else if (key == "grid.variance_lo") c.grid.variance_lo = to_real(key, v);
    else if (key == "grid.variance_hi") c.grid.variance_hi = to_real(key, v);
    else if (key == "grid.lengthscale_lo") c.grid.lengthscale_lo = to_real(key, v);
    else if (key == "grid.lengthscale_hi") c.grid.lengthscale_hi = to_real(key, v);
    else if (key == "grid.refinements") c.grid.refinements = to_size(key, v);
    else if (key == "grid.nugget") c.grid.nugget = to_real(key, v);
    else throw Error("unknown config key: " + key);
  }
  return c;
}

std::vector<std::size_t> evaluation_budgets(std::size_t n0, std::size_t nf, std::size_t every) {
  if (every < 1) throw Error("eval_every must be >= 1");
  std::vector<std::size_t> out{n0};
  for (std::size_t n = (n0 / every + 1) * every; n < nf; n += every) out.push_back(n);
  if (nf != n0) out.push_back(nf);
  return out;
}

namespace {

std::string cell(double v) { return std::isnan(v) ? std::string() : format_double(v); }

std::string point_cell(const Eigen::VectorXd& p) {
  std::string out;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (i) out += ';';
    out += format_double(p(i));
  }
  return out;
}

}  // namespace

void RunTrace::write_csv(const std::filesystem::path& path, bool include_timing) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "N,selected,pool_index,point,y,score,batch_best,r2,signal_variance,lengthscale,lml";
  if (include_timing) out << ",wall_ms";
  out << '\n';
  for (const auto& r : records) {
    out << r.n << ',' << join(r.selected) << ','
        << (r.pool_index ? std::to_string(*r.pool_index) : std::string()) << ','
        << point_cell(r.point) << ',' << format_double(r.y) << ',' << cell(r.score) << ','
        << cell(r.batch_best) << ',' << cell(r.r2) << ',' << cell(r.signal_variance) << ','
        << cell(r.lengthscale) << ',' << cell(r.lml);
    if (include_timing) out << ',' << format_double(r.wall_ms);
    out << '\n';
  }
}

std::vector<std::size_t> top_indices(const Eigen::VectorXd& scores, std::size_t count) {
  std::vector<std::size_t> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  count = std::min(count, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores(a) > scores(b) || (scores(a) == scores(b) && a < b);
                    });
  order.resize(count);
  return order;
}

HyperparameterFit kernel_for(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const GridSpec& grid) {
  if (x.rows() >= 3) return fit_hyperparameters(x, y, grid);
  HyperparameterFit fit;
  fit.kernel = grid_center_kernel(x, grid);
  fit.lml = std::numeric_limits<double>::quiet_NaN();
  fit.degenerate = true;
  return fit;
}

OptimizedChoice optimized_sample(const SampleSet& train, std::span<const std::size_t> selected,
                                 std::size_t m, BlackBox& box, Rng& rng, const Kernel& kernel) {
  if (train.n() < 1) throw Error("optimized_sample needs a non-empty training set");
  if (selected.empty()) throw Error("optimized_sample needs selected features");
  if (m < 1) throw Error("m must be >= 1");

  const GpModel model = gp_fit(train.columns(selected), train.outputs(), kernel);
  OptimizedChoice out;
  out.candidates = box.propose(selected, m, rng);
  if (out.candidates.size() == 0) throw Error("pool exhausted");
  out.scores = model.variance(out.candidates.points);
  out.chosen = top_indices(out.scores, 1).front();
  return out;
}

OptimizedChoice optimized_sample(const SampleSet& train, std::span<const std::size_t> selected,
                                 std::size_t m, BlackBox& box, Rng& rng, const GridSpec& grid) {
  if (train.n() < 1) throw Error("optimized_sample needs a non-empty training set");
  const auto fit = kernel_for(train.columns(selected), train.outputs(), grid);
  return optimized_sample(train, selected, m, box, rng, fit.kernel);
}

Eigen::VectorXd concatenate(std::span<const double> selected_values,
                            std::span<const double> complement_values,
                            std::span<const std::size_t> selected_indices,
                            std::span<const std::size_t> complement_indices) {
  if (selected_values.size() != selected_indices.size() ||
      complement_values.size() != complement_indices.size()) {
    throw Error("value and index lists differ in length");
  }
  const std::size_t d_total = selected_indices.size() + complement_indices.size();
  std::vector<bool> seen(d_total, false);
  Eigen::VectorXd out(static_cast<Eigen::Index>(d_total));
  auto place = [&](std::span<const double> values, std::span<const std::size_t> idx) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= d_total || seen[idx[i]]) {
        throw Error("index lists must partition the coordinates");
      }
      seen[idx[i]] = true;
      out(static_cast<Eigen::Index>(idx[i])) = values[i];
    }
  };
  place(selected_values, selected_indices);
  place(complement_values, complement_indices);
  return out;
}

SampleSet initial_samples(BlackBox& box, std::size_t n0, Rng& rng) {
  SampleSet s = SampleSet::empty(box.feature_names());
  for (std::size_t i = 0; i < n0; ++i) {
    const auto draw = box.draw_random(rng);
    s.append(draw.x, draw.y);
  }
  return s;
}

double evaluate_r2(const SampleSet& train, std::span<const std::size_t> selected,
                   const SampleSet& test, const GridSpec& grid) {
  const Eigen::MatrixXd x = train.columns(selected);
  const auto fit = kernel_for(x, train.outputs(), grid);
  const GpModel model = gp_fit(x, train.outputs(), fit.kernel);
  const Eigen::VectorXd pred = model.mean(test.columns(selected));
  const auto& y = test.outputs();
  return r2_score(std::span<const double>(y.data(), test.n()),
                  std::span<const double>(pred.data(), test.n()));
}

namespace {

class Flow {
 public:
  Flow(const FlowConfig& config, BlackBox& box, const SampleSet& init, Seed seed,
       const SampleSet* test)
      : config_(config),
        box_(box),
        seed_(seed),
        test_(test),
        selection_rng_(seed, "selection"),
        acquisition_rng_(seed, "acquisition"),
        complement_rng_(seed, "complement") {
    config_.validate(box.dimension());
    if (init.n() != config_.n0) throw Error("initial set size must equal n0");
    if (init.d_total() != box.dimension()) throw Error("initial set dimension mismatch");
    trace_.seed = seed;
    trace_.config = config;
    trace_.samples = init;
    if (test_) {
      if (test_->d_total() != box.dimension()) throw Error("test set dimension mismatch");
      const auto b = evaluation_budgets(config_.n0, config_.nf, config_.eval_every);
      budgets_.assign(b.begin(), b.end());
    }
  }

  /// Runs until nf; acquisition is forced to Random while N < random_until.
  RunTrace run(std::size_t random_until) {
    selected_ = choose_selection(0);
    evaluate_if_due();
    for (std::size_t iter = 0; samples().n() < config_.nf; ++iter) {
      if (box_.remaining() == 0) {
        trace_.exhausted = true;
        break;
      }
      const bool refresh = iter % config_.refit_period == 0;
      if (refresh && iter > 0) {
        selected_ = choose_selection(iter);
        kernel_.reset();
      }
      const auto acquisition =
          samples().n() < random_until ? Acquisition::Random : config_.acquisition;
      const std::size_t count =
          std::min({config_.batch, config_.nf - samples().n(), box_.remaining()});
      if (acquisition == Acquisition::MaxVariance) {
        step_max_variance(count, refresh);
      } else {
        step_random(count);
      }
    }
    return std::move(trace_);
  }

 private:
  const SampleSet& samples() const { return trace_.samples; }

  std::vector<std::size_t> random_subset() {
    const std::size_t d_total = box_.dimension();
    std::vector<std::size_t> all(d_total);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < config_.d; ++i) {
      std::swap(all[i], all[i + selection_rng_.index(d_total - i)]);
    }
    all.resize(config_.d);
    std::sort(all.begin(), all.end());
    return all;
  }

  std::vector<std::size_t> choose_selection(std::size_t iter) {
    switch (config_.selection) {
      case Selection::Oracle: return config_.oracle_indices;
      case Selection::Random: return random_subset();
      case Selection::Gsa:
        // the rank estimate needs two rows; before that any subset is a guess
        if (samples().n() < 2) return random_subset();
        return select_features(samples(), config_.d, derive_seed(seed_, "gsa", iter),
                               config_.threads)
            .selected;
    }
    return {};
  }

  std::vector<std::size_t> evaluation_selection() const {
    if (config_.selection == Selection::Gsa && samples().n() >= 2) {
      return select_features(samples(), config_.d, derive_seed(seed_, "eval", samples().n()),
                             config_.threads)
          .selected;
    }
    return selected_;
  }

  std::optional<double> evaluate_if_due() {
    if (!test_ || !std::binary_search(budgets_.begin(), budgets_.end(), samples().n())) {
      return std::nullopt;
    }
    Evaluation e;
    e.n = samples().n();
    e.selected = evaluation_selection();
    e.r2 = evaluate_r2(samples(), e.selected, *test_, config_.grid);
    trace_.evaluations.push_back(e);
    return e.r2;
  }

  void add(const Draw& draw, IterationRecord record,
           std::chrono::steady_clock::time_point start) {
    trace_.samples.append(draw.x, draw.y);
    record.n = samples().n();
    record.selected = selected_;
    record.pool_index = draw.pool_index;
    record.point.resize(static_cast<Eigen::Index>(selected_.size()));
    for (std::size_t j = 0; j < selected_.size(); ++j) record.point(j) = draw.x(selected_[j]);
    record.y = draw.y;
    if (auto r2 = evaluate_if_due()) record.r2 = *r2;
    record.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    trace_.records.push_back(std::move(record));
  }

  void step_max_variance(std::size_t count, bool refresh) {
    const auto start = std::chrono::steady_clock::now();
    const Eigen::MatrixXd x = samples().columns(selected_);
    if (refresh || !kernel_) kernel_ = kernel_for(x, samples().outputs(), config_.grid);

    const auto choice =
        optimized_sample(samples(), selected_, config_.m, box_, acquisition_rng_, kernel_->kernel);
    const double best = choice.scores.maxCoeff();
    const auto picks = top_indices(choice.scores, count);
    for (auto pick : picks) {
      const Draw draw = box_.realize(choice.candidates, pick, selected_, complement_rng_);
      IterationRecord r;
      r.score = choice.scores(static_cast<Eigen::Index>(pick));
      r.batch_best = best;
      r.signal_variance = kernel_->kernel.signal_variance;
      r.lengthscale = kernel_->kernel.lengthscales.front();
      r.lml = kernel_->lml;
      add(draw, std::move(r), start);
    }
  }

  void step_random(std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto start = std::chrono::steady_clock::now();
      const Draw draw = box_.draw_random(acquisition_rng_);
      add(draw, IterationRecord{}, start);
    }
  }

  FlowConfig config_;
  BlackBox& box_;
  Seed seed_;
  const SampleSet* test_;
  Rng selection_rng_;
  Rng acquisition_rng_;
  Rng complement_rng_;
  std::vector<std::size_t> budgets_;
  std::vector<std::size_t> selected_;
  std::optional<HyperparameterFit> kernel_;
  RunTrace trace_;
};

}  // namespace

RunTrace run_active_flow(const FlowConfig& config, BlackBox& box, const SampleSet& init,
                         Seed seed, const SampleSet* test) {
  return Flow(config, box, init, seed, test).run(0);
}

RunTrace run_hybrid_flow(const FlowConfig& config, std::size_t n1, BlackBox& box,
                         const SampleSet& init, Seed seed, const SampleSet* test) {
  if (n1 < config.n0 || n1 > config.nf) throw Error("n1 must lie in [n0, nf]");
  return Flow(config, box, init, seed, test).run(n1);
}

}  // namespace sensflow
