#include "blockcv/harness.hpp"

#include "blockcv/errors.hpp"

#include <fmt/format.h>

#include <atomic>
#include <chrono>
#include <ctime>
#include <mutex>
#include <numeric>
#include <thread>

#ifndef BLOCKCV_VERSION
#define BLOCKCV_VERSION "0.0.0"
#endif

namespace blockcv {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ModelSpec dgp_model(const ExperimentConfig& config, const DgpSpec& d) {
  ModelSpec m;
  m.name = "dgp";
  m.family = d.family;
  m.scheme = d.scheme;
  m.order = d.order;
  m.standardized = d.standardized;
  m.kernel = d.kernel;
  if (d.family != Family::kernel) {
    m.columns.resize(static_cast<std::size_t>(config.covariates));
    std::iota(m.columns.begin(), m.columns.end(), 0);
  }
  return m;
}

Eigen::VectorXd dgp_params(const DgpSpec& d) {
  if (d.family == Family::kernel)
    return Eigen::Vector2d(d.lambda, d.sigma);
  Eigen::VectorXd p(d.beta.size() + 2);
  p << d.beta, d.rho, d.sigma2;
  return p;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Read-only state shared by all tasks of one scenario.
struct ScenarioContext {
  const Scenario* scenario = nullptr;
  ModelStructure dgp;
  ModelStructure a;
  ModelStructure b;
  std::vector<FoldPlan> plans;
};

struct TaskOutput {
  std::vector<SelectionRecord> records; // one per design
  std::vector<FoldRecord> folds;
};

TaskOutput run_task(const ExperimentConfig& config, const ScenarioContext& ctx,
                    std::size_t scenario_index, int rep) {
  TaskOutput out;
  const Eigen::MatrixXd x = draw_covariates(config, rep);
  Stream data = derive_stream(config.seed, static_cast<std::uint64_t>(rep), StreamPurpose::data);
  const Eigen::VectorXd y =
      simulate(model_density(ctx.dgp, dgp_params(ctx.scenario->dgp), ctx.dgp.select_columns(x)),
               data);

  const std::array<const ModelStructure*, 2> models{&ctx.a, &ctx.b};
  for (std::size_t d = 0; d < ctx.plans.size(); ++d) {
    const FoldPlan& plan = ctx.plans[d];
    SelectionRecord rec;
    rec.replication = rep;
    rec.scenario = scenario_index;
    rec.design = d;
    std::array<std::vector<FoldScore>, 2> scores;
    for (std::size_t k = 0; k < plan.size(); ++k) {
      const Fold& fold = plan[k];
      Eigen::VectorXd y_test(static_cast<Index>(fold.test.size()));
      for (std::size_t i = 0; i < fold.test.size(); ++i)
        y_test(static_cast<Index>(i)) = y(fold.test[i]);
      for (int m = 0; m < 2; ++m) {
        const ModelStructure& model = *models[static_cast<std::size_t>(m)];
        FoldRecord fr;
        fr.replication = rep;
        fr.scenario = scenario_index;
        fr.design = d;
        fr.model = m;
        const int fold_id = static_cast<int>(k);
        try {
          const JointObjective obj(model, fold, y, x);
          std::uint64_t lane = mix64(scenario_index);
          lane = mix64(lane ^ d);
          lane = mix64(lane ^ k);
          lane = mix64(lane ^ fnv1a(model.spec().name));
          Stream retry =
              derive_stream(config.seed, static_cast<std::uint64_t>(rep), StreamPurpose::retry, lane);
          const LaplaceResult fit = fit_fold(obj, config.laplace, &retry);
          fr.converged = fit.converged;
          fr.attempts = fit.attempts;
          fr.iterations = fit.iterations;
          fr.gradient_norm = fit.gradient_norm;
          fr.score = score_fold(predictive_block(fit), y_test, fold_id);
        } catch (const std::exception& e) {
          fr.score = failed_fold(fold_id, static_cast<Index>(fold.test.size()));
          fr.error = e.what();
          if (!rec.failed) {
            rec.failed = true;
            rec.failure = fmt::format("fold {} model {}: {}", k, model.spec().name, e.what());
          }
        }
        scores[static_cast<std::size_t>(m)].push_back(fr.score);
        out.folds.push_back(std::move(fr));
      }
    }
    if (!rec.failed) {
      for (ScoreMode mode : score_modes) {
        const auto i = static_cast<std::size_t>(mode);
        rec.elpd_a[i] = elpd_cv(scores[0], mode);
        rec.elpd_b[i] = elpd_cv(scores[1], mode);
        rec.stat[i] = pairwise_stat(rec.elpd_a[i], rec.elpd_b[i]);
        std::vector<double> deltas(plan.size());
        for (std::size_t k = 0; k < plan.size(); ++k)
          deltas[k] = scores[0][k].get(mode) - scores[1][k].get(mode);
        try {
          rec.z_hat[i] = sample_z(deltas);
        } catch (const UndefinedStatisticError&) {
        }
      }
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rec.elpd_a.fill(nan);
      rec.elpd_b.fill(nan);
      rec.stat.fill(nan);
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

} // namespace

std::string_view library_version() { return BLOCKCV_VERSION; }

Eigen::MatrixXd draw_covariates(const ExperimentConfig& config, int replication) {
  const Index n = static_cast<Index>(config.rows) * config.cols;
  Eigen::MatrixXd x(n, config.covariates);
  if (config.covariates == 0)
    return x;
  Stream rng = derive_stream(config.seed, static_cast<std::uint64_t>(replication),
                             StreamPurpose::covariates);
  std::normal_distribution<double> normal(0.0, 1.0);
  x.col(0).setOnes();
  for (Index j = 1; j < x.cols(); ++j)
    for (Index i = 0; i < n; ++i)
      x(i, j) = normal(rng);
  return x;
}

ReplicationArtifact draw_replication(const ExperimentConfig& config, const Scenario& scenario,
                                     int replication) {
  ReplicationArtifact art;
  art.replication = replication;
  art.x = draw_covariates(config, replication);
  Stream data =
      derive_stream(config.seed, static_cast<std::uint64_t>(replication), StreamPurpose::data);
  art.data_seed = Stream(data)();
  const Lattice lattice(config.rows, config.cols);
  const ModelStructure dgp(lattice, dgp_model(config, scenario.dgp));
  art.y = simulate(model_density(dgp, dgp_params(scenario.dgp), dgp.select_columns(art.x)), data);
  return art;
}

std::vector<std::string> design_labels(const ExperimentConfig& config) {
  std::vector<std::string> labels;
  if (config.scenarios.empty())
    return labels;
  for (const DesignSpec& d : design_cells(config, config.scenarios.front()))
    labels.push_back(describe(d));
  return labels;
}

std::vector<CellSummary> summarize_records(const ExperimentConfig& config,
                                           std::size_t design_count,
                                           const std::vector<SelectionRecord>& records) {
  std::vector<CellSummary> cells;
  for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
    for (std::size_t d = 0; d < design_count; ++d) {
      // Records arrive sorted by replication within a cell; sum order is fixed.
      std::vector<const SelectionRecord*> cell;
      for (const SelectionRecord& r : records)
        if (r.scenario == s && r.design == d)
          cell.push_back(&r);
      std::sort(cell.begin(), cell.end(), [](const auto* l, const auto* r) {
        return l->replication < r->replication;
      });
      for (ScoreMode mode : score_modes) {
        CellSummary c;
        c.scenario = s;
        c.design = d;
        c.mode = mode;
        std::vector<double> stats;
        for (const SelectionRecord* r : cell) {
          if (r->failed)
            ++c.failures;
          else
            stats.push_back(r->get(mode));
        }
        if (stats.size() >= 2) {
          try {
            c.summary = population_summary(stats, config.trim, mode);
          } catch (const std::invalid_argument&) {
            // trimming left too few statistics; the cell stays undefined
          }
        }
        cells.push_back(std::move(c));
      }
    }
  }
  return cells;
}

ResultSet run_experiment(const ExperimentConfig& config, int parallelism,
                         const Progress& progress) {
  if (const auto errs = validate(config); !errs.empty()) {
    std::string msg = "invalid experiment config:";
    for (const auto& e : errs)
      msg += "\n  " + e;
    throw ConfigError(msg);
  }
  const auto t0 = std::chrono::steady_clock::now();
  ResultSet rs;
  rs.config = config;
  rs.runtime.started = utc_now();
  rs.runtime.parallelism = std::max(1, parallelism);
  rs.runtime.version = std::string(library_version());
  rs.design_labels = design_labels(config);

  const Lattice lattice(config.rows, config.cols);
  std::vector<ScenarioContext> contexts;
  contexts.reserve(config.scenarios.size());
  for (const Scenario& s : config.scenarios) {
    ScenarioContext ctx{&s, ModelStructure(lattice, dgp_model(config, s.dgp)),
                        ModelStructure(lattice, s.a), ModelStructure(lattice, s.b), {}};
    const auto cells = design_cells(config, s);
    for (std::size_t d = 0; d < cells.size(); ++d) {
      // Clustered plans depend on the design index only, so every replication
      // and scenario with the same halo scheme sees the same folds.
      Stream rng = derive_stream(config.seed, 0, StreamPurpose::folds, d);
      ctx.plans.push_back(build_plan(lattice, cells[d], rng));
    }
    contexts.push_back(std::move(ctx));
  }

  const std::size_t n_rep = static_cast<std::size_t>(config.replications);
  const std::size_t n_tasks = contexts.size() * n_rep;
  std::vector<TaskOutput> outputs(n_tasks);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= n_tasks)
        return;
      const std::size_t s = t / n_rep;
      const int rep = static_cast<int>(t % n_rep);
      try {
        outputs[t] = run_task(config, contexts[s], s, rep);
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal)
          fatal = std::current_exception();
      }
      const std::size_t finished = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(finished, n_tasks);
      }
    }
  };
  const int threads = static_cast<int>(std::min<std::size_t>(
      static_cast<std::size_t>(rs.runtime.parallelism), std::max<std::size_t>(n_tasks, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i)
      pool.emplace_back(worker);
    for (auto& th : pool)
      th.join();
  }
  if (fatal)
    std::rethrow_exception(fatal);

  // Tasks are indexed (scenario, replication); emit records sorted by
  // (scenario, design, replication).
  const std::size_t n_design = rs.design_labels.size();
  for (std::size_t s = 0; s < contexts.size(); ++s)
    for (std::size_t d = 0; d < n_design; ++d)
      for (std::size_t r = 0; r < n_rep; ++r)
        rs.records.push_back(outputs[s * n_rep + r].records[d]);
  for (TaskOutput& o : outputs)
    for (FoldRecord& f : o.folds)
      rs.folds.push_back(std::move(f));

  for (const SelectionRecord& r : rs.records)
    rs.failed_records += r.failed ? 1 : 0;
  rs.failure_rate = rs.records.empty() ? 0.0
                                       : static_cast<double>(rs.failed_records) /
                                             static_cast<double>(rs.records.size());
  rs.failure_exceeded = rs.failure_rate > config.max_failure_rate;
  rs.cells = summarize_records(config, n_design, rs.records);
  rs.runtime.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rs;
}

} // namespace blockcv
