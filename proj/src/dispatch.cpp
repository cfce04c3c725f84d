#include "sgdlab/dispatch.hpp"

#include "sgdlab/discrete_chains.hpp"
#include "sgdlab/errors.hpp"
#include "sgdlab/grid.hpp"
#include "sgdlab/parallel.hpp"
#include "sgdlab/weak_error_harness.hpp"

#include "json.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace sgdlab {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Write to a sibling temporary and rename, so a crashed run never leaves a
// truncated report behind.
void write_file(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << contents;
    if (!out) {
      throw Error("cli: cannot write " + path.string());
    }
  }
  fs::rename(tmp, path);
}

template <typename Writer>
void write_with(const fs::path& path, Writer&& writer) {
  std::ostringstream out;
  writer(out);
  write_file(path, out.str());
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string trajectory_name(Index t) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "trajectory-%04lld.csv", static_cast<long long>(t));
  return buf;
}

ChainConfig chain_config(const RunConfig& c) {
  ChainConfig chain;
  chain.step_size = c.chain.eta;
  chain.steps = c.chain.steps;
  chain.seed = c.seed;
  chain.initial_state = Eigen::Map<const Vector>(c.chain.start.data(), static_cast<Index>(c.chain.start.size()));
  chain.validate();
  return chain;
}

template <typename Model, typename Score>
int run_chains(const RunConfig& c, const Model& model, const fs::path& out, int jobs, std::ostream& summary,
               const char* label, const char* score_name, Score&& score) {
  const ChainConfig chain = chain_config(c);
  const Index count = c.chain.trajectories;
  std::vector<Trajectory> paths(static_cast<std::size_t>(count));
  parallel_for(count, jobs, [&](Index t) {
    paths[static_cast<std::size_t>(t)] = run_chain(chain, model, static_cast<std::uint64_t>(t));
  });
  double mean = 0.0;
  json finals = json::array();
  for (Index t = 0; t < count; ++t) {
    const Trajectory& path = paths[static_cast<std::size_t>(t)];
    write_with(out / trajectory_name(t), [&](std::ostream& o) { write_trajectory_csv(o, path); });
    const double s = score(path.back());
    mean += s / static_cast<double>(count);
    finals.push_back(s);
  }
  const json report = {{"experiment", label},
                       {"eta", c.chain.eta},
                       {"steps", c.chain.steps},
                       {"trajectories", count},
                       {"score", score_name},
                       {"final_scores", finals},
                       {"mean_final_score", mean}};
  write_file(out / "summary.json", report.dump(2) + "\n");
  summary << label << ": " << count << " trajectories x " << c.chain.steps << " steps at eta " << fmt(c.chain.eta)
          << ", mean final " << score_name << " " << fmt(mean, "%.10g") << "\n";
  return 0;
}

int weak_order(const RunConfig& c, const fs::path& out, int jobs, std::ostream& summary) {
  const WeakErrorReport report = run_weak_error(make_plan(c), jobs);
  write_with(out / "report.json", [&](std::ostream& o) { write_json(o, report); });
  write_with(out / "report.txt", [&](std::ostream& o) { write_text(o, report); });
  write_with(out / "errors.csv", [&](std::ostream& o) { write_csv(o, report); });
  summary << "weak-order: " << to_string(report.space) << " order " << report.order;
  if (report.fit) {
    summary << " slope " << fmt(report.fit->slope, "%.4f") << " (95% CI [" << fmt(report.fit->ci_low, "%.3f") << ", "
            << fmt(report.fit->ci_high, "%.3f") << "], residual " << fmt(report.fit->residual, "%.3g") << ")";
  } else {
    summary << " slope unavailable (too few points above the error floor)";
  }
  summary << "\n";
  return 0;
}

int taylor(const RunConfig& c, const fs::path& out, std::ostream& summary) {
  const std::vector<TaylorCase> cases = taylor_study(c.taylor.dimensions, c.taylor.pairs, c.taylor.ladder, c.seed);
  write_with(out / "report.json", [&](std::ostream& o) { write_json(o, cases); });
  write_with(out / "remainders.csv", [&](std::ostream& o) { write_csv(o, cases); });
  double lo = INFINITY, hi = -INFINITY, radial = 0.0;
  for (const TaylorCase& tc : cases) {
    for (std::size_t i = 1; i < tc.rows.size(); ++i) {
      if (!tc.radial) {
        lo = std::min(lo, tc.rows[i].ratio);
        hi = std::max(hi, tc.rows[i].ratio);
      }
    }
    for (const DecayRow& r : tc.rows) {
      if (tc.radial) {
        radial = std::max(radial, r.remainder);
      }
    }
  }
  summary << "taylor-study: " << cases.size() << " cases, decay ratios in [" << fmt(lo, "%.3f") << ", "
          << fmt(hi, "%.3f") << "], largest radial remainder " << fmt(radial, "%.3g") << "\n";
  return 0;
}

int suite(const RunConfig& c, const fs::path& out, int jobs, std::ostream& summary) {
  const SuiteReport report = contraction_and_confinement_suite(make_suite_settings(c), jobs);
  write_with(out / "report.json", [&](std::ostream& o) { write_json(o, report); });
  write_with(out / "report.txt", [&](std::ostream& o) { write_text(o, report); });
  Index failed = 0, outside = 0;
  for (const SuiteRow& row : report.rows) {
    outside += row.within_hypotheses ? 0 : 1;
    failed += row.within_hypotheses && !row.passed ? 1 : 0;
  }
  summary << "invariant-suite: " << report.rows.size() - static_cast<std::size_t>(failed) << "/" << report.rows.size()
          << " rows passed";
  if (outside > 0) {
    summary << "; " << outside << " outside hypotheses (not a failure)";
  }
  summary << "\n";
  return report.passed() ? 0 : 2;
}

int density(const RunConfig& c, const fs::path& out, std::ostream& summary) {
  const LossProblemPtr problem = make_problem(c.problem);
  const DensityConfig& d = c.density;
  const Grid grid = Grid::interval(d.lower, d.upper, d.cells);
  const GridFunction raw = GridFunction::sample(grid, [&](double x) {
    const double z = (x - d.mean) / d.width;
    return std::exp(-0.5 * z * z);
  });
  std::vector<DensityGrid> history{DensityGrid(GridFunction(grid, raw.values() / trapezoid(raw)))};
  double clamped = 0.0;
  for (Index n = 0; n < d.steps; ++n) {
    history.push_back(pushforward_density_1d(history.back(), *problem, d.eta));
    clamped += history.back().clamped_mass();
  }
  write_with(out / "densities.csv", [&](std::ostream& o) {
    o << "x";
    for (std::size_t n = 0; n < history.size(); ++n) {
      o << ",step" << n;
    }
    o << "\n";
    for (Index i = 0; i < grid.size(); ++i) {
      o << fmt(grid.node(i), "%.17g");
      for (const DensityGrid& rho : history) {
        o << ',' << fmt(rho.values()(i), "%.17g");
      }
      o << "\n";
    }
  });
  json masses = json::array();
  for (const DensityGrid& rho : history) {
    masses.push_back(rho.mass());
  }
  const json report = {{"experiment", "density-push"},
                       {"eta", d.eta},
                       {"steps", d.steps},
                       {"masses", masses},
                       {"total_clamped_mass", clamped}};
  write_file(out / "summary.json", report.dump(2) + "\n");
  summary << "density-push: " << d.steps << " steps at eta " << fmt(d.eta) << ", mass "
          << fmt(history.front().mass(), "%.12g") << " -> " << fmt(history.back().mass(), "%.12g")
          << ", clamped mass " << fmt(clamped, "%.3g") << "\n";
  return 0;
}

}  // namespace

int dispatch(const RunConfig& config, const fs::path& out_dir, int jobs, std::ostream& summary) {
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  RunConfig resolved = config;
  resolved.output = out_dir.string();
  write_file(out_dir / "resolved-config.json", emit_config(resolved));

  int status = 0;
  const std::string& sub = config.subcommand;
  if (sub == "sgd-run") {
    const LossProblemPtr problem = make_problem(config.problem);
    status = run_chains(config, *problem, out_dir, jobs, summary, "sgd-run", "loss",
                        [&](const Vector& x) { return mean_loss(*problem, x); });
  } else if (sub == "pca-run") {
    const DataModelPtr model = make_model(config.model);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(model->covariance());
    const Vector top = eig.eigenvectors().col(model->dimension() - 1);
    status = run_chains(config, *model, out_dir, jobs, summary, "pca-run", "alignment",
                        [&](const Vector& w) { return std::abs(w.dot(top)); });
  } else if (sub == "weak-order") {
    status = weak_order(config, out_dir, jobs, summary);
  } else if (sub == "taylor-study") {
    status = taylor(config, out_dir, summary);
  } else if (sub == "invariant-suite") {
    status = suite(config, out_dir, jobs, summary);
  } else if (sub == "density-push") {
    status = density(config, out_dir, summary);
  } else {
    throw ConfigError("cli: unknown subcommand '" + sub + "'");
  }

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const json runtime = {{"runtime_seconds", seconds}, {"jobs", jobs}, {"exit_status", status}};
  write_file(out_dir / "runtime.json", runtime.dump(2) + "\n");
  return status;
}

}  // namespace sgdlab
