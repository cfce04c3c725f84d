#include "sgdlab/config.hpp"

#include "sgdlab/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

namespace sgdlab {
namespace {

using json = nlohmann::ordered_json;

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    std::string msg = "config: key '" + path + "': " + what;
    const std::size_t dot = path.find_last_of('.');
    std::string key = dot == std::string::npos ? path : path.substr(dot + 1);
    key = key.substr(0, key.find('['));
    const std::size_t at = text_.find("\"" + key + "\"");
    if (at != std::string::npos) {
      msg += " (line " + std::to_string(1 + std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(at), '\n')) + ")";
    }
    throw ConfigError(msg);
  }

  void allow(const json& obj, const std::string& path, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) {
      fail(path, "expected an object");
    }
    for (const auto& item : obj.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; })) {
        fail(join(path, item.key()), "unknown key");
      }
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  double number(const json& v, const std::string& path) const {
    if (!v.is_number()) {
      fail(path, "expected a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
      fail(path, "expected a finite number");
    }
    return x;
  }

  Index integer(const json& v, const std::string& path) const {
    if (!v.is_number_integer()) {
      fail(path, "expected an integer");
    }
    return v.get<Index>();
  }

  std::string string(const json& v, const std::string& path) const {
    if (!v.is_string()) {
      fail(path, "expected a string");
    }
    return v.get<std::string>();
  }

  std::vector<double> numbers(const json& v, const std::string& path) const {
    if (!v.is_array()) {
      fail(path, "expected an array of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  // Rows given either as numbers (one-dimensional points) or as arrays.
  std::vector<std::vector<double>> rows(const json& v, const std::string& path) const {
    if (!v.is_array() || v.empty()) {
      fail(path, "expected a non-empty array");
    }
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      out.push_back(v[i].is_array() ? numbers(v[i], p) : std::vector<double>{number(v[i], p)});
    }
    return out;
  }

  template <typename T, typename Convert>
  void read(const json& obj, const std::string& path, const char* key, T& out, Convert convert) const {
    if (obj.contains(key)) {
      out = (this->*convert)(obj.at(key), join(path, key));
    }
  }

 private:
  const std::string& text_;
};

void require(bool ok, const Reader& r, const std::string& path, const std::string& what) {
  if (!ok) {
    r.fail(path, what);
  }
}

void require_one_of(const std::string& value, std::initializer_list<const char*> options, const Reader& r,
                    const std::string& path) {
  if (std::none_of(options.begin(), options.end(), [&](const char* o) { return value == o; })) {
    std::string list;
    for (const char* o : options) {
      list += list.empty() ? o : std::string(", ") + o;
    }
    r.fail(path, "'" + value + "' is not one of " + list);
  }
}

void read_problem(const Reader& r, const json& j, ProblemConfig& c) {
  const std::string p = "problem";
  r.allow(j, p, {"family", "centers", "curvatures", "tilts", "scale", "weights"});
  r.read(j, p, "family", c.family, &Reader::string);
  r.read(j, p, "centers", c.centers, &Reader::rows);
  r.read(j, p, "curvatures", c.curvatures, &Reader::numbers);
  r.read(j, p, "tilts", c.tilts, &Reader::numbers);
  r.read(j, p, "scale", c.scale, &Reader::number);
  r.read(j, p, "weights", c.weights, &Reader::numbers);
}

void read_model(const Reader& r, const json& j, ModelConfig& c) {
  const std::string p = "model";
  r.allow(j, p, {"atoms", "probabilities"});
  r.read(j, p, "atoms", c.atoms, &Reader::rows);
  r.read(j, p, "probabilities", c.probabilities, &Reader::numbers);
}

void read_plan(const Reader& r, const json& j, PlanConfig& c) {
  const std::string p = "plan";
  r.allow(j, p,
          {"space", "order", "ladder", "horizon", "test_function", "evaluation", "grid_nodes", "lower", "upper",
           "window_fraction", "samples", "substep_fraction", "start", "noise", "correction_weight"});
  r.read(j, p, "space", c.space, &Reader::string);
  Index order = c.order;
  r.read(j, p, "order", order, &Reader::integer);
  c.order = static_cast<int>(order);
  r.read(j, p, "ladder", c.ladder, &Reader::numbers);
  r.read(j, p, "horizon", c.horizon, &Reader::number);
  r.read(j, p, "test_function", c.test_function, &Reader::string);
  r.read(j, p, "evaluation", c.evaluation, &Reader::string);
  r.read(j, p, "grid_nodes", c.grid_nodes, &Reader::integer);
  r.read(j, p, "lower", c.lower, &Reader::number);
  r.read(j, p, "upper", c.upper, &Reader::number);
  r.read(j, p, "window_fraction", c.window_fraction, &Reader::number);
  r.read(j, p, "samples", c.samples, &Reader::integer);
  r.read(j, p, "substep_fraction", c.substep_fraction, &Reader::number);
  r.read(j, p, "start", c.start, &Reader::numbers);
  r.read(j, p, "noise", c.noise, &Reader::string);
  r.read(j, p, "correction_weight", c.correction_weight, &Reader::number);
}

void read_chain(const Reader& r, const json& j, ChainRunConfig& c) {
  const std::string p = "chain";
  r.allow(j, p, {"eta", "steps", "trajectories", "start"});
  r.read(j, p, "eta", c.eta, &Reader::number);
  r.read(j, p, "steps", c.steps, &Reader::integer);
  r.read(j, p, "trajectories", c.trajectories, &Reader::integer);
  r.read(j, p, "start", c.start, &Reader::numbers);
}

void read_taylor(const Reader& r, const json& j, TaylorConfig& c) {
  const std::string p = "taylor";
  r.allow(j, p, {"dimensions", "pairs", "ladder"});
  if (j.contains("dimensions")) {
    const json& v = j.at("dimensions");
    if (!v.is_array()) {
      r.fail("taylor.dimensions", "expected an array of integers");
    }
    c.dimensions.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      c.dimensions.push_back(r.integer(v[i], "taylor.dimensions[" + std::to_string(i) + "]"));
    }
  }
  r.read(j, p, "pairs", c.pairs, &Reader::integer);
  r.read(j, p, "ladder", c.ladder, &Reader::numbers);
}

void read_suite(const Reader& r, const json& j, SuiteConfig& c) {
  const std::string p = "suite";
  r.allow(j, p,
          {"eta", "horizon", "random_functions", "speed_steps", "radius", "confinement_eta", "trajectories",
           "confinement_steps", "density_eta"});
  r.read(j, p, "eta", c.eta, &Reader::number);
  r.read(j, p, "horizon", c.horizon, &Reader::number);
  r.read(j, p, "random_functions", c.random_functions, &Reader::integer);
  r.read(j, p, "speed_steps", c.speed_steps, &Reader::integer);
  r.read(j, p, "radius", c.radius, &Reader::number);
  r.read(j, p, "confinement_eta", c.confinement_eta, &Reader::number);
  r.read(j, p, "trajectories", c.trajectories, &Reader::integer);
  r.read(j, p, "confinement_steps", c.confinement_steps, &Reader::integer);
  r.read(j, p, "density_eta", c.density_eta, &Reader::number);
}

void read_density(const Reader& r, const json& j, DensityConfig& c) {
  const std::string p = "density";
  r.allow(j, p, {"eta", "steps", "lower", "upper", "cells", "mean", "width"});
  r.read(j, p, "eta", c.eta, &Reader::number);
  r.read(j, p, "steps", c.steps, &Reader::integer);
  r.read(j, p, "lower", c.lower, &Reader::number);
  r.read(j, p, "upper", c.upper, &Reader::number);
  r.read(j, p, "cells", c.cells, &Reader::integer);
  r.read(j, p, "mean", c.mean, &Reader::number);
  r.read(j, p, "width", c.width, &Reader::number);
}

void require_positive(const Reader& r, double v, const std::string& path) {
  require(v > 0.0, r, path, "must be positive");
}

void validate(const Reader& r, RunConfig& c) {
  require_one_of(c.subcommand, {"sgd-run", "pca-run", "weak-order", "taylor-study", "invariant-suite", "density-push"},
                 r, "subcommand");

  // Problem and model are always validated, so a resolved config is usable
  // for every subcommand.
  require_one_of(c.problem.family, {"quadratic", "double_well", "confining"}, r, "problem.family");
  LossProblemPtr problem;
  try {
    problem = make_problem(c.problem);
  } catch (const Error& e) {
    r.fail("problem", e.what());
  }
  DataModelPtr model;
  try {
    model = make_model(c.model);
  } catch (const Error& e) {
    r.fail("model", e.what());
  }

  PlanConfig& p = c.plan;
  require_one_of(p.space, {"line", "circle"}, r, "plan.space");
  require(p.order == 1 || p.order == 2, r, "plan.order", "must be 1 or 2");
  require(p.ladder.size() >= 4, r, "plan.ladder", "needs at least 4 step sizes");
  for (std::size_t i = 0; i < p.ladder.size(); ++i) {
    require_positive(r, p.ladder[i], "plan.ladder[" + std::to_string(i) + "]");
  }
  require_positive(r, p.horizon, "plan.horizon");
  require_one_of(p.evaluation, {"grid", "monte_carlo"}, r, "plan.evaluation");
  require_one_of(p.noise, {"variance", "none"}, r, "plan.noise");
  const bool line = p.space == "line";
  if (p.test_function.empty()) {
    p.test_function = line ? "gaussian" : "harmonic";
  }
  const std::vector<std::string> names = test_function_names(line ? Space::Line : Space::Circle);
  require(std::find(names.begin(), names.end(), p.test_function) != names.end(), r, "plan.test_function",
          "'" + p.test_function + "' is not a test function for the " + p.space);
  if (p.grid_nodes == 0) {
    p.grid_nodes = line ? 4096 : 2048;
  }
  require(p.grid_nodes >= kMinGridCells, r, "plan.grid_nodes", "must be at least " + std::to_string(kMinGridCells));
  require(p.upper > p.lower, r, "plan.upper", "must exceed plan.lower");
  require(p.window_fraction > 0.0 && p.window_fraction <= 1.0, r, "plan.window_fraction", "must lie in (0, 1]");
  require(p.samples >= 2, r, "plan.samples", "must be at least 2");
  require(p.substep_fraction > 0.0 && p.substep_fraction <= 0.05, r, "plan.substep_fraction",
          "must lie in (0, 0.05]");
  const Index plan_dim = line ? problem->dimension() : model->dimension();
  if (p.start.empty()) {
    p.start.assign(static_cast<std::size_t>(plan_dim), line ? 0.5 : 0.0);
    if (!line) {
      p.start[0] = 1.0;
    }
  }
  require(static_cast<Index>(p.start.size()) == plan_dim, r, "plan.start",
          "must have dimension " + std::to_string(plan_dim));
  require(std::isfinite(p.correction_weight), r, "plan.correction_weight", "must be finite");

  ChainRunConfig& ch = c.chain;
  require_positive(r, ch.eta, "chain.eta");
  require(ch.steps >= 0, r, "chain.steps", "must be nonnegative");
  require(ch.trajectories >= 1, r, "chain.trajectories", "must be at least 1");
  const bool sphere_chain = c.subcommand == "pca-run";
  const Index chain_dim = sphere_chain ? model->dimension() : problem->dimension();
  if (ch.start.empty()) {
    ch.start.assign(static_cast<std::size_t>(chain_dim), sphere_chain ? 0.0 : 0.5);
    if (sphere_chain) {
      ch.start[0] = 1.0;
    }
  }
  require(static_cast<Index>(ch.start.size()) == chain_dim, r, "chain.start",
          "must have dimension " + std::to_string(chain_dim));

  TaylorConfig& t = c.taylor;
  require(!t.dimensions.empty(), r, "taylor.dimensions", "must not be empty");
  for (Index d : t.dimensions) {
    require(d >= 2, r, "taylor.dimensions", "sphere dimensions must be at least 2");
  }
  require(t.pairs >= 1, r, "taylor.pairs", "must be at least 1");
  require(t.ladder.size() >= 2, r, "taylor.ladder", "needs at least 2 step sizes");
  for (std::size_t i = 0; i < t.ladder.size(); ++i) {
    require_positive(r, t.ladder[i], "taylor.ladder[" + std::to_string(i) + "]");
  }

  SuiteConfig& s = c.suite;
  require_positive(r, s.eta, "suite.eta");
  require_positive(r, s.horizon, "suite.horizon");
  require(s.random_functions >= 1, r, "suite.random_functions", "must be at least 1");
  require(s.speed_steps >= 1 && s.speed_steps <= 16, r, "suite.speed_steps", "must lie in [1, 16]");
  require_positive(r, s.radius, "suite.radius");
  require_positive(r, s.confinement_eta, "suite.confinement_eta");
  require(s.trajectories >= 1, r, "suite.trajectories", "must be at least 1");
  require(s.confinement_steps >= 1, r, "suite.confinement_steps", "must be at least 1");
  require_positive(r, s.density_eta, "suite.density_eta");

  DensityConfig& d = c.density;
  require_positive(r, d.eta, "density.eta");
  require(d.steps >= 0, r, "density.steps", "must be nonnegative");
  require(d.upper > d.lower, r, "density.upper", "must exceed density.lower");
  require(d.cells >= kMinGridCells, r, "density.cells", "must be at least " + std::to_string(kMinGridCells));
  require_positive(r, d.width, "density.width");
  if (c.subcommand == "density-push") {
    require(problem->dimension() == 1, r, "problem", "density-push needs a one-dimensional problem");
  }
  if (c.subcommand == "weak-order") {
    try {
      make_plan(c).validate();
    } catch (const Error& e) {
      r.fail("plan", e.what());
    }
  }
}

json to_json(const RunConfig& c) {
  json j;
  j["subcommand"] = c.subcommand;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["problem"] = {{"family", c.problem.family},     {"centers", c.problem.centers}, {"curvatures", c.problem.curvatures},
                  {"tilts", c.problem.tilts},       {"scale", c.problem.scale},     {"weights", c.problem.weights}};
  j["model"] = {{"atoms", c.model.atoms}, {"probabilities", c.model.probabilities}};
  const PlanConfig& p = c.plan;
  j["plan"] = {{"space", p.space},
               {"order", p.order},
               {"ladder", p.ladder},
               {"horizon", p.horizon},
               {"test_function", p.test_function},
               {"evaluation", p.evaluation},
               {"grid_nodes", p.grid_nodes},
               {"lower", p.lower},
               {"upper", p.upper},
               {"window_fraction", p.window_fraction},
               {"samples", p.samples},
               {"substep_fraction", p.substep_fraction},
               {"start", p.start},
               {"noise", p.noise},
               {"correction_weight", p.correction_weight}};
  j["chain"] = {{"eta", c.chain.eta}, {"steps", c.chain.steps}, {"trajectories", c.chain.trajectories},
                {"start", c.chain.start}};
  j["taylor"] = {{"dimensions", c.taylor.dimensions}, {"pairs", c.taylor.pairs}, {"ladder", c.taylor.ladder}};
  const SuiteConfig& s = c.suite;
  j["suite"] = {{"eta", s.eta},
                {"horizon", s.horizon},
                {"random_functions", s.random_functions},
                {"speed_steps", s.speed_steps},
                {"radius", s.radius},
                {"confinement_eta", s.confinement_eta},
                {"trajectories", s.trajectories},
                {"confinement_steps", s.confinement_steps},
                {"density_eta", s.density_eta}};
  const DensityConfig& d = c.density;
  j["density"] = {{"eta", d.eta},     {"steps", d.steps}, {"lower", d.lower}, {"upper", d.upper},
                  {"cells", d.cells}, {"mean", d.mean},   {"width", d.width}};
  return j;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

RunConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto end = text.begin() + static_cast<std::ptrdiff_t>(std::min(e.byte, text.size()));
    const auto line = 1 + std::count(text.begin(), end, '\n');
    throw ConfigError("config: syntax error at line " + std::to_string(line) + ": " + e.what());
  }
  const Reader r(text);
  r.allow(j, "", {"subcommand", "seed", "output", "problem", "model", "plan", "chain", "taylor", "suite", "density"});

  RunConfig c;
  r.read(j, "", "subcommand", c.subcommand, &Reader::string);
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_unsigned()) {
      r.fail("seed", "expected a nonnegative integer");
    }
    c.seed = s.get<std::uint64_t>();
  } else if (!seed_override) {
    r.fail("seed", "missing; the seed is mandatory (or pass --seed)");
  }
  if (seed_override) {
    c.seed = *seed_override;
  }
  r.read(j, "", "output", c.output, &Reader::string);
  if (j.contains("problem")) {
    read_problem(r, j.at("problem"), c.problem);
  }
  if (j.contains("model")) {
    read_model(r, j.at("model"), c.model);
  }
  if (j.contains("plan")) {
    read_plan(r, j.at("plan"), c.plan);
  }
  if (j.contains("chain")) {
    read_chain(r, j.at("chain"), c.chain);
  }
  if (j.contains("taylor")) {
    read_taylor(r, j.at("taylor"), c.taylor);
  }
  if (j.contains("suite")) {
    read_suite(r, j.at("suite"), c.suite);
  }
  if (j.contains("density")) {
    read_density(r, j.at("density"), c.density);
  }
  validate(r, c);
  return c;
}

std::string emit_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

LossProblemPtr make_problem(const ProblemConfig& c) {
  const Vector weights = to_vector(c.weights);
  std::vector<Vector> centers;
  for (const auto& row : c.centers) {
    centers.push_back(to_vector(row));
  }
  if (c.family == "quadratic") {
    if (c.curvatures.size() != centers.size()) {
      throw InvalidArgument("quadratic family needs one curvature per center");
    }
    std::vector<Matrix> curvatures;
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const Index d = centers[k].size();
      curvatures.push_back(c.curvatures[k] * Matrix::Identity(d, d));
    }
    return std::make_shared<FiniteSumQuadratic>(std::move(centers), std::move(curvatures), weights);
  }
  if (c.family == "double_well") {
    return std::make_shared<DoubleWell1D>(to_vector(c.tilts), weights);
  }
  if (c.family == "confining") {
    return std::make_shared<ConfiningFamily>(std::move(centers), c.scale, weights);
  }
  throw InvalidArgument("unknown problem family '" + c.family + "'");
}

DataModelPtr make_model(const ModelConfig& c) {
  if (c.atoms.empty()) {
    throw InvalidArgument("data model needs at least one atom");
  }
  const Index d = static_cast<Index>(c.atoms.front().size());
  Matrix atoms(d, static_cast<Index>(c.atoms.size()));
  for (std::size_t k = 0; k < c.atoms.size(); ++k) {
    if (static_cast<Index>(c.atoms[k].size()) != d) {
      throw InvalidArgument("all atoms must have the same dimension");
    }
    atoms.col(static_cast<Index>(k)) = to_vector(c.atoms[k]);
  }
  return std::make_shared<DataModel>(atoms, to_vector(c.probabilities));
}

ExperimentPlan make_plan(const RunConfig& config) {
  const PlanConfig& p = config.plan;
  ExperimentPlan plan;
  plan.space = p.space == "line" ? Space::Line : Space::Circle;
  if (plan.space == Space::Line) {
    plan.problem = make_problem(config.problem);
  } else {
    plan.model = make_model(config.model);
  }
  plan.order = p.order;
  plan.ladder = p.ladder;
  plan.horizon = p.horizon;
  plan.test_function = p.test_function;
  plan.seed = config.seed;
  plan.evaluation = p.evaluation == "grid" ? EvaluationMode::Grid : EvaluationMode::MonteCarlo;
  plan.oracle = plan.evaluation == EvaluationMode::Grid ? OracleMode::Pde : OracleMode::FineSde;
  plan.lower = p.lower;
  plan.upper = p.upper;
  plan.grid_nodes = p.grid_nodes;
  plan.window_fraction = p.window_fraction;
  plan.samples = p.samples;
  plan.substep_fraction = p.substep_fraction;
  plan.start = to_vector(p.start);
  plan.noise = p.noise == "none" ? NoiseChoice::None : NoiseChoice::GradientVariance;
  plan.sphere_options.correction_weight = p.correction_weight;
  return plan;
}

SuiteSettings make_suite_settings(const RunConfig& config) {
  SuiteSettings s = default_suite_settings(config.seed);
  const SuiteConfig& c = config.suite;
  s.eta = c.eta;
  s.horizon = c.horizon;
  s.random_functions = c.random_functions;
  s.speed_steps = c.speed_steps;
  s.radius = c.radius;
  s.confinement_eta = c.confinement_eta;
  s.trajectories = c.trajectories;
  s.confinement_steps = c.confinement_steps;
  s.density_eta = c.density_eta;
  return s;
}

}  // namespace sgdlab
