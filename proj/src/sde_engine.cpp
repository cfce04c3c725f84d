#include "sgdlab/sde_engine.hpp"

#include "sgdlab/errors.hpp"
#include "sgdlab/linalg.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

namespace sgdlab {
namespace {

constexpr Index kPsdCheckPoints = 256;

void check_order(int order) {
  if (order != 1 && order != 2) {
    throw InvalidArgument("sde_engine: correction order must be 1 or 2");
  }
}

void check_eta(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw InvalidArgument("sde_engine: eta must be finite and nonnegative");
  }
}

Index substep_count(double horizon, double substep) {
  if (!(horizon >= 0.0) || !(substep > 0.0)) {
    throw InvalidArgument("sde_engine: need horizon >= 0 and substep > 0");
  }
  return static_cast<Index>(std::ceil(horizon / substep - 1e-9));
}

void check_finite(const Vector& x, Index step) {
  if (!x.allFinite()) {
    throw Divergence("sde_engine: non-finite state at step " + std::to_string(step));
  }
}

// Deterministic spread of check points on S^{d-1}.
std::vector<Vector> sphere_check_points(Index d) {
  std::vector<Vector> points;
  if (d == 2) {
    for (Index i = 0; i < kPsdCheckPoints; ++i) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / kPsdCheckPoints;
      Vector w(2);
      w << std::cos(theta), std::sin(theta);
      points.push_back(w);
    }
    return points;
  }
  NoiseStream noise(0x5eedULL, 0);
  while (static_cast<Index>(points.size()) < kPsdCheckPoints) {
    const Vector g = noise.increment(d, 1.0);
    if (g.norm() > 1e-3) {
      points.push_back(g / g.norm());
    }
  }
  return points;
}

}  // namespace

Matrix EuclideanSpec::diffusion_factor(const Vector& x) const {
  return psd_sqrt(diffusion_covariance(x));
}

Vector SphereSpec::ito_correction(const Vector& w) const { return pb1_correction(diffusion_factor, w); }

EuclideanSpec build_spec(LossProblemPtr problem, int order, double eta, NoiseChoice noise) {
  check_order(order);
  check_eta(eta);
  if (!problem) {
    throw InvalidArgument("sde_engine: no problem given");
  }
  EuclideanSpec spec;
  spec.dimension = problem->dimension();
  spec.order = order;
  spec.eta = eta;
  if (order == 1) {
    spec.drift = [problem](const Vector& x) { return Vector(-mean_gradient(*problem, x)); };
  } else {
    // grad |grad f|^2 = 2 (grad^2 f) grad f
    spec.drift = [problem, eta](const Vector& x) {
      const Vector g = mean_gradient(*problem, x);
      return Vector(-g - 0.5 * eta * mean_hessian(*problem, x) * g);
    };
  }
  if (order == 1 && noise == NoiseChoice::None) {
    const Index d = spec.dimension;
    spec.diffusion_covariance = [d](const Vector&) { return Matrix(Matrix::Zero(d, d)); };
  } else {
    spec.diffusion_covariance = [problem, eta](const Vector& x) {
      return Matrix(eta * gradient_noise_covariance(*problem, x));
    };
  }
  return spec;
}

Matrix pca_noise_factor(const DataModel& model, const Vector& x) {
  const Vector w = x / x.norm();
  return psd_sqrt(pca_noise_matrix(model, w));
}

SphereSpec build_spec(DataModelPtr model, int order, double eta, SphereBuildOptions options) {
  check_order(order);
  check_eta(eta);
  if (!model) {
    throw InvalidArgument("sde_engine: no data model given");
  }
  for (const Vector& w : sphere_check_points(model->dimension())) {
    const double lambda = min_symmetric_eigenvalue(pca_noise_matrix(*model, w));
    if (lambda < -kPsdClampTolerance) {
      throw PsdViolation("sde_engine: M(w) - grad_S f grad_S f^T has eigenvalue " +
                         std::to_string(lambda) +
                         " at a check point; this data model has no order-2 noise factor");
    }
  }

  SphereSpec spec;
  spec.dimension = model->dimension();
  spec.order = order;
  spec.eta = eta;
  const double root_eta = std::sqrt(eta);
  spec.diffusion_factor = [model, root_eta](const Vector& x) {
    return Matrix(root_eta * pca_noise_factor(*model, x));
  };

  if (order == 1) {
    spec.drift = [model](const Vector& x) {
      const Vector w = x / x.norm();
      return pca_spherical_gradient(*model, w);
    };
    return spec;
  }

  const MatrixField noise_factor = [model](const Vector& x) { return pca_noise_factor(*model, x); };
  const ScalarField<double> loss =
      homogeneous_extension(quadratic_field<double>(model->covariance()));
  const double weight = options.correction_weight;
  spec.drift = [model, eta, weight, noise_factor, loss](const Vector& x) {
    const Vector w = x / x.norm();
    const Vector grad_s = pca_spherical_gradient(*model, w);
    const Matrix s = noise_factor(w);
    const Matrix hess_s = spherical_hessian(loss, w);
    // (grad_S f . grad_S^2 f)_j = sum_i (grad_S f)_i (grad_S^2 f)_{ij}
    const Vector transport = hess_s.transpose() * grad_s;
    const Vector raw = grad_s - 0.5 * eta * (s * (s * w)) - weight * eta * pb1_correction(noise_factor, w) -
                       0.5 * eta * transport;
    return project(w, raw);
  };
  return spec;
}

SphereSpec spherical_brownian_motion(Index dimension, double eta) {
  check_eta(eta);
  if (dimension < 2) {
    throw InvalidArgument("sde_engine: sphere dimension must be at least 2");
  }
  SphereSpec spec;
  spec.dimension = dimension;
  spec.order = 1;
  spec.eta = eta;
  spec.drift = [dimension](const Vector&) { return Vector(Vector::Zero(dimension)); };
  const double root_eta = std::sqrt(eta);
  spec.diffusion_factor = [dimension, root_eta](const Vector&) {
    return Matrix(root_eta * Matrix::Identity(dimension, dimension));
  };
  return spec;
}

Vector pb1_correction(const MatrixField& sigma, const Vector& w, double h) {
  const Index d = w.size();
  const Matrix p = tangent_projector(w);
  const Matrix p_sigma = p * sigma(w);
  Vector result = Vector::Zero(d);
  for (Index k = 0; k < d; ++k) {
    Vector forward = w;
    Vector backward = w;
    forward(k) += h;
    backward(k) -= h;
    const Matrix d_sigma = (sigma(forward) - sigma(backward)) / (2.0 * h);
    // sum_j (P sigma)_{kj} (P d_k sigma)_{ij}
    result.noalias() += 0.5 * p * d_sigma * p_sigma.row(k).transpose();
  }
  return result;
}

// ---------------------------------------------------------------------------

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t path) : rng_(seed, path) {}

Vector NoiseStream::increment(Index d, double variance) {
  const double scale = std::sqrt(variance);
  Vector g(d);
  for (Index i = 0; i < d; ++i) {
    g(i) = scale * normal_(rng_);
  }
  return g;
}

namespace {

void check_substep(const EuclideanSpec& spec, double substep) {
  if (spec.eta > 0.0 && substep > spec.eta / 20.0 * (1.0 + 1e-12)) {
    throw InvalidArgument("sde_engine: Euler-Maruyama substep " + std::to_string(substep) +
                          " exceeds eta/20 = " + std::to_string(spec.eta / 20.0));
  }
}

template <typename Visit>
void run_euler(const EuclideanSpec& spec, const Vector& x0, double horizon, double substep,
               std::uint64_t seed, std::uint64_t path, Visit&& visit) {
  check_substep(spec, substep);
  const Index steps = substep_count(horizon, substep);
  const double delta = steps > 0 ? horizon / static_cast<double>(steps) : substep;
  NoiseStream noise(seed, path);
  Vector x = x0;
  visit(x);
  for (Index j = 0; j < steps; ++j) {
    const Vector g = noise.increment(spec.dimension, delta);
    x = x + spec.drift(x) * delta + spec.diffusion_factor(x) * g;
    check_finite(x, j + 1);
    visit(x);
  }
}

template <typename Visit>
void run_sphere(const SphereSpec& spec, const Vector& w0, double horizon, double substep,
                std::uint64_t seed, std::uint64_t path, Visit&& visit) {
  const Index steps = substep_count(horizon, substep);
  const double delta = steps > 0 ? horizon / static_cast<double>(steps) : substep;
  NoiseStream noise(seed, path);
  Vector w = SpherePoint<double>(w0).vector();
  visit(w);
  for (Index j = 0; j < steps; ++j) {
    w = stratonovich_sphere_step(spec, w, delta, noise.increment(spec.dimension, delta)).w;
    check_finite(w, j + 1);
    visit(w);
  }
}

}  // namespace

SdePath euler_maruyama(const EuclideanSpec& spec, const Vector& x0, double horizon, double substep,
                       std::uint64_t seed, std::uint64_t path) {
  SdePath out;
  out.seed = seed;
  out.path = path;
  const Index steps = substep_count(horizon, substep);
  out.substep = steps > 0 ? horizon / static_cast<double>(steps) : substep;
  run_euler(spec, x0, horizon, substep, seed, path, [&](const Vector& x) { out.states.push_back(x); });
  return out;
}

Vector euler_maruyama_terminal(const EuclideanSpec& spec, const Vector& x0, double horizon,
                               double substep, std::uint64_t seed, std::uint64_t path) {
  Vector last;
  run_euler(spec, x0, horizon, substep, seed, path, [&](const Vector& x) { last = x; });
  return last;
}

SphereStep stratonovich_sphere_step(const SphereSpec& spec, const Vector& w, double substep,
                                    const Vector& increment) {
  const auto tangent_noise = [&](const Vector& x) {
    const Vector unit = x / x.norm();
    return Vector(project(unit, Vector(spec.diffusion_factor(unit) * increment)));
  };
  const auto drift_at = [&](const Vector& x) { return spec.drift(Vector(x / x.norm())); };

  const Vector drift0 = drift_at(w);
  const Vector noise0 = tangent_noise(w);
  const Vector predictor = w + drift0 * substep + noise0;
  const Vector corrected =
      w + 0.5 * (drift0 + drift_at(predictor)) * substep + 0.5 * (noise0 + tangent_noise(predictor));

  SphereStep step;
  step.defect = corrected.norm() - 1.0;
  step.w = normalize(corrected).vector();
  return step;
}

SdePath integrate_sphere(const SphereSpec& spec, const Vector& w0, double horizon, double substep,
                         std::uint64_t seed, std::uint64_t path) {
  SdePath out;
  out.seed = seed;
  out.path = path;
  const Index steps = substep_count(horizon, substep);
  out.substep = steps > 0 ? horizon / static_cast<double>(steps) : substep;
  run_sphere(spec, w0, horizon, substep, seed, path, [&](const Vector& w) { out.states.push_back(w); });
  return out;
}

Vector integrate_sphere_terminal(const SphereSpec& spec, const Vector& w0, double horizon,
                                 double substep, std::uint64_t seed, std::uint64_t path) {
  Vector last;
  run_sphere(spec, w0, horizon, substep, seed, path, [&](const Vector& w) { last = w; });
  return last;
}

Vector spherical_bm_terminal(const Vector& w0, double eta, double horizon, double substep,
                             std::uint64_t seed, std::uint64_t path) {
  using Small = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 16, 1>;
  check_eta(eta);
  const Index d = w0.size();
  if (d < 2 || d > 16) {
    throw InvalidArgument("sde_engine: spherical_bm_terminal supports 2 <= d <= 16");
  }
  const Index steps = substep_count(horizon, substep);
  const double delta = steps > 0 ? horizon / static_cast<double>(steps) : substep;
  const double root_eta = std::sqrt(eta);
  const double scale = std::sqrt(delta);
  CounterRng rng(seed, path);
  std::normal_distribution<double> normal;
  Small w = SpherePoint<double>(w0).vector();
  Small g(d);
  for (Index j = 0; j < steps; ++j) {
    for (Index i = 0; i < d; ++i) {
      g(i) = scale * normal(rng);
    }
    const Small noise0 = root_eta * (g - w.dot(g) * w);
    const Small predictor = w + noise0;
    const Small unit = predictor / predictor.norm();
    const Small noise1 = root_eta * (g - unit.dot(g) * unit);
    const Small corrected = w + 0.5 * (noise0 + noise1);
    const double norm = corrected.norm();
    if (!(norm > kDegenerateNorm) || !std::isfinite(norm)) {
      throw Divergence("sde_engine: degenerate state at step " + std::to_string(j + 1));
    }
    w = corrected / norm;
  }
  return Vector(w);
}

double apply_generator(const EuclideanSpec& spec, const ScalarField<double>& u, const Vector& x) {
  return spec.drift(x).dot(u.gradient(x)) +
         0.5 * (spec.diffusion_covariance(x).cwiseProduct(u.hessian(x))).sum();
}

double apply_generator(const SphereSpec& spec, const ScalarField<double>& u, const Vector& w) {
  const Vector grad_s = spherical_gradient(u, w);
  const Matrix hess_s = spherical_hessian(u, w);
  const Matrix sigma = spec.diffusion_factor(w);
  const Vector transport = spec.drift(w) + spec.ito_correction(w);
  return transport.dot(grad_s) + 0.5 * ((sigma * sigma.transpose()).cwiseProduct(hess_s)).sum();
}

void write_path_csv(std::ostream& out, const SdePath& path) {
  const auto old_precision = out.precision(17);
  const Index d = path.states.empty() ? 0 : path.states.front().size();
  out << "t";
  for (Index j = 0; j < d; ++j) {
    out << ",x" << (j + 1);
  }
  out << '\n';
  for (std::size_t n = 0; n < path.states.size(); ++n) {
    out << static_cast<double>(n) * path.substep;
    for (Index j = 0; j < d; ++j) {
      out << ',' << path.states[n](j);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace sgdlab
