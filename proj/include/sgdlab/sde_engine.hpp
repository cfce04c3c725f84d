#pragma once

// Diffusion approximations of the discrete chains and their integrators.
//
// Euclidean (Ito):       dX = b(X) dt + sqrt(eta Sigma(X)) dW
// Sphere (Stratonovich): dw = Pb(w) dt + P sigma(w) o dW,  P = I - w w^T
//
// with generators
//   L u   = b . grad u + 1/2 eta Sigma : grad^2 u
//   L_S u = (Pb + Pb1(sigma)) . grad_S u + 1/2 sigma sigma^T : grad_S^2 u
//   (Pb1(sigma))_i = 1/2 (P sigma)_{kj} (P d_k sigma)_{ij}

#include "sgdlab/problems.hpp"
#include "sgdlab/random.hpp"
#include "sgdlab/sphere_geometry.hpp"
#include "sgdlab/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace sgdlab {

/// Noise used by the first-order Euclidean approximation.
enum class NoiseChoice {
  GradientVariance,  ///< Sigma = var(grad f(x; xi))
  None,              ///< Sigma = 0
};

struct EuclideanSpec {
  Index dimension = 0;
  int order = 1;
  double eta = 0.0;
  VectorField drift;
  /// eta Sigma(x), the covariance rate of the Ito noise.
  MatrixField diffusion_covariance;

  /// sqrt(eta Sigma(x)).
  Matrix diffusion_factor(const Vector& x) const;
};

struct SphereSpec {
  Index dimension = 0;
  int order = 1;
  double eta = 0.0;
  /// Pb(w), tangent at unit w.
  VectorField drift;
  /// sigma(x) on a neighbourhood of the sphere (evaluated through x/|x|).
  MatrixField diffusion_factor;

  /// Pb1(sigma)(w).
  Vector ito_correction(const Vector& w) const;
};

struct SphereBuildOptions {
  /// Multiplier of eta Pb1(S) subtracted in the order-2 drift. The value 1
  /// cancels the Stratonovich correction carried by sigma = sqrt(eta) S.
  double correction_weight = 1.0;
};

/// Euclidean drift/diffusion at correction order 1 or 2:
///   order 1: b = -grad f,                        Sigma = var(grad f(x;xi)) or 0
///   order 2: b = -grad f - eta/4 grad |grad f|^2, Sigma = var(grad f(x;xi))
EuclideanSpec build_spec(LossProblemPtr problem, int order, double eta,
                         NoiseChoice noise = NoiseChoice::GradientVariance);

/// Sphere drift/diffusion for the online PCA chain, sigma = sqrt(eta) S(w) with
/// S(w) = sqrt(M(w) - grad_S f grad_S f^T):
///   order 1: Pb = (I - w w^T) Sigma w
///   order 2: Pb = P[grad_S f - eta/2 S^2 w - c eta Pb1(S) - eta/2 grad_S f . grad_S^2 f]
/// with c = options.correction_weight. Throws PsdViolation if the noise matrix
/// has an eigenvalue below -1e-10 at the sampled check points.
SphereSpec build_spec(DataModelPtr model, int order, double eta, SphereBuildOptions options = {});

/// dw = sqrt(eta) P o dW: Brownian motion on S^{d-1} run at speed eta.
SphereSpec spherical_brownian_motion(Index dimension, double eta);

/// S(w) = sqrt(M(w) - grad_S f grad_S f^T) at w = x/|x|.
Matrix pca_noise_factor(const DataModel& model, const Vector& x);

/// Pb1(sigma)(w) with d_k sigma from central differences of step h.
Vector pb1_correction(const MatrixField& sigma, const Vector& w, double h = 1e-5);

struct SdePath {
  std::vector<Vector> states;  ///< states at t = j * substep
  double substep = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
};

/// Gaussian increments for path `path` of seed `seed`.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t path);
  /// d independent N(0, variance) draws.
  Vector increment(Index d, double variance);

 private:
  CounterRng rng_;
  std::normal_distribution<double> normal_;
};

/// X_{j+1} = X_j + b(X_j) delta + sqrt(delta) sqrt(eta Sigma(X_j)) G_j.
/// Requires delta <= eta / 20 when eta > 0; the horizon is split into
/// ceil(T / delta) equal substeps. Throws Divergence on a non-finite state.
SdePath euler_maruyama(const EuclideanSpec& spec, const Vector& x0, double horizon, double substep,
                       std::uint64_t seed, std::uint64_t path = 0);
/// Terminal state only.
Vector euler_maruyama_terminal(const EuclideanSpec& spec, const Vector& x0, double horizon,
                               double substep, std::uint64_t seed, std::uint64_t path = 0);

struct SphereStep {
  Vector w;              ///< renormalised state
  double defect = 0.0;   ///< |w_pre| - 1 before renormalisation
};

/// One Heun (predictor-corrector) step of the Stratonovich sphere SDE; the
/// predictor and corrector share `increment`, then the state is projected back
/// to the sphere.
SphereStep stratonovich_sphere_step(const SphereSpec& spec, const Vector& w, double substep,
                                    const Vector& increment);

/// Path of the sphere SDE; substeps as in euler_maruyama.
SdePath integrate_sphere(const SphereSpec& spec, const Vector& w0, double horizon, double substep,
                         std::uint64_t seed, std::uint64_t path = 0);
Vector integrate_sphere_terminal(const SphereSpec& spec, const Vector& w0, double horizon,
                                 double substep, std::uint64_t seed, std::uint64_t path = 0);

/// Terminal state of spherical Brownian motion dw = sqrt(eta) P o dW under the
/// same Heun scheme and noise stream as integrate_sphere with
/// spherical_brownian_motion(d, eta), without heap allocation per step.
/// Requires d <= 16.
Vector spherical_bm_terminal(const Vector& w0, double eta, double horizon, double substep,
                             std::uint64_t seed, std::uint64_t path = 0);

/// L u(x).
double apply_generator(const EuclideanSpec& spec, const ScalarField<double>& u, const Vector& x);
/// L_S u(w).
double apply_generator(const SphereSpec& spec, const ScalarField<double>& u, const Vector& w);

/// CSV with header "t,x1,...,xd".
void write_path_csv(std::ostream& out, const SdePath& path);

}  // namespace sgdlab
