#pragma once

#include <span>
#include <variant>
#include <vector>

#include "mdlae/codelength.hpp"
#include "mdlae/linalg.hpp"

// Curvature of y -> l_rec^y(x) - log rho(y): a finite-difference oracle, the
// full Gauss-Newton form, the layer-wise diagonal Gauss-Newton backprop with
// squared weights, and the optimal feature noise they induce.

namespace mdlae {

inline constexpr double kHessianFloor = 1e-8;  // positivity floor before inversion

struct HessianResult {
  enum class Kind { full, diagonal };
  enum class Source { exact_fd, gn_full, gn_layerwise_diag };
  Kind kind = Kind::full;
  Source source = Source::exact_fd;
  Matrix full;               // Kind::full
  std::vector<double> diag;  // Kind::diagonal
};

int hessian_dim(const HessianResult& h);
// the diagonal as a vector; extraction for Kind::full
std::vector<double> hessian_diagonal(const HessianResult& h);

// Central second differences at `step`, cross-checked against 10x the step
// and symmetrized.  The oracle the analytic forms are tested against; for
// exactly quadratic objectives a large step (~0.5) kills the rounding noise.
HessianResult hessian_fd(const Prior& prior, const Decoder& dec,
                         std::span<const double> y0, std::span<const double> x,
                         double step = 1e-4);

// diag(1/lambda) + J^T diag(1/sigma_k^2) J with J the decoder Jacobian at y0.
HessianResult gauss_newton_full(const Prior& prior, const Decoder& dec,
                                std::span<const double> y0, std::span<const double> x);

// Squared-weight backpropagation: h_k = 1/sigma_k^2 on the outputs,
// h_i = sum_j w_ij^2 s'(V_j)^2 h_j, returning 1/lambda_i + h_i on the inputs.
HessianResult gn_layerwise_diag(const Prior& prior, const Decoder& dec,
                                std::span<const double> y0);

struct DiagCov {
  std::vector<double> var;
};
struct FullCov {
  Matrix cov;  // SPD
};
using Covariance = std::variant<DiagCov, FullCov>;

int cov_dim(const Covariance& cov);
// log det of either representation; throws when not positive definite
double cov_log_det(const Covariance& cov);

enum class NoiseMode { full, diagonal };

struct OptimalNoiseResult {
  Covariance cov;
  double log_det_h = 0.0;  // after the positivity floor
  double bound = 0.0;      // base + log_det_h / 2 - d/2 log 2pi
};

// Sigma = H^{-1} (full) or (diag H)^{-1} (diagonal).  Eigenvalues or entries
// below kHessianFloor are raised to it when clamp is set; otherwise they are
// an error naming the offending eigenvalue or entry.  `base` is the sample's
// l_rec - log rho(f_mean), so `bound` comes out as the optimal-noise
// codelength l_rec - log rho(f) + log det H / 2 - d/2 log 2pi.
OptimalNoiseResult optimal_noise(const HessianResult& h, NoiseMode mode,
                                 double base = 0.0, bool clamp = true);

}  // namespace mdlae
