#pragma once

#include <span>

#include "mdlae/codelength.hpp"
#include "mdlae/hessian.hpp"

// Gaussian feature noise around f(x): the denoising codelength bound, its
// Monte Carlo training gradient with the factorized backpropagation scheme
// (decoder gradients averaged per draw, one encoder pass from the averaged
// feature-layer gradient), and the second-order Taylor form of the bound.

namespace mdlae {

struct NoiseSpec {
  enum class Variant { fixed, optimal_diag, optimal_full };
  enum class HessianSource { exact_fd, gn_full, gn_layerwise_diag };
  Variant variant = Variant::fixed;
  HessianSource source = HessianSource::gn_layerwise_diag;
  Covariance fixed_cov;  // Variant::fixed
};

// Per-sample covariance according to the spec: fixed passes through, the
// optimal variants invert the selected curvature at f_mean (clamped).
Covariance resolve_noise(const NoiseSpec& spec, const Prior& prior, const Decoder& dec,
                         std::span<const double> f_mean, std::span<const double> x);

// E l_rec under y ~ N(f_mean, cov), minus E log rho(y), minus
// log det cov / 2, minus d/2 (1 + log 2pi).  The -E log rho term is exact
// for Gaussian priors (-log rho(f_mean) + Tr(cov diag(1/lambda))/2); for
// discrete priors it falls back to the same Monte Carlo draws as l_rec.
double denoising_bound(const Prior& prior, const Decoder& dec,
                       std::span<const double> f_mean, const Covariance& cov,
                       std::span<const double> x, int mc_samples, Rng& rng);

struct EncoderDecoderGrads {
  std::vector<double> encoder_weight;  // canonical edge order of f_net
  std::vector<double> decoder_weight;  // canonical edge order of dec.net
};

// Gradient of the denoising objective for one sample: draws y_i = f(x) + n_i,
// backpropagates each through the decoder, averages at the feature layer and
// runs the encoder backward pass once on the average.  The -log rho(y) term's
// gradient (Gaussian priors: mean_i y_i / lambda) is folded into the same
// feature-layer vector.
EncoderDecoderGrads denoising_grad(const Prior& prior, const Network& f_net,
                                   const Decoder& dec, std::span<const double> x,
                                   const Covariance& cov, int mc_samples, Rng& rng);

// l_rec(x) - log rho(f_mean) - log det cov / 2 + Tr(cov H)/2 - d/2 (1+log 2pi)
// with H the curvature of l_rec^y - log rho at f_mean (supplied by the
// caller, typically hessian_fd or one of the Gauss-Newton forms).
double taylor_bound(const Prior& prior, const Decoder& dec, std::span<const double> f_mean,
                    const Covariance& cov, std::span<const double> x,
                    const HessianResult& hess);

// Closed-form denoising bound for exactly quadratic objectives (linear
// decoder + Gaussian prior): no sampling, equals the mc -> infinity limit.
double denoising_bound_quadratic(const Prior& prior, const Decoder& dec,
                                 std::span<const double> f_mean, const Covariance& cov,
                                 std::span<const double> x);

}  // namespace mdlae
