#include "mdlae/noise.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mdlae/contractive.hpp"
#include "mdlae/kernels.hpp"

namespace mdlae {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

const GaussianPrior& gaussian_or_throw(const Prior& prior, const char* where) {
  const auto* g = std::get_if<GaussianPrior>(&prior);
  if (g == nullptr)
    throw std::invalid_argument(std::string(where) +
                                ": a prior with a density on R^d is required");
  return *g;
}

FeatureDistribution noisy_feature(std::span<const double> f_mean, const Covariance& cov) {
  if (const auto* d = std::get_if<DiagCov>(&cov))
    return GaussianDiagFd{{f_mean.begin(), f_mean.end()}, d->var};
  return GaussianFullFd{{f_mean.begin(), f_mean.end()}, std::get<FullCov>(cov).cov};
}

double cov_diag_entry(const Covariance& cov, int i) {
  if (const auto* d = std::get_if<DiagCov>(&cov)) return d->var[i];
  return std::get<FullCov>(cov).cov.at(i, i);
}

}  // namespace

Covariance resolve_noise(const NoiseSpec& spec, const Prior& prior, const Decoder& dec,
                         std::span<const double> f_mean, std::span<const double> x) {
  const int d = decoder_feature_dim(dec);
  if (spec.variant == NoiseSpec::Variant::fixed) {
    if (cov_dim(spec.fixed_cov) != d)
      throw std::invalid_argument("resolve_noise: fixed covariance dimension mismatch");
    return spec.fixed_cov;
  }
  HessianResult h;
  switch (spec.source) {
    case NoiseSpec::HessianSource::exact_fd:
      h = hessian_fd(prior, dec, f_mean, x);
      break;
    case NoiseSpec::HessianSource::gn_full:
      h = gauss_newton_full(prior, dec, f_mean, x);
      break;
    case NoiseSpec::HessianSource::gn_layerwise_diag:
      h = gn_layerwise_diag(prior, dec, f_mean);
      break;
  }
  const NoiseMode mode = spec.variant == NoiseSpec::Variant::optimal_full
                             ? NoiseMode::full
                             : NoiseMode::diagonal;
  return optimal_noise(h, mode).cov;
}

double denoising_bound(const Prior& prior, const Decoder& dec,
                       std::span<const double> f_mean, const Covariance& cov,
                       std::span<const double> x, int mc_samples, Rng& rng) {
  const auto& g = gaussian_or_throw(prior, "denoising_bound");
  const int d = decoder_feature_dim(dec);
  if (cov_dim(cov) != d)
    throw std::invalid_argument("denoising_bound: covariance dimension mismatch");
  const FeatureDistribution fd = noisy_feature(f_mean, cov);
  const double e_l_rec = expected_reconstruction_error(dec, fd, x, mc_samples, rng);
  double neg_e_log_rho = -prior_log_density(prior, f_mean);
  for (int i = 0; i < d; ++i) neg_e_log_rho += 0.5 * cov_diag_entry(cov, i) / g.var[i];
  return e_l_rec + neg_e_log_rho - 0.5 * cov_log_det(cov) - 0.5 * d * (1.0 + kLogTwoPi);
}

EncoderDecoderGrads denoising_grad(const Prior& prior, const Network& f_net,
                                   const Decoder& dec, std::span<const double> x,
                                   const Covariance& cov, int mc_samples, Rng& rng) {
  const auto& g = gaussian_or_throw(prior, "denoising_grad");
  const int d = decoder_feature_dim(dec);
  if (f_net.output_dim() != d)
    throw std::invalid_argument("denoising_grad: encoder/decoder feature mismatch");
  if (mc_samples < 1)
    throw std::invalid_argument("denoising_grad: mc_samples must be >= 1");

  const ActivationRecord f_rec = forward(f_net, x);
  const std::vector<double> f_mean = output_activities(f_net, f_rec);
  const FeatureDistribution fd = noisy_feature(f_mean, cov);

  EncoderDecoderGrads out;
  out.decoder_weight.assign(dec.net.edge_count(), 0.0);
  std::vector<double> feature_grad(d, 0.0);
  std::vector<double> seed(decoder_data_dim(dec));
  for (int i = 0; i < mc_samples; ++i) {
    const std::vector<double> y = sample(fd, rng);
    const ActivationRecord rec = forward(dec.net, y);
    const auto xhat = output_activities(dec.net, rec);
    for (std::size_t k = 0; k < seed.size(); ++k) {
      const double s = dec.out.sigma[k];
      seed[k] = (xhat[k] - x[k]) / (s * s);
    }
    const Gradients dg = backprop(dec.net, rec, seed);
    kernels::axpy(1.0, dg.weight.data(), out.decoder_weight.data(),
                  out.decoder_weight.size());
    // feature-layer pull of this draw, prior term included
    for (int j = 0; j < d; ++j) feature_grad[j] += dg.input[j] + y[j] / g.var[j];
  }
  const double inv = 1.0 / mc_samples;
  for (auto& v : out.decoder_weight) v *= inv;
  for (auto& v : feature_grad) v *= inv;

  // one encoder pass from the averaged feature-layer vector
  out.encoder_weight = backprop(f_net, f_rec, feature_grad).weight;
  return out;
}

double taylor_bound(const Prior& prior, const Decoder& dec, std::span<const double> f_mean,
                    const Covariance& cov, std::span<const double> x,
                    const HessianResult& hess) {
  gaussian_or_throw(prior, "taylor_bound");
  const int d = decoder_feature_dim(dec);
  if (cov_dim(cov) != d || hessian_dim(hess) != d)
    throw std::invalid_argument("taylor_bound: dimension mismatch");
  double trace = 0.0;
  if (hess.kind == HessianResult::Kind::full) {
    if (const auto* fc = std::get_if<FullCov>(&cov)) {
      for (int a = 0; a < d; ++a)
        trace += kernels::dot(&fc->cov.data[static_cast<std::size_t>(a) * d],
                              &hess.full.data[static_cast<std::size_t>(a) * d], d);
    } else {
      for (int a = 0; a < d; ++a) trace += cov_diag_entry(cov, a) * hess.full.at(a, a);
    }
  } else {
    for (int a = 0; a < d; ++a) trace += cov_diag_entry(cov, a) * hess.diag[a];
  }
  return reconstruction_error(dec, f_mean, x) - prior_log_density(prior, f_mean) -
         0.5 * cov_log_det(cov) + 0.5 * trace - 0.5 * d * (1.0 + kLogTwoPi);
}

double denoising_bound_quadratic(const Prior& prior, const Decoder& dec,
                                 std::span<const double> f_mean, const Covariance& cov,
                                 std::span<const double> x) {
  const auto& g = gaussian_or_throw(prior, "denoising_bound_quadratic");
  const int d = decoder_feature_dim(dec);
  const Matrix j = decoder_jacobian(dec, f_mean);

  // E l_rec for the quadratic loss: l_rec(f_mean) + Tr(cov J^T D J)/2
  double tr_rec = 0.0;
  if (const auto* dc = std::get_if<DiagCov>(&cov)) {
    for (int k = 0; k < j.rows; ++k) {
      const double inv_s2 = 1.0 / (dec.out.sigma[k] * dec.out.sigma[k]);
      for (int a = 0; a < d; ++a)
        tr_rec += inv_s2 * j.at(k, a) * j.at(k, a) * dc->var[a];
    }
  } else {
    const auto& c = std::get<FullCov>(cov).cov;
    for (int k = 0; k < j.rows; ++k) {
      const double inv_s2 = 1.0 / (dec.out.sigma[k] * dec.out.sigma[k]);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          tr_rec += inv_s2 * j.at(k, a) * c.at(a, b) * j.at(k, b);
    }
  }
  double bound = reconstruction_error(dec, f_mean, x) + 0.5 * tr_rec;
  bound -= prior_log_density(prior, f_mean);
  for (int a = 0; a < d; ++a) bound += 0.5 * cov_diag_entry(cov, a) / g.var[a];
  return bound - 0.5 * cov_log_det(cov) - 0.5 * d * (1.0 + kLogTwoPi);
}

}  // namespace mdlae
