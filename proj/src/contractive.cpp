#include "mdlae/contractive.hpp"

#include <cmath>
#include <stdexcept>

namespace mdlae {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
}

Matrix decoder_jacobian(const Decoder& dec, std::span<const double> y0) {
  const int dy = decoder_feature_dim(dec);
  const int dx = decoder_data_dim(dec);
  const ActivationRecord rec = forward(dec.net, y0);
  Matrix j(dx, dy);
  std::vector<double> seed(dx, 0.0);
  for (int k = 0; k < dx; ++k) {
    seed[k] = 1.0;
    const Gradients g = backprop(dec.net, rec, seed);
    seed[k] = 0.0;
    for (int i = 0; i < dy; ++i) {
      if (!std::isfinite(g.input[i]))
        throw std::runtime_error("decoder_jacobian: non-finite entry");
      j.at(k, i) = g.input[i];
    }
  }
  return j;
}

double contractive_bound(const Prior& prior, const Decoder& dec,
                         std::span<const double> f_mean, std::span<const double> x,
                         ContractiveVariant variant) {
  const auto* g = std::get_if<GaussianPrior>(&prior);
  if (g == nullptr)
    throw std::invalid_argument("contractive_bound: Gaussian prior required");
  const int dy = decoder_feature_dim(dec);
  if (static_cast<int>(g->var.size()) != dy)
    throw std::invalid_argument("contractive_bound: prior dimension mismatch");

  const Matrix j = decoder_jacobian(dec, f_mean);
  const double base =
      reconstruction_error(dec, f_mean, x) - prior_log_density(prior, f_mean);

  double penalty = 0.0;
  if (variant == ContractiveVariant::diag) {
    for (int i = 0; i < dy; ++i) {
      double c = 1.0 / g->var[i];
      for (int k = 0; k < j.rows; ++k) {
        const double s = dec.out.sigma[k];
        c += j.at(k, i) * j.at(k, i) / (s * s);
      }
      penalty += 0.5 * std::log(c);
    }
  } else {
    Matrix h(dy, dy);
    for (int i = 0; i < dy; ++i) h.at(i, i) = 1.0 / g->var[i];
    for (int k = 0; k < j.rows; ++k) {
      const double inv_s2 = 1.0 / (dec.out.sigma[k] * dec.out.sigma[k]);
      for (int a = 0; a < dy; ++a)
        for (int b = 0; b < dy; ++b) h.at(a, b) += inv_s2 * j.at(k, a) * j.at(k, b);
    }
    Matrix lower;
    if (!cholesky(h, lower))
      throw std::runtime_error("contractive_bound: curvature matrix not positive definite");
    penalty = 0.5 * cholesky_log_det(lower);
  }
  return base + penalty - 0.5 * dy * kLogTwoPi;
}

}  // namespace mdlae
