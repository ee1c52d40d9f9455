#include "mdlae/hessian.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mdlae/contractive.hpp"
#include "mdlae/kernels.hpp"

namespace mdlae {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

double objective(const Prior& prior, const Decoder& dec, std::span<const double> y,
                 std::span<const double> x) {
  return reconstruction_error(dec, y, x) - prior_log_density(prior, y);
}

Matrix second_differences(const Prior& prior, const Decoder& dec,
                          std::span<const double> y0, std::span<const double> x,
                          double h) {
  const int d = static_cast<int>(y0.size());
  std::vector<double> y(y0.begin(), y0.end());
  const double f0 = objective(prior, dec, y, x);
  Matrix m(d, d);
  for (int i = 0; i < d; ++i) {
    y[i] = y0[i] + h;
    const double fp = objective(prior, dec, y, x);
    y[i] = y0[i] - h;
    const double fm = objective(prior, dec, y, x);
    y[i] = y0[i];
    m.at(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    for (int jj = i + 1; jj < d; ++jj) {
      double quad = 0.0;
      for (int si = -1; si <= 1; si += 2)
        for (int sj = -1; sj <= 1; sj += 2) {
          y[i] = y0[i] + si * h;
          y[jj] = y0[jj] + sj * h;
          quad += si * sj * objective(prior, dec, y, x);
        }
      y[i] = y0[i];
      y[jj] = y0[jj];
      m.at(i, jj) = m.at(jj, i) = quad / (4.0 * h * h);
    }
  }
  return m;
}

}  // namespace

int hessian_dim(const HessianResult& h) {
  return h.kind == HessianResult::Kind::full ? h.full.rows
                                             : static_cast<int>(h.diag.size());
}

std::vector<double> hessian_diagonal(const HessianResult& h) {
  if (h.kind == HessianResult::Kind::diagonal) return h.diag;
  std::vector<double> d(h.full.rows);
  for (int i = 0; i < h.full.rows; ++i) d[i] = h.full.at(i, i);
  return d;
}

HessianResult hessian_fd(const Prior& prior, const Decoder& dec,
                         std::span<const double> y0, std::span<const double> x,
                         double step) {
  if (!(step > 0.0)) throw std::invalid_argument("hessian_fd: step must be positive");
  const Matrix a = second_differences(prior, dec, y0, x, step);
  const Matrix b = second_differences(prior, dec, y0, x, 10.0 * step);
  double scale = 0.0, drift = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    scale = std::max(scale, std::abs(a.data[i]));
    drift = std::max(drift, std::abs(a.data[i] - b.data[i]));
    if (!std::isfinite(a.data[i]))
      throw std::runtime_error("hessian_fd: non-finite entry");
  }
  if (drift > 1e-2 * (1.0 + scale))
    throw std::runtime_error(
        "hessian_fd: second differences unstable across steps, max drift " +
        std::to_string(drift));
  HessianResult res;
  res.kind = HessianResult::Kind::full;
  res.source = HessianResult::Source::exact_fd;
  res.full = a;
  return res;
}

HessianResult gauss_newton_full(const Prior& prior, const Decoder& dec,
                                std::span<const double> y0, std::span<const double> x) {
  const auto* g = std::get_if<GaussianPrior>(&prior);
  if (g == nullptr)
    throw std::invalid_argument("gauss_newton_full: Gaussian prior required");
  (void)x;  // the residual term is deliberately dropped
  const int dy = decoder_feature_dim(dec);
  const Matrix j = decoder_jacobian(dec, y0);
  HessianResult res;
  res.kind = HessianResult::Kind::full;
  res.source = HessianResult::Source::gn_full;
  res.full = Matrix(dy, dy);
  for (int i = 0; i < dy; ++i) res.full.at(i, i) = 1.0 / g->var[i];
  for (int k = 0; k < j.rows; ++k) {
    const double inv_s2 = 1.0 / (dec.out.sigma[k] * dec.out.sigma[k]);
    for (int a = 0; a < dy; ++a)
      for (int b = 0; b < dy; ++b)
        res.full.at(a, b) += inv_s2 * j.at(k, a) * j.at(k, b);
  }
  return res;
}

HessianResult gn_layerwise_diag(const Prior& prior, const Decoder& dec,
                                std::span<const double> y0) {
  const auto* g = std::get_if<GaussianPrior>(&prior);
  if (g == nullptr)
    throw std::invalid_argument("gn_layerwise_diag: Gaussian prior required");
  const Network& net = dec.net;
  const ActivationRecord rec = forward(net, y0);

  std::vector<double> h(net.unit_count(), 0.0);
  const auto& outs = net.outputs();
  for (std::size_t k = 0; k < outs.size(); ++k) {
    const double s = dec.out.sigma[k];
    h[outs[k]] = 1.0 / (s * s);
  }
  const auto& order = net.topo_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int j = *it;
    if (net.is_input(j) || j == 0) continue;
    const double sp = activation_deriv(net.activation(j), rec.preact[j]);
    const double pull = sp * sp * h[j];
    if (pull == 0.0) continue;
    const auto& run = net.in_run(j);
    if (run.fast) {
      if (run.bias_edge >= 0) {
        const double w = net.weight(run.bias_edge);
        h[0] += pull * w * w;
      }
      kernels::sq_axpy(pull, net.weights().data() + run.run_edge, h.data() + run.run_src,
                       run.run_len);
    } else {
      for (int e = net.in_begin(j); e < net.in_end(j); ++e) {
        const double w = net.weight(e);
        h[net.edge(e).src] += pull * w * w;
      }
    }
  }

  HessianResult res;
  res.kind = HessianResult::Kind::diagonal;
  res.source = HessianResult::Source::gn_layerwise_diag;
  const auto& ins = net.inputs();
  res.diag.resize(ins.size());
  for (std::size_t i = 0; i < ins.size(); ++i)
    res.diag[i] = 1.0 / g->var[i] + h[ins[i]];
  return res;
}

int cov_dim(const Covariance& cov) {
  if (const auto* d = std::get_if<DiagCov>(&cov)) return static_cast<int>(d->var.size());
  return std::get<FullCov>(cov).cov.rows;
}

double cov_log_det(const Covariance& cov) {
  if (const auto* d = std::get_if<DiagCov>(&cov)) {
    double acc = 0.0;
    for (double v : d->var) {
      if (!(v > 0.0))
        throw std::runtime_error("noise covariance has a non-positive variance");
      acc += std::log(v);
    }
    return acc;
  }
  Matrix lower;
  if (!cholesky(std::get<FullCov>(cov).cov, lower))
    throw std::runtime_error("noise covariance is not positive definite");
  return cholesky_log_det(lower);
}

OptimalNoiseResult optimal_noise(const HessianResult& h, NoiseMode mode, double base,
                                 bool clamp) {
  const int d = hessian_dim(h);
  OptimalNoiseResult res;
  if (mode == NoiseMode::diagonal) {
    std::vector<double> diag = hessian_diagonal(h);
    DiagCov cov;
    cov.var.resize(d);
    for (int i = 0; i < d; ++i) {
      if (!std::isfinite(diag[i]))
        throw std::runtime_error("optimal_noise: non-finite diagonal entry " +
                                 std::to_string(i));
      if (diag[i] < kHessianFloor) {
        if (!clamp)
          throw std::runtime_error("optimal_noise: diagonal entry " + std::to_string(i) +
                                   " = " + std::to_string(diag[i]) +
                                   " below the positivity floor");
        diag[i] = kHessianFloor;
      }
      cov.var[i] = 1.0 / diag[i];
      res.log_det_h += std::log(diag[i]);
    }
    res.cov = std::move(cov);
  } else {
    Matrix m = h.kind == HessianResult::Kind::full ? h.full : Matrix::diagonal(h.diag);
    for (double v : m.data)
      if (!std::isfinite(v)) throw std::runtime_error("optimal_noise: non-finite entry");
    const SymEigen eig = sym_eigen(m);
    std::vector<double> vals = eig.values;
    for (int i = 0; i < d; ++i) {
      if (vals[i] < kHessianFloor) {
        if (!clamp)
          throw std::runtime_error("optimal_noise: eigenvalue " + std::to_string(i) +
                                   " = " + std::to_string(vals[i]) +
                                   " below the positivity floor");
        vals[i] = kHessianFloor;
      }
      res.log_det_h += std::log(vals[i]);
    }
    FullCov cov;
    cov.cov = Matrix(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        double acc = 0.0;
        for (int k = 0; k < d; ++k)
          acc += eig.vectors.at(a, k) * eig.vectors.at(b, k) / vals[k];
        cov.cov.at(a, b) = acc;
      }
    res.cov = std::move(cov);
  }
  res.bound = base + 0.5 * res.log_det_h - 0.5 * d * kLogTwoPi;
  return res;
}

}  // namespace mdlae
