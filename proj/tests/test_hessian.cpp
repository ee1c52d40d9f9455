#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mdlae/hessian.hpp"
#include "mdlae/rng.hpp"
#include "test_util.hpp"

using namespace mdlae;
using testutil::linear_decoder;
using testutil::random_input;
using testutil::random_layered;
using testutil::random_linear;
using testutil::random_spd;
using testutil::rel_err;

namespace {

// analytic Hessian of the quadratic objective for a linear decoder
Matrix quadratic_hessian(const Matrix& w, const std::vector<double>& sigma,
                         const std::vector<double>& lambda) {
  const int dy = w.cols;
  Matrix h(dy, dy);
  for (int i = 0; i < dy; ++i) h.at(i, i) = 1.0 / lambda[i];
  for (int k = 0; k < w.rows; ++k) {
    const double inv_s2 = 1.0 / (sigma[k] * sigma[k]);
    for (int a = 0; a < dy; ++a)
      for (int b = 0; b < dy; ++b) h.at(a, b) += inv_s2 * w.at(k, a) * w.at(k, b);
  }
  return h;
}

double max_entry_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  return worst;
}

}  // namespace

TEST_CASE("finite-difference hessian of a quadratic objective is analytic") {
  Rng rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    auto sub = rng.substream("fd-quad", trial);
    const int dy = sub.uniform_int(1, 4);
    const int dx = sub.uniform_int(1, 4);
    Matrix w(dx, dy);
    std::vector<double> b(dx), sigma(dx), lambda(dy);
    for (auto& v : w.data) v = sub.gauss();
    for (auto& v : b) v = 0.3 * sub.gauss();
    for (auto& v : sigma) v = sub.uniform(0.5, 1.5);
    for (auto& v : lambda) v = sub.uniform(0.5, 2.0);
    Decoder dec = linear_decoder(w, b, sigma);
    const Prior rho = GaussianPrior{lambda};
    const auto y0 = random_input(sub, dy);
    const auto x = random_input(sub, dx);

    // quadratic objective: second differences are step-independent, so a
    // large step drowns the rounding noise
    const auto h = hessian_fd(rho, dec, y0, x, 0.5);
    CHECK(max_entry_diff(h.full, quadratic_hessian(w, sigma, lambda)) < 1e-10);
  }
}

TEST_CASE("prior-only and constant objectives") {
  Matrix zero(2, 2);
  Decoder dec = linear_decoder(zero, {0.1, 0.2}, {1.0, 1.0});
  const std::vector<double> y0{0.3, -0.4};
  const std::vector<double> x{0.0, 0.0};

  const Prior rho = GaussianPrior{{0.5, 2.0}};
  const auto h = hessian_fd(rho, dec, y0, x, 0.5);
  CHECK(std::abs(h.full.at(0, 0) - 2.0) < 1e-10);
  CHECK(std::abs(h.full.at(1, 1) - 0.5) < 1e-10);
  CHECK(std::abs(h.full.at(0, 1)) < 1e-10);

  // a near-flat prior turns the objective into a constant: zero curvature
  const Prior flat = GaussianPrior{{1e10, 1e10}};
  const auto hz = hessian_fd(flat, dec, y0, x, 0.5);
  for (double v : hz.full.data) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("finite differences trip the step-stability guard on stiff objectives") {
  Matrix w(1, 1);
  w.at(0, 0) = 300.0;
  NetworkSpec spec;
  spec.activation = {Activation::identity, Activation::identity, Activation::sigmoid};
  spec.inputs = {1};
  spec.outputs = {2};
  spec.edges = {{1, 2, 300.0}};
  Decoder dec{Network(std::move(spec)), OutputModel{}};
  dec.out.sigma = {0.01};
  const Prior rho = GaussianPrior{{1.0}};
  CHECK_THROWS_AS(
      hessian_fd(rho, dec, std::vector<double>{0.001}, std::vector<double>{0.9}, 1e-3),
      std::runtime_error);
}

TEST_CASE("gauss-newton equals the exact hessian for linear decoders") {
  Rng rng(52);
  for (int trial = 0; trial < 10; ++trial) {
    auto sub = rng.substream("gn-lin", trial);
    const int dy = sub.uniform_int(1, 3);
    const int dx = sub.uniform_int(1, 4);
    Decoder dec = random_linear(sub, dy, dx);
    std::vector<double> lambda(dy);
    for (auto& v : lambda) v = sub.uniform(0.5, 2.0);
    const Prior rho = GaussianPrior{lambda};
    const auto y0 = random_input(sub, dy);
    const auto x = random_input(sub, dx);  // arbitrary residual

    const auto gn = gauss_newton_full(rho, dec, y0, x);
    const auto fd = hessian_fd(rho, dec, y0, x, 0.5);
    CHECK(max_entry_diff(gn.full, fd.full) < 1e-10);
  }
}

TEST_CASE("gauss-newton matches finite differences at zero residual") {
  Rng rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    auto sub = rng.substream("gn-zero", trial);
    const int dy = sub.uniform_int(1, 3);
    const int dx = sub.uniform_int(2, 4);
    Decoder dec = random_layered(sub, {dy, dy + 1, dx},
                                 trial % 2 ? Activation::sigmoid : Activation::tanh);
    std::vector<double> lambda(dy, 1.0);
    const Prior rho = GaussianPrior{lambda};
    const auto y0 = random_input(sub, dy, 0.6);
    // manufacture the zero-residual sample: x = x_hat(y0)
    const auto x = output_activities(dec.net, forward(dec.net, y0));

    const auto gn = gauss_newton_full(rho, dec, y0, x);
    const auto fd = hessian_fd(rho, dec, y0, x, 1e-4);
    for (std::size_t i = 0; i < gn.full.data.size(); ++i)
      CHECK(rel_err(gn.full.data[i], fd.full.data[i], 1e-2) < 1e-4);
  }
}

TEST_CASE("gauss-newton reduces to the prior curvature when the jacobian dies") {
  Matrix zero(3, 2);
  Decoder dec = linear_decoder(zero, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
  const Prior rho = GaussianPrior{{0.25, 4.0}};
  const auto gn = gauss_newton_full(rho, dec, std::vector<double>{0.0, 0.0},
                                    std::vector<double>{0.0, 0.0, 0.0});
  CHECK(gn.full.at(0, 0) == 4.0);
  CHECK(gn.full.at(1, 1) == 0.25);
  CHECK(gn.full.at(0, 1) == 0.0);
}

TEST_CASE("layer-wise diagonal curvature, hand case") {
  // one identity edge of weight 3, sigma 1: curvature of (3y - x)^2/2 is 9
  NetworkSpec spec;
  spec.activation = {Activation::identity, Activation::identity, Activation::identity};
  spec.inputs = {1};
  spec.outputs = {2};
  spec.edges = {{1, 2, 3.0}};
  Decoder dec{Network(std::move(spec)), OutputModel{}};
  dec.out.sigma = {1.0};
  const Prior rho = GaussianPrior{{1e30}};
  const auto h = gn_layerwise_diag(rho, dec, std::vector<double>{0.2});
  CHECK(rel_err(h.diag[0], 9.0) < 1e-14);

  // all weights zero: only the prior floor remains
  Matrix zero(2, 2);
  Decoder dead = linear_decoder(zero, {0.0, 0.0}, {1.0, 1.0});
  const Prior rho2 = GaussianPrior{{0.5, 2.0}};
  const auto hz = gn_layerwise_diag(rho2, dead, std::vector<double>{0.0, 0.0});
  CHECK(hz.diag[0] == 2.0);
  CHECK(hz.diag[1] == 0.5);
}

TEST_CASE("layer-wise diagonal equals the full diagonal on single-layer linear decoders") {
  Rng rng(54);
  for (int trial = 0; trial < 10; ++trial) {
    auto sub = rng.substream("lw-lin", trial);
    const int dy = sub.uniform_int(1, 4);
    const int dx = sub.uniform_int(1, 4);
    Decoder dec = random_linear(sub, dy, dx);
    std::vector<double> lambda(dy);
    for (auto& v : lambda) v = sub.uniform(0.5, 2.0);
    const Prior rho = GaussianPrior{lambda};
    const auto y0 = random_input(sub, dy);
    const auto x = random_input(sub, dx);

    const auto lw = gn_layerwise_diag(rho, dec, y0);
    const auto full = gauss_newton_full(rho, dec, y0, x);
    const auto fd = hessian_fd(rho, dec, y0, x, 0.5);
    for (int i = 0; i < dy; ++i) {
      CHECK(rel_err(lw.diag[i], full.full.at(i, i)) < 1e-14);
      CHECK(std::abs(lw.diag[i] - fd.full.at(i, i)) < 1e-10);
    }
  }
}

TEST_CASE("layer-wise recursion agrees with a direct edge-sweep implementation") {
  Rng rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    auto sub = rng.substream("lw-deep", trial);
    const int dy = sub.uniform_int(1, 3);
    const int dx = sub.uniform_int(1, 3);
    Decoder dec = random_layered(sub, {dy, 4, 3, dx}, Activation::sigmoid);
    std::vector<double> lambda(dy, 1.3);
    const Prior rho = GaussianPrior{lambda};
    const auto y0 = random_input(sub, dy, 0.8);

    const auto lw = gn_layerwise_diag(rho, dec, y0);

    // independent recursion straight off the edge list
    const Network& net = dec.net;
    const ActivationRecord rec = forward(net, y0);
    std::vector<double> h(net.unit_count(), 0.0);
    for (std::size_t k = 0; k < net.outputs().size(); ++k)
      h[net.outputs()[k]] = 1.0 / (dec.out.sigma[k] * dec.out.sigma[k]);
    const auto& order = net.topo_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int j = *it;
      if (net.is_input(j) || j == 0) continue;
      const double sp = activation_deriv(net.activation(j), rec.preact[j]);
      for (int e = 0; e < net.edge_count(); ++e)
        if (net.edge(e).dst == j)
          h[net.edge(e).src] += net.weight(e) * net.weight(e) * sp * sp * h[j];
    }
    for (int i = 0; i < dy; ++i)
      CHECK(rel_err(lw.diag[i], 1.0 / lambda[i] + h[net.inputs()[i]]) < 1e-13);
  }
}

TEST_CASE("optimal noise, hand cases") {
  HessianResult id;
  id.kind = HessianResult::Kind::full;
  id.full = Matrix::identity(3);
  const auto on = optimal_noise(id, NoiseMode::full);
  const auto& cov = std::get<FullCov>(on.cov).cov;
  CHECK(max_entry_diff(cov, Matrix::identity(3)) < 1e-12);
  CHECK(std::abs(on.log_det_h) < 1e-12);

  HessianResult d2;
  d2.kind = HessianResult::Kind::diagonal;
  d2.diag = {2.0, 0.5};
  const auto dn = optimal_noise(d2, NoiseMode::diagonal);
  const auto& dv = std::get<DiagCov>(dn.cov).var;
  CHECK(dv[0] == 0.5);
  CHECK(dv[1] == 2.0);
  CHECK(rel_err(dn.log_det_h, std::log(2.0) + std::log(0.5)) < 1e-12);
}

TEST_CASE("optimal noise inverts the full hessian and minimizes the objective") {
  HessianResult h;
  h.kind = HessianResult::Kind::full;
  h.full = Matrix(2, 2);
  h.full.at(0, 0) = 2.0;
  h.full.at(0, 1) = 1.0;
  h.full.at(1, 0) = 1.0;
  h.full.at(1, 1) = 2.0;
  const auto on = optimal_noise(h, NoiseMode::full);
  const auto& sigma = std::get<FullCov>(on.cov).cov;
  CHECK(max_entry_diff(matmul(sigma, h.full), Matrix::identity(2)) < 1e-12);

  // -log det Sigma + Tr(Sigma H) at H^{-1} and at scaled copies
  auto objective = [&](double c) {
    Matrix s = sigma;
    for (auto& v : s.data) v *= c;
    Matrix lower;
    REQUIRE(cholesky(s, lower));
    double tr = 0.0;
    const Matrix sh = matmul(s, h.full);
    for (int i = 0; i < 2; ++i) tr += sh.at(i, i);
    return -cholesky_log_det(lower) + tr;
  };
  const double at_opt = objective(1.0);
  CHECK(at_opt < objective(0.5) - 1e-6);
  CHECK(at_opt < objective(2.0) - 1e-6);
  CHECK(rel_err(at_opt, on.log_det_h + 2.0) < 1e-12);
}

TEST_CASE("the noise objective is globally minimized at the inverse hessian") {
  Rng rng(56);
  for (int trial = 0; trial < 40; ++trial) {
    auto sub = rng.substream("thm", trial);
    const int d = sub.uniform_int(1, 5);
    const Matrix h = random_spd(sub, d);
    Matrix lh;
    REQUIRE(cholesky(h, lh));
    const double floor_val = cholesky_log_det(lh) + d;

    for (int probe = 0; probe < 25; ++probe) {
      const Matrix s = random_spd(sub, d, 0.05);
      Matrix ls;
      REQUIRE(cholesky(s, ls));
      const Matrix sh = matmul(s, h);
      double tr = 0.0;
      for (int i = 0; i < d; ++i) tr += sh.at(i, i);
      CHECK(-cholesky_log_det(ls) + tr >= floor_val - 1e-10);
    }

    HessianResult hr;
    hr.kind = HessianResult::Kind::full;
    hr.full = h;
    const auto on = optimal_noise(hr, NoiseMode::full);
    const auto& inv = std::get<FullCov>(on.cov).cov;
    Matrix li;
    REQUIRE(cholesky(inv, li));
    const Matrix ih = matmul(inv, h);
    double tr = 0.0;
    for (int i = 0; i < d; ++i) tr += ih.at(i, i);
    CHECK(std::abs((-cholesky_log_det(li) + tr) - floor_val) < 1e-9);
  }
}

TEST_CASE("positivity clamping and its opt-out") {
  HessianResult h;
  h.kind = HessianResult::Kind::diagonal;
  h.diag = {1.0, -0.5};
  const auto clamped = optimal_noise(h, NoiseMode::diagonal);
  CHECK(std::get<DiagCov>(clamped.cov).var[1] == 1.0 / kHessianFloor);
  CHECK_THROWS_WITH_AS(optimal_noise(h, NoiseMode::diagonal, 0.0, false),
                       doctest::Contains("entry 1"), std::runtime_error);

  HessianResult full;
  full.kind = HessianResult::Kind::full;
  full.full = Matrix(2, 2);
  full.full.at(0, 0) = 1.0;
  full.full.at(1, 1) = -2.0;
  const auto c2 = optimal_noise(full, NoiseMode::full);
  // clamped spectrum keeps the covariance SPD
  Matrix lower;
  CHECK(cholesky(std::get<FullCov>(c2.cov).cov, lower));
  CHECK_THROWS_WITH_AS(optimal_noise(full, NoiseMode::full, 0.0, false),
                       doctest::Contains("eigenvalue 0"), std::runtime_error);
}

TEST_CASE("bound value assembles base and log det") {
  HessianResult h;
  h.kind = HessianResult::Kind::diagonal;
  h.diag = {4.0};
  const auto on = optimal_noise(h, NoiseMode::diagonal, 2.5);
  CHECK(rel_err(on.bound, 2.5 + 0.5 * std::log(4.0) - 0.5 * std::log(2.0 * M_PI)) < 1e-14);
}

TEST_CASE("full hessians come out symmetric") {
  Rng rng(57);
  auto sub = rng.substream("sym");
  Decoder dec = random_layered(sub, {3, 4, 3}, Activation::tanh);
  const Prior rho = GaussianPrior{{1.0, 1.0, 1.0}};
  const auto y0 = random_input(sub, 3, 0.5);
  const auto x = random_input(sub, 3);
  for (const auto& h : {hessian_fd(rho, dec, y0, x), gauss_newton_full(rho, dec, y0, x)})
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        CHECK(std::abs(h.full.at(a, b) - h.full.at(b, a)) < 1e-8);
}
