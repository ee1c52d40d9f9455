#pragma once

// Shared helpers for the test binaries: random DAG construction within the
// network invariants, and error metrics for analytic-vs-numeric comparisons.

#include <cmath>
#include <cstdlib>
#include <vector>

#include "mdlae/codelength.hpp"
#include "mdlae/linalg.hpp"
#include "mdlae/net.hpp"
#include "mdlae/rng.hpp"

namespace testutil {

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b,
                          double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i], floor));
  return worst;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

struct DagOptions {
  int max_units = 12;
  double edge_prob = 0.6;
  double weight_scale = 0.8;
  bool force_identity = false;
};

// Random network respecting every structural invariant: unit 0 bias, inputs
// first, hidden in the middle, outputs last; every non-input unit gets at
// least one incoming edge from an earlier unit, so reachability holds.
inline mdlae::Network random_dag(mdlae::Rng& rng, const DagOptions& opt = {}) {
  using namespace mdlae;
  const int n_in = rng.uniform_int(1, 3);
  const int n_out = rng.uniform_int(1, 3);
  const int room = opt.max_units - 1 - n_in - n_out;
  const int n_hidden = rng.uniform_int(0, room < 0 ? 0 : room);
  const int total = 1 + n_in + n_hidden + n_out;

  NetworkSpec spec;
  spec.activation.assign(total, Activation::identity);
  const Activation acts[] = {Activation::identity, Activation::sigmoid, Activation::tanh};
  for (int u = 1 + n_in; u < total; ++u)
    spec.activation[u] = opt.force_identity ? Activation::identity : acts[rng.uniform_int(0, 2)];
  for (int k = 0; k < n_in; ++k) spec.inputs.push_back(1 + k);
  for (int k = 0; k < n_out; ++k) spec.outputs.push_back(1 + n_in + n_hidden + k);

  const int first_interior = 1 + n_in;
  const int first_output = 1 + n_in + n_hidden;
  for (int dst = first_interior; dst < total; ++dst) {
    std::vector<int> candidates;
    candidates.push_back(0);
    for (int src = 1; src < std::min(dst, first_output); ++src) candidates.push_back(src);
    bool any = false;
    for (int src : candidates) {
      if (rng.uniform() < opt.edge_prob) {
        spec.edges.push_back({src, dst, opt.weight_scale * rng.gauss()});
        any = true;
      }
    }
    if (!any) {
      const int src = candidates[rng.uniform_int(0, static_cast<int>(candidates.size()) - 1)];
      spec.edges.push_back({src, dst, opt.weight_scale * rng.gauss()});
    }
  }
  return Network(std::move(spec));
}

inline std::vector<double> random_input(mdlae::Rng& rng, int dim, double scale = 1.0) {
  std::vector<double> x(dim);
  for (double& v : x) v = scale * rng.gauss();
  return x;
}

// x_hat = W y + b as a one-layer identity network with bias edges.
inline mdlae::Decoder linear_decoder(const mdlae::Matrix& w, const std::vector<double>& b,
                                     std::vector<double> sigma) {
  using namespace mdlae;
  const int dy = w.cols, dx = w.rows;
  NetworkSpec spec;
  spec.activation.assign(1 + dy + dx, Activation::identity);
  for (int j = 0; j < dy; ++j) spec.inputs.push_back(1 + j);
  for (int k = 0; k < dx; ++k) spec.outputs.push_back(1 + dy + k);
  for (int k = 0; k < dx; ++k) {
    spec.edges.push_back({0, 1 + dy + k, b[k]});
    for (int j = 0; j < dy; ++j) spec.edges.push_back({1 + j, 1 + dy + k, w.at(k, j)});
  }
  Decoder dec{Network(NetworkSpec(spec)), mdlae::OutputModel{}};
  dec.out.sigma = std::move(sigma);
  return dec;
}

inline mdlae::Decoder random_linear(mdlae::Rng& rng, int dy, int dx, double scale = 0.7) {
  mdlae::Matrix w(dx, dy);
  std::vector<double> b(dx), sigma(dx);
  for (auto& v : w.data) v = scale * rng.gauss();
  for (auto& v : b) v = 0.5 * rng.gauss();
  for (auto& v : sigma) v = rng.uniform(0.5, 1.5);
  return linear_decoder(w, b, sigma);
}

inline mdlae::Decoder random_layered(mdlae::Rng& rng, const std::vector<int>& sizes,
                                     mdlae::Activation hidden) {
  using namespace mdlae;
  Decoder dec{make_layered(sizes, hidden, Activation::identity, rng), OutputModel{}};
  auto sub = rng.substream("sigma");
  dec.out.sigma.resize(sizes.back());
  for (auto& v : dec.out.sigma) v = sub.uniform(0.5, 1.5);
  return dec;
}

inline mdlae::BernoulliFd random_bernoulli_fd(mdlae::Rng& rng, int d) {
  mdlae::BernoulliFd fd;
  fd.prob.resize(d);
  for (auto& p : fd.prob) p = rng.uniform(0.05, 0.95);
  return fd;
}

// Random SPD matrix A = B B^T + eps I.
inline mdlae::Matrix random_spd(mdlae::Rng& rng, int d, double eps = 0.1) {
  mdlae::Matrix b(d, d);
  for (auto& v : b.data) v = rng.gauss();
  mdlae::Matrix a = mdlae::matmul(b, mdlae::transpose(b));
  for (int i = 0; i < d; ++i) a.at(i, i) += eps;
  return a;
}

}  // namespace testutil
