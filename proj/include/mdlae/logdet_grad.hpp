#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mdlae/codelength.hpp"
#include "mdlae/linalg.hpp"
#include "mdlae/net.hpp"
#include "mdlae/priors.hpp"

// Exact gradients of backpropagated scalars.  A per-edge factor family
// phi_j(w, V_j) pushes fixed output-layer values backward through the graph,
// a per-input wrap-up psi_i turns the arriving values into a scalar S, and
// three graph sweeps produce dS/dw for every weight at a small constant
// multiple of the cost of ordinary forward + backward passes.  The log
// determinant of the layerwise diagonal curvature is the production
// instantiation; the generic entry point exists so tests can drive the
// machinery with arbitrary factor families.

namespace mdlae {

// Edge factor phi_j(w, V): evaluated per edge at the edge weight and the
// target unit's preactivation.  `unit` is the target, so families may depend
// on the unit's activation kind.  Partials are analytic, not differenced.
struct EdgeFactor {
  std::function<double(int unit, double w, double v)> value;
  std::function<double(int unit, double w, double v)> dw;
  std::function<double(int unit, double w, double v)> dv;
};

// Per-input wrap-up psi_i with derivative; `input` indexes net.inputs().
struct InputWrap {
  std::function<double(int input, double b)> value;
  std::function<double(int input, double b)> deriv;
};

// Per-unit scratch of the three sweeps, exposed for the path-sum
// cross-checks.
struct PropagationState {
  std::vector<double> back;         // backward factor-weighted values
  std::vector<double> carry;        // wrap-up sensitivities carried forward
  std::vector<double> preact_grad;  // dS / dV per unit
  std::vector<double> act_deriv;    // s'(V) cache, from preactivations
};

struct ThreePassResult {
  double s = 0.0;
  std::vector<double> weight_grad;  // canonical edge order
  // dS / d input activity: the second backward pass continued through the
  // input edges with no activation factor, so an upstream encoder producing
  // the input vector can receive the gradient of S.
  std::vector<double> input_grad;
  PropagationState state;
};

// Computes S = sum_i psi_i(back_i) over the input layer, where back is the
// backward recursion back_i = sum_{i->j} phi_j(w_ij, V_j) back_j initialized
// with `out_init` on the output layer (held fixed under differentiation),
// and returns the exact gradient of S with respect to every weight.
// Throws std::runtime_error naming the offending unit when an intermediate
// turns non-finite.
ThreePassResult three_pass_grad(const Network& net, const ActivationRecord& rec,
                                const EdgeFactor& phi, const InputWrap& psi,
                                std::span<const double> out_init);

// log det of the layerwise diagonal curvature of the decoder at y0 together
// with its exact weight gradient: the three-pass scheme fused with the
// factors w^2 s'(V)^2, wrap-ups log(1/lambda_i + .), and output values
// 1/sigma_k^2, running on the shared kernels with no closure dispatch.
// The value matches the sum of logs of gn_layerwise_diag exactly.
struct LogDetGradResult {
  double log_det = 0.0;
  std::vector<double> weight_grad;  // canonical edge order
  std::vector<double> input_grad;   // d log det / d y0
};

LogDetGradResult log_det_grad(const Prior& prior, const Decoder& dec,
                              std::span<const double> y0);

// Transfer rates by explicit path enumeration: tau(l, m) sums over every
// directed path from l to m the product of edge factors along the path,
// counting the empty path as 1 (so tau(m, m) = 1 and tau(l, m) = 0 without
// a path).  Cross-check oracle for the recursive sweeps; refuses networks
// above `max_units` units and aborts after `max_paths` enumerated paths.
Matrix transfer_rates(const Network& net, const ActivationRecord& rec,
                      const EdgeFactor& phi, int max_units = 12,
                      long long max_paths = 2000000);

}  // namespace mdlae
