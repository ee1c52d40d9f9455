#include "mdlae/logdet_grad.hpp"

#include <cmath>
#include <stdexcept>
#include <variant>

#include "mdlae/kernels.hpp"

namespace mdlae {

namespace {

[[noreturn]] void bad_unit(const char* what, int unit) {
  throw std::runtime_error(std::string("three_pass_grad: non-finite ") + what +
                           " at unit " + std::to_string(unit));
}

}  // namespace

ThreePassResult three_pass_grad(const Network& net, const ActivationRecord& rec,
                                const EdgeFactor& phi, const InputWrap& psi,
                                std::span<const double> out_init) {
  if (static_cast<int>(out_init.size()) != net.output_dim())
    throw std::invalid_argument("three_pass_grad: out_init size mismatch");
  const int n = net.unit_count();
  ThreePassResult res;
  PropagationState& st = res.state;
  st.back.assign(n, 0.0);
  st.carry.assign(n, 0.0);
  st.preact_grad.assign(n, 0.0);
  st.act_deriv.resize(n);
  for (int u = 0; u < n; ++u)
    st.act_deriv[u] = activation_deriv(net.activation(u), rec.preact[u]);

  const auto& outs = net.outputs();
  for (std::size_t k = 0; k < outs.size(); ++k) st.back[outs[k]] = out_init[k];

  // backward sweep: a unit's value is final once every later unit has
  // scattered through its incoming edges
  const auto& order = net.topo_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int j = *it;
    if (!std::isfinite(st.back[j])) bad_unit("backward value", j);
    for (int e = net.in_begin(j); e < net.in_end(j); ++e)
      st.back[net.edge(e).src] +=
          phi.value(j, net.weight(e), rec.preact[j]) * st.back[j];
  }

  const auto& ins = net.inputs();
  for (std::size_t p = 0; p < ins.size(); ++p) {
    const double term = psi.value(static_cast<int>(p), st.back[ins[p]]);
    if (!std::isfinite(term)) bad_unit("wrap-up", ins[p]);
    res.s += term;
    st.carry[ins[p]] = psi.deriv(static_cast<int>(p), st.back[ins[p]]);
  }

  // forward sweep: wrap-up sensitivities travel with the same factors; the
  // bias carries zero since no wrap-up is attached to it
  for (int j : order) {
    if (net.is_input(j) || j == 0) continue;
    double acc = 0.0;
    for (int e = net.in_begin(j); e < net.in_end(j); ++e)
      acc += st.carry[net.edge(e).src] * phi.value(j, net.weight(e), rec.preact[j]);
    if (!std::isfinite(acc)) bad_unit("forward value", j);
    st.carry[j] = acc;
  }

  // second backward sweep: dS/dV per unit.  `chain` collects w * preact_grad
  // over outgoing edges; on the output layer it is still zero, which is the
  // required initialization there.
  std::vector<double> chain(n, 0.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int j = *it;
    if (net.is_input(j) || j == 0) continue;
    double direct = 0.0;
    for (int e = net.in_begin(j); e < net.in_end(j); ++e)
      direct += st.carry[net.edge(e).src] * phi.dv(j, net.weight(e), rec.preact[j]);
    const double dj = direct * st.back[j] + st.act_deriv[j] * chain[j];
    if (!std::isfinite(dj)) bad_unit("preactivation gradient", j);
    st.preact_grad[j] = dj;
    for (int e = net.in_begin(j); e < net.in_end(j); ++e)
      chain[net.edge(e).src] += net.weight(e) * dj;
  }

  res.weight_grad.resize(net.edge_count());
  for (int e = 0; e < net.edge_count(); ++e) {
    const auto& ed = net.edge(e);
    res.weight_grad[e] =
        st.carry[ed.src] * st.back[ed.dst] *
            phi.dw(ed.dst, net.weight(e), rec.preact[ed.dst]) +
        rec.activity[ed.src] * st.preact_grad[ed.dst];
  }
  // leftover chain at the input layer, no activation factor in the way
  res.input_grad.resize(ins.size());
  for (std::size_t p = 0; p < ins.size(); ++p) res.input_grad[p] = chain[ins[p]];
  return res;
}

LogDetGradResult log_det_grad(const Prior& prior, const Decoder& dec,
                              std::span<const double> y0) {
  const auto* g = std::get_if<GaussianPrior>(&prior);
  if (g == nullptr)
    throw std::invalid_argument("log_det_grad: Gaussian prior required");
  const Network& net = dec.net;
  const ActivationRecord rec = forward(net, y0);
  const int n = net.unit_count();

  std::vector<double> sp(n), spp(n);
  for (int u = 0; u < n; ++u) {
    sp[u] = activation_deriv(net.activation(u), rec.preact[u]);
    spp[u] = activation_second_deriv(net.activation(u), rec.preact[u]);
  }

  // backward pass, operation for operation the curvature recursion of
  // gn_layerwise_diag so the two values agree exactly
  std::vector<double> h(n, 0.0);
  const auto& outs = net.outputs();
  for (std::size_t k = 0; k < outs.size(); ++k) {
    const double s = dec.out.sigma[k];
    h[outs[k]] = 1.0 / (s * s);
  }
  const auto& order = net.topo_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int j = *it;
    if (net.is_input(j) || j == 0) continue;
    const double pull = sp[j] * sp[j] * h[j];
    if (pull == 0.0) continue;
    const auto& run = net.in_run(j);
    if (run.fast) {
      if (run.bias_edge >= 0) {
        const double w = net.weight(run.bias_edge);
        h[0] += pull * w * w;
      }
      kernels::sq_axpy(pull, net.weights().data() + run.run_edge,
                       h.data() + run.run_src, run.run_len);
    } else {
      for (int e = net.in_begin(j); e < net.in_end(j); ++e) {
        const double w = net.weight(e);
        h[net.edge(e).src] += pull * w * w;
      }
    }
  }

  LogDetGradResult res;
  const auto& ins = net.inputs();
  std::vector<double> c(n, 0.0);
  for (std::size_t p = 0; p < ins.size(); ++p) {
    const double arg = 1.0 / g->var[p] + h[ins[p]];
    if (!std::isfinite(arg))
      throw std::runtime_error("log_det_grad: non-finite curvature at input " +
                               std::to_string(ins[p]));
    res.log_det += std::log(arg);
    c[ins[p]] = 1.0 / arg;
  }

  // forward pass; q_j caches the squared-weight sum reused by the next pass.
  // The bias carries zero, so its edge contributes nothing here.
  std::vector<double> q(n, 0.0);
  for (int j : order) {
    if (net.is_input(j) || j == 0) continue;
    const auto& run = net.in_run(j);
    double acc;
    if (run.fast) {
      acc = kernels::sq_dot(net.weights().data() + run.run_edge,
                            c.data() + run.run_src, run.run_len);
    } else {
      acc = 0.0;
      for (int e = net.in_begin(j); e < net.in_end(j); ++e) {
        const double w = net.weight(e);
        acc += w * w * c[net.edge(e).src];
      }
    }
    q[j] = acc;
    c[j] = sp[j] * sp[j] * acc;
  }

  // second backward pass: d log det / dV, then scatter w * that into sources
  std::vector<double> d(n, 0.0), chain(n, 0.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int j = *it;
    if (net.is_input(j) || j == 0) continue;
    const double dj = 2.0 * sp[j] * spp[j] * h[j] * q[j] + sp[j] * chain[j];
    d[j] = dj;
    if (dj == 0.0) continue;  // identity outputs land here
    const auto& run = net.in_run(j);
    if (run.fast) {
      if (run.bias_edge >= 0) chain[0] += net.weight(run.bias_edge) * dj;
      kernels::axpy(dj, net.weights().data() + run.run_edge,
                    chain.data() + run.run_src, run.run_len);
    } else {
      for (int e = net.in_begin(j); e < net.in_end(j); ++e)
        chain[net.edge(e).src] += net.weight(e) * dj;
    }
  }

  // per-edge assembly: 2 s'^2 h_j * c_i w_ij + a_i d_j, one fused kernel per
  // incoming run; bias edges reduce to d_j since the bias carry is zero and
  // its activity is one
  res.weight_grad.assign(net.edge_count(), 0.0);
  for (int j : order) {
    if (net.is_input(j) || j == 0) continue;
    const double c1 = 2.0 * sp[j] * sp[j] * h[j];
    const auto& run = net.in_run(j);
    if (run.fast) {
      if (run.bias_edge >= 0) res.weight_grad[run.bias_edge] = d[j];
      kernels::mul_scaled_add(c1, c.data() + run.run_src,
                              net.weights().data() + run.run_edge, d[j],
                              rec.activity.data() + run.run_src,
                              res.weight_grad.data() + run.run_edge, run.run_len);
    } else {
      for (int e = net.in_begin(j); e < net.in_end(j); ++e) {
        const int i = net.edge(e).src;
        res.weight_grad[e] =
            c1 * c[i] * net.weight(e) + rec.activity[i] * d[j];
      }
    }
  }

  res.input_grad.resize(ins.size());
  for (std::size_t p = 0; p < ins.size(); ++p) res.input_grad[p] = chain[ins[p]];
  return res;
}

Matrix transfer_rates(const Network& net, const ActivationRecord& rec,
                      const EdgeFactor& phi, int max_units,
                      long long max_paths) {
  if (net.unit_count() > max_units)
    throw std::invalid_argument("transfer_rates: network too large to enumerate");
  const int n = net.unit_count();
  std::vector<std::vector<int>> out_edges(n);
  for (int e = 0; e < net.edge_count(); ++e)
    out_edges[net.edge(e).src].push_back(e);

  Matrix tau(n, n);
  long long paths = 0;
  std::function<void(int, int, double)> walk = [&](int l, int u, double prod) {
    if (++paths > max_paths)
      throw std::runtime_error("transfer_rates: path explosion");
    tau.at(l, u) += prod;
    for (int e : out_edges[u]) {
      const int j = net.edge(e).dst;
      walk(l, j, prod * phi.value(j, net.weight(e), rec.preact[j]));
    }
  };
  for (int l = 0; l < n; ++l) walk(l, l, 1.0);
  return tau;
}

}  // namespace mdlae
