#include "mdlae/net.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "mdlae/kernels.hpp"

namespace mdlae {

double activation_value(Activation a, double v) {
  switch (a) {
    case Activation::identity: return v;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-v));
    case Activation::tanh: return std::tanh(v);
  }
  throw std::logic_error("unknown activation");
}

double activation_deriv(Activation a, double v) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-v));
      return s * (1.0 - s);
    }
    case Activation::tanh: {
      const double t = std::tanh(v);
      return 1.0 - t * t;
    }
  }
  throw std::logic_error("unknown activation");
}

double activation_second_deriv(Activation a, double v) {
  switch (a) {
    case Activation::identity: return 0.0;
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-v));
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    case Activation::tanh: {
      const double t = std::tanh(v);
      return -2.0 * t * (1.0 - t * t);
    }
  }
  throw std::logic_error("unknown activation");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  throw std::logic_error("unknown activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation name: " + name);
}

Network::Network(NetworkSpec spec) {
  const int n = static_cast<int>(spec.activation.size());
  if (n < 1) throw std::invalid_argument("network: needs at least the bias unit");
  if (spec.inputs.empty()) throw std::invalid_argument("network: no input units");
  if (spec.outputs.empty()) throw std::invalid_argument("network: no output units");

  activation_ = std::move(spec.activation);
  inputs_ = spec.inputs;
  outputs_ = spec.outputs;

  auto check_unit = [&](int u, const char* what) {
    if (u < 0 || u >= n)
      throw std::invalid_argument(std::string("network: ") + what + " unit " +
                                  std::to_string(u) + " out of range");
  };

  input_pos_.assign(n, -1);
  output_pos_.assign(n, -1);
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    check_unit(inputs_[k], "input");
    if (inputs_[k] == 0) throw std::invalid_argument("network: bias unit 0 cannot be an input");
    if (input_pos_[inputs_[k]] >= 0)
      throw std::invalid_argument("network: duplicate input unit " + std::to_string(inputs_[k]));
    input_pos_[inputs_[k]] = static_cast<int>(k);
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) {
    check_unit(outputs_[k], "output");
    if (outputs_[k] == 0) throw std::invalid_argument("network: bias unit 0 cannot be an output");
    if (output_pos_[outputs_[k]] >= 0)
      throw std::invalid_argument("network: duplicate output unit " + std::to_string(outputs_[k]));
    if (input_pos_[outputs_[k]] >= 0)
      throw std::invalid_argument("network: unit " + std::to_string(outputs_[k]) +
                                  " cannot be both input and output");
    output_pos_[outputs_[k]] = static_cast<int>(k);
  }

  for (const EdgeSpec& e : spec.edges) {
    check_unit(e.src, "edge source");
    check_unit(e.dst, "edge target");
    if (e.dst == 0) throw std::invalid_argument("network: bias unit 0 cannot receive edges");
    if (input_pos_[e.dst] >= 0)
      throw std::invalid_argument("network: input unit " + std::to_string(e.dst) +
                                  " cannot receive edges");
    if (output_pos_[e.src] >= 0)
      throw std::invalid_argument("network: output unit " + std::to_string(e.src) +
                                  " cannot be an edge source");
  }

  // deterministic topological order: smallest ready index first
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> out_adj(n);
  for (const EdgeSpec& e : spec.edges) {
    ++indegree[e.dst];
    out_adj[e.src].push_back(e.dst);
  }
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int u = 0; u < n; ++u)
    if (indegree[u] == 0) ready.push(u);
  topo_order_.reserve(n);
  while (!ready.empty()) {
    const int u = ready.top();
    ready.pop();
    topo_order_.push_back(u);
    for (int v : out_adj[u])
      if (--indegree[v] == 0) ready.push(v);
  }
  if (static_cast<int>(topo_order_.size()) != n)
    throw std::invalid_argument("network: graph has a cycle");
  topo_pos_.assign(n, 0);
  for (int i = 0; i < n; ++i) topo_pos_[topo_order_[i]] = i;

  // canonical edge order
  std::vector<int> order(spec.edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const EdgeSpec &ea = spec.edges[a], &eb = spec.edges[b];
    if (topo_pos_[ea.dst] != topo_pos_[eb.dst]) return topo_pos_[ea.dst] < topo_pos_[eb.dst];
    return ea.src < eb.src;
  });
  edges_.reserve(spec.edges.size());
  weights_.reserve(spec.edges.size());
  for (int i : order) {
    edges_.push_back({spec.edges[i].src, spec.edges[i].dst});
    weights_.push_back(spec.edges[i].weight);
  }
  for (std::size_t e = 1; e < edges_.size(); ++e)
    if (edges_[e].src == edges_[e - 1].src && edges_[e].dst == edges_[e - 1].dst)
      throw std::invalid_argument("network: duplicate edge " + std::to_string(edges_[e].src) +
                                  " -> " + std::to_string(edges_[e].dst));

  in_begin_.assign(n, 0);
  in_end_.assign(n, 0);
  for (int e = 0; e < static_cast<int>(edges_.size());) {
    const int d = edges_[e].dst;
    in_begin_[d] = e;
    while (e < static_cast<int>(edges_.size()) && edges_[e].dst == d) ++e;
    in_end_[d] = e;
  }

  // reachability from inputs and bias
  {
    std::vector<char> seen(n, 0);
    std::vector<int> stack;
    stack.push_back(0);
    seen[0] = 1;
    for (int u : inputs_) {
      seen[u] = 1;
      stack.push_back(u);
    }
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : out_adj[u])
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
    }
    for (int u = 0; u < n; ++u)
      if (!seen[u])
        throw std::invalid_argument("network: unit " + std::to_string(u) +
                                    " unreachable from inputs and bias");
  }

  // fast-path descriptors
  in_run_.assign(n, InRun{});
  for (int u = 0; u < n; ++u) {
    const int lo = in_begin(u), hi = in_end(u);
    if (lo >= hi) continue;
    InRun run;
    int e = lo;
    if (edges_[e].src == 0) {
      run.bias_edge = e;
      ++e;
    }
    run.run_edge = e;
    run.run_len = hi - e;
    run.run_src = (e < hi) ? edges_[e].src : 0;
    bool consecutive = true;
    for (int k = e; k < hi; ++k)
      if (edges_[k].src != run.run_src + (k - e)) {
        consecutive = false;
        break;
      }
    run.fast = consecutive;
    in_run_[u] = run;
  }
}

int Network::edge_index(int src, int dst) const {
  for (int e = in_begin(dst); e < in_end(dst); ++e)
    if (edges_[e].src == src) return e;
  return -1;
}

ActivationRecord forward(const Network& net, std::span<const double> input) {
  if (static_cast<int>(input.size()) != net.input_dim())
    throw std::invalid_argument("forward: input size mismatch");
  const int n = net.unit_count();
  ActivationRecord rec;
  rec.preact.assign(n, 0.0);
  rec.activity.assign(n, 0.0);
  rec.activity[0] = 1.0;
  rec.preact[0] = 1.0;
  for (int k = 0; k < net.input_dim(); ++k) {
    rec.activity[net.inputs()[k]] = input[k];
    rec.preact[net.inputs()[k]] = input[k];
  }
  const double* w = net.weights().data();
  double* act = rec.activity.data();
  for (int u : net.topo_order()) {
    if (u == 0 || net.is_input(u)) continue;
    double v;
    const Network::InRun& run = net.in_run(u);
    if (run.fast) {
      v = run.bias_edge >= 0 ? w[run.bias_edge] : 0.0;
      v += kernels::dot(w + run.run_edge, act + run.run_src,
                        static_cast<std::size_t>(run.run_len));
    } else {
      v = 0.0;
      for (int e = net.in_begin(u); e < net.in_end(u); ++e)
        v += w[e] * act[net.edge(e).src];
    }
    rec.preact[u] = v;
    rec.activity[u] = activation_value(net.activation(u), v);
  }
  return rec;
}

std::vector<double> output_activities(const Network& net, const ActivationRecord& rec) {
  std::vector<double> out(net.output_dim());
  for (int k = 0; k < net.output_dim(); ++k) out[k] = rec.activity[net.outputs()[k]];
  return out;
}

Gradients backprop(const Network& net, const ActivationRecord& rec,
                   std::span<const double> output_grad) {
  if (static_cast<int>(output_grad.size()) != net.output_dim())
    throw std::invalid_argument("backprop: output gradient size mismatch");
  const int n = net.unit_count();
  Gradients g;
  g.weight.assign(net.edge_count(), 0.0);
  std::vector<double> act_grad(n, 0.0);
  for (int k = 0; k < net.output_dim(); ++k)
    act_grad[net.outputs()[k]] = output_grad[k];

  const double* w = net.weights().data();
  const double* act = rec.activity.data();
  const std::vector<int>& topo = net.topo_order();
  for (int i = n - 1; i >= 0; --i) {
    const int u = topo[i];
    if (u == 0 || net.is_input(u)) continue;
    const double gv = act_grad[u] * activation_deriv(net.activation(u), rec.preact[u]);
    if (gv == 0.0) continue;
    const Network::InRun& run = net.in_run(u);
    if (run.fast) {
      if (run.bias_edge >= 0) g.weight[run.bias_edge] = gv;
      kernels::axpy(gv, act + run.run_src, g.weight.data() + run.run_edge,
                    static_cast<std::size_t>(run.run_len));
      kernels::axpy(gv, w + run.run_edge, act_grad.data() + run.run_src,
                    static_cast<std::size_t>(run.run_len));
    } else {
      for (int e = net.in_begin(u); e < net.in_end(u); ++e) {
        const int s = net.edge(e).src;
        g.weight[e] = act[s] * gv;
        act_grad[s] += w[e] * gv;
      }
    }
  }

  g.input.resize(net.input_dim());
  for (int k = 0; k < net.input_dim(); ++k) g.input[k] = act_grad[net.inputs()[k]];
  return g;
}

std::vector<double> finite_diff_grad(Network& net, std::span<const double> input,
                                     const std::function<double(std::span<const double>)>& loss,
                                     double step) {
  std::vector<double> grad(net.edge_count());
  for (int e = 0; e < net.edge_count(); ++e) {
    const double w0 = net.weight(e);
    net.set_weight(e, w0 + step);
    ActivationRecord rp = forward(net, input);
    const double lp = loss(output_activities(net, rp));
    net.set_weight(e, w0 - step);
    ActivationRecord rm = forward(net, input);
    const double lm = loss(output_activities(net, rm));
    net.set_weight(e, w0);
    grad[e] = (lp - lm) / (2.0 * step);
  }
  return grad;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_double(const std::string& tok) {
  double v = 0.0;
  const std::from_chars_result res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw std::invalid_argument("network parse: bad number '" + tok + "'");
  return v;
}

}  // namespace

std::string Network::serialize() const {
  std::string out;
  for (int u = 0; u < unit_count(); ++u) {
    out += "unit ";
    out += std::to_string(u);
    out += ' ';
    out += activation_name(activation_[u]);
    out += '\n';
  }
  out += "inputs";
  for (int u : inputs_) {
    out += ' ';
    out += std::to_string(u);
  }
  out += "\noutputs";
  for (int u : outputs_) {
    out += ' ';
    out += std::to_string(u);
  }
  out += '\n';
  for (int e = 0; e < edge_count(); ++e) {
    out += "edge ";
    out += std::to_string(edges_[e].src);
    out += ' ';
    out += std::to_string(edges_[e].dst);
    out += ' ';
    append_double(out, weights_[e]);
    out += '\n';
  }
  return out;
}

Network Network::deserialize(std::istream& in) {
  NetworkSpec spec;
  std::vector<std::pair<int, Activation>> units;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "unit") {
      int id;
      std::string act;
      if (!(ls >> id >> act)) throw std::invalid_argument("network parse: bad unit line");
      units.emplace_back(id, activation_from_name(act));
    } else if (kind == "inputs") {
      int id;
      while (ls >> id) spec.inputs.push_back(id);
    } else if (kind == "outputs") {
      int id;
      while (ls >> id) spec.outputs.push_back(id);
    } else if (kind == "edge") {
      int src, dst;
      std::string wtok;
      if (!(ls >> src >> dst >> wtok)) throw std::invalid_argument("network parse: bad edge line");
      spec.edges.push_back({src, dst, parse_double(wtok)});
    } else {
      throw std::invalid_argument("network parse: unknown line kind '" + kind + "'");
    }
  }
  int max_id = -1;
  for (const auto& [id, act] : units) max_id = std::max(max_id, id);
  if (max_id < 0) throw std::invalid_argument("network parse: no units");
  spec.activation.assign(max_id + 1, Activation::identity);
  std::vector<char> seen(max_id + 1, 0);
  for (const auto& [id, act] : units) {
    if (seen[id]) throw std::invalid_argument("network parse: duplicate unit " + std::to_string(id));
    seen[id] = 1;
    spec.activation[id] = act;
  }
  for (int u = 0; u <= max_id; ++u)
    if (!seen[u]) throw std::invalid_argument("network parse: missing unit " + std::to_string(u));
  return Network(std::move(spec));
}

Network Network::deserialize_string(const std::string& text) {
  std::istringstream in(text);
  return deserialize(in);
}

Network make_layered(const std::vector<int>& sizes, Activation hidden,
                     Activation output, Rng& rng, bool with_bias,
                     double weight_scale) {
  if (sizes.size() < 2) throw std::invalid_argument("make_layered: need at least two layers");
  for (int s : sizes)
    if (s <= 0) throw std::invalid_argument("make_layered: layer sizes must be positive");

  NetworkSpec spec;
  int total = 1;
  std::vector<int> layer_start(sizes.size());
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    layer_start[l] = total;
    total += sizes[l];
  }
  spec.activation.assign(total, Activation::identity);
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    const Activation act = (l + 1 == sizes.size()) ? output : hidden;
    for (int k = 0; k < sizes[l]; ++k) spec.activation[layer_start[l] + k] = act;
  }
  for (int k = 0; k < sizes.front(); ++k) spec.inputs.push_back(1 + k);
  for (int k = 0; k < sizes.back(); ++k) spec.outputs.push_back(layer_start.back() + k);

  for (std::size_t l = 1; l < sizes.size(); ++l) {
    const double scale = weight_scale / std::sqrt(static_cast<double>(sizes[l - 1]));
    for (int k = 0; k < sizes[l]; ++k) {
      const int dst = layer_start[l] + k;
      if (with_bias) spec.edges.push_back({0, dst, 0.0});
      for (int j = 0; j < sizes[l - 1]; ++j)
        spec.edges.push_back({layer_start[l - 1] + j, dst, scale * rng.gauss()});
    }
  }
  return Network(std::move(spec));
}

}  // namespace mdlae
