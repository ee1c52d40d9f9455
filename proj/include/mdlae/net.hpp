#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mdlae/rng.hpp"

// Directed acyclic networks in the usual "unit 0 is the always-on bias"
// convention: unit 0 has activity 1 and no incoming edges, biases are plain
// edges from it.  Weights live in one flat array in a canonical edge order
// (topological position of the target, then source index), so gradient
// vectors align with it index for index.

namespace mdlae {

enum class Activation { identity, sigmoid, tanh };

double activation_value(Activation a, double v);
double activation_deriv(Activation a, double v);
double activation_second_deriv(Activation a, double v);
const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct EdgeSpec {
  int src = 0;
  int dst = 0;
  double weight = 0.0;
};

struct NetworkSpec {
  std::vector<Activation> activation;  // one per unit, index 0 is the bias
  std::vector<EdgeSpec> edges;
  std::vector<int> inputs;
  std::vector<int> outputs;
};

class Network {
 public:
  struct Edge {
    int src;
    int dst;
  };

  // Validates the spec: acyclicity, bias conventions, disjoint input/output
  // sets, no incoming edges on inputs, no outgoing edges on outputs, and
  // reachability of every interior unit from the inputs or the bias.
  // Throws std::invalid_argument with a description otherwise.
  explicit Network(NetworkSpec spec);

  int unit_count() const { return static_cast<int>(activation_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int input_dim() const { return static_cast<int>(inputs_.size()); }
  int output_dim() const { return static_cast<int>(outputs_.size()); }

  const std::vector<int>& inputs() const { return inputs_; }
  const std::vector<int>& outputs() const { return outputs_; }
  Activation activation(int unit) const { return activation_[unit]; }
  bool is_input(int unit) const { return input_pos_[unit] >= 0; }
  bool is_output(int unit) const { return output_pos_[unit] >= 0; }

  const Edge& edge(int e) const { return edges_[e]; }
  double weight(int e) const { return weights_[e]; }
  void set_weight(int e, double w) { weights_[e] = w; }
  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  // canonical index of edge src->dst, -1 when absent
  int edge_index(int src, int dst) const;

  const std::vector<int>& topo_order() const { return topo_order_; }

  // incoming edges of a unit occupy a contiguous canonical range
  int in_begin(int unit) const { return in_begin_[unit]; }
  int in_end(int unit) const { return in_end_[unit]; }

  // Fast-path descriptor: incoming sources are an optional bias edge followed
  // by one consecutive index run, the layout layered builders produce.
  struct InRun {
    bool fast = false;
    int bias_edge = -1;   // -1 when the unit has no bias edge
    int run_edge = 0;     // first non-bias edge in the canonical array
    int run_src = 0;      // first source unit of the run
    int run_len = 0;
  };
  const InRun& in_run(int unit) const { return in_run_[unit]; }

  std::string serialize() const;
  static Network deserialize(std::istream& in);
  static Network deserialize_string(const std::string& text);

 private:
  std::vector<Activation> activation_;
  std::vector<Edge> edges_;
  std::vector<double> weights_;
  std::vector<int> inputs_, outputs_;
  std::vector<int> input_pos_, output_pos_;
  std::vector<int> topo_order_, topo_pos_;
  std::vector<int> in_begin_, in_end_;
  std::vector<InRun> in_run_;
};

struct ActivationRecord {
  std::vector<double> preact;    // V_i; for inputs and bias, mirrors activity
  std::vector<double> activity;  // a_i
};

ActivationRecord forward(const Network& net, std::span<const double> input);

std::vector<double> output_activities(const Network& net, const ActivationRecord& rec);

struct Gradients {
  std::vector<double> weight;  // canonical edge order
  std::vector<double> input;   // d loss / d input activity
};

// Reverse-mode pass from a loss gradient at the output activities.
Gradients backprop(const Network& net, const ActivationRecord& rec,
                   std::span<const double> output_grad);

// Central differences (L(w+h) - L(w-h)) / 2h per weight; `loss` maps output
// activities to a scalar.  The oracle the analytic passes are tested against.
std::vector<double> finite_diff_grad(Network& net, std::span<const double> input,
                                     const std::function<double(std::span<const double>)>& loss,
                                     double step = 1e-5);

// Fully connected layered helper: sizes front() inputs .. back() outputs,
// bias edges to every non-input unit, weights drawn as gauss / sqrt(fan_in).
Network make_layered(const std::vector<int>& sizes, Activation hidden,
                     Activation output, Rng& rng, bool with_bias = true,
                     double weight_scale = 1.0);

}  // namespace mdlae
