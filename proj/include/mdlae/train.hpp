#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdlae/codelength.hpp"
#include "mdlae/contractive.hpp"
#include "mdlae/linalg.hpp"
#include "mdlae/net.hpp"
#include "mdlae/noise.hpp"
#include "mdlae/priors.hpp"
#include "mdlae/rng.hpp"

// Objective composition and the optimization loop.  Five objective kinds map
// one-to-one onto the bound family: plain reconstruction, the variational
// bound in the encoder's natural feature family, Gaussian feature noise with
// fixed or per-sample optimal covariance, the direct log-determinant
// objective, and the Jacobian penalty.  Plain gradient descent with optional
// momentum; batches aggregate by summing over samples.

namespace mdlae {

struct AutoEncoder {
  Network enc;  // data -> feature means (or Bernoulli probabilities)
  Decoder dec;
};

// encoder output must feed the decoder input, and both nets nonempty
void validate_autoencoder(const AutoEncoder& ae);

struct Objective {
  enum class Kind { reconstruction, f_gen, denoising, logdet_direct, contractive };
  Kind kind = Kind::reconstruction;
  // denoising, and f_gen under a Gaussian prior (where the two coincide)
  NoiseSpec noise;
  int mc_samples = 1;
  ContractiveVariant variant = ContractiveVariant::diag;  // contractive only
};

const char* objective_kind_name(Objective::Kind kind);
Objective::Kind objective_kind_from_name(const std::string& name);

// Column split of the objective; loss = l_rec + kl_term + extra_term.
//   reconstruction   l_rec | 0 | 0
//   f_gen (discrete) enumerated E l_rec | KL(fd, prior) | 0
//   denoising        MC E l_rec | MC -E log rho | -log det cov/2 - d/2 (1+log 2pi)
//   logdet_direct    l_rec | -log rho(f) | log det curvature / 2 - d/2 log 2pi
//   contractive      l_rec | -log rho(f) | penalty - d/2 log 2pi
struct StepResult {
  double loss = 0.0;
  double l_rec = 0.0;
  double kl_term = 0.0;
  double extra_term = 0.0;
};

struct ParamGrads {
  std::vector<double> encoder;  // canonical edge order of ae.enc
  std::vector<double> decoder;  // canonical edge order of ae.dec.net
};

// Objective value summed over `rows`, plus, when `grads` is non-null, the
// exact parameter gradient of that value.  Per-sample randomness derives
// from substreams of `rng` keyed by row id, so repeated calls with the same
// rng replay the same noise draws: finite differences of the value match the
// analytic gradient.  Optimal-noise covariances are resolved per sample at
// the current parameters and held fixed within the call.  The contractive
// penalty's gradient is central-differenced (its squared path sums are
// outside what the recursive passes carry); everything else is analytic.
StepResult objective_eval(const AutoEncoder& ae, const Prior& prior,
                          const Objective& obj, const Matrix& data,
                          std::span<const int> rows, const Rng& rng,
                          ParamGrads* grads = nullptr);

// Feature distribution the objective attaches to one sample: Dirac at f(x)
// for the deterministic objectives, Bernoulli(f(x)) for f_gen under a
// discrete prior, N(f(x), cov) with the resolved noise otherwise.
FeatureDistribution objective_fd(const AutoEncoder& ae, const Prior& prior,
                                 const Objective& obj, std::span<const double> x);

struct OptState {
  std::vector<double> enc_velocity;
  std::vector<double> dec_velocity;
};

// One descent step on the batch: evaluate, then w += m v - lr grad.
// learning_rate 0 leaves the parameters untouched and still reports the loss.
StepResult train_step(AutoEncoder& ae, const Prior& prior, const Objective& obj,
                      const Matrix& data, std::span<const int> rows,
                      double learning_rate, double momentum, OptState& state,
                      const Rng& rng);

struct TrainConfig {
  double learning_rate = 0.01;  // applied to the batch mean gradient
  double momentum = 0.0;
  int epochs = 1;
  int batch_size = 32;
  std::uint64_t seed = 1;
  int prior_refit_every = 0;     // epochs between prior refits, 0 disables
  int sigma_refit_every = 0;     // epochs between output-sigma refits
  int oracle_max_samples = 64;   // continuous l_gen oracle gate in the report
  Objective objective;
};

void validate_train_config(const TrainConfig& cfg);

// per-sample means over the epoch's steps
struct EpochLog {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double l_rec = 0.0;
  double kl_term = 0.0;
  double extra_term = 0.0;
};

// header line, then one tab-separated line per epoch
std::string format_log_tsv(const std::vector<EpochLog>& log);

// Per-sample codelengths under the objective's feature distribution.  The
// two-part code appears for discrete f_gen runs; the generative-codelength
// oracle and bound_gap = l_f_gen - l_gen appear when exact evaluation is
// feasible: always for discrete features (d <= 12), and for Gaussian priors
// of dimension <= 2 when the dataset has at most `oracle_max_samples` rows.
CodelengthReport evaluate_report(const AutoEncoder& ae, const Prior& prior,
                                 const Objective& obj, const Matrix& data,
                                 int oracle_max_samples, const Rng& rng);

struct TrainResult {
  AutoEncoder model;
  Prior prior;
  std::vector<EpochLog> log;
  CodelengthReport report;
};

// Epochs of shuffled minibatch steps with refits at the configured cadences,
// then the final report.  Fully deterministic given config and data; a
// non-finite loss halts with a diagnostic naming the epoch and batch.
TrainResult run(AutoEncoder ae, Prior prior, const Matrix& data,
                const TrainConfig& cfg);

// Central-difference audit of every objective's composite gradient (and of
// the fused curvature gradient) on small random instances.  `corrupt` skews
// one analytic entry per objective so the harness can prove it fails.
struct GradCheckOptions {
  std::uint64_t seed = 1;
  double step = 1e-5;
  double tol = 1e-4;
  bool corrupt = false;
};

struct GradCheckEntry {
  std::string objective;
  double worst_rel = 0.0;  // |analytic - differenced| / (1 + |differenced|)
  bool pass = false;
};

std::vector<GradCheckEntry> grad_check_all(const GradCheckOptions& opt);

}  // namespace mdlae
