#include "mdlae/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>

#include "mdlae/kernels.hpp"
#include "mdlae/logdet_grad.hpp"
#include "mdlae/outvar.hpp"

namespace mdlae {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr int kTrainEnumCap = 12;  // 2^d decoder passes per sample and step

std::span<const double> row(const Matrix& m, int i) {
  return {m.data.data() + static_cast<std::size_t>(i) * m.cols,
          static_cast<std::size_t>(m.cols)};
}

const GaussianPrior& gaussian_or_throw(const Prior& prior, const char* who) {
  const auto* g = std::get_if<GaussianPrior>(&prior);
  if (g == nullptr)
    throw std::invalid_argument(std::string(who) + ": Gaussian prior required");
  return *g;
}

// same accumulation as reconstruction_error, from an existing forward pass
double recon_nats(const Decoder& dec, const ActivationRecord& rec,
                  std::span<const double> x) {
  const auto& outs = dec.net.outputs();
  double acc = 0.0;
  for (std::size_t k = 0; k < outs.size(); ++k) {
    const double xhat = rec.activity[outs[k]];
    if (!std::isfinite(xhat))
      throw std::runtime_error("objective_eval: non-finite decoder output");
    const double s = dec.out.sigma[k];
    const double r = x[k] - xhat;
    acc += r * r / (2.0 * s * s) + std::log(s) + 0.5 * kLogTwoPi;
  }
  return acc;
}

void residual_seed(const Decoder& dec, const ActivationRecord& rec,
                   std::span<const double> x, double scale,
                   std::vector<double>& seed) {
  const auto& outs = dec.net.outputs();
  seed.resize(outs.size());
  for (std::size_t k = 0; k < outs.size(); ++k) {
    const double s = dec.out.sigma[k];
    seed[k] = scale * (rec.activity[outs[k]] - x[k]) / (s * s);
  }
}

FeatureDistribution noisy_feature(const std::vector<double>& f, const Covariance& cov) {
  if (const auto* d = std::get_if<DiagCov>(&cov)) return GaussianDiagFd{f, d->var};
  return GaussianFullFd{f, std::get<FullCov>(cov).cov};
}

constexpr double kProbFloor = 1e-12;

// Architecture guard plus corner handling: features outside [0, 1] mean the
// encoder cannot parametrize a Bernoulli code at all; saturated sigmoids that
// round to exactly 0 or 1 are pulled a hair inside so the enumeration
// weights and the KL stay differentiable.
std::vector<double> feature_probabilities(std::vector<double> f) {
  for (double& v : f) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument(
          "f_gen objective: encoder features must be probabilities in [0, 1]; "
          "use a sigmoid output layer");
    v = std::min(std::max(v, kProbFloor), 1.0 - kProbFloor);
  }
  return f;
}

void add_into(std::vector<double>& acc, const std::vector<double>& g) {
  kernels::axpy(1.0, g.data(), acc.data(), acc.size());
}

// ---- per-sample objective terms -------------------------------------------

void add_reconstruction(const AutoEncoder& ae, const ActivationRecord& enc_rec,
                        const std::vector<double>& f, std::span<const double> x,
                        StepResult& out, ParamGrads* grads) {
  const ActivationRecord rec = forward(ae.dec.net, f);
  const double nats = recon_nats(ae.dec, rec, x);
  out.loss += nats;
  out.l_rec += nats;
  if (grads == nullptr) return;
  std::vector<double> seed;
  residual_seed(ae.dec, rec, x, 1.0, seed);
  const Gradients gd = backprop(ae.dec.net, rec, seed);
  add_into(grads->decoder, gd.weight);
  add_into(grads->encoder, backprop(ae.enc, enc_rec, gd.input).weight);
}

void add_f_gen_discrete(const AutoEncoder& ae, const Prior& prior,
                        const ActivationRecord& enc_rec, const std::vector<double>& f,
                        std::span<const double> x, StepResult& out, ParamGrads* grads) {
  const int d = static_cast<int>(f.size());
  if (d > kTrainEnumCap)
    throw std::invalid_argument("f_gen objective: feature dimension " +
                                std::to_string(d) + " exceeds the training cap " +
                                std::to_string(kTrainEnumCap));
  const std::vector<double> p = feature_probabilities(f);
  std::vector<double> rho(static_cast<std::size_t>(d), 0.5);
  if (const auto* bp = std::get_if<BernoulliPrior>(&prior)) rho = bp->prob;

  const FeatureDistribution fd = BernoulliFd{p};
  const double kl = kl_to_prior(fd, prior);
  double e_l_rec = 0.0;
  std::vector<double> dp(static_cast<std::size_t>(d), 0.0);
  std::vector<double> seed;
  for (std::uint32_t m = 0; m < (std::uint32_t{1} << d); ++m) {
    const double q = discrete_fd_prob(fd, m);
    if (q == 0.0) continue;
    const std::vector<double> y = binary_pattern(m, d);
    const ActivationRecord rec = forward(ae.dec.net, y);
    const double nats = recon_nats(ae.dec, rec, x);
    e_l_rec += q * nats;
    if (grads == nullptr) continue;
    residual_seed(ae.dec, rec, x, q, seed);
    add_into(grads->decoder, backprop(ae.dec.net, rec, seed).weight);
    // d q(y) / d p_i = q(y) / p_i on set bits, -q(y) / (1 - p_i) otherwise
    for (int i = 0; i < d; ++i)
      dp[i] += nats * q * (y[i] == 1.0 ? 1.0 / p[i] : -1.0 / (1.0 - p[i]));
  }
  out.loss += e_l_rec + kl;
  out.l_rec += e_l_rec;
  out.kl_term += kl;
  if (grads == nullptr) return;
  for (int i = 0; i < d; ++i)
    dp[i] += std::log(p[i] / rho[i]) - std::log((1.0 - p[i]) / (1.0 - rho[i]));
  add_into(grads->encoder, backprop(ae.enc, enc_rec, dp).weight);
}

void add_denoising(const AutoEncoder& ae, const Prior& prior, const Objective& obj,
                   const std::vector<double>& f, std::span<const double> x,
                   const Rng& sample_rng, StepResult& out, ParamGrads* grads) {
  gaussian_or_throw(prior, "denoising objective");
  const Covariance cov = resolve_noise(obj.noise, prior, ae.dec, f, x);
  const int d = static_cast<int>(f.size());
  const FeatureDistribution fd = noisy_feature(f, cov);

  // the Monte Carlo value pairs with denoising_grad draw for draw, so
  // differences of this value match the analytic gradient
  Rng value_rng = sample_rng.substream("draws");
  double e_rec = 0.0;
  double e_nlrho = 0.0;
  for (int i = 0; i < obj.mc_samples; ++i) {
    const std::vector<double> y = sample(fd, value_rng);
    e_rec += reconstruction_error(ae.dec, y, x);
    e_nlrho -= prior_log_density(prior, y);
  }
  e_rec /= obj.mc_samples;
  e_nlrho /= obj.mc_samples;
  const double extra = -0.5 * cov_log_det(cov) - 0.5 * d * (1.0 + kLogTwoPi);
  out.loss += e_rec + e_nlrho + extra;
  out.l_rec += e_rec;
  out.kl_term += e_nlrho;
  out.extra_term += extra;
  if (grads == nullptr) return;
  Rng grad_rng = sample_rng.substream("draws");  // identical draws
  const EncoderDecoderGrads eg =
      denoising_grad(prior, ae.enc, ae.dec, x, cov, obj.mc_samples, grad_rng);
  add_into(grads->encoder, eg.encoder_weight);
  add_into(grads->decoder, eg.decoder_weight);
}

void add_logdet(const AutoEncoder& ae, const Prior& prior,
                const ActivationRecord& enc_rec, const std::vector<double>& f,
                std::span<const double> x, StepResult& out, ParamGrads* grads) {
  const auto& g = gaussian_or_throw(prior, "logdet objective");
  const ActivationRecord rec = forward(ae.dec.net, f);
  const double nats = recon_nats(ae.dec, rec, x);
  const double nlrho = -prior_log_density(prior, f);
  const LogDetGradResult ld = log_det_grad(prior, ae.dec, f);
  const int d = static_cast<int>(f.size());
  const double extra = 0.5 * ld.log_det - 0.5 * d * kLogTwoPi;
  out.loss += nats + nlrho + extra;
  out.l_rec += nats;
  out.kl_term += nlrho;
  out.extra_term += extra;
  if (grads == nullptr) return;
  std::vector<double> seed;
  residual_seed(ae.dec, rec, x, 1.0, seed);
  const Gradients gd = backprop(ae.dec.net, rec, seed);
  add_into(grads->decoder, gd.weight);
  kernels::axpy(0.5, ld.weight_grad.data(), grads->decoder.data(),
                grads->decoder.size());
  std::vector<double> enc_seed(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    enc_seed[i] = gd.input[i] + f[i] / g.var[i] + 0.5 * ld.input_grad[i];
  add_into(grads->encoder, backprop(ae.enc, enc_rec, enc_seed).weight);
}

void add_contractive(const AutoEncoder& ae, const Prior& prior, const Objective& obj,
                     const ActivationRecord& enc_rec, const std::vector<double>& f,
                     std::span<const double> x, StepResult& out, ParamGrads* grads) {
  gaussian_or_throw(prior, "contractive objective");
  const double bound = contractive_bound(prior, ae.dec, f, x, obj.variant);
  const double nats = reconstruction_error(ae.dec, f, x);
  const double nlrho = -prior_log_density(prior, f);
  out.loss += bound;
  out.l_rec += nats;
  out.kl_term += nlrho;
  out.extra_term += bound - nats - nlrho;
  if (grads == nullptr) return;
  // squared-Jacobian penalty: differenced, the objective is cheap at these sizes
  const double h = 1e-6;
  Decoder probe = ae.dec;
  for (int e = 0; e < probe.net.edge_count(); ++e) {
    const double w0 = probe.net.weight(e);
    probe.net.set_weight(e, w0 + h);
    const double up = contractive_bound(prior, probe, f, x, obj.variant);
    probe.net.set_weight(e, w0 - h);
    const double dn = contractive_bound(prior, probe, f, x, obj.variant);
    probe.net.set_weight(e, w0);
    grads->decoder[e] += (up - dn) / (2.0 * h);
  }
  std::vector<double> fp(f);
  std::vector<double> fseed(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    fp[i] = f[i] + h;
    const double up = contractive_bound(prior, ae.dec, fp, x, obj.variant);
    fp[i] = f[i] - h;
    const double dn = contractive_bound(prior, ae.dec, fp, x, obj.variant);
    fp[i] = f[i];
    fseed[i] = (up - dn) / (2.0 * h);
  }
  add_into(grads->encoder, backprop(ae.enc, enc_rec, fseed).weight);
}

Objective::Kind effective_kind(const Objective& obj, const Prior& prior) {
  // the variational bound with Gaussian features is the denoising bound
  if (obj.kind == Objective::Kind::f_gen && !prior_is_discrete(prior))
    return Objective::Kind::denoising;
  return obj.kind;
}

}  // namespace

void validate_autoencoder(const AutoEncoder& ae) {
  validate_decoder(ae.dec);
  if (ae.enc.output_dim() != decoder_feature_dim(ae.dec))
    throw std::invalid_argument("autoencoder: encoder output dimension " +
                                std::to_string(ae.enc.output_dim()) +
                                " does not feed the decoder input dimension " +
                                std::to_string(decoder_feature_dim(ae.dec)));
  if (ae.enc.input_dim() != decoder_data_dim(ae.dec))
    throw std::invalid_argument("autoencoder: encoder input dimension " +
                                std::to_string(ae.enc.input_dim()) +
                                " does not match the decoder data dimension " +
                                std::to_string(decoder_data_dim(ae.dec)));
}

const char* objective_kind_name(Objective::Kind kind) {
  switch (kind) {
    case Objective::Kind::reconstruction: return "reconstruction";
    case Objective::Kind::f_gen: return "f_gen";
    case Objective::Kind::denoising: return "denoising";
    case Objective::Kind::logdet_direct: return "logdet_direct";
    case Objective::Kind::contractive: return "contractive";
  }
  throw std::logic_error("objective_kind_name: unknown kind");
}

Objective::Kind objective_kind_from_name(const std::string& name) {
  if (name == "reconstruction") return Objective::Kind::reconstruction;
  if (name == "f_gen") return Objective::Kind::f_gen;
  if (name == "denoising") return Objective::Kind::denoising;
  if (name == "logdet_direct") return Objective::Kind::logdet_direct;
  if (name == "contractive") return Objective::Kind::contractive;
  throw std::invalid_argument("unknown objective '" + name + "'");
}

StepResult objective_eval(const AutoEncoder& ae, const Prior& prior,
                          const Objective& obj, const Matrix& data,
                          std::span<const int> rows, const Rng& rng,
                          ParamGrads* grads) {
  validate_autoencoder(ae);
  if (data.cols != ae.enc.input_dim())
    throw std::invalid_argument("objective_eval: data dimension mismatch");
  if (obj.mc_samples < 1)
    throw std::invalid_argument("objective_eval: mc_samples must be >= 1");
  if (grads != nullptr) {
    grads->encoder.assign(static_cast<std::size_t>(ae.enc.edge_count()), 0.0);
    grads->decoder.assign(static_cast<std::size_t>(ae.dec.net.edge_count()), 0.0);
  }
  const Objective::Kind kind = effective_kind(obj, prior);
  StepResult out;
  for (int r : rows) {
    if (r < 0 || r >= data.rows)
      throw std::invalid_argument("objective_eval: row index out of range");
    const auto x = row(data, r);
    const ActivationRecord enc_rec = forward(ae.enc, x);
    const std::vector<double> f = output_activities(ae.enc, enc_rec);
    switch (kind) {
      case Objective::Kind::reconstruction:
        add_reconstruction(ae, enc_rec, f, x, out, grads);
        break;
      case Objective::Kind::f_gen:
        add_f_gen_discrete(ae, prior, enc_rec, f, x, out, grads);
        break;
      case Objective::Kind::denoising:
        add_denoising(ae, prior, obj, f, x,
                      rng.substream("sample", static_cast<std::uint64_t>(r)), out,
                      grads);
        break;
      case Objective::Kind::logdet_direct:
        add_logdet(ae, prior, enc_rec, f, x, out, grads);
        break;
      case Objective::Kind::contractive:
        add_contractive(ae, prior, obj, enc_rec, f, x, out, grads);
        break;
    }
  }
  return out;
}

FeatureDistribution objective_fd(const AutoEncoder& ae, const Prior& prior,
                                 const Objective& obj, std::span<const double> x) {
  validate_autoencoder(ae);
  const ActivationRecord enc_rec = forward(ae.enc, x);
  std::vector<double> f = output_activities(ae.enc, enc_rec);
  const Objective::Kind kind = effective_kind(obj, prior);
  if (kind == Objective::Kind::f_gen) return BernoulliFd{feature_probabilities(std::move(f))};
  if (kind == Objective::Kind::denoising) {
    const Covariance cov = resolve_noise(obj.noise, prior, ae.dec, f, x);
    return noisy_feature(f, cov);
  }
  return DiracFd{std::move(f)};
}

StepResult train_step(AutoEncoder& ae, const Prior& prior, const Objective& obj,
                      const Matrix& data, std::span<const int> rows,
                      double learning_rate, double momentum, OptState& state,
                      const Rng& rng) {
  ParamGrads g;
  const StepResult res = objective_eval(ae, prior, obj, data, rows, rng, &g);
  if (!std::isfinite(res.loss))
    throw std::runtime_error("train_step: non-finite loss, parameters left unchanged");
  if (state.enc_velocity.empty())
    state.enc_velocity.assign(g.encoder.size(), 0.0);
  if (state.dec_velocity.empty())
    state.dec_velocity.assign(g.decoder.size(), 0.0);
  if (state.enc_velocity.size() != g.encoder.size() ||
      state.dec_velocity.size() != g.decoder.size())
    throw std::invalid_argument("train_step: optimizer state size mismatch");
  for (int e = 0; e < ae.enc.edge_count(); ++e) {
    double& v = state.enc_velocity[e];
    v = momentum * v - learning_rate * g.encoder[e];
    ae.enc.set_weight(e, ae.enc.weight(e) + v);
  }
  for (int e = 0; e < ae.dec.net.edge_count(); ++e) {
    double& v = state.dec_velocity[e];
    v = momentum * v - learning_rate * g.decoder[e];
    ae.dec.net.set_weight(e, ae.dec.net.weight(e) + v);
  }
  return res;
}

void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
    throw std::invalid_argument("train config: learning_rate must be finite and >= 0");
  if (!(cfg.momentum >= 0.0) || cfg.momentum >= 1.0)
    throw std::invalid_argument("train config: momentum must lie in [0, 1)");
  if (cfg.epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
  if (cfg.batch_size < 1)
    throw std::invalid_argument("train config: batch_size must be >= 1");
  if (cfg.prior_refit_every < 0)
    throw std::invalid_argument("train config: prior_refit_every must be >= 0");
  if (cfg.sigma_refit_every < 0)
    throw std::invalid_argument("train config: sigma_refit_every must be >= 0");
  if (cfg.oracle_max_samples < 0)
    throw std::invalid_argument("train config: oracle_max_samples must be >= 0");
  if (cfg.objective.mc_samples < 1)
    throw std::invalid_argument("train config: mc_samples must be >= 1");
}

std::string format_log_tsv(const std::vector<EpochLog>& log) {
  std::string out = "epoch\tloss\tl_rec\tkl_term\textra_term\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d\t%.10g\t%.10g\t%.10g\t%.10g\n", e.epoch,
                  e.loss, e.l_rec, e.kl_term, e.extra_term);
    out += buf;
  }
  return out;
}

CodelengthReport evaluate_report(const AutoEncoder& ae, const Prior& prior,
                                 const Objective& obj, const Matrix& data,
                                 int oracle_max_samples, const Rng& rng) {
  validate_autoencoder(ae);
  if (data.cols != ae.enc.input_dim())
    throw std::invalid_argument("evaluate_report: data dimension mismatch");
  const int n = data.rows;
  const int dy = decoder_feature_dim(ae.dec);
  const bool discrete = prior_is_discrete(prior);
  const bool discrete_f_gen =
      discrete && effective_kind(obj, prior) == Objective::Kind::f_gen;
  const bool oracle_ok =
      discrete ? dy <= kTrainEnumCap : (dy <= 2 && n <= oracle_max_samples);
  QuadratureSpec qspec;
  qspec.points_per_axis = dy <= 1 ? 2048 : 256;

  CodelengthReport rep;
  rep.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto x = row(data, i);
    const FeatureDistribution fd = objective_fd(ae, prior, obj, x);
    SampleCodelengths s;
    s.l_rec = reconstruction_error(ae.dec, fd_mean(fd), x);
    Rng sub = rng.substream("sample", static_cast<std::uint64_t>(i));
    s.e_l_rec = expected_reconstruction_error(ae.dec, fd, x, obj.mc_samples, sub);
    s.kl_feat_prior = kl_to_prior(fd, prior);
    s.l_f_gen = s.e_l_rec + s.kl_feat_prior;
    if (discrete_f_gen) s.l_two_part = two_part_codelength(prior, ae.dec, fd, x);
    if (oracle_ok) {
      const LGenResult lg = l_gen_exact(prior, ae.dec, x, qspec);
      s.l_gen_oracle = lg.l_gen;
      s.bound_gap = s.l_f_gen - lg.l_gen;
    }
    rep.samples.push_back(std::move(s));
  }
  finalize_aggregate(rep);
  return rep;
}

TrainResult run(AutoEncoder ae, Prior prior, const Matrix& data,
                const TrainConfig& cfg) {
  validate_train_config(cfg);
  validate_autoencoder(ae);
  if (data.rows < 1) throw std::invalid_argument("run: empty dataset");
  if (data.cols != ae.enc.input_dim())
    throw std::invalid_argument("run: data dimension mismatch");

  const Rng root(cfg.seed);
  OptState state;
  const int n = data.rows;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const int batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<EpochLog> log;
  log.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle = root.substream("shuffle", static_cast<std::uint64_t>(epoch));
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle.uniform_int(0, i)]);

    StepResult sums;
    for (int b = 0; b < batches; ++b) {
      const int lo = b * cfg.batch_size;
      const int hi = std::min(n, lo + cfg.batch_size);
      const std::span<const int> rows(order.data() + lo,
                                      static_cast<std::size_t>(hi - lo));
      const Rng step_rng = root.substream(
          "step", static_cast<std::uint64_t>(epoch - 1) * batches + b);
      StepResult r;
      try {
        // objective_eval sums over the batch; the configured rate applies to
        // the mean gradient so batch size does not rescale the steps
        r = train_step(ae, prior, cfg.objective, data, rows,
                       cfg.learning_rate / static_cast<double>(hi - lo),
                       cfg.momentum, state, step_rng);
      } catch (const std::runtime_error& err) {
        throw std::runtime_error("epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(b) + ": " + err.what());
      }
      sums.loss += r.loss;
      sums.l_rec += r.l_rec;
      sums.kl_term += r.kl_term;
      sums.extra_term += r.extra_term;
    }
    log.push_back({epoch, sums.loss / n, sums.l_rec / n, sums.kl_term / n,
                   sums.extra_term / n});

    if (cfg.sigma_refit_every > 0 && epoch % cfg.sigma_refit_every == 0 &&
        ae.dec.out.mode == OutputModel::Mode::learned) {
      std::vector<double> mse(static_cast<std::size_t>(decoder_data_dim(ae.dec)), 0.0);
      for (int i = 0; i < n; ++i) {
        const auto x = row(data, i);
        const ActivationRecord enc_rec = forward(ae.enc, x);
        const ActivationRecord rec =
            forward(ae.dec.net, output_activities(ae.enc, enc_rec));
        const auto& outs = ae.dec.net.outputs();
        for (std::size_t k = 0; k < outs.size(); ++k) {
          const double r = rec.activity[outs[k]] - x[k];
          mse[k] += r * r;
        }
      }
      for (double& v : mse) v /= n;
      refit_output_model(ae.dec.out, mse);
    }

    if (cfg.prior_refit_every > 0 && epoch % cfg.prior_refit_every == 0 &&
        !std::holds_alternative<UniformBinaryPrior>(prior)) {
      std::vector<FeatureDistribution> fds;
      fds.reserve(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        fds.push_back(objective_fd(ae, prior, cfg.objective, row(data, i)));
      prior = fit_prior(fds, std::holds_alternative<GaussianPrior>(prior)
                                 ? PriorFamily::gaussian
                                 : PriorFamily::bernoulli);
    }
  }

  CodelengthReport rep = evaluate_report(ae, prior, cfg.objective, data,
                                         cfg.oracle_max_samples,
                                         root.substream("report"));
  return {std::move(ae), std::move(prior), std::move(log), std::move(rep)};
}

// ---- gradient audit -------------------------------------------------------

namespace {

GradCheckEntry check_objective(const char* name, AutoEncoder& ae, const Prior& prior,
                               const Objective& obj, const Matrix& data,
                               const GradCheckOptions& opt, const Rng& rng) {
  std::vector<int> rows(static_cast<std::size_t>(data.rows));
  std::iota(rows.begin(), rows.end(), 0);
  ParamGrads g;
  objective_eval(ae, prior, obj, data, rows, rng, &g);
  if (opt.corrupt && !g.decoder.empty()) g.decoder[0] += 1e-2;

  double worst = 0.0;
  const auto probe = [&](Network& net, const std::vector<double>& analytic) {
    for (int e = 0; e < net.edge_count(); ++e) {
      const double w0 = net.weight(e);
      net.set_weight(e, w0 + opt.step);
      const double up = objective_eval(ae, prior, obj, data, rows, rng).loss;
      net.set_weight(e, w0 - opt.step);
      const double dn = objective_eval(ae, prior, obj, data, rows, rng).loss;
      net.set_weight(e, w0);
      const double fd = (up - dn) / (2.0 * opt.step);
      worst = std::max(worst, std::abs(analytic[e] - fd) / (1.0 + std::abs(fd)));
    }
  };
  probe(ae.enc, g.encoder);
  probe(ae.dec.net, g.decoder);
  return {name, worst, worst <= opt.tol};
}

Decoder sigma_decoder(Network net, Rng rng) {
  Decoder dec{std::move(net), {}};
  dec.out.sigma.resize(static_cast<std::size_t>(dec.net.output_dim()));
  for (double& s : dec.out.sigma) s = rng.uniform(0.5, 1.5);
  return dec;
}

GradCheckEntry check_curvature(const GradCheckOptions& opt, const Rng& rng) {
  Rng init = rng.substream("init");
  const Prior prior = GaussianPrior{{0.9, 1.3}};
  Decoder dec =
      sigma_decoder(make_layered({2, 4, 3}, Activation::tanh, Activation::identity, init),
                    rng.substream("sigma"));
  const std::vector<double> y0 = {0.4, -0.7};
  LogDetGradResult res = log_det_grad(prior, dec, y0);
  if (opt.corrupt) res.weight_grad[0] += 1e-2;
  double worst = 0.0;
  for (int e = 0; e < dec.net.edge_count(); ++e) {
    const double w0 = dec.net.weight(e);
    dec.net.set_weight(e, w0 + opt.step);
    const double up = log_det_grad(prior, dec, y0).log_det;
    dec.net.set_weight(e, w0 - opt.step);
    const double dn = log_det_grad(prior, dec, y0).log_det;
    dec.net.set_weight(e, w0);
    const double fd = (up - dn) / (2.0 * opt.step);
    worst = std::max(worst, std::abs(res.weight_grad[e] - fd) / (1.0 + std::abs(fd)));
  }
  return {"curvature_logdet", worst, worst <= opt.tol};
}

}  // namespace

std::vector<GradCheckEntry> grad_check_all(const GradCheckOptions& opt) {
  const Rng root(opt.seed);
  std::vector<GradCheckEntry> out;

  {
    const Rng sub = root.substream("gauss");
    Rng init = sub.substream("init");
    AutoEncoder ae{
        make_layered({3, 4, 2}, Activation::tanh, Activation::identity, init),
        sigma_decoder(
            make_layered({2, 4, 3}, Activation::tanh, Activation::identity, init),
            sub.substream("sigma"))};
    const Prior prior = GaussianPrior{{0.9, 1.3}};
    Matrix data(3, 3);
    Rng draw = sub.substream("data");
    for (double& v : data.data) v = 0.8 * draw.gauss();
    const Rng eval_rng = sub.substream("eval");

    Objective obj;
    obj.kind = Objective::Kind::reconstruction;
    out.push_back(check_objective("reconstruction", ae, prior, obj, data, opt, eval_rng));

    obj.kind = Objective::Kind::denoising;
    obj.noise.variant = NoiseSpec::Variant::fixed;
    obj.noise.fixed_cov = DiagCov{{0.25, 0.4}};
    obj.mc_samples = 3;
    out.push_back(check_objective("denoising", ae, prior, obj, data, opt, eval_rng));

    obj = Objective{};
    obj.kind = Objective::Kind::logdet_direct;
    out.push_back(check_objective("logdet_direct", ae, prior, obj, data, opt, eval_rng));

    obj.kind = Objective::Kind::contractive;
    obj.variant = ContractiveVariant::diag;
    out.push_back(check_objective("contractive_diag", ae, prior, obj, data, opt, eval_rng));
    obj.variant = ContractiveVariant::full;
    out.push_back(check_objective("contractive_full", ae, prior, obj, data, opt, eval_rng));
  }

  {
    const Rng sub = root.substream("discrete");
    Rng init = sub.substream("init");
    AutoEncoder ae{
        make_layered({3, 4, 2}, Activation::tanh, Activation::sigmoid, init),
        sigma_decoder(
            make_layered({2, 4, 3}, Activation::tanh, Activation::identity, init),
            sub.substream("sigma"))};
    const Prior prior = BernoulliPrior{{0.35, 0.6}};
    Matrix data(3, 3);
    Rng draw = sub.substream("data");
    for (double& v : data.data) v = 0.8 * draw.gauss();
    Objective obj;
    obj.kind = Objective::Kind::f_gen;
    out.push_back(check_objective("f_gen", ae, prior, obj, data, opt,
                                  sub.substream("eval")));
  }

  out.push_back(check_curvature(opt, root.substream("curvature")));
  return out;
}

}  // namespace mdlae
