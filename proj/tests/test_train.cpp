#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "mdlae/logdet_grad.hpp"
#include "mdlae/train.hpp"
#include "test_util.hpp"

using namespace mdlae;
using testutil::random_layered;
using testutil::random_linear;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

AutoEncoder gauss_ae(Rng rng, const std::vector<int>& enc_sizes = {3, 4, 2},
                     const std::vector<int>& dec_sizes = {2, 4, 3}) {
  Rng init = rng.substream("enc");
  Network enc = make_layered(enc_sizes, Activation::tanh, Activation::identity, init);
  Rng dinit = rng.substream("dec");
  return {std::move(enc), random_layered(dinit, dec_sizes, Activation::tanh)};
}

AutoEncoder binary_ae(Rng rng, const std::vector<int>& enc_sizes = {3, 4, 2},
                      const std::vector<int>& dec_sizes = {2, 4, 3}) {
  Rng init = rng.substream("enc");
  Network enc = make_layered(enc_sizes, Activation::tanh, Activation::sigmoid, init);
  Rng dinit = rng.substream("dec");
  return {std::move(enc), random_layered(dinit, dec_sizes, Activation::tanh)};
}

Matrix gauss_data(Rng rng, int n, int d, double scale = 0.8) {
  Matrix m(n, d);
  for (double& v : m.data) v = scale * rng.gauss();
  return m;
}

std::vector<int> all_rows(int n) {
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

std::vector<double> weights_of(const Network& net) {
  std::vector<double> w(net.edge_count());
  for (int e = 0; e < net.edge_count(); ++e) w[e] = net.weight(e);
  return w;
}

}  // namespace

TEST_CASE("autoencoder shape checks name the mismatch") {
  Rng rng(11);
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  CHECK_NOTHROW(validate_autoencoder(ae));

  AutoEncoder narrow = gauss_ae(rng.substream("bad"), {3, 4, 1});
  CHECK_THROWS_WITH_AS(validate_autoencoder(narrow),
                       doctest::Contains("decoder input"), std::invalid_argument);

  AutoEncoder wide = gauss_ae(rng.substream("wide"), {4, 4, 2});
  CHECK_THROWS_WITH_AS(validate_autoencoder(wide),
                       doctest::Contains("data dimension"), std::invalid_argument);
}

TEST_CASE("objective names round trip") {
  const Objective::Kind kinds[] = {
      Objective::Kind::reconstruction, Objective::Kind::f_gen,
      Objective::Kind::denoising, Objective::Kind::logdet_direct,
      Objective::Kind::contractive};
  for (Objective::Kind k : kinds)
    CHECK(objective_kind_from_name(objective_kind_name(k)) == k);
  CHECK_THROWS_AS(objective_kind_from_name("boosting"), std::invalid_argument);
}

TEST_CASE("a zero learning rate leaves the weights untouched") {
  Rng rng(3);
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  const Matrix data = gauss_data(rng.substream("data"), 6, 3);
  const Prior prior = GaussianPrior{{1.0, 1.2}};
  Objective obj;  // reconstruction

  const std::vector<double> enc0 = weights_of(ae.enc);
  const std::vector<double> dec0 = weights_of(ae.dec.net);
  const auto rows = all_rows(data.rows);
  const Rng eval(7);
  const double value = objective_eval(ae, prior, obj, data, rows, eval).loss;

  OptState st;
  const StepResult res =
      train_step(ae, prior, obj, data, rows, 0.0, 0.9, st, eval);
  CHECK(res.loss == value);
  CHECK(weights_of(ae.enc) == enc0);
  CHECK(weights_of(ae.dec.net) == dec0);
}

TEST_CASE("shared substreams replay the same draws") {
  Rng rng(19);
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  const Matrix data = gauss_data(rng.substream("data"), 5, 3);
  const Prior prior = GaussianPrior{{0.9, 1.4}};
  Objective obj;
  obj.kind = Objective::Kind::denoising;
  obj.noise.fixed_cov = DiagCov{{0.3, 0.5}};
  obj.mc_samples = 4;

  const auto rows = all_rows(data.rows);
  const Rng eval(101);
  ParamGrads g1, g2;
  const StepResult a = objective_eval(ae, prior, obj, data, rows, eval, &g1);
  const StepResult b = objective_eval(ae, prior, obj, data, rows, eval, &g2);
  CHECK(a.loss == b.loss);
  CHECK(g1.encoder == g2.encoder);
  CHECK(g1.decoder == g2.decoder);

  const StepResult c = objective_eval(ae, prior, obj, data, rows, eval.substream("other"));
  CHECK(a.loss != c.loss);
}

TEST_CASE("denoising value and gradient use the same noise") {
  Rng rng(23);
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  const Matrix data = gauss_data(rng.substream("data"), 3, 3);
  const Prior prior = GaussianPrior{{1.1, 0.8}};
  Objective obj;
  obj.kind = Objective::Kind::denoising;
  obj.noise.fixed_cov = DiagCov{{0.2, 0.45}};
  obj.mc_samples = 5;

  const int r = 1;
  const std::vector<int> rows = {r};
  const Rng eval(55);
  ParamGrads grads;
  const StepResult res = objective_eval(ae, prior, obj, data, rows, eval, &grads);

  // replay the value by hand from the same substream
  const std::span<const double> x(data.data.data() + r * data.cols, data.cols);
  const ActivationRecord enc_rec = forward(ae.enc, x);
  const std::vector<double> f = output_activities(ae.enc, enc_rec);
  const auto& var = std::get<DiagCov>(obj.noise.fixed_cov).var;
  const FeatureDistribution fd = GaussianDiagFd{f, var};
  Rng draws = eval.substream("sample", r).substream("draws");
  double e_rec = 0.0, e_nlrho = 0.0;
  for (int i = 0; i < obj.mc_samples; ++i) {
    const std::vector<double> y = sample(fd, draws);
    e_rec += reconstruction_error(ae.dec, y, x);
    e_nlrho -= prior_log_density(prior, y);
  }
  e_rec /= obj.mc_samples;
  e_nlrho /= obj.mc_samples;
  double logdet = 0.0;
  for (double v : var) logdet += std::log(v);
  const double extra = -0.5 * logdet - 0.5 * f.size() * (1.0 + kLog2Pi);

  CHECK(res.l_rec == e_rec);
  CHECK(res.kl_term == e_nlrho);
  CHECK(res.extra_term == extra);
  CHECK(res.loss == e_rec + e_nlrho + extra);

  // and the gradient is denoising_grad on the identical draw sequence
  Rng gdraws = eval.substream("sample", r).substream("draws");
  const EncoderDecoderGrads eg = denoising_grad(prior, ae.enc, ae.dec, x,
                                                obj.noise.fixed_cov,
                                                obj.mc_samples, gdraws);
  CHECK(grads.encoder == eg.encoder_weight);
  CHECK(grads.decoder == eg.decoder_weight);
}

TEST_CASE("the discrete bound matches the codelength helper") {
  Rng rng(31);
  AutoEncoder ae = binary_ae(rng.substream("ae"));
  const Matrix data = gauss_data(rng.substream("data"), 4, 3);
  const Prior prior = BernoulliPrior{{0.3, 0.7}};
  Objective obj;
  obj.kind = Objective::Kind::f_gen;

  for (int r = 0; r < data.rows; ++r) {
    const std::vector<int> rows = {r};
    const StepResult res = objective_eval(ae, prior, obj, data, rows, Rng(1));
    const std::span<const double> x(data.data.data() + r * data.cols, data.cols);
    const std::vector<double> f =
        output_activities(ae.enc, forward(ae.enc, x));
    Rng unused(2);
    const double expected =
        f_gen_bound(prior, ae.dec, BernoulliFd{f}, x, 1, unused);
    CHECK(res.loss == doctest::Approx(expected).epsilon(1e-12));
    CHECK(res.kl_term == doctest::Approx(kl_to_prior(BernoulliFd{f}, prior)).epsilon(1e-12));
  }
}

TEST_CASE("the logdet objective assembles its published parts") {
  Rng rng(37);
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  const Matrix data = gauss_data(rng.substream("data"), 3, 3);
  const Prior prior = GaussianPrior{{0.9, 1.3}};
  Objective obj;
  obj.kind = Objective::Kind::logdet_direct;

  const std::vector<int> rows = {2};
  const StepResult res = objective_eval(ae, prior, obj, data, rows, Rng(1));
  const std::span<const double> x(data.data.data() + 2 * data.cols, data.cols);
  const std::vector<double> f = output_activities(ae.enc, forward(ae.enc, x));
  const LogDetGradResult ld = log_det_grad(prior, ae.dec, f);
  const double expected = reconstruction_error(ae.dec, f, x) -
                          prior_log_density(prior, f) + 0.5 * ld.log_det -
                          0.5 * f.size() * kLog2Pi;
  CHECK(res.loss == doctest::Approx(expected).epsilon(1e-12));
  CHECK(res.extra_term ==
        doctest::Approx(0.5 * ld.log_det - 0.5 * f.size() * kLog2Pi).epsilon(1e-12));
}

TEST_CASE("the contractive objective scores the bound") {
  Rng rng(41);
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  const Matrix data = gauss_data(rng.substream("data"), 2, 3);
  const Prior prior = GaussianPrior{{1.0, 1.0}};
  for (ContractiveVariant variant : {ContractiveVariant::diag, ContractiveVariant::full}) {
    Objective obj;
    obj.kind = Objective::Kind::contractive;
    obj.variant = variant;
    const std::vector<int> rows = {0};
    const StepResult res = objective_eval(ae, prior, obj, data, rows, Rng(1));
    const std::span<const double> x(data.data.data(), data.cols);
    const std::vector<double> f = output_activities(ae.enc, forward(ae.enc, x));
    CHECK(res.loss ==
          doctest::Approx(contractive_bound(prior, ae.dec, f, x, variant)).epsilon(1e-12));
  }
}

TEST_CASE("every analytic gradient survives the difference audit") {
  const std::vector<GradCheckEntry> entries = grad_check_all({});
  REQUIRE(entries.size() == 7);
  const char* expected[] = {"reconstruction", "denoising", "logdet_direct",
                            "contractive_diag", "contractive_full", "f_gen",
                            "curvature_logdet"};
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CAPTURE(entries[i].objective);
    CAPTURE(entries[i].worst_rel);
    CHECK(entries[i].objective == expected[i]);
    CHECK(entries[i].pass);
    CHECK(entries[i].worst_rel < 1e-4);
  }
}

TEST_CASE("a skewed gradient fails the audit") {
  GradCheckOptions opt;
  opt.corrupt = true;
  const std::vector<GradCheckEntry> entries = grad_check_all(opt);
  REQUIRE(entries.size() == 7);
  for (const auto& e : entries) {
    CAPTURE(e.objective);
    CHECK_FALSE(e.pass);
  }
}

TEST_CASE("gradient descent decreases a smooth objective") {
  Rng rng(47);
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  const Matrix data = gauss_data(rng.substream("data"), 16, 3);
  const Prior prior = GaussianPrior{{1.0, 1.0}};
  Objective obj;  // reconstruction

  const auto rows = all_rows(data.rows);
  OptState st;
  std::vector<double> losses;
  for (int step = 0; step < 40; ++step)
    losses.push_back(train_step(ae, prior, obj, data, rows, 0.02 / data.rows, 0.0,
                                st, Rng(1))
                         .loss);
  for (std::size_t i = 1; i < losses.size(); ++i)
    CHECK(losses[i] <= losses[i - 1] + 1e-8);
  CHECK(losses.back() < losses.front() - 1e-3);
}

TEST_CASE("f_gen training tightens the bound on binary-feature data") {
  Rng rng(53);
  // planted binary features: x = A y + b + small noise
  const int dy = 2, dx = 3, n = 32;
  Matrix a(dx, dy);
  std::vector<double> b(dx);
  Rng gen = rng.substream("gen");
  for (double& v : a.data) v = 1.5 * gen.gauss();
  for (double& v : b) v = 0.5 * gen.gauss();
  Matrix data(n, dx);
  for (int i = 0; i < n; ++i) {
    std::vector<double> y(dy);
    for (double& v : y) v = gen.uniform() < 0.5 ? 0.0 : 1.0;
    for (int k = 0; k < dx; ++k) {
      double acc = b[k];
      for (int j = 0; j < dy; ++j) acc += a.at(k, j) * y[j];
      data.at(i, k) = acc + 0.05 * gen.gauss();
    }
  }

  AutoEncoder ae = binary_ae(rng.substream("ae"), {3, 6, 2}, {2, 6, 3});
  for (double& s : ae.dec.out.sigma) s = 0.5;
  const Prior prior = UniformBinaryPrior{dy};

  TrainConfig cfg;
  cfg.objective.kind = Objective::Kind::f_gen;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  cfg.epochs = 150;
  cfg.batch_size = n;
  cfg.seed = 5;

  const CodelengthReport before =
      evaluate_report(ae, prior, cfg.objective, data, 64, Rng(9));
  const TrainResult res = run(std::move(ae), prior, data, cfg);
  const double gain = before.aggregate.l_f_gen - res.report.aggregate.l_f_gen;
  CAPTURE(gain);
  CHECK(gain / n > 0.3);  // nats per sample
  REQUIRE(res.report.aggregate.bound_gap.has_value());
  CHECK(*res.report.aggregate.bound_gap >= -1e-10);
  REQUIRE(static_cast<int>(res.log.size()) == cfg.epochs);
  CHECK(res.log.back().loss < res.log.front().loss);
}

TEST_CASE("optimal noise never codes worse than unit noise on a linear decoder") {
  int wins = 0;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(600 + seed);
    Rng dinit = rng.substream("dec");
    Decoder dec = random_linear(dinit, 2, 3);
    Rng einit = rng.substream("enc");
    Network enc = make_layered({3, 2}, Activation::identity, Activation::identity,
                               einit, true, 0.4);
    AutoEncoder ae{std::move(enc), std::move(dec)};
    const Prior prior = GaussianPrior{{1.0, 1.0}};
    const Matrix data = gauss_data(rng.substream("data"), 8, 3, 1.0);

    Objective fixed;
    fixed.kind = Objective::Kind::denoising;
    fixed.noise.fixed_cov = DiagCov{{1.0, 1.0}};
    fixed.mc_samples = 32;
    Objective opt = fixed;
    opt.noise.variant = NoiseSpec::Variant::optimal_diag;
    opt.noise.source = NoiseSpec::HessianSource::gn_layerwise_diag;

    const auto rows = all_rows(data.rows);
    const Rng eval(900 + seed);
    const double loss_fixed = objective_eval(ae, prior, fixed, data, rows, eval).loss;
    const double loss_opt = objective_eval(ae, prior, opt, data, rows, eval).loss;
    if (loss_opt < loss_fixed) ++wins;
  }
  CHECK(wins >= 8);
}

TEST_CASE("zero epochs returns the initial model and a report") {
  Rng rng(61);
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  const std::vector<double> enc0 = weights_of(ae.enc);
  const std::vector<double> dec0 = weights_of(ae.dec.net);
  const Matrix data = gauss_data(rng.substream("data"), 5, 3);
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainResult res = run(std::move(ae), GaussianPrior{{1.0, 1.0}}, data, cfg);
  CHECK(res.log.empty());
  CHECK(weights_of(res.model.enc) == enc0);
  CHECK(weights_of(res.model.dec.net) == dec0);
  CHECK(res.report.samples.size() == 5);
}

TEST_CASE("divergence names the epoch and batch") {
  Rng rng(67);
  Rng einit = rng.substream("enc");
  Network enc = make_layered({2, 3, 2}, Activation::identity, Activation::identity, einit);
  Rng dinit = rng.substream("dec");
  Decoder dec = random_layered(dinit, {2, 3, 2}, Activation::identity);
  AutoEncoder ae{std::move(enc), std::move(dec)};
  const Matrix data = gauss_data(rng.substream("data"), 4, 2);
  TrainConfig cfg;
  cfg.learning_rate = 1e6;
  cfg.epochs = 12;
  cfg.batch_size = 4;
  CHECK_THROWS_WITH_AS(run(std::move(ae), GaussianPrior{{1.0, 1.0}}, data, cfg),
                       doctest::Contains("epoch"), std::runtime_error);
}

TEST_CASE("sigma refits follow the configured cadence") {
  Rng rng(71);
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  ae.dec.out.mode = OutputModel::Mode::learned;
  ae.dec.out.epsilon = 0.1;
  const Matrix data = gauss_data(rng.substream("data"), 6, 3);
  const Prior prior = GaussianPrior{{1.0, 1.0}};

  // closed form at the (frozen) initial weights
  std::vector<double> mse(3, 0.0);
  for (int i = 0; i < data.rows; ++i) {
    const std::span<const double> x(data.data.data() + i * data.cols, data.cols);
    const std::vector<double> f = output_activities(ae.enc, forward(ae.enc, x));
    const std::vector<double> xhat =
        output_activities(ae.dec.net, forward(ae.dec.net, f));
    for (int k = 0; k < 3; ++k) mse[k] += (xhat[k] - x[k]) * (xhat[k] - x[k]);
  }
  for (double& v : mse) v /= data.rows;
  const std::vector<double> expected = optimal_sigma_out(mse, ae.dec.out.epsilon);

  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  cfg.sigma_refit_every = 2;

  SUBCASE("cadence hit") {
    const TrainResult res = run(ae, prior, data, cfg);
    REQUIRE(res.model.dec.out.sigma.size() == expected.size());
    for (std::size_t k = 0; k < expected.size(); ++k)
      CHECK(res.model.dec.out.sigma[k] == doctest::Approx(expected[k]).epsilon(1e-12));
  }
  SUBCASE("cadence missed") {
    cfg.epochs = 1;
    const std::vector<double> sigma0 = ae.dec.out.sigma;
    const TrainResult res = run(ae, prior, data, cfg);
    CHECK(res.model.dec.out.sigma == sigma0);
  }
  SUBCASE("fixed mode never refits") {
    ae.dec.out.mode = OutputModel::Mode::fixed;
    cfg.sigma_refit_every = 1;
    const std::vector<double> sigma0 = ae.dec.out.sigma;
    const TrainResult res = run(ae, prior, data, cfg);
    CHECK(res.model.dec.out.sigma == sigma0);
  }
}

TEST_CASE("prior refits follow the feature distributions") {
  Rng rng(73);
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  const Matrix data = gauss_data(rng.substream("data"), 6, 3);
  Objective obj;
  obj.kind = Objective::Kind::denoising;
  obj.noise.fixed_cov = DiagCov{{0.2, 0.3}};

  std::vector<FeatureDistribution> fds;
  for (int i = 0; i < data.rows; ++i) {
    const std::span<const double> x(data.data.data() + i * data.cols, data.cols);
    fds.push_back(objective_fd(ae, GaussianPrior{{1.0, 1.0}}, obj, x));
  }
  const Prior expected = fit_prior(fds, PriorFamily::gaussian);

  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 1;
  cfg.prior_refit_every = 1;
  cfg.objective = obj;
  const TrainResult res = run(ae, GaussianPrior{{1.0, 1.0}}, data, cfg);
  const auto& got = std::get<GaussianPrior>(res.prior);
  const auto& want = std::get<GaussianPrior>(expected);
  REQUIRE(got.var.size() == want.var.size());
  for (std::size_t i = 0; i < got.var.size(); ++i)
    CHECK(got.var[i] == doctest::Approx(want.var[i]).epsilon(1e-12));

  SUBCASE("the uniform binary prior is left alone") {
    AutoEncoder bae = binary_ae(rng.substream("bae"));
    TrainConfig bcfg;
    bcfg.learning_rate = 0.01;
    bcfg.epochs = 2;
    bcfg.prior_refit_every = 1;
    bcfg.objective.kind = Objective::Kind::f_gen;
    const TrainResult bres = run(std::move(bae), UniformBinaryPrior{2}, data, bcfg);
    CHECK(std::holds_alternative<UniformBinaryPrior>(bres.prior));
  }
}

TEST_CASE("momentum accumulates velocity") {
  // one weight per net: the update is easy to iterate by hand
  Rng rng(79);
  Rng e1 = rng.substream("e");
  Network enc = make_layered({1, 1}, Activation::identity, Activation::identity, e1, false);
  Rng e2 = rng.substream("d");
  Network decnet = make_layered({1, 1}, Activation::identity, Activation::identity, e2, false);
  Decoder dec{std::move(decnet), OutputModel{}};
  dec.out.sigma = {1.0};
  AutoEncoder ae{std::move(enc), std::move(dec)};
  ae.enc.set_weight(0, 0.5);
  ae.dec.net.set_weight(0, 0.8);

  Matrix data(1, 1);
  data.at(0, 0) = 1.0;
  const Prior prior = GaussianPrior{{1.0}};
  Objective obj;  // reconstruction: (x - wd we x)^2 / 2 + log(2 pi)/2

  const double lr = 0.1, mom = 0.6;
  double we = 0.5, wd = 0.8, ve = 0.0, vd = 0.0;
  OptState st;
  for (int step = 0; step < 3; ++step) {
    const std::vector<int> rows = {0};
    train_step(ae, prior, obj, data, rows, lr, mom, st, Rng(1));
    const double r = wd * we - 1.0;  // residual at x = 1
    const double ge = r * wd;
    const double gd = r * we;
    ve = mom * ve - lr * ge;
    vd = mom * vd - lr * gd;
    we += ve;
    wd += vd;
    CHECK(ae.enc.weight(0) == doctest::Approx(we).epsilon(1e-12));
    CHECK(ae.dec.net.weight(0) == doctest::Approx(wd).epsilon(1e-12));
  }
}

TEST_CASE("the tsv log has one row per epoch") {
  Rng rng(83);
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  const Matrix data = gauss_data(rng.substream("data"), 4, 3);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.005;
  const TrainResult res = run(std::move(ae), GaussianPrior{{1.0, 1.0}}, data, cfg);
  REQUIRE(res.log.size() == 3);
  CHECK(res.log[0].epoch == 1);
  CHECK(res.log[2].epoch == 3);
  for (const auto& e : res.log)
    CHECK(e.loss == doctest::Approx(e.l_rec + e.kl_term + e.extra_term).epsilon(1e-12));

  const std::string tsv = format_log_tsv(res.log);
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < tsv.size()) {
    const std::size_t nl = tsv.find('\n', pos);
    lines.push_back(tsv.substr(pos, nl - pos));
    pos = nl + 1;
  }
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "epoch\tloss\tl_rec\tkl_term\textra_term");
  CHECK(lines[1].substr(0, 2) == "1\t");
  const double parsed = std::strtod(lines[1].c_str() + 2, nullptr);
  CHECK(parsed == doctest::Approx(res.log[0].loss).epsilon(1e-9));
}

TEST_CASE("config validation names the offending field") {
  TrainConfig cfg;
  CHECK_NOTHROW(validate_train_config(cfg));
  auto expect = [](TrainConfig bad, const char* field) {
    CHECK_THROWS_WITH_AS(validate_train_config(bad), doctest::Contains(field),
                         std::invalid_argument);
  };
  {
    TrainConfig c;
    c.learning_rate = -0.1;
    expect(c, "learning_rate");
  }
  {
    TrainConfig c;
    c.momentum = 1.0;
    expect(c, "momentum");
  }
  {
    TrainConfig c;
    c.epochs = -1;
    expect(c, "epochs");
  }
  {
    TrainConfig c;
    c.batch_size = 0;
    expect(c, "batch_size");
  }
  {
    TrainConfig c;
    c.objective.mc_samples = 0;
    expect(c, "mc_samples");
  }
  {
    TrainConfig c;
    c.prior_refit_every = -1;
    expect(c, "prior_refit_every");
  }
}

TEST_CASE("reports gate the oracle by feasibility") {
  Rng rng(89);
  SUBCASE("discrete runs carry the two-part code and the oracle") {
    AutoEncoder ae = binary_ae(rng.substream("ae"));
    const Matrix data = gauss_data(rng.substream("data"), 5, 3);
    Objective obj;
    obj.kind = Objective::Kind::f_gen;
    const CodelengthReport rep =
        evaluate_report(ae, BernoulliPrior{{0.4, 0.6}}, obj, data, 0, Rng(1));
    REQUIRE(rep.aggregate.l_two_part.has_value());
    REQUIRE(rep.aggregate.l_gen_oracle.has_value());
    REQUIRE(rep.aggregate.bound_gap.has_value());
    for (const auto& s : rep.samples) {
      CHECK(*s.l_two_part >= s.l_f_gen - 1e-10);
      CHECK(*s.bound_gap >= -1e-10);
      CHECK(*s.bound_gap == doctest::Approx(s.l_f_gen - *s.l_gen_oracle).epsilon(1e-12));
    }
  }
  SUBCASE("small continuous runs get the quadrature oracle") {
    AutoEncoder ae = gauss_ae(rng.substream("ae1"), {3, 4, 1}, {1, 4, 3});
    const Matrix data = gauss_data(rng.substream("data1"), 4, 3);
    Objective obj;
    obj.kind = Objective::Kind::denoising;
    obj.noise.fixed_cov = DiagCov{{0.3}};
    obj.mc_samples = 200;
    const CodelengthReport rep =
        evaluate_report(ae, GaussianPrior{{1.0}}, obj, data, 4, Rng(1));
    REQUIRE(rep.aggregate.l_gen_oracle.has_value());
    CHECK_FALSE(rep.aggregate.l_two_part.has_value());
    for (const auto& s : rep.samples) CHECK(*s.bound_gap >= -3e-2);
  }
  SUBCASE("oversized continuous runs drop the oracle") {
    AutoEncoder ae = gauss_ae(rng.substream("ae2"), {3, 4, 1}, {1, 4, 3});
    const Matrix data = gauss_data(rng.substream("data2"), 4, 3);
    Objective obj;
    obj.kind = Objective::Kind::denoising;
    obj.noise.fixed_cov = DiagCov{{0.3}};
    const CodelengthReport rep =
        evaluate_report(ae, GaussianPrior{{1.0}}, obj, data, 3, Rng(1));
    CHECK_FALSE(rep.aggregate.l_gen_oracle.has_value());
    CHECK_FALSE(rep.aggregate.bound_gap.has_value());
    CHECK(rep.samples.size() == 4);
    CHECK(rep.aggregate.l_f_gen ==
          doctest::Approx(rep.samples[0].l_f_gen + rep.samples[1].l_f_gen +
                          rep.samples[2].l_f_gen + rep.samples[3].l_f_gen)
              .epsilon(1e-12));
  }
}

TEST_CASE("run is deterministic end to end") {
  Rng rng(97);
  const AutoEncoder ae = gauss_ae(rng.substream("ae"));
  const Matrix data = gauss_data(rng.substream("data"), 8, 3);
  TrainConfig cfg;
  cfg.objective.kind = Objective::Kind::denoising;
  cfg.objective.noise.fixed_cov = DiagCov{{0.25, 0.4}};
  cfg.objective.mc_samples = 3;
  cfg.learning_rate = 0.01;
  cfg.momentum = 0.5;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 17;

  const TrainResult a = run(ae, GaussianPrior{{1.0, 1.0}}, data, cfg);
  const TrainResult b = run(ae, GaussianPrior{{1.0, 1.0}}, data, cfg);
  CHECK(weights_of(a.model.enc) == weights_of(b.model.enc));
  CHECK(weights_of(a.model.dec.net) == weights_of(b.model.dec.net));
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss == b.log[i].loss);
  CHECK(a.report.aggregate.l_f_gen == b.report.aggregate.l_f_gen);
}

TEST_CASE("objective_fd reflects the effective objective") {
  Rng rng(101);
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  const Matrix data = gauss_data(rng.substream("data"), 1, 3);
  const std::span<const double> x(data.data.data(), data.cols);
  const Prior gauss = GaussianPrior{{1.0, 1.0}};

  Objective obj;  // reconstruction
  CHECK(std::holds_alternative<DiracFd>(objective_fd(ae, gauss, obj, x)));

  obj.kind = Objective::Kind::f_gen;  // Gaussian prior: behaves as denoising
  obj.noise.fixed_cov = DiagCov{{0.2, 0.2}};
  CHECK(std::holds_alternative<GaussianDiagFd>(objective_fd(ae, gauss, obj, x)));

  obj.kind = Objective::Kind::denoising;
  obj.noise.variant = NoiseSpec::Variant::optimal_full;
  obj.noise.source = NoiseSpec::HessianSource::gn_full;
  CHECK(std::holds_alternative<GaussianFullFd>(objective_fd(ae, gauss, obj, x)));

  AutoEncoder bae = binary_ae(rng.substream("bae"));
  Objective bobj;
  bobj.kind = Objective::Kind::f_gen;
  const FeatureDistribution fd = objective_fd(bae, BernoulliPrior{{0.5, 0.5}}, bobj, x);
  CHECK(std::holds_alternative<BernoulliFd>(fd));
}

TEST_CASE("discrete features must be probabilities") {
  Rng rng(103);
  // identity outputs push features outside (0, 1)
  AutoEncoder ae = gauss_ae(rng.substream("ae"));
  Matrix data(1, 3);
  data.data = {4.0, -3.0, 2.0};
  Objective obj;
  obj.kind = Objective::Kind::f_gen;
  const std::vector<int> rows = {0};
  CHECK_THROWS_WITH_AS(
      objective_eval(ae, BernoulliPrior{{0.4, 0.6}}, obj, data, rows, Rng(1)),
      doctest::Contains("probabilities"), std::invalid_argument);
}

TEST_CASE("the discrete training cap is enforced") {
  Rng rng(107);
  Rng einit = rng.substream("enc");
  Network enc = make_layered({2, 13}, Activation::identity, Activation::sigmoid, einit);
  Rng dinit = rng.substream("dec");
  Decoder dec = random_layered(dinit, {13, 2}, Activation::tanh);
  AutoEncoder ae{std::move(enc), std::move(dec)};
  Matrix data(1, 2);
  data.data = {0.3, -0.2};
  Objective obj;
  obj.kind = Objective::Kind::f_gen;
  const std::vector<int> rows = {0};
  CHECK_THROWS_WITH_AS(objective_eval(ae, UniformBinaryPrior{13}, obj, data, rows, Rng(1)),
                       doctest::Contains("cap"), std::invalid_argument);
}
