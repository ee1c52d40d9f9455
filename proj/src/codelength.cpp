#include "mdlae/codelength.hpp"

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace mdlae {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Streaming log-sum-exp accumulator.
struct LogSum {
  double max = -kInf;
  double sum = 0.0;
  void add(double term) {
    if (term == -kInf) return;
    if (term > max) {
      sum = sum * std::exp(max - term) + 1.0;
      max = term;
    } else {
      sum += std::exp(term - max);
    }
  }
  double value() const { return max == -kInf ? -kInf : max + std::log(sum); }
};

bool on_lattice(std::span<const double> y) {
  for (double v : y)
    if (v != 0.0 && v != 1.0) return false;
  return true;
}

std::uint32_t mask_of(std::span<const double> y) {
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] > 0.5) m |= std::uint32_t{1} << i;
  return m;
}

void check_enumerable(int d, const char* where) {
  if (d > kEnumerationCap)
    throw std::invalid_argument(std::string(where) + ": feature dimension " +
                                std::to_string(d) + " exceeds the enumeration cap " +
                                std::to_string(kEnumerationCap));
}

}  // namespace

void validate_decoder(const Decoder& dec) {
  validate_output_model(dec.out, static_cast<int>(dec.net.outputs().size()));
}

int decoder_feature_dim(const Decoder& dec) {
  return static_cast<int>(dec.net.inputs().size());
}

int decoder_data_dim(const Decoder& dec) {
  return static_cast<int>(dec.net.outputs().size());
}

double reconstruction_error(const Decoder& dec, std::span<const double> y,
                            std::span<const double> x) {
  if (static_cast<int>(x.size()) != decoder_data_dim(dec))
    throw std::invalid_argument("reconstruction_error: sample dimension mismatch");
  const ActivationRecord rec = forward(dec.net, y);
  const auto& outs = dec.net.outputs();
  double acc = 0.0;
  for (std::size_t k = 0; k < outs.size(); ++k) {
    const double xhat = rec.activity[outs[k]];
    if (!std::isfinite(xhat))
      throw std::runtime_error("reconstruction_error: non-finite decoder output");
    const double s = dec.out.sigma[k];
    const double r = x[k] - xhat;
    acc += r * r / (2.0 * s * s) + std::log(s) + 0.5 * kLogTwoPi;
  }
  return acc;
}

double expected_reconstruction_error(const Decoder& dec, const FeatureDistribution& fd,
                                     std::span<const double> x, int mc_samples, Rng& rng) {
  if (fd_dim(fd) != decoder_feature_dim(dec))
    throw std::invalid_argument("expected_reconstruction_error: feature dimension mismatch");
  if (const auto* dp = std::get_if<DiracFd>(&fd))
    return reconstruction_error(dec, dp->point, x);
  if (const auto* b = std::get_if<BernoulliFd>(&fd)) {
    const int d = static_cast<int>(b->prob.size());
    check_enumerable(d, "expected_reconstruction_error");
    double acc = 0.0;
    for (std::uint32_t m = 0; m < (std::uint32_t{1} << d); ++m) {
      const double q = discrete_fd_prob(fd, m);
      if (q == 0.0) continue;
      acc += q * reconstruction_error(dec, binary_pattern(m, d), x);
    }
    return acc;
  }
  if (mc_samples < 1)
    throw std::invalid_argument("expected_reconstruction_error: mc_samples must be >= 1");
  double acc = 0.0;
  for (int i = 0; i < mc_samples; ++i)
    acc += reconstruction_error(dec, sample(fd, rng), x);
  return acc / mc_samples;
}

double two_part_codelength(const Prior& prior, const Decoder& dec,
                           const FeatureDistribution& fd, std::span<const double> x) {
  if (!prior_is_discrete(prior))
    throw std::invalid_argument("two_part_codelength: discrete prior required");
  if (prior_dim(prior) != fd_dim(fd))
    throw std::invalid_argument("two_part_codelength: dimension mismatch");
  if (const auto* dp = std::get_if<DiracFd>(&fd)) {
    if (!on_lattice(dp->point))
      throw std::invalid_argument("two_part_codelength: Dirac point off the 0/1 lattice");
    return -prior_log_density(prior, dp->point) + reconstruction_error(dec, dp->point, x);
  }
  const auto* b = std::get_if<BernoulliFd>(&fd);
  if (b == nullptr)
    throw std::invalid_argument("two_part_codelength: continuous feature distribution");
  const int d = static_cast<int>(b->prob.size());
  check_enumerable(d, "two_part_codelength");
  double acc = 0.0;
  for (std::uint32_t m = 0; m < (std::uint32_t{1} << d); ++m) {
    const double q = discrete_fd_prob(fd, m);
    if (q == 0.0) continue;
    const auto y = binary_pattern(m, d);
    acc += q * (-prior_log_density(prior, y) + reconstruction_error(dec, y, x));
  }
  return acc;
}

double f_gen_bound(const Prior& prior, const Decoder& dec, const FeatureDistribution& fd,
                   std::span<const double> x, int mc_samples, Rng& rng) {
  const double bound =
      expected_reconstruction_error(dec, fd, x, mc_samples, rng) + kl_to_prior(fd, prior);
#ifndef NDEBUG
  if (prior_is_discrete(prior) && fd_is_discrete(fd) &&
      fd_dim(fd) <= kEnumerationCap && std::isfinite(bound)) {
    const double via_two_part = two_part_codelength(prior, dec, fd, x) - fd_entropy(fd);
    assert(std::abs(bound - via_two_part) < 1e-8 * (1.0 + std::abs(bound)));
  }
#endif
  return bound;
}

std::size_t grid_size(const GridPosterior& g) { return g.log_density.size(); }

double grid_weight(const GridPosterior& g, std::size_t flat_index) {
  double w = 1.0;
  std::size_t rest = flat_index;
  for (std::size_t a = g.axes.size(); a-- > 0;) {
    const auto& ax = g.axes[a];
    const std::size_t n = ax.size();
    const std::size_t i = rest % n;
    rest /= n;
    const double h = ax[1] - ax[0];
    w *= (i == 0 || i == n - 1) ? 0.5 * h : h;
  }
  return w;
}

std::vector<double> grid_point(const GridPosterior& g, std::size_t flat_index) {
  std::vector<double> y(g.axes.size());
  std::size_t rest = flat_index;
  for (std::size_t a = g.axes.size(); a-- > 0;) {
    const std::size_t n = g.axes[a].size();
    y[a] = g.axes[a][rest % n];
    rest /= n;
  }
  return y;
}

namespace {

LGenResult l_gen_discrete(const Prior& prior, const Decoder& dec,
                          std::span<const double> x) {
  const int d = prior_dim(prior);
  check_enumerable(d, "l_gen_exact");
  DiscretePosterior post;
  post.dim = d;
  post.log_prob.resize(std::size_t{1} << d);
  LogSum ls;
  for (std::uint32_t m = 0; m < (std::uint32_t{1} << d); ++m) {
    const auto y = binary_pattern(m, d);
    post.log_prob[m] = prior_log_density(prior, y) - reconstruction_error(dec, y, x);
    ls.add(post.log_prob[m]);
  }
  LGenResult res;
  res.l_gen = -ls.value();
  for (double& lp : post.log_prob) lp += res.l_gen;
  res.posterior = std::move(post);
  return res;
}

// One trapezoid sweep at n points per axis; optionally keeps the per-node
// log rho(y) g_y(x) values for the posterior table.
double sweep(const Prior& prior, const Decoder& dec, std::span<const double> x,
             const std::vector<double>& sd, double range, int n,
             std::vector<std::vector<double>>* axes_out, std::vector<double>* terms_out) {
  const int dim = static_cast<int>(sd.size());
  std::vector<std::vector<double>> axes(dim);
  for (int a = 0; a < dim; ++a) {
    axes[a].resize(n);
    const double lo = -range * sd[a], hi = range * sd[a];
    for (int i = 0; i < n; ++i)
      axes[a][i] = lo + (hi - lo) * i / (n - 1);
  }
  LogSum ls;
  std::vector<double> y(dim);
  const std::size_t total = dim == 1 ? n : std::size_t(n) * n;
  if (terms_out != nullptr) terms_out->resize(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    double logw = 0.0;
    for (int a = dim - 1; a >= 0; --a) {
      const std::size_t i = rest % n;
      rest /= n;
      y[a] = axes[a][i];
      const double h = axes[a][1] - axes[a][0];
      logw += std::log((i == 0 || i == std::size_t(n) - 1) ? 0.5 * h : h);
    }
    const double term = prior_log_density(prior, y) - reconstruction_error(dec, y, x);
    if (terms_out != nullptr) (*terms_out)[flat] = term;
    ls.add(term + logw);
  }
  if (axes_out != nullptr) *axes_out = std::move(axes);
  return -ls.value();
}

LGenResult l_gen_continuous(const Prior& prior, const Decoder& dec,
                            std::span<const double> x, const QuadratureSpec& spec) {
  const auto& g = std::get<GaussianPrior>(prior);
  const int dim = static_cast<int>(g.var.size());
  if (dim > 2)
    throw std::invalid_argument(
        "l_gen_exact: quadrature supports at most 2 continuous feature dimensions, got " +
        std::to_string(dim));
  if (spec.points_per_axis < 2)
    throw std::invalid_argument("l_gen_exact: points_per_axis must be >= 2");
  std::vector<double> sd(dim);
  for (int a = 0; a < dim; ++a) sd[a] = std::sqrt(g.var[a]);

  GridPosterior post;
  std::vector<double> terms;
  const double base =
      sweep(prior, dec, x, sd, spec.range_stddevs, spec.points_per_axis, &post.axes, &terms);
  const double fine =
      sweep(prior, dec, x, sd, spec.range_stddevs, 2 * spec.points_per_axis, nullptr, nullptr);
  if (!(std::abs(base - fine) < spec.refine_tol))
    throw std::runtime_error(
        "l_gen_exact: quadrature under-resolved, doubling the grid moved the value by " +
        std::to_string(std::abs(base - fine)) + " nats");
  post.log_density.resize(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) post.log_density[i] = terms[i] + base;
  LGenResult res;
  res.l_gen = fine;
  res.posterior = std::move(post);
  return res;
}

}  // namespace

LGenResult l_gen_exact(const Prior& prior, const Decoder& dec, std::span<const double> x,
                       const QuadratureSpec& spec) {
  if (prior_dim(prior) != decoder_feature_dim(dec))
    throw std::invalid_argument("l_gen_exact: prior/decoder dimension mismatch");
  if (static_cast<int>(x.size()) != decoder_data_dim(dec))
    throw std::invalid_argument("l_gen_exact: sample dimension mismatch");
  return prior_is_discrete(prior) ? l_gen_discrete(prior, dec, x)
                                  : l_gen_continuous(prior, dec, x, spec);
}

double kl_to_posterior(const FeatureDistribution& fd, const LGenResult& res) {
  if (const auto* dp = std::get_if<DiscretePosterior>(&res.posterior)) {
    if (!fd_is_discrete(fd)) return kInf;
    if (fd_dim(fd) != dp->dim)
      throw std::invalid_argument("kl_to_posterior: dimension mismatch");
    if (const auto* dirac = std::get_if<DiracFd>(&fd)) {
      if (!on_lattice(dirac->point)) return kInf;
      return -dp->log_prob[mask_of(dirac->point)];
    }
    double acc = 0.0;
    for (std::uint32_t m = 0; m < (std::uint32_t{1} << dp->dim); ++m) {
      const double q = discrete_fd_prob(fd, m);
      if (q == 0.0) continue;
      acc += q * (std::log(q) - dp->log_prob[m]);
    }
    return acc;
  }
  const auto& gp = std::get<GridPosterior>(res.posterior);
  if (fd_is_discrete(fd) || std::holds_alternative<DiracFd>(fd)) return kInf;
  if (fd_dim(fd) != static_cast<int>(gp.axes.size()))
    throw std::invalid_argument("kl_to_posterior: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < grid_size(gp); ++i) {
    const auto y = grid_point(gp, i);
    const double lq = fd_log_density(fd, y);
    const double q = std::exp(lq);
    if (q == 0.0) continue;
    acc += grid_weight(gp, i) * q * (lq - gp.log_density[i]);
  }
  return acc;
}

void finalize_aggregate(CodelengthReport& report) {
  SampleCodelengths agg;
  bool all_two_part = !report.samples.empty();
  bool all_oracle = all_two_part;
  bool all_gap = all_two_part;
  double two_part = 0.0, oracle = 0.0, gap = 0.0;
  for (const auto& s : report.samples) {
    agg.l_rec += s.l_rec;
    agg.e_l_rec += s.e_l_rec;
    agg.kl_feat_prior += s.kl_feat_prior;
    agg.l_f_gen += s.l_f_gen;
    if (s.l_two_part) two_part += *s.l_two_part; else all_two_part = false;
    if (s.l_gen_oracle) oracle += *s.l_gen_oracle; else all_oracle = false;
    if (s.bound_gap) gap += *s.bound_gap; else all_gap = false;
  }
  if (all_two_part) agg.l_two_part = two_part;
  if (all_oracle) agg.l_gen_oracle = oracle;
  if (all_gap) agg.bound_gap = gap;
  report.aggregate = agg;
}

}  // namespace mdlae
