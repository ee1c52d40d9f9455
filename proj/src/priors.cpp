#include "mdlae/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mdlae {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
const double kInf = std::numeric_limits<double>::infinity();

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

bool is_binary_value(double v) {
  return std::abs(v) < 1e-9 || std::abs(v - 1.0) < 1e-9;
}

void require_dim(int got, int want, const char* where) {
  if (got != want)
    throw std::invalid_argument(std::string(where) + ": dimension mismatch (" +
                                std::to_string(got) + " vs " + std::to_string(want) + ")");
}

void require_enumerable(int d, const char* where) {
  if (d > kEnumerationCap)
    throw std::runtime_error(std::string(where) + ": dimension " + std::to_string(d) +
                             " exceeds the enumeration cap " + std::to_string(kEnumerationCap));
}

std::uint32_t pattern_of(std::span<const double> y, const char* where) {
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!is_binary_value(y[i]))
      throw std::invalid_argument(std::string(where) + ": component " + std::to_string(i) +
                                  " is not a 0/1 value");
    if (y[i] > 0.5) mask |= (1u << i);
  }
  return mask;
}

}  // namespace

int prior_dim(const Prior& prior) {
  if (const auto* g = std::get_if<GaussianPrior>(&prior)) return static_cast<int>(g->var.size());
  if (const auto* b = std::get_if<BernoulliPrior>(&prior)) return static_cast<int>(b->prob.size());
  return std::get<UniformBinaryPrior>(prior).dim;
}

bool prior_is_discrete(const Prior& prior) {
  return !std::holds_alternative<GaussianPrior>(prior);
}

double prior_log_density(const Prior& prior, std::span<const double> y) {
  require_dim(static_cast<int>(y.size()), prior_dim(prior), "prior_log_density");
  if (const auto* g = std::get_if<GaussianPrior>(&prior)) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!(g->var[i] > 0.0))
        throw std::invalid_argument("prior_log_density: non-positive prior variance");
      acc += -0.5 * std::log(kTwoPi * g->var[i]) - y[i] * y[i] / (2.0 * g->var[i]);
    }
    return acc;
  }
  if (const auto* b = std::get_if<BernoulliPrior>(&prior)) {
    pattern_of(y, "prior_log_density");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double q = clamp_prob(b->prob[i]);
      acc += (y[i] > 0.5) ? std::log(q) : std::log(1.0 - q);
    }
    return acc;
  }
  const auto& u = std::get<UniformBinaryPrior>(prior);
  pattern_of(y, "prior_log_density");
  return -u.dim * std::log(2.0);
}

int fd_dim(const FeatureDistribution& fd) {
  if (const auto* d = std::get_if<DiracFd>(&fd)) return static_cast<int>(d->point.size());
  if (const auto* g = std::get_if<GaussianDiagFd>(&fd)) return static_cast<int>(g->mean.size());
  if (const auto* g = std::get_if<GaussianFullFd>(&fd)) return static_cast<int>(g->mean.size());
  return static_cast<int>(std::get<BernoulliFd>(fd).prob.size());
}

bool fd_is_discrete(const FeatureDistribution& fd) {
  return std::holds_alternative<BernoulliFd>(fd) || std::holds_alternative<DiracFd>(fd);
}

std::vector<double> fd_mean(const FeatureDistribution& fd) {
  if (const auto* d = std::get_if<DiracFd>(&fd)) return d->point;
  if (const auto* g = std::get_if<GaussianDiagFd>(&fd)) return g->mean;
  if (const auto* g = std::get_if<GaussianFullFd>(&fd)) return g->mean;
  return std::get<BernoulliFd>(fd).prob;
}

double fd_entropy(const FeatureDistribution& fd) {
  if (std::holds_alternative<DiracFd>(fd)) return 0.0;
  if (const auto* g = std::get_if<GaussianDiagFd>(&fd)) {
    double acc = 0.0;
    for (double v : g->var) {
      if (!(v > 0.0)) throw std::invalid_argument("fd_entropy: non-positive variance");
      acc += 0.5 * std::log(kTwoPi * v) + 0.5;
    }
    return acc;
  }
  if (const auto* g = std::get_if<GaussianFullFd>(&fd)) {
    Matrix lower;
    if (!cholesky(g->cov, lower)) throw std::runtime_error("fd_entropy: covariance is not SPD");
    const int d = static_cast<int>(g->mean.size());
    return 0.5 * cholesky_log_det(lower) + 0.5 * d * (1.0 + std::log(kTwoPi));
  }
  const auto& b = std::get<BernoulliFd>(fd);
  double acc = 0.0;
  for (double p : b.prob) {
    if (p <= 0.0 || p >= 1.0) continue;  // exact limit: 0 log 0 = 0
    acc += -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
  }
  return acc;
}

double fd_log_density(const FeatureDistribution& fd, std::span<const double> y) {
  require_dim(static_cast<int>(y.size()), fd_dim(fd), "fd_log_density");
  if (const auto* dd = std::get_if<DiracFd>(&fd)) {
    for (std::size_t i = 0; i < y.size(); ++i)
      if (std::abs(y[i] - dd->point[i]) > 1e-12) return -kInf;
    return 0.0;  // unit mass at the point
  }
  if (const auto* g = std::get_if<GaussianDiagFd>(&fd)) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!(g->var[i] > 0.0)) throw std::invalid_argument("fd_log_density: non-positive variance");
      const double d = y[i] - g->mean[i];
      acc += -0.5 * std::log(kTwoPi * g->var[i]) - d * d / (2.0 * g->var[i]);
    }
    return acc;
  }
  if (const auto* g = std::get_if<GaussianFullFd>(&fd)) {
    Matrix lower;
    if (!cholesky(g->cov, lower))
      throw std::runtime_error("fd_log_density: covariance is not SPD");
    const int d = static_cast<int>(y.size());
    std::vector<double> diff(d);
    for (int i = 0; i < d; ++i) diff[i] = y[i] - g->mean[i];
    const std::vector<double> solved = cholesky_solve(lower, diff);
    double quad = 0.0;
    for (int i = 0; i < d; ++i) quad += diff[i] * solved[i];
    return -0.5 * quad - 0.5 * cholesky_log_det(lower) - 0.5 * d * std::log(kTwoPi);
  }
  const auto& b = std::get<BernoulliFd>(fd);
  pattern_of(y, "fd_log_density");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = b.prob[i];
    if (y[i] > 0.5)
      acc += (p <= 0.0) ? -kInf : std::log(p);
    else
      acc += (p >= 1.0) ? -kInf : std::log(1.0 - p);
  }
  return acc;
}

double kl_to_prior(const FeatureDistribution& fd, const Prior& prior) {
  require_dim(fd_dim(fd), prior_dim(prior), "kl_to_prior");

  if (const auto* g = std::get_if<GaussianPrior>(&prior)) {
    if (std::holds_alternative<DiracFd>(fd) || std::holds_alternative<BernoulliFd>(fd))
      return kInf;  // point masses have no density against a Gaussian
    if (const auto* q = std::get_if<GaussianDiagFd>(&fd)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < q->mean.size(); ++i) {
        if (!(q->var[i] > 0.0) || !(g->var[i] > 0.0))
          throw std::invalid_argument("kl_to_prior: non-positive variance");
        acc += 0.5 * (q->var[i] / g->var[i] + q->mean[i] * q->mean[i] / g->var[i] - 1.0 +
                      std::log(g->var[i]) - std::log(q->var[i]));
      }
      return acc;
    }
    const auto& q = std::get<GaussianFullFd>(fd);
    Matrix lower;
    if (!cholesky(q.cov, lower)) throw std::runtime_error("kl_to_prior: covariance is not SPD");
    const int d = static_cast<int>(q.mean.size());
    double acc = -0.5 * d - 0.5 * cholesky_log_det(lower);
    for (int i = 0; i < d; ++i) {
      if (!(g->var[i] > 0.0)) throw std::invalid_argument("kl_to_prior: non-positive variance");
      acc += 0.5 * (q.cov.at(i, i) + q.mean[i] * q.mean[i]) / g->var[i];
      acc += 0.5 * std::log(g->var[i]);
    }
    return acc;
  }

  // discrete prior
  const int d = prior_dim(prior);
  if (const auto* dd = std::get_if<DiracFd>(&fd)) {
    for (double v : dd->point)
      if (!is_binary_value(v)) return kInf;  // off-lattice point mass
    return -prior_log_density(prior, dd->point);
  }
  if (const auto* b = std::get_if<BernoulliFd>(&fd)) {
    require_enumerable(d, "kl_to_prior");
    double acc = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
      const double qm = discrete_fd_prob(*b, mask);
      if (qm <= 0.0) continue;
      acc += qm * (std::log(qm) - prior_log_density(prior, binary_pattern(mask, d)));
    }
    return acc;
  }
  return kInf;  // continuous feature distribution against a discrete prior
}

Prior fit_prior(std::span<const FeatureDistribution> fds, PriorFamily family) {
  if (fds.empty()) throw std::invalid_argument("fit_prior: no feature distributions");
  const int d = fd_dim(fds[0]);
  for (const FeatureDistribution& fd : fds) require_dim(fd_dim(fd), d, "fit_prior");

  if (family == PriorFamily::gaussian) {
    std::vector<double> second(d, 0.0);
    for (const FeatureDistribution& fd : fds) {
      if (const auto* dd = std::get_if<DiracFd>(&fd)) {
        for (int i = 0; i < d; ++i) second[i] += dd->point[i] * dd->point[i];
      } else if (const auto* g = std::get_if<GaussianDiagFd>(&fd)) {
        for (int i = 0; i < d; ++i) second[i] += g->mean[i] * g->mean[i] + g->var[i];
      } else if (const auto* g = std::get_if<GaussianFullFd>(&fd)) {
        for (int i = 0; i < d; ++i) second[i] += g->mean[i] * g->mean[i] + g->cov.at(i, i);
      } else {
        const auto& b = std::get<BernoulliFd>(fd);
        for (int i = 0; i < d; ++i) second[i] += b.prob[i];  // E[y^2] = p on {0,1}
      }
    }
    for (double& v : second) v = std::max(v / static_cast<double>(fds.size()), kVarFloor);
    return GaussianPrior{std::move(second)};
  }

  std::vector<double> mean(d, 0.0);
  for (const FeatureDistribution& fd : fds) {
    if (const auto* dd = std::get_if<DiracFd>(&fd)) {
      for (int i = 0; i < d; ++i) {
        if (!is_binary_value(dd->point[i]))
          throw std::invalid_argument("fit_prior: Bernoulli family needs 0/1 Dirac points");
        mean[i] += dd->point[i] > 0.5 ? 1.0 : 0.0;
      }
    } else if (const auto* b = std::get_if<BernoulliFd>(&fd)) {
      for (int i = 0; i < d; ++i) mean[i] += b->prob[i];
    } else {
      throw std::invalid_argument("fit_prior: cannot fit a Bernoulli prior to continuous features");
    }
  }
  for (double& p : mean) p = clamp_prob(p / static_cast<double>(fds.size()));
  return BernoulliPrior{std::move(mean)};
}

std::vector<double> sample(const FeatureDistribution& fd, Rng& rng) {
  if (const auto* d = std::get_if<DiracFd>(&fd)) return d->point;
  if (const auto* g = std::get_if<GaussianDiagFd>(&fd)) {
    std::vector<double> y(g->mean.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!(g->var[i] > 0.0)) throw std::invalid_argument("sample: non-positive variance");
      y[i] = g->mean[i] + std::sqrt(g->var[i]) * rng.gauss();
    }
    return y;
  }
  if (const auto* g = std::get_if<GaussianFullFd>(&fd)) {
    Matrix lower;
    if (!cholesky(g->cov, lower)) throw std::runtime_error("sample: covariance is not SPD");
    const int d = static_cast<int>(g->mean.size());
    std::vector<double> z(d);
    for (double& v : z) v = rng.gauss();
    std::vector<double> y(g->mean);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) y[i] += lower.at(i, j) * z[j];
    return y;
  }
  const auto& b = std::get<BernoulliFd>(fd);
  std::vector<double> y(b.prob.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.uniform() < b.prob[i] ? 1.0 : 0.0;
  return y;
}

std::vector<double> binary_pattern(std::uint32_t mask, int dim) {
  std::vector<double> y(dim);
  for (int i = 0; i < dim; ++i) y[i] = (mask >> i) & 1u ? 1.0 : 0.0;
  return y;
}

double discrete_fd_prob(const FeatureDistribution& fd, std::uint32_t mask) {
  if (const auto* d = std::get_if<DiracFd>(&fd)) {
    const std::uint32_t point = pattern_of(d->point, "discrete_fd_prob");
    return point == mask ? 1.0 : 0.0;
  }
  if (const auto* b = std::get_if<BernoulliFd>(&fd)) {
    double q = 1.0;
    for (std::size_t i = 0; i < b->prob.size(); ++i)
      q *= (mask >> i) & 1u ? b->prob[i] : 1.0 - b->prob[i];
    return q;
  }
  throw std::invalid_argument("discrete_fd_prob: continuous feature distribution");
}

}  // namespace mdlae
