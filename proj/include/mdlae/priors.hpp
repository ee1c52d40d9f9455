#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "mdlae/linalg.hpp"
#include "mdlae/rng.hpp"

// Priors over the feature space and the distributions an encoder assigns to
// the features of a sample.  Everything is in nats.  Discrete quantities are
// computed by exact enumeration over {0,1}^d, capped at d = 20.

namespace mdlae {

inline constexpr double kVarFloor = 1e-8;        // variance clamp in fit_prior
inline constexpr double kProbClamp = 1e-6;       // Bernoulli parameter clamp
inline constexpr int kEnumerationCap = 20;       // max d for {0,1}^d sweeps

struct GaussianPrior {
  std::vector<double> var;  // zero mean, diagonal covariance
};

struct BernoulliPrior {
  std::vector<double> prob;
};

struct UniformBinaryPrior {
  int dim = 0;
};

using Prior = std::variant<GaussianPrior, BernoulliPrior, UniformBinaryPrior>;

int prior_dim(const Prior& prior);
bool prior_is_discrete(const Prior& prior);

// log rho(y).  For discrete priors y must be a 0/1 pattern.
double prior_log_density(const Prior& prior, std::span<const double> y);

struct DiracFd {
  std::vector<double> point;
};

struct GaussianDiagFd {
  std::vector<double> mean;
  std::vector<double> var;
};

struct GaussianFullFd {
  std::vector<double> mean;
  Matrix cov;  // SPD
};

struct BernoulliFd {
  std::vector<double> prob;
};

using FeatureDistribution =
    std::variant<DiracFd, GaussianDiagFd, GaussianFullFd, BernoulliFd>;

int fd_dim(const FeatureDistribution& fd);
bool fd_is_discrete(const FeatureDistribution& fd);
std::vector<double> fd_mean(const FeatureDistribution& fd);

// Shannon entropy for the discrete variants (Dirac counts as deterministic),
// differential entropy for the Gaussian ones.
double fd_entropy(const FeatureDistribution& fd);

// log density (continuous variants) or log mass (discrete variants) at y.
double fd_log_density(const FeatureDistribution& fd, std::span<const double> y);

// KL(fd || prior).  Gaussian-vs-Gaussian in closed form; discrete pairs by
// enumeration; mixed continuous/discrete support and Dirac-vs-continuous
// yield +infinity.
double kl_to_prior(const FeatureDistribution& fd, const Prior& prior);

enum class PriorFamily { gaussian, bernoulli };

// Refit of the prior to a set of per-sample feature distributions.  Gaussian:
// per-component second moment about the fixed zero mean, feature noise
// included, clamped below by kVarFloor.  Bernoulli: mean activation
// probability, clamped into [kProbClamp, 1 - kProbClamp].
Prior fit_prior(std::span<const FeatureDistribution> fds, PriorFamily family);

std::vector<double> sample(const FeatureDistribution& fd, Rng& rng);

// Bit pattern of a mask as 0.0/1.0 values; component i is bit i.
std::vector<double> binary_pattern(std::uint32_t mask, int dim);

// Mass assigned to a pattern by a discrete feature distribution.
double discrete_fd_prob(const FeatureDistribution& fd, std::uint32_t mask);

}  // namespace mdlae
