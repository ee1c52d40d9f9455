#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "mdlae/net.hpp"
#include "mdlae/outvar.hpp"
#include "mdlae/priors.hpp"
#include "mdlae/rng.hpp"

// The bound hierarchy: reconstruction error, its expectation under a feature
// distribution, the two-part code over discrete features, the variational
// bound e_l_rec + KL(fd || prior), and an exact generative codelength oracle
// with the associated posterior (enumeration for binary features, trapezoid
// quadrature for 1-D/2-D Gaussian features).

namespace mdlae {

struct Decoder {
  Network net;
  OutputModel out;
};

void validate_decoder(const Decoder& dec);
int decoder_feature_dim(const Decoder& dec);
int decoder_data_dim(const Decoder& dec);

// -log g_y(x) for the Gaussian output model:
//   sum_k (x_k - xhat_k)^2 / (2 sigma_k^2) + log sigma_k + log(2 pi)/2.
double reconstruction_error(const Decoder& dec, std::span<const double> y,
                            std::span<const double> x);

// E_{y ~ fd} [-log g_y(x)].  Dirac and Bernoulli (d <= kEnumerationCap) are
// exact; Gaussian variants use a Monte Carlo mean of mc_samples draws.
double expected_reconstruction_error(const Decoder& dec, const FeatureDistribution& fd,
                                     std::span<const double> x, int mc_samples, Rng& rng);

// E_{y ~ fd} [-log rho(y) - log g_y(x)], exact by enumeration.  Requires a
// discrete prior and a discrete feature distribution (Dirac points must lie
// on the 0/1 lattice).
double two_part_codelength(const Prior& prior, const Decoder& dec,
                           const FeatureDistribution& fd, std::span<const double> x);

// expected_reconstruction_error + KL(fd || prior).
double f_gen_bound(const Prior& prior, const Decoder& dec, const FeatureDistribution& fd,
                   std::span<const double> x, int mc_samples, Rng& rng);

struct QuadratureSpec {
  double range_stddevs = 8.0;  // grid extent in prior standard deviations
  int points_per_axis = 2048;
  double refine_tol = 1e-8;    // max shift allowed when doubling the grid
};

// Posterior over {0,1}^d; log_prob[mask] indexed by pattern bits, normalized.
struct DiscretePosterior {
  int dim = 0;
  std::vector<double> log_prob;
};

// Posterior density tabulated on a uniform grid (1-D or 2-D, row-major with
// axis 0 major).  Normalized against its own trapezoid weights.
struct GridPosterior {
  std::vector<std::vector<double>> axes;
  std::vector<double> log_density;
};

std::size_t grid_size(const GridPosterior& g);
double grid_weight(const GridPosterior& g, std::size_t flat_index);
std::vector<double> grid_point(const GridPosterior& g, std::size_t flat_index);

struct LGenResult {
  double l_gen = 0.0;
  std::variant<DiscretePosterior, GridPosterior> posterior;
};

// -log sum/integral of rho(y) g_y(x).  Discrete priors: exact log-sum-exp
// over the lattice.  Gaussian priors (dim <= 2): trapezoid quadrature over
// [-k sigma, k sigma]^d, accepted only if doubling the per-axis resolution
// moves the value by less than refine_tol; the returned l_gen comes from the
// doubled grid, the posterior table from the base grid.
LGenResult l_gen_exact(const Prior& prior, const Decoder& dec, std::span<const double> x,
                       const QuadratureSpec& spec = {});

// KL(fd || posterior) against the stored table.  Discrete-vs-grid and
// Dirac-vs-grid are +infinity; continuous-vs-discrete likewise.
double kl_to_posterior(const FeatureDistribution& fd, const LGenResult& res);

struct SampleCodelengths {
  double l_rec = 0.0;
  double e_l_rec = 0.0;
  double kl_feat_prior = 0.0;
  double l_f_gen = 0.0;
  std::optional<double> l_two_part;
  std::optional<double> l_gen_oracle;
  std::optional<double> bound_gap;
};

// Aggregate sums each field over the samples; an optional aggregate field is
// present only when present in every sample, never zero-filled.
struct CodelengthReport {
  std::vector<SampleCodelengths> samples;
  SampleCodelengths aggregate;
};

void finalize_aggregate(CodelengthReport& report);

}  // namespace mdlae
