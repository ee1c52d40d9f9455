#include "mdlae/outvar.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mdlae {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
}

void validate_output_model(const OutputModel& out, int dim) {
  if (static_cast<int>(out.sigma.size()) != dim)
    throw std::invalid_argument("output model: sigma dimension mismatch");
  for (double s : out.sigma)
    if (!(s > 0.0)) throw std::invalid_argument("output model: sigma must be positive");
  if (out.epsilon < 0.0) throw std::invalid_argument("output model: negative epsilon");
}

std::vector<double> optimal_sigma_out(std::span<const double> mean_sq_err, double epsilon) {
  std::vector<double> sigma(mean_sq_err.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (mean_sq_err[i] < 0.0)
      throw std::invalid_argument("optimal_sigma_out: negative mean square error");
    sigma[i] = std::sqrt(mean_sq_err[i] + epsilon * epsilon);
    if (!(sigma[i] > 0.0))
      throw std::invalid_argument(
          "optimal_sigma_out: component " + std::to_string(i) +
          " has zero error and zero epsilon; sigma would degenerate");
  }
  return sigma;
}

double dataset_reconstruction_nats(std::span<const double> mean_sq_err,
                                   std::span<const double> sigma, int sample_count,
                                   double epsilon) {
  if (mean_sq_err.size() != sigma.size())
    throw std::invalid_argument("dataset_reconstruction_nats: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double e = mean_sq_err[i] + epsilon * epsilon;
    acc += e / (2.0 * sigma[i] * sigma[i]) + std::log(sigma[i]) + 0.5 * kLogTwoPi;
  }
  return sample_count * acc;
}

LogErrorObjective log_error_objective(std::span<const double> mean_sq_err, double epsilon,
                                      int sample_count) {
  LogErrorObjective obj;
  for (double e : mean_sq_err) obj.log_term += std::log(e + epsilon * epsilon);
  obj.log_term *= 0.5 * sample_count;
  obj.constant =
      0.5 * sample_count * static_cast<double>(mean_sq_err.size()) * (1.0 + kLogTwoPi);
  return obj;
}

void refit_output_model(OutputModel& out, std::span<const double> mean_sq_err) {
  if (out.mode != OutputModel::Mode::learned) return;
  out.sigma = optimal_sigma_out(mean_sq_err, out.epsilon);
}

}  // namespace mdlae
