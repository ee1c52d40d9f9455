#pragma once

#include <span>
#include <vector>

// Output noise model of the decoder: one Gaussian sigma per reconstructed
// component, either fixed or refit from mean square errors, with a
// quantization floor epsilon so a component reconstructed perfectly does not
// send its codelength to -infinity.

namespace mdlae {

struct OutputModel {
  std::vector<double> sigma;
  enum class Mode { fixed, learned } mode = Mode::fixed;
  double epsilon = 0.0;
};

void validate_output_model(const OutputModel& out, int dim);

// sigma_i = sqrt(E_i + epsilon^2) for per-component mean square errors E_i.
std::vector<double> optimal_sigma_out(std::span<const double> mean_sq_err, double epsilon);

// Total reconstruction nats of a dataset of `sample_count` points whose
// per-component mean square error is E_i, coded with the given sigmas:
//   n * sum_i ((E_i + eps^2) / (2 sigma_i^2) + log sigma_i + log(2 pi)/2).
double dataset_reconstruction_nats(std::span<const double> mean_sq_err,
                                   std::span<const double> sigma, int sample_count,
                                   double epsilon);

// Value at the optimal sigmas: (n/2) * sum_i log(E_i + eps^2) plus a constant
// n * d * (1 + log(2 pi)) / 2 that is reported separately, never folded in.
struct LogErrorObjective {
  double log_term = 0.0;
  double constant = 0.0;
};
LogErrorObjective log_error_objective(std::span<const double> mean_sq_err, double epsilon,
                                      int sample_count);

// Applies optimal_sigma_out when the model is in learned mode.
void refit_output_model(OutputModel& out, std::span<const double> mean_sq_err);

}  // namespace mdlae
