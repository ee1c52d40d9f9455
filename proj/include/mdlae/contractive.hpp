#pragma once

#include <span>

#include "mdlae/codelength.hpp"
#include "mdlae/linalg.hpp"

// Decoder Jacobians and the contractive codelength penalties: the diagonal
// form sum_i log sqrt(1/lambda_i + sum_k J_ki^2 / sigma_k^2) and the full
// log-determinant form.

namespace mdlae {

// d x_hat^k / d y^i at y0; row k is output k, one reverse pass per output.
Matrix decoder_jacobian(const Decoder& dec, std::span<const double> y0);

enum class ContractiveVariant { diag, full };

// l_rec(x | y = f_mean) - log rho(f_mean) + penalty - d/2 log 2pi, with the
// penalty the half log determinant of diag(1/lambda) + J^T diag(1/sigma^2) J
// (full) or of its diagonal (diag).  Gaussian priors only.
double contractive_bound(const Prior& prior, const Decoder& dec,
                         std::span<const double> f_mean, std::span<const double> x,
                         ContractiveVariant variant);

}  // namespace mdlae
