#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "scfm/rng.hpp"
#include "scfm/tensor.hpp"

namespace scfm {

// Learnable Gaussian mixture prior p(z) = sum_k pi_k N(z; mu_k, diag sigma_k^2)
// with pi = softmax(logits) and sigma = exp(log_scales), so both constraints
// (weights on the simplex, positive scales) hold by parameterization.
struct GmmPrior {
    std::size_t K = 0;
    std::size_t d_z = 0;
    Tensor logits;     // [K]
    Tensor means;      // [K x d_z]
    Tensor log_scales; // [K x d_z]

    // logits 0 (uniform weights), means ~ N(0, 1), log_scales 0.
    static GmmPrior init(std::size_t K, std::size_t d_z, Rng& rng);

    std::vector<double> weights() const; // softmax of logits, values only
};

// log p(z) per row, differentiable in prior parameters and z. z: [B x d_z].
Tensor gmm_log_prob(Tape& tape, const GmmPrior& prior, const Tensor& z);

// Ancestral sampling: component ~ Categorical(pi), then the Gaussian draw.
std::pair<Tensor, std::vector<std::size_t>> gmm_sample(const GmmPrior& prior, std::size_t n,
                                                       Rng& rng);

// Posterior over components p(k | z), rows sum to 1. Values only.
Tensor gmm_responsibilities(const GmmPrior& prior, const Tensor& z);

// Monte-Carlo KL(q || p) per row with q = N(mu_q, diag sigma_q^2):
//   (1/n_mc) sum_s [log q(z_s) - log p(z_s)],  z_s = mu_q + sigma_q (*) xi_s.
// Differentiable through mu_q, sigma_q and the prior parameters.
Tensor gmm_kl_monte_carlo(Tape& tape, const Tensor& mu_q, const Tensor& sigma_q,
                          const GmmPrior& prior, std::size_t n_mc, Rng& rng);

// Diagonal Gaussian log density per row, composed from primitives; shared by
// the KL estimator and the objectives.
Tensor diag_gaussian_log_prob(const Tensor& z, const Tensor& mu, const Tensor& sigma);

} // namespace scfm
