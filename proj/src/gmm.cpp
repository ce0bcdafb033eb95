#include "scfm/gmm.hpp"

#include <cmath>

#include "scfm/errors.hpp"
#include "scfm/ops.hpp"

namespace scfm {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
}

GmmPrior GmmPrior::init(std::size_t K, std::size_t d_z, Rng& rng) {
    if (K < 1 || d_z < 1)
        throw ConfigError("GmmPrior: K and d_z must be positive");
    GmmPrior p;
    p.K = K;
    p.d_z = d_z;
    p.logits = Tensor::zeros({K});
    std::vector<double> m(K * d_z);
    for (auto& v : m)
        v = rng.normal();
    p.means = Tensor(Shape{K, d_z}, std::move(m));
    p.log_scales = Tensor::zeros({K, d_z});
    return p;
}

std::vector<double> GmmPrior::weights() const {
    double mx = logits.at(0);
    for (std::size_t k = 1; k < K; ++k)
        mx = std::max(mx, logits.at(k));
    std::vector<double> w(K);
    double norm = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        w[k] = std::exp(logits.at(k) - mx);
        norm += w[k];
    }
    for (auto& v : w)
        v /= norm;
    return w;
}

Tensor diag_gaussian_log_prob(const Tensor& z, const Tensor& mu, const Tensor& sigma) {
    if (z.rank() != 2)
        throw ShapeError("diag_gaussian_log_prob: expected [B x d] input");
    const std::size_t d = z.dim(1);
    Tensor u = div(sub(z, mu), sigma);
    Tensor quad = scale(sum(square(u), 1), -0.5);
    Tensor log_norm = add_scalar(scale(sum(log(sigma), 1), -1.0),
                                 -0.5 * static_cast<double>(d) * kLogTwoPi);
    return add(quad, log_norm);
}

namespace {

// Per-row, per-component log joint: log pi_k + log N(z; mu_k, sigma_k). [B x K]
Tensor component_log_joint(Tape& tape, const GmmPrior& prior, const Tensor& z) {
    if (z.rank() != 2 || z.dim(1) != prior.d_z)
        throw ShapeError("gmm: z must be [B x d_z]");
    const std::size_t b = z.dim(0);
    Tensor logits = tape.watch(prior.logits);
    Tensor means = tape.watch(prior.means);
    Tensor log_scales = tape.watch(prior.log_scales);
    Tensor log_pi = sub(logits, broadcast(logsumexp(logits), logits.shape())); // [K]

    Tensor parts; // [B x K], built one component at a time (K is small)
    for (std::size_t k = 0; k < prior.K; ++k) {
        Tensor mu_k = broadcast(slice(means, 0, k, k + 1), Shape{b, prior.d_z});
        Tensor sigma_k = exp(broadcast(slice(log_scales, 0, k, k + 1), Shape{b, prior.d_z}));
        Tensor comp = diag_gaussian_log_prob(z, mu_k, sigma_k);          // [B]
        Tensor w_k = broadcast(slice(log_pi, 0, k, k + 1), Shape{b});    // [B]
        Tensor col = reshape(add(comp, w_k), Shape{b, 1});
        parts = (k == 0) ? col : concat(parts, col, 1);
    }
    return parts;
}

} // namespace

Tensor gmm_log_prob(Tape& tape, const GmmPrior& prior, const Tensor& z) {
    return logsumexp(component_log_joint(tape, prior, z), 1);
}

std::pair<Tensor, std::vector<std::size_t>> gmm_sample(const GmmPrior& prior, std::size_t n,
                                                       Rng& rng) {
    const std::vector<double> w = prior.weights();
    std::vector<double> z(n * prior.d_z);
    std::vector<std::size_t> comp(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t k = prior.K - 1;
        for (std::size_t j = 0; j < prior.K; ++j) {
            acc += w[j];
            if (u < acc) {
                k = j;
                break;
            }
        }
        comp[i] = k;
        for (std::size_t d = 0; d < prior.d_z; ++d) {
            const double mu = prior.means.at(k, d);
            const double sigma = std::exp(prior.log_scales.at(k, d));
            z[i * prior.d_z + d] = mu + sigma * rng.normal();
        }
    }
    return {Tensor(Shape{n, prior.d_z}, std::move(z)), std::move(comp)};
}

Tensor gmm_responsibilities(const GmmPrior& prior, const Tensor& z) {
    Tape tape;
    tape.set_recording(false);
    Tensor lj = component_log_joint(tape, prior, z); // [B x K]
    Tensor lse = logsumexp(lj, 1, /*keepdim=*/true);
    return exp(sub(lj, broadcast(lse, lj.shape())));
}

Tensor gmm_kl_monte_carlo(Tape& tape, const Tensor& mu_q, const Tensor& sigma_q,
                          const GmmPrior& prior, std::size_t n_mc, Rng& rng) {
    if (n_mc < 1)
        throw DomainError("gmm_kl_monte_carlo: n_mc must be >= 1");
    if (mu_q.shape() != sigma_q.shape() || mu_q.rank() != 2 || mu_q.dim(1) != prior.d_z)
        throw ShapeError("gmm_kl_monte_carlo: mu_q/sigma_q must be [B x d_z]");
    for (double s : sigma_q.values())
        if (!(s > 0.0))
            throw DomainError("gmm_kl_monte_carlo: sigma_q must be positive");

    Tensor acc;
    for (std::size_t s = 0; s < n_mc; ++s) {
        std::vector<double> xi(mu_q.size());
        for (auto& v : xi)
            v = rng.normal();
        Tensor z = add(mul(sigma_q, Tensor(mu_q.shape(), std::move(xi))), mu_q);
        Tensor log_q = diag_gaussian_log_prob(z, mu_q, sigma_q);
        Tensor log_p = gmm_log_prob(tape, prior, z);
        Tensor term = sub(log_q, log_p);
        acc = (s == 0) ? term : add(acc, term);
    }
    return scale(acc, 1.0 / static_cast<double>(n_mc));
}

} // namespace scfm
