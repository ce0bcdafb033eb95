#include "scfm/objectives.hpp"

#include <cmath>

#include "scfm/errors.hpp"
#include "scfm/gmm.hpp"
#include "scfm/ops.hpp"

namespace scfm {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
}

Regularizer regularizer_from_string(const std::string& s) {
    if (s == "beta_vae")
        return Regularizer::BetaVae;
    if (s == "beta_tcvae")
        return Regularizer::BetaTcvae;
    throw ConfigError("unknown regularizer \"" + s + "\" (expected beta_vae or beta_tcvae)");
}

std::string to_string(Regularizer r) {
    return r == Regularizer::BetaVae ? "beta_vae" : "beta_tcvae";
}

void TrainConfig::validate() const {
    if (beta <= 0.0)
        throw ConfigError("config: beta must be positive");
    if (sigma_x0 <= 0.0)
        throw ConfigError("config: sigma_x0 must be positive");
    if (lr <= 0.0)
        throw ConfigError("config: lr must be positive");
    if (!(ema_decay >= 0.0 && ema_decay <= 1.0))
        throw ConfigError("config: ema_decay must lie in [0, 1]");
    if (d_z < 1 || d_eps < 1)
        throw ConfigError("config: d_z and d_eps must be positive");
    if (n_mc_kl < 1)
        throw ConfigError("config: n_mc_kl must be >= 1");
    if (batch_size < 1)
        throw ConfigError("config: batch_size must be >= 1");
    if (K < 1)
        throw ConfigError("config: K must be >= 1");
    if (dataset != "gmm2d" && dataset != "factors_lite")
        throw ConfigError("config: dataset must be gmm2d or factors_lite");
    activation_from_string(activation);
}

ScfmModel::Arch TrainConfig::arch() const {
    ScfmModel::Arch a;
    a.trunk_hidden = trunk_hidden;
    a.var_head_hidden = var_head_hidden;
    a.decoder_hidden = decoder_hidden;
    a.activation = activation_from_string(activation);
    return a;
}

Tensor vfm_loss(Tape& tape, const RecognitionNet& net, const CouplingBatch& batch,
                double sigma_x0) {
    if (sigma_x0 <= 0.0)
        throw DomainError("vfm_loss: sigma_x0 must be positive");
    const double d = static_cast<double>(net.data_dim());
    Tensor mu = mean_forward(tape, net, batch.x_t, batch.t);
    Tensor resid = sub(mu, batch.x0);
    Tensor per_sample = scale(sum(square(resid), 1), 1.0 / (2.0 * sigma_x0 * sigma_x0));
    const double log_norm = 0.5 * d * (kLogTwoPi + 2.0 * std::log(sigma_x0));
    return add_scalar(mean(per_sample), log_norm);
}

Tensor tc_estimate(Tape& tape, const Tensor& z_batch, const Tensor& mu_q, const Tensor& sigma_q,
                   std::size_t dataset_size) {
    if (z_batch.rank() != 2)
        throw ShapeError("tc_estimate: z_batch must be [B x d_z]");
    const std::size_t b = z_batch.dim(0);
    const std::size_t d = z_batch.dim(1);
    if (b < 2)
        throw DomainError("tc_estimate: needs a batch of at least 2");
    if (dataset_size < 2)
        throw DomainError("tc_estimate: dataset_size must be >= 2");
    if (mu_q.shape() != z_batch.shape() || sigma_q.shape() != z_batch.shape())
        throw ShapeError("tc_estimate: mu_q/sigma_q shape mismatch");
    (void)tape;

    // Pairwise per-coordinate log densities log q(z_i[k] | x_j): [B x B x d].
    Tensor z3 = broadcast(reshape(z_batch, {b, 1, d}), {b, b, d});
    Tensor mu3 = broadcast(reshape(mu_q, {1, b, d}), {b, b, d});
    Tensor sigma3 = broadcast(reshape(sigma_q, {1, b, d}), {b, b, d});
    Tensor u = div(sub(z3, mu3), sigma3);
    Tensor log_pdf = sub(scale(square(u), -0.5),
                         add_scalar(log(sigma3), 0.5 * kLogTwoPi)); // [B x B x d]

    // Stratified minibatch weights: z_i was drawn from posterior i, which the
    // dataset visits with probability 1/N; the remaining mass is spread over
    // the other B-1 minibatch members. For N == B this is the plain 1/B
    // mixture. (Weighting both estimates with a flat -log(N B) instead would
    // shift the estimate by exactly (d - 1) log N and break the analytic
    // oracle cases.)
    const double n = static_cast<double>(dataset_size);
    const double log_w_self = -std::log(n);
    const double log_w_other = std::log(n - 1.0) - std::log(n) -
                               std::log(static_cast<double>(b - 1));
    std::vector<double> w_log(b * b, log_w_other);
    for (std::size_t i = 0; i < b; ++i)
        w_log[i * b + i] = log_w_self;
    Tensor weights(Shape{b, b}, std::move(w_log));

    // log qhat(z_i): joint density under the weighted minibatch mixture.
    Tensor joint = add(sum(log_pdf, 2), weights);  // [B x B]
    Tensor log_q_joint = logsumexp(joint, 1);      // [B]

    // sum_k log qhat_k(z_i[k]): per-coordinate marginals, same weights.
    Tensor weighted = add(log_pdf, broadcast(reshape(weights, {b, b, 1}), {b, b, d}));
    Tensor log_q_marg = sum(logsumexp(weighted, 1), 1); // [B]

    return mean(sub(log_q_joint, log_q_marg));
}

EndpointTerms endpoint_loss(Tape& tape, const ScfmModel& model, const Tensor& x1,
                            const TrainConfig& cfg, Rng& rng) {
    EndpointEncoding enc = endpoint_encode(tape, model.recog, x1);
    Tensor z = reparam_sample(enc.mu_z, enc.sigma_z, rng);
    Tensor xhat = decode(tape, model.decoder, z);

    EndpointTerms terms;
    terms.rec = scale(mean(sum(square(sub(x1.detached(), xhat)), 1)), 0.5);
    Tensor kl = mean(gmm_kl_monte_carlo(tape, enc.mu_z, enc.sigma_z, model.prior,
                                        cfg.n_mc_kl, rng));
    if (cfg.regularizer == Regularizer::BetaVae) {
        terms.kl_z = scale(kl, cfg.beta);
        terms.tc = Tensor::scalar(0.0);
    } else {
        terms.kl_z = kl;
        terms.tc = scale(tc_estimate(tape, z, enc.mu_z, enc.sigma_z, cfg.dataset_size),
                         cfg.beta);
    }
    terms.r_eps = scale(mean(sum(square(enc.mu_eps), 1)), 0.5);
    return terms;
}

AdamState AdamState::init(const std::vector<Tensor>& params, double beta1, double beta2,
                          double eps) {
    AdamState s;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    for (const Tensor& p : params) {
        s.m.emplace_back(p.size(), 0.0);
        s.v.emplace_back(p.size(), 0.0);
    }
    return s;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam_step: params/grads/state size mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].shape() != grads[i].shape())
            throw ShapeError("adam_step: gradient shape mismatch at index " + std::to_string(i));
        auto& p = params[i].values_mut();
        const auto& g = grads[i].values();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

void ema_update(std::vector<Tensor>& shadow, const std::vector<Tensor>& params, double decay) {
    if (!(decay >= 0.0 && decay <= 1.0))
        throw DomainError("ema_update: decay must lie in [0, 1]");
    if (shadow.size() != params.size())
        throw ShapeError("ema_update: shadow/params size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& s = shadow[i].values_mut();
        const auto& p = params[i].values();
        for (std::size_t j = 0; j < s.size(); ++j)
            s[j] = decay * s[j] + (1.0 - decay) * p[j];
    }
}

TrainerState TrainerState::init(const ScfmModel& model, const TrainConfig& cfg) {
    TrainerState s;
    s.adam = AdamState::init(model.parameters(), cfg.adam_beta1, cfg.adam_beta2);
    s.ema = model.cloned_parameters();
    return s;
}

std::pair<Tensor, LossBreakdown> scfm_loss(Tape& tape, const ScfmModel& model,
                                           const Tensor& x1_batch, const TrainConfig& cfg,
                                           Rng& rng) {
    CouplingBatch batch = encoder_coupling_batch(tape, model.recog, x1_batch, rng);
    return scfm_loss_given_coupling(tape, model, batch, x1_batch, cfg, rng);
}

std::pair<Tensor, LossBreakdown> scfm_loss_given_coupling(Tape& tape, const ScfmModel& model,
                                                          const CouplingBatch& batch,
                                                          const Tensor& x1_batch,
                                                          const TrainConfig& cfg, Rng& rng) {
    Tensor vfm = vfm_loss(tape, model.recog, batch, cfg.sigma_x0);
    EndpointTerms terms = endpoint_loss(tape, model, x1_batch, cfg, rng);
    Tensor total = add(add(add(add(vfm, terms.rec), terms.kl_z), terms.r_eps), terms.tc);

    LossBreakdown out;
    out.vfm = vfm.item();
    out.rec = terms.rec.item();
    out.kl_z = terms.kl_z.item();
    out.r_eps = terms.r_eps.item();
    out.tc = terms.tc.item();
    out.total = total.item();
    return {total, out};
}

LossBreakdown scfm_train_step(ScfmModel& model, const Tensor& x1_batch, const TrainConfig& cfg,
                              TrainerState& state, Rng& rng) {
    Tape tape;
    auto [total, out] = scfm_loss(tape, model, x1_batch, cfg, rng);
    if (!std::isfinite(out.total))
        throw NumericalError("scfm_train_step: non-finite loss; step aborted");

    std::vector<Tensor> params = model.parameters();
    std::vector<Tensor> grads = tape.eval_and_grad(total, params);
    for (const Tensor& g : grads)
        for (double v : g.values())
            if (!std::isfinite(v))
                throw NumericalError("scfm_train_step: non-finite gradient; step aborted");

    adam_step(params, grads, state.adam, cfg.lr);
    ema_update(state.ema, params, cfg.ema_decay);
    return out;
}

} // namespace scfm
