#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scfm/interpolant.hpp"
#include "scfm/model.hpp"
#include "scfm/tensor.hpp"

namespace scfm {

enum class Regularizer { BetaVae, BetaTcvae };

Regularizer regularizer_from_string(const std::string& s);
std::string to_string(Regularizer r);

struct TrainConfig {
    double beta = 4.0;
    Regularizer regularizer = Regularizer::BetaVae;
    double sigma_x0 = 1.0; // fixed recognition covariance scale
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    std::size_t batch_size = 256;
    std::size_t steps = 2000;
    double ema_decay = 0.9999;
    std::size_t n_mc_kl = 1;
    std::uint64_t seed = 0;
    std::size_t d_z = 1;
    std::size_t d_eps = 1;
    std::size_t K = 5;
    std::size_t dataset_size = 20000; // N of the TC estimator

    // Desk-scale backbone knobs (not part of the loss definition).
    std::vector<std::size_t> trunk_hidden{64, 64};
    std::vector<std::size_t> var_head_hidden{32};
    std::vector<std::size_t> decoder_hidden{64, 64};
    std::string activation = "tanh";

    // Dataset selection for the training CLI.
    std::string dataset = "gmm2d"; // gmm2d | factors_lite
    std::size_t gmm2d_k = 5;
    double gmm2d_separation = 6.0;

    std::size_t data_dim() const { return d_z + d_eps; }
    void validate() const;
    ScfmModel::Arch arch() const;
};

struct LossBreakdown {
    double vfm = 0.0;
    double rec = 0.0;
    double kl_z = 0.0;
    double r_eps = 0.0;
    double tc = 0.0;
    double total = 0.0;
};

// Mean Gaussian NLL of the stop-gradient coupling targets under the
// recognition model: (1 / 2 sigma^2) ||mu - x0||^2 + (D/2) log(2 pi sigma^2),
// averaged over the batch.
Tensor vfm_loss(Tape& tape, const RecognitionNet& net, const CouplingBatch& batch,
                double sigma_x0);

struct EndpointTerms {
    Tensor rec;   // mean 1/2 ||x1 - decode(z)||^2
    Tensor kl_z;  // beta-weighted KL (beta-VAE) or plain KL (beta-TCVAE)
    Tensor r_eps; // mean 1/2 ||mu_eps||^2
    Tensor tc;    // beta * TC estimate (beta-TCVAE), else constant 0
};

EndpointTerms endpoint_loss(Tape& tape, const ScfmModel& model, const Tensor& x1,
                            const TrainConfig& cfg, Rng& rng);

// Minibatch-weighted-sampling total-correlation estimate over a batch of
// posterior samples: E[log qhat(z) - sum_j log qhat(z_j)] with
// log qhat(z_i) = logsumexp_j log q(z_i | x_j) - log(N B).
Tensor tc_estimate(Tape& tape, const Tensor& z_batch, const Tensor& mu_q, const Tensor& sigma_q,
                   std::size_t dataset_size);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    static AdamState init(const std::vector<Tensor>& params, double beta1 = 0.9,
                          double beta2 = 0.999, double eps = 1e-8);
};

// Standard bias-corrected Adam update, in place.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr);

// shadow <- decay * shadow + (1 - decay) * params, in place.
void ema_update(std::vector<Tensor>& shadow, const std::vector<Tensor>& params, double decay);

struct TrainerState {
    AdamState adam;
    std::vector<Tensor> ema;

    static TrainerState init(const ScfmModel& model, const TrainConfig& cfg);
};

// The full objective on one batch, without touching parameters: returns the
// taped total and the per-term breakdown.
std::pair<Tensor, LossBreakdown> scfm_loss(Tape& tape, const ScfmModel& model,
                                           const Tensor& x1_batch, const TrainConfig& cfg,
                                           Rng& rng);

// Same, with a caller-supplied coupling. Because the coupling targets carry
// stop-gradient, the objective's gradient treats them as constants; finite-
// difference oracles must therefore hold the coupling fixed, which this entry
// point makes possible.
std::pair<Tensor, LossBreakdown> scfm_loss_given_coupling(Tape& tape, const ScfmModel& model,
                                                          const CouplingBatch& batch,
                                                          const Tensor& x1_batch,
                                                          const TrainConfig& cfg, Rng& rng);

// One step of the joint objective: build the coupling, evaluate
// L_VFM + L_rec + L_KL + R_eps (+ TC), backprop once, apply Adam to all
// parameters and refresh the EMA shadow. A non-finite loss or gradient
// aborts the step with NumericalError, leaving parameters untouched.
LossBreakdown scfm_train_step(ScfmModel& model, const Tensor& x1_batch, const TrainConfig& cfg,
                              TrainerState& state, Rng& rng);

} // namespace scfm
