#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "scfm/ops.hpp"
#include "scfm/rng.hpp"
#include "scfm/tensor.hpp"

namespace scfm {

enum class Activation { Tanh, Softplus };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct MlpSpec {
    std::vector<std::size_t> widths; // input, hidden..., output; at least one hidden layer
    Activation activation = Activation::Tanh;
    bool final_layer_zero_init = false;

    void validate() const;
    std::size_t param_count() const; // sum over layers of (in + 1) * out
};

// Plain fully connected net over the autodiff core. Weights are [in x out],
// the final layer is linear.
struct Mlp {
    MlpSpec spec;
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;

    static Mlp init(MlpSpec spec, Rng& rng);

    Tensor forward(Tape& tape, const Tensor& x) const;
    // Also returns the activation of the last hidden layer.
    std::pair<Tensor, Tensor> forward_with_hidden(Tape& tape, const Tensor& x) const;

    std::size_t param_count() const { return spec.param_count(); }
    std::size_t in_width() const { return spec.widths.front(); }
    std::size_t out_width() const { return spec.widths.back(); }
    std::size_t penultimate_width() const { return spec.widths[spec.widths.size() - 2]; }
};

// Time conditioning: [t, sin 2pi t, cos 2pi t, sin 4pi t, cos 4pi t].
constexpr std::size_t kTimeFeatureCount = 5;
Tensor time_features(const Tensor& t); // [B] -> [B x 5], constant

// Shared time-dependent recognition network. The trunk maps the interpolant
// state (concatenated with time features) to the posterior mean over the full
// source vector; the variance head branches from the trunk's last hidden
// layer and is evaluated at the endpoint only.
struct RecognitionNet {
    Mlp trunk;    // (D + kTimeFeatureCount) -> ... -> D
    Mlp var_head; // trunk penultimate width -> ... -> d_z (log variance)
    std::size_t d_z = 0;
    std::size_t d_eps = 0;

    std::size_t data_dim() const { return d_z + d_eps; }
};

RecognitionNet make_recognition_net(std::size_t d_z, std::size_t d_eps,
                                    const std::vector<std::size_t>& trunk_hidden,
                                    const std::vector<std::size_t>& var_head_hidden,
                                    Activation act, Rng& rng);

// mu_phi(x_t, t) for t in [0, 1]; differentiable in parameters and x_t.
Tensor mean_forward(Tape& tape, const RecognitionNet& net, const Tensor& x_t, const Tensor& t);

struct EndpointEncoding {
    Tensor mu_z;    // [B x d_z], first d_z coordinates of the t=1 mean
    Tensor sigma_z; // [B x d_z], exp(0.5 * clamped log variance)
    Tensor mu_eps;  // [B x d_eps]
};

// Endpoint encoder: the mean components are exactly the slices of
// mean_forward at t=1 (shared-network contract).
EndpointEncoding endpoint_encode(Tape& tape, const RecognitionNet& net, const Tensor& x1);

// Deterministic decoder mean; pass an rng for a unit-scale stochastic decode.
Tensor decode(Tape& tape, const Mlp& decoder, const Tensor& z, Rng* noise_rng = nullptr);

// z = mu + sigma (*) xi with xi ~ N(0, I); gradient flows to mu and sigma.
Tensor reparam_sample(const Tensor& mu, const Tensor& sigma, Rng& rng);
// Test hook with caller-provided noise.
Tensor reparam_with_noise(const Tensor& mu, const Tensor& sigma, const Tensor& xi);

constexpr double kLogVarClampLo = -10.0;
constexpr double kLogVarClampHi = 10.0;

} // namespace scfm
