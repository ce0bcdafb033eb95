#include "scfm/nets.hpp"

#include <cmath>

#include "scfm/errors.hpp"

namespace scfm {

Activation activation_from_string(const std::string& s) {
    if (s == "tanh")
        return Activation::Tanh;
    if (s == "softplus")
        return Activation::Softplus;
    throw ConfigError("unknown activation \"" + s + "\" (expected tanh or softplus)");
}

std::string to_string(Activation a) {
    return a == Activation::Tanh ? "tanh" : "softplus";
}

void MlpSpec::validate() const {
    if (widths.size() < 3)
        throw ConfigError("MlpSpec: needs at least one hidden layer");
    for (std::size_t w : widths)
        if (w < 1)
            throw ConfigError("MlpSpec: zero-width layer");
}

std::size_t MlpSpec::param_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
        n += (widths[i] + 1) * widths[i + 1];
    return n;
}

Mlp Mlp::init(MlpSpec spec, Rng& rng) {
    spec.validate();
    Mlp net;
    net.spec = spec;
    const std::size_t n_layers = spec.widths.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
        const bool zero = spec.final_layer_zero_init && l + 1 == n_layers;
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::vector<double> w(in * out, 0.0);
        if (!zero)
            for (auto& v : w)
                v = rng.uniform(-bound, bound);
        net.weights.emplace_back(Shape{in, out}, std::move(w));
        net.biases.push_back(Tensor::zeros({out}));
    }
    return net;
}

namespace {

Tensor apply_activation(Activation a, const Tensor& x) {
    return a == Activation::Tanh ? tanh(x) : softplus(x);
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor wb = tape.watch(w);
    Tensor bb = tape.watch(b);
    Tensor y = matmul(x, wb);
    return add(y, broadcast(bb, y.shape()));
}

} // namespace

Tensor Mlp::forward(Tape& tape, const Tensor& x) const {
    return forward_with_hidden(tape, x).first;
}

std::pair<Tensor, Tensor> Mlp::forward_with_hidden(Tape& tape, const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != in_width())
        throw ShapeError("Mlp::forward: expected [B x " + std::to_string(in_width()) + "] input");
    Tensor h = x;
    for (std::size_t l = 0; l + 1 < weights.size(); ++l)
        h = apply_activation(spec.activation, linear(tape, h, weights[l], biases[l]));
    Tensor out = linear(tape, h, weights.back(), biases.back());
    return {out, h};
}

Tensor time_features(const Tensor& t) {
    if (t.rank() != 1)
        throw ShapeError("time_features: expected rank-1 time vector");
    const std::size_t b = t.dim(0);
    std::vector<double> f(b * kTimeFeatureCount);
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (std::size_t i = 0; i < b; ++i) {
        const double ti = t.at(i);
        f[i * kTimeFeatureCount + 0] = ti;
        f[i * kTimeFeatureCount + 1] = std::sin(two_pi * ti);
        f[i * kTimeFeatureCount + 2] = std::cos(two_pi * ti);
        f[i * kTimeFeatureCount + 3] = std::sin(2.0 * two_pi * ti);
        f[i * kTimeFeatureCount + 4] = std::cos(2.0 * two_pi * ti);
    }
    return Tensor(Shape{b, kTimeFeatureCount}, std::move(f));
}

RecognitionNet make_recognition_net(std::size_t d_z, std::size_t d_eps,
                                    const std::vector<std::size_t>& trunk_hidden,
                                    const std::vector<std::size_t>& var_head_hidden,
                                    Activation act, Rng& rng) {
    const std::size_t data_dim = d_z + d_eps;
    MlpSpec trunk_spec;
    trunk_spec.widths.push_back(data_dim + kTimeFeatureCount);
    trunk_spec.widths.insert(trunk_spec.widths.end(), trunk_hidden.begin(), trunk_hidden.end());
    trunk_spec.widths.push_back(data_dim);
    trunk_spec.activation = act;
    trunk_spec.final_layer_zero_init = true;

    RecognitionNet net;
    net.trunk = Mlp::init(trunk_spec, rng);
    net.d_z = d_z;
    net.d_eps = d_eps;

    MlpSpec var_spec;
    var_spec.widths.push_back(net.trunk.penultimate_width());
    var_spec.widths.insert(var_spec.widths.end(), var_head_hidden.begin(), var_head_hidden.end());
    var_spec.widths.push_back(d_z);
    var_spec.activation = act;
    var_spec.final_layer_zero_init = true; // sigma starts at exp(0) = 1
    net.var_head = Mlp::init(var_spec, rng);
    return net;
}

Tensor mean_forward(Tape& tape, const RecognitionNet& net, const Tensor& x_t, const Tensor& t) {
    if (x_t.rank() != 2 || x_t.dim(1) != net.data_dim())
        throw ShapeError("mean_forward: state dimension mismatch");
    if (t.rank() != 1 || t.dim(0) != x_t.dim(0))
        throw ShapeError("mean_forward: time vector must have one entry per row");
    for (double ti : t.values())
        if (!(ti >= 0.0 && ti <= 1.0))
            throw DomainError("mean_forward: t outside [0, 1]");
    Tensor input = concat(x_t, time_features(t), 1);
    return net.trunk.forward(tape, input);
}

EndpointEncoding endpoint_encode(Tape& tape, const RecognitionNet& net, const Tensor& x1) {
    if (x1.rank() != 2 || x1.dim(1) != net.data_dim())
        throw ShapeError("endpoint_encode: data dimension mismatch");
    const std::size_t b = x1.dim(0);
    Tensor ones(Shape{b}, std::vector<double>(b, 1.0));
    Tensor input = concat(x1, time_features(ones), 1);
    auto [mu_full, hidden] = net.trunk.forward_with_hidden(tape, input);

    EndpointEncoding enc;
    enc.mu_z = slice(mu_full, 1, 0, net.d_z);
    enc.mu_eps = slice(mu_full, 1, net.d_z, net.data_dim());
    Tensor log_var = clamp(net.var_head.forward(tape, hidden), kLogVarClampLo, kLogVarClampHi);
    enc.sigma_z = exp(scale(log_var, 0.5));
    return enc;
}

Tensor decode(Tape& tape, const Mlp& decoder, const Tensor& z, Rng* noise_rng) {
    Tensor mean = decoder.forward(tape, z);
    if (noise_rng == nullptr)
        return mean;
    std::vector<double> noise(mean.size());
    for (auto& v : noise)
        v = noise_rng->normal();
    return add(mean, Tensor(mean.shape(), std::move(noise)));
}

Tensor reparam_with_noise(const Tensor& mu, const Tensor& sigma, const Tensor& xi) {
    if (mu.shape() != sigma.shape() || mu.shape() != xi.shape())
        throw ShapeError("reparam: mu/sigma/xi shapes differ");
    for (double s : sigma.values())
        if (!(s > 0.0))
            throw DomainError("reparam: sigma must be positive");
    return add(mul(sigma, xi.detached()), mu);
}

Tensor reparam_sample(const Tensor& mu, const Tensor& sigma, Rng& rng) {
    std::vector<double> xi(mu.size());
    for (auto& v : xi)
        v = rng.normal();
    return reparam_with_noise(mu, sigma, Tensor(mu.shape(), std::move(xi)));
}

} // namespace scfm
