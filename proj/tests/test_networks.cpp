#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "scfm/nets.hpp"
#include "scfm/ops.hpp"

using namespace scfm;

namespace {

RecognitionNet toy_net(std::size_t d_z = 1, std::size_t d_eps = 1, std::uint64_t seed = 3) {
    Rng rng = Rng::substream(seed, "net-init");
    return make_recognition_net(d_z, d_eps, {16, 16}, {8}, Activation::Tanh, rng);
}

Tensor random_batch(std::size_t b, std::size_t d, std::uint64_t seed) {
    Rng rng = Rng::substream(seed, "batch");
    std::vector<double> v(b * d);
    for (auto& x : v)
        x = rng.normal();
    return Tensor(Shape{b, d}, std::move(v));
}

} // namespace

TEST_CASE("zero-initialized final layer gives an all-zero mean") {
    RecognitionNet net = toy_net();
    Tape tape;
    Tensor x = random_batch(4, 2, 1);
    Tensor t(Shape{4}, {0.1, 0.4, 0.7, 0.95});
    Tensor mu = mean_forward(tape, net, x, t);
    REQUIRE(mu.shape() == Shape{4, 2});
    for (std::size_t i = 0; i < mu.size(); ++i)
        CHECK(mu.at(i) == 0.0);
}

TEST_CASE("time conditioning is non-degenerate") {
    RecognitionNet net = toy_net();
    // Randomize the final trunk layer so the output can reflect its input.
    Rng rng = Rng::substream(9, "rand-final");
    for (auto& v : net.trunk.weights.back().values_mut())
        v = rng.uniform(-0.5, 0.5);

    Tape tape;
    Tensor x = random_batch(1, 2, 2);
    Tensor mu_a = mean_forward(tape, net, x, Tensor(Shape{1}, {0.2}));
    Tensor mu_b = mean_forward(tape, net, x, Tensor(Shape{1}, {0.9}));
    bool any_diff = false;
    for (std::size_t i = 0; i < mu_a.size(); ++i)
        any_diff |= (mu_a.at(i) != mu_b.at(i));
    CHECK(any_diff);
}

TEST_CASE("mean_forward shape contract and time domain") {
    RecognitionNet net = toy_net();
    Tape tape;
    Tensor x = random_batch(1, 2, 4);
    Tensor mu = mean_forward(tape, net, x, Tensor(Shape{1}, {0.5}));
    CHECK(mu.shape() == Shape{1, 2});
    CHECK_THROWS_AS(mean_forward(tape, net, x, Tensor(Shape{1}, {1.5})), DomainError);
    CHECK_THROWS_AS(mean_forward(tape, net, x, Tensor(Shape{1}, {-0.01})), DomainError);
}

TEST_CASE("endpoint encoding is the t=1 slice of the shared network") {
    RecognitionNet net = toy_net(2, 3, 7);
    Rng rng = Rng::substream(9, "rand-final2");
    for (auto& v : net.trunk.weights.back().values_mut())
        v = rng.uniform(-0.5, 0.5);

    const std::size_t b = 5;
    Tensor x1 = random_batch(b, 5, 8);
    Tape tape;
    EndpointEncoding enc = endpoint_encode(tape, net, x1);
    Tensor ones(Shape{b}, std::vector<double>(b, 1.0));
    Tensor mu_full = mean_forward(tape, net, x1, ones);

    REQUIRE(enc.mu_z.shape() == Shape{b, 2});
    REQUIRE(enc.mu_eps.shape() == Shape{b, 3});
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(enc.mu_z.at(i, j) == mu_full.at(i, j)); // bit-equal
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(enc.mu_eps.at(i, j) == mu_full.at(i, j + 2));
    }

    // zero-init var head: sigma is exactly exp(0) = 1
    for (std::size_t i = 0; i < enc.sigma_z.size(); ++i)
        CHECK(enc.sigma_z.at(i) == 1.0);
    // zero-init trunk would give mu_eps = 0 and hence R_eps = 0 at init
    RecognitionNet fresh = toy_net(2, 3, 21);
    EndpointEncoding enc0 = endpoint_encode(tape, fresh, x1);
    for (std::size_t i = 0; i < enc0.mu_eps.size(); ++i)
        CHECK(enc0.mu_eps.at(i) == 0.0);
}

TEST_CASE("decoder determinism and stochastic mode") {
    Rng rng = Rng::substream(5, "dec");
    MlpSpec spec;
    spec.widths = {2, 8, 3};
    spec.final_layer_zero_init = true;
    Mlp dec = Mlp::init(spec, rng);
    Tensor z = random_batch(4, 2, 3);
    Tape tape;
    tape.set_recording(false);

    Tensor a = decode(tape, dec, z);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.at(i) == 0.0); // zero final layer
    Tensor b = decode(tape, dec, z);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.at(i) == b.at(i));

    Rng n1 = Rng::substream(42, "noise");
    Rng n2 = Rng::substream(42, "noise");
    Rng n3 = Rng::substream(43, "noise");
    Tensor s1 = decode(tape, dec, z, &n1);
    Tensor s2 = decode(tape, dec, z, &n2);
    Tensor s3 = decode(tape, dec, z, &n3);
    bool same_seed_equal = true, diff_seed_equal = true;
    for (std::size_t i = 0; i < s1.size(); ++i) {
        same_seed_equal &= (s1.at(i) == s2.at(i));
        diff_seed_equal &= (s1.at(i) == s3.at(i));
    }
    CHECK(same_seed_equal);
    CHECK(!diff_seed_equal);
}

TEST_CASE("reparameterized sampling") {
    Tensor mu(Shape{2, 2}, {1.0, -2.0, 0.5, 3.0});
    Tensor sigma(Shape{2, 2}, {0.5, 1.0, 2.0, 0.1});

    SUBCASE("xi = 0 hook returns mu exactly") {
        Tensor z = reparam_with_noise(mu, sigma, Tensor::zeros({2, 2}));
        for (std::size_t i = 0; i < z.size(); ++i)
            CHECK(z.at(i) == mu.at(i));
    }
    SUBCASE("gradients: dz/dmu = 1, dz/dsigma = xi") {
        Tape tape;
        Tensor mub = tape.watch(mu);
        Tensor sigmab = tape.watch(sigma);
        Tensor xi(Shape{2, 2}, {0.3, -1.2, 0.8, 2.0});
        Tensor z = reparam_with_noise(mub, sigmab, xi);
        auto grads = tape.eval_and_grad(sum(z), {mub, sigmab});
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(grads[0].at(i) == 1.0);
            CHECK(grads[1].at(i) == xi.at(i));
        }
    }
    SUBCASE("non-positive sigma rejected") {
        Tensor bad(Shape{2, 2}, {0.5, 0.0, 1.0, 1.0});
        Rng rng = Rng::substream(1, "rs");
        CHECK_THROWS_AS(reparam_sample(mu, bad, rng), DomainError);
    }
    SUBCASE("tiny sigma keeps z within 1e-12 * |xi| of mu") {
        Tensor tiny = Tensor::full({2, 2}, 1e-12);
        Tensor xi(Shape{2, 2}, {1.0, -2.0, 3.0, -4.0});
        Tensor z = reparam_with_noise(mu, tiny, xi);
        for (std::size_t i = 0; i < z.size(); ++i)
            CHECK(std::abs(z.at(i) - mu.at(i)) <= 1e-12 * std::abs(xi.at(i)) + 1e-15);
    }
}

TEST_CASE("parameter count matches sum (in+1)*out") {
    MlpSpec spec;
    spec.widths = {7, 16, 16, 2};
    CHECK(spec.param_count() == (7 + 1) * 16 + (16 + 1) * 16 + (16 + 1) * 2);
    RecognitionNet net = toy_net();
    std::size_t counted = 0;
    for (const auto& w : net.trunk.weights)
        counted += w.size();
    for (const auto& b : net.trunk.biases)
        counted += b.size();
    CHECK(counted == net.trunk.param_count());
}

TEST_CASE("outputs stay finite for bounded inputs") {
    RecognitionNet net = toy_net(2, 2, 17);
    Rng rng = Rng::substream(31, "bound");
    std::vector<double> v(6 * 4);
    for (auto& x : v)
        x = rng.uniform(-10.0, 10.0);
    Tensor x1(Shape{6, 4}, std::move(v));
    Tape tape;
    EndpointEncoding enc = endpoint_encode(tape, net, x1);
    for (std::size_t i = 0; i < enc.sigma_z.size(); ++i) {
        CHECK(std::isfinite(enc.sigma_z.at(i)));
        CHECK(enc.sigma_z.at(i) > 0.0);
    }
    for (std::size_t i = 0; i < enc.mu_eps.size(); ++i)
        CHECK(std::isfinite(enc.mu_eps.at(i)));
}

TEST_CASE("MlpSpec validation") {
    MlpSpec no_hidden;
    no_hidden.widths = {4, 2};
    CHECK_THROWS_AS(no_hidden.validate(), ConfigError);
}
