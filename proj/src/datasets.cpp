#include "scfm/datasets.hpp"

#include <cmath>

#include "scfm/errors.hpp"

namespace scfm {

std::pair<Tensor, std::vector<std::size_t>> gen_gmm2d(std::size_t k, double separation,
                                                      std::size_t n, std::uint64_t seed) {
    if (k < 1)
        throw DomainError("gen_gmm2d: k must be >= 1");
    constexpr double two_pi = 6.283185307179586476925286766559;
    std::vector<double> cx(k), cy(k);
    for (std::size_t j = 0; j < k; ++j) {
        const double angle = two_pi * static_cast<double>(j) / static_cast<double>(k);
        cx[j] = separation * std::cos(angle);
        cy[j] = separation * std::sin(angle);
    }
    Rng rng = Rng::substream(seed, "gmm2d");
    std::vector<double> pts(n * 2);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i % k; // balanced assignment
        labels[i] = j;
        pts[i * 2 + 0] = cx[j] + rng.normal();
        pts[i * 2 + 1] = cy[j] + rng.normal();
    }
    return {Tensor(Shape{n, 2}, std::move(pts)), std::move(labels)};
}

Tensor FactorDataset::render_all() const {
    std::vector<double> out;
    out.reserve(grid_size() * obs_dim);
    for (const auto& tuple : all_factors) {
        const std::vector<double> obs = render(tuple);
        out.insert(out.end(), obs.begin(), obs.end());
    }
    return Tensor(Shape{grid_size(), obs_dim}, std::move(out));
}

namespace {

constexpr std::size_t kFactorsLiteObsDim = 16;

// Orthogonal matrix from Gram-Schmidt over seeded Gaussian columns.
std::vector<double> random_orthogonal(std::size_t d, Rng& rng) {
    std::vector<std::vector<double>> cols(d, std::vector<double>(d));
    for (auto& col : cols) {
        for (auto& v : col)
            v = rng.normal();
    }
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            double dot = 0.0;
            for (std::size_t r = 0; r < d; ++r)
                dot += cols[i][r] * cols[j][r];
            for (std::size_t r = 0; r < d; ++r)
                cols[i][r] -= dot * cols[j][r];
        }
        double norm = 0.0;
        for (double v : cols[i])
            norm += v * v;
        norm = std::sqrt(norm);
        if (norm < 1e-8)
            throw ConstructionError("random_orthogonal: degenerate column");
        for (auto& v : cols[i])
            v /= norm;
    }
    std::vector<double> q(d * d);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c)
            q[r * d + c] = cols[c][r];
    return q;
}

} // namespace

FactorDataset gen_factors_lite(std::uint64_t seed) {
    FactorDataset ds;
    ds.factor_names = {"shade", "shape", "size"};
    ds.cardinalities = {10, 5, 3};
    ds.obs_dim = kFactorsLiteObsDim;

    for (std::size_t a = 0; a < ds.cardinalities[0]; ++a)
        for (std::size_t b = 0; b < ds.cardinalities[1]; ++b)
            for (std::size_t c = 0; c < ds.cardinalities[2]; ++c)
                ds.all_factors.push_back({a, b, c});

    const std::size_t n_factors = ds.cardinalities.size();
    Rng map_rng = Rng::substream(seed, "factors-lite-map");
    std::vector<double> lin(kFactorsLiteObsDim * n_factors);
    for (auto& v : lin)
        v = map_rng.normal();

    const auto cards = ds.cardinalities;
    for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt >= 16)
            throw ConstructionError("gen_factors_lite: could not build an injective render");
        Rng rot_rng = Rng::substream(seed, "factors-lite-rot", attempt);
        const std::vector<double> rot = random_orthogonal(kFactorsLiteObsDim, rot_rng);

        auto render = [lin, rot, cards](const std::vector<std::size_t>& tuple) {
            if (tuple.size() != cards.size())
                throw DomainError("factors-lite render: wrong tuple arity");
            std::vector<double> u(cards.size());
            for (std::size_t i = 0; i < cards.size(); ++i) {
                if (tuple[i] >= cards[i])
                    throw DomainError("factors-lite render: factor value out of range");
                // normalize to [-1, 1]
                u[i] = cards[i] == 1 ? 0.0
                                     : 2.0 * static_cast<double>(tuple[i]) /
                                               static_cast<double>(cards[i] - 1) -
                                           1.0;
            }
            std::vector<double> h(kFactorsLiteObsDim);
            for (std::size_t r = 0; r < kFactorsLiteObsDim; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < u.size(); ++c)
                    acc += lin[r * u.size() + c] * u[c];
                h[r] = std::sin(acc);
            }
            std::vector<double> out(kFactorsLiteObsDim);
            for (std::size_t r = 0; r < kFactorsLiteObsDim; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < kFactorsLiteObsDim; ++c)
                    acc += rot[r * kFactorsLiteObsDim + c] * h[c];
                out[r] = acc;
            }
            return out;
        };

        ds.render = render;

        // Injectivity check over the grid.
        const Tensor all = ds.render_all();
        bool ok = true;
        const std::size_t g = ds.grid_size();
        for (std::size_t i = 0; i < g && ok; ++i)
            for (std::size_t j = i + 1; j < g && ok; ++j) {
                double dist_sq = 0.0;
                for (std::size_t c = 0; c < kFactorsLiteObsDim; ++c) {
                    const double diff = all.at(i, c) - all.at(j, c);
                    dist_sq += diff * diff;
                }
                if (dist_sq <= 1e-12) // min pairwise distance > 1e-6
                    ok = false;
            }
        if (ok)
            return ds;
    }
}

} // namespace scfm
