#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "scfm/rng.hpp"
#include "scfm/tensor.hpp"

namespace scfm {

// k unit-variance Gaussian clusters centered on a circle of the given radius,
// with balanced labels (n mod k spread deterministically over the first
// clusters). A desk-scale stand-in for image clustering benchmarks.
std::pair<Tensor, std::vector<std::size_t>> gen_gmm2d(std::size_t k, double separation,
                                                      std::size_t n, std::uint64_t seed);

// Synthetic dataset with known generative factors: a factor tuple is
// normalized, pushed through a fixed full-rank linear map into R^16, bent by
// an elementwise sin, and rotated by a fixed seeded orthogonal matrix.
struct FactorDataset {
    std::vector<std::string> factor_names;
    std::vector<std::size_t> cardinalities;
    std::function<std::vector<double>(const std::vector<std::size_t>&)> render;
    std::vector<std::vector<std::size_t>> all_factors; // the full grid
    std::size_t obs_dim = 0;

    std::size_t grid_size() const { return all_factors.size(); }
    std::size_t factor_count() const { return cardinalities.size(); }

    // All grid observations stacked [grid x obs_dim], grid order.
    Tensor render_all() const;
};

// 3 factors with cardinalities (10, 5, 3); injectivity of the rendered grid
// is verified at construction (min pairwise distance > 1e-6), regenerating
// the rotation from the next substream on failure.
FactorDataset gen_factors_lite(std::uint64_t seed);

} // namespace scfm
