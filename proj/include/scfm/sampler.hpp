#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "scfm/model.hpp"
#include "scfm/tensor.hpp"

namespace scfm {

struct SolverSpec {
    enum class Kind { Heun, Dopri5 };
    Kind kind = Kind::Heun;
    std::size_t steps = 25; // Heun: 25 steps = 50 velocity evaluations
    double rtol = 1e-6;     // Dopri5
    double atol = 1e-6;     // Dopri5
    double t_start = 1e-3;  // integration begins at max(t0, t_start)
    double t_end = 1.0;

    void validate() const;
};

struct SampleTrace {
    Tensor x_final;               // [B x D]
    std::size_t nfe = 0;          // velocity-field evaluations (batched eval = 1)
    std::size_t accepted = 0;     // Dopri5 step counts
    std::size_t rejected = 0;
    std::size_t decoder_evals = 0; // reported separately, excluded from nfe
    std::uint64_t flops_est = 0;  // nfe * per_eval_flops
};

// Batched velocity field over the flattened state; t is shared by all rows.
using VelocityField =
    std::function<std::vector<double>(const std::vector<double>& x, double t)>;

// Per-step diagnostics for solver tests.
struct StepRecord {
    double t = 0.0;
    double h = 0.0;
    double err = 0.0; // scaled error estimate (accept iff <= 1)
    bool accepted = false;
};

// Core integrator over an arbitrary field; `t0` is clamped to spec.t_start.
SampleTrace integrate_field(const VelocityField& field, const Tensor& x_init, double t0,
                            const SolverSpec& spec, std::uint64_t per_eval_flops,
                            std::vector<StepRecord>* diagnostics = nullptr);

// dx/dt = induced_velocity(mean_forward(x, t), x, t), integrated to t_end.
SampleTrace integrate(const ScfmModel& model, const Tensor& x_init, double t0,
                      const SolverSpec& spec);

// Full ODE sampling: z ~ p(z), eps ~ N(0, I), x0 = (z, eps).
SampleTrace sample_full(const ScfmModel& model, std::size_t n, const SolverSpec& spec, Rng& rng);

// Decoder proposal refined by the flow on [t0, 1]; t0 = 1 returns the decoder
// output with zero velocity evaluations, t0 = 0 reduces to full sampling.
SampleTrace sample_refined(const ScfmModel& model, std::size_t n, double t0,
                           const SolverSpec& spec, Rng& rng, bool stochastic_decoder = false);

// Decoder-only generation (no flow).
SampleTrace sample_decoder_only(const ScfmModel& model, std::size_t n, Rng& rng,
                                bool stochastic_decoder = false);

// Encoder-initialized full integration: z ~ q(z | x1), eps ~ N(0, I).
SampleTrace reconstruct(const ScfmModel& model, const Tensor& x1, const SolverSpec& spec,
                        Rng& rng);

// 2 * in * out summed over a chain of linear layers (multiply-add = 2 flops).
std::uint64_t flops_for_widths(const std::vector<std::size_t>& widths);
// Same over the recognition trunk as built (time-feature width included).
std::uint64_t per_eval_flops(const ScfmModel& model);

// Heun step count for a fixed per-unit-time density over [t0, 1].
std::size_t steps_for_interval(std::size_t steps_per_unit, double t0);

} // namespace scfm
