#pragma once

#include <functional>

#include "scfm/rng.hpp"
#include "scfm/tensor.hpp"

namespace scfm {

struct RecognitionNet;

// Interpolation schedule x_t = f(t) x0 + (1 - f(t)) x1. Only the linear
// schedule ships; the struct exists so tests can pass an alternative f.
struct Schedule {
    std::function<double(double)> f;
    std::function<double(double)> df;

    static const Schedule& linear(); // f(t) = 1 - t, df = -1
};

// Velocity evaluation is singular at t = 0 (1 - f vanishes there); calls
// below this floor raise TimeSingularityError.
constexpr double kTimeFloor = 1e-6;

Tensor interpolate(const Tensor& x0, const Tensor& x1, double t,
                   const Schedule& sched = Schedule::linear());

// (df / (1 - f)) (x0 - x_t); on the interpolant this equals x1 - x0.
Tensor conditional_velocity(const Tensor& x0, const Tensor& x_t, double t,
                            const Schedule& sched = Schedule::linear());

// Same form with the posterior-mean estimate in place of x0.
Tensor induced_velocity(const Tensor& mu, const Tensor& x_t, double t,
                        const Schedule& sched = Schedule::linear());

// Endpoint inversion: mu = x1 + v / df(1) (= x1 - v under the linear schedule).
Tensor mu_from_velocity(const Tensor& x1, const Tensor& v,
                        const Schedule& sched = Schedule::linear());

// One training coupling draw: x0 = (sg(z), eps) with z from the endpoint
// encoder and eps ~ N(0, I); t ~ U[0, 1) per sample; x_t on the interpolant.
// Everything in the batch is detached from the tape by construction.
struct CouplingBatch {
    Tensor x0;  // [B x D]
    Tensor x1;  // [B x D]
    Tensor t;   // [B]
    Tensor x_t; // [B x D]
};

CouplingBatch encoder_coupling_batch(Tape& tape, const RecognitionNet& net, const Tensor& x1,
                                     Rng& rng);

} // namespace scfm
