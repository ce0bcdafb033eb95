#include "scfm/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "scfm/errors.hpp"
#include "scfm/interpolant.hpp"
#include "scfm/ops.hpp"

namespace scfm {

void SolverSpec::validate() const {
    if (kind == Kind::Heun && steps < 1)
        throw ConfigError("solver: heun needs steps >= 1");
    if (kind == Kind::Dopri5 && (rtol <= 0.0 || atol <= 0.0))
        throw ConfigError("solver: dopri5 needs positive rtol and atol");
    if (!(t_start >= kTimeFloor && t_start < t_end))
        throw ConfigError("solver: t_start must lie in [1e-6, t_end)");
}

namespace {

void check_finite(const std::vector<double>& x, const char* what) {
    for (double v : x)
        if (!std::isfinite(v))
            throw NumericalError(std::string(what) + ": non-finite state");
}

SampleTrace heun_integrate(const VelocityField& field, std::vector<double> x, double t0,
                           const SolverSpec& spec, std::vector<StepRecord>* diag) {
    SampleTrace trace;
    const std::size_t n = x.size();
    const double h = (spec.t_end - t0) / static_cast<double>(spec.steps);
    double t = t0;
    std::vector<double> xp(n);
    for (std::size_t s = 0; s < spec.steps; ++s) {
        const std::vector<double> k1 = field(x, t);
        for (std::size_t i = 0; i < n; ++i)
            xp[i] = x[i] + h * k1[i];
        const std::vector<double> k2 = field(xp, t + h);
        for (std::size_t i = 0; i < n; ++i)
            x[i] += 0.5 * h * (k1[i] + k2[i]);
        trace.nfe += 2;
        if (diag)
            diag->push_back(StepRecord{t, h, 0.0, true});
        t = t0 + h * static_cast<double>(s + 1);
    }
    trace.accepted = spec.steps;
    trace.x_final = Tensor(Shape{x.size()}, std::move(x));
    return trace;
}

// Dormand-Prince 5(4), the standard FSAL 7-stage tableau.
constexpr double kA[7][6] = {
    {},
    {1.0 / 5.0},
    {3.0 / 40.0, 9.0 / 40.0},
    {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0},
    {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0},
    {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0},
    {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0},
};
constexpr double kC[7] = {0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0};
// 5th-order weights equal row 7 of A (FSAL); the error weights are b5 - b4.
constexpr double kErr[7] = {71.0 / 57600.0,      0.0,          -71.0 / 16695.0,
                            71.0 / 1920.0,       -17253.0 / 339200.0,
                            22.0 / 525.0,        -1.0 / 40.0};

SampleTrace dopri5_integrate(const VelocityField& field, std::vector<double> x, double t0,
                             const SolverSpec& spec, std::vector<StepRecord>* diag) {
    SampleTrace trace;
    const std::size_t n = x.size();
    double t = t0;
    double h = std::min((spec.t_end - t0) * 1e-2, spec.t_end - t0);

    std::vector<std::vector<double>> k(7, std::vector<double>(n));
    std::vector<double> stage(n), x_new(n);

    k[0] = field(x, t);
    trace.nfe += 1;

    while (t < spec.t_end) {
        h = std::min(h, spec.t_end - t);
        if (h < 1e-12)
            throw SolverStallError("dopri5: step size underflow at t = " + std::to_string(t));

        for (std::size_t s = 1; s < 7; ++s) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < s; ++j)
                    acc += kA[s][j] * k[j][i];
                stage[i] = x[i] + h * acc;
            }
            k[s] = field(stage, t + kC[s] * h);
        }
        trace.nfe += 6;

        // Stage 7 is evaluated at (t + h, y1), so y1 is the last `stage`.
        x_new = stage;

        double err_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = 0.0;
            for (std::size_t s = 0; s < 7; ++s)
                e += kErr[s] * k[s][i];
            e *= h;
            const double sc = spec.atol + spec.rtol * std::max(std::abs(x[i]), std::abs(x_new[i]));
            err_sq += (e / sc) * (e / sc);
        }
        const double err = std::sqrt(err_sq / static_cast<double>(n));

        if (diag)
            diag->push_back(StepRecord{t, h, err, err <= 1.0});

        if (err <= 1.0) {
            t += h;
            x = x_new;
            k[0] = k[6]; // FSAL
            trace.accepted += 1;
        } else {
            trace.rejected += 1;
        }
        const double factor = (err == 0.0)
                                  ? 5.0
                                  : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h *= factor;
    }
    trace.x_final = Tensor(Shape{n}, std::move(x));
    return trace;
}

} // namespace

SampleTrace integrate_field(const VelocityField& field, const Tensor& x_init, double t0,
                            const SolverSpec& spec, std::uint64_t per_eval,
                            std::vector<StepRecord>* diagnostics) {
    spec.validate();
    check_finite(x_init.values(), "integrate");
    const double start = std::max(t0, spec.t_start);
    if (!(start < spec.t_end)) {
        SampleTrace trace;
        trace.x_final = x_init.detached();
        return trace;
    }
    SampleTrace trace = spec.kind == SolverSpec::Kind::Heun
                            ? heun_integrate(field, x_init.values(), start, spec, diagnostics)
                            : dopri5_integrate(field, x_init.values(), start, spec, diagnostics);
    trace.x_final = Tensor(x_init.shape(), trace.x_final.values());
    trace.flops_est = static_cast<std::uint64_t>(trace.nfe) * per_eval;
    return trace;
}

namespace {

VelocityField model_field(const ScfmModel& model) {
    const std::size_t d = model.data_dim();
    return [&model, d](const std::vector<double>& x, double t) {
        const std::size_t b = x.size() / d;
        Tape tape;
        tape.set_recording(false);
        Tensor xt(Shape{b, d}, x);
        Tensor tv(Shape{b}, std::vector<double>(b, t));
        Tensor mu = mean_forward(tape, model.recog, xt, tv);
        return induced_velocity(mu, xt, t).values();
    };
}

Tensor draw_source(const ScfmModel& model, std::size_t n, Rng& rng, Tensor* z_out = nullptr) {
    auto [z, comp] = gmm_sample(model.prior, n, rng);
    std::vector<double> eps(n * model.d_eps());
    for (auto& v : eps)
        v = rng.normal();
    if (z_out)
        *z_out = z;
    return concat(z, Tensor(Shape{n, model.d_eps()}, std::move(eps)), 1);
}

} // namespace

SampleTrace integrate(const ScfmModel& model, const Tensor& x_init, double t0,
                      const SolverSpec& spec) {
    if (x_init.rank() != 2 || x_init.dim(1) != model.data_dim())
        throw ShapeError("integrate: state must be [B x D]");
    return integrate_field(model_field(model), x_init, t0, spec, per_eval_flops(model));
}

SampleTrace sample_full(const ScfmModel& model, std::size_t n, const SolverSpec& spec,
                        Rng& rng) {
    if (n < 1)
        throw DomainError("sample_full: n must be >= 1");
    Tensor x0 = draw_source(model, n, rng);
    return integrate(model, x0, spec.t_start, spec);
}

SampleTrace sample_refined(const ScfmModel& model, std::size_t n, double t0,
                           const SolverSpec& spec, Rng& rng, bool stochastic_decoder) {
    if (!(t0 >= 0.0 && t0 <= 1.0))
        throw DomainError("sample_refined: t0 outside [0, 1]");
    Tensor z;
    Tensor x0 = draw_source(model, n, rng, &z);

    Tape tape;
    tape.set_recording(false);
    Tensor xhat = stochastic_decoder ? decode(tape, model.decoder, z, &rng)
                                     : decode(tape, model.decoder, z);
    SampleTrace trace;
    if (t0 >= 1.0) {
        trace.x_final = xhat;
        trace.decoder_evals = 1;
        return trace;
    }
    Tensor x_t0 = interpolate(x0, xhat, t0);
    trace = integrate(model, x_t0, t0, spec);
    trace.decoder_evals = 1;
    return trace;
}

SampleTrace sample_decoder_only(const ScfmModel& model, std::size_t n, Rng& rng,
                                bool stochastic_decoder) {
    if (n < 1)
        throw DomainError("sample_decoder_only: n must be >= 1");
    Tensor z;
    (void)draw_source(model, n, rng, &z);
    Tape tape;
    tape.set_recording(false);
    SampleTrace trace;
    trace.x_final = stochastic_decoder ? decode(tape, model.decoder, z, &rng)
                                       : decode(tape, model.decoder, z);
    trace.decoder_evals = 1;
    return trace;
}

SampleTrace reconstruct(const ScfmModel& model, const Tensor& x1, const SolverSpec& spec,
                        Rng& rng) {
    Tape tape;
    tape.set_recording(false);
    EndpointEncoding enc = endpoint_encode(tape, model.recog, x1);
    Tensor z = reparam_sample(enc.mu_z, enc.sigma_z, rng);
    std::vector<double> eps(x1.dim(0) * model.d_eps());
    for (auto& v : eps)
        v = rng.normal();
    Tensor x0 = concat(z, Tensor(Shape{x1.dim(0), model.d_eps()}, std::move(eps)), 1);
    return integrate(model, x0, spec.t_start, spec);
}

std::uint64_t flops_for_widths(const std::vector<std::size_t>& widths) {
    std::uint64_t total = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
        total += 2ULL * widths[i] * widths[i + 1];
    return total;
}

std::uint64_t per_eval_flops(const ScfmModel& model) {
    return flops_for_widths(model.recog.trunk.spec.widths);
}

std::size_t steps_for_interval(std::size_t steps_per_unit, double t0) {
    const double span = std::max(0.0, 1.0 - t0);
    const auto steps = static_cast<std::size_t>(std::ceil(span * static_cast<double>(steps_per_unit)));
    return std::max<std::size_t>(1, steps);
}

} // namespace scfm
