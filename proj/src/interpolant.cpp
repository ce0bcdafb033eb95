#include "scfm/interpolant.hpp"

#include "scfm/errors.hpp"
#include "scfm/nets.hpp"
#include "scfm/ops.hpp"

namespace scfm {

const Schedule& Schedule::linear() {
    static const Schedule s{[](double t) { return 1.0 - t; }, [](double) { return -1.0; }};
    return s;
}

Tensor interpolate(const Tensor& x0, const Tensor& x1, double t, const Schedule& sched) {
    if (!(t >= 0.0 && t <= 1.0))
        throw DomainError("interpolate: t outside [0, 1]");
    if (x0.shape() != x1.shape())
        throw ShapeError("interpolate: endpoint shapes differ");
    const double f = sched.f(t);
    return add(scale(x0, f), scale(x1, 1.0 - f));
}

Tensor conditional_velocity(const Tensor& x0, const Tensor& x_t, double t,
                            const Schedule& sched) {
    if (t <= kTimeFloor)
        throw TimeSingularityError("conditional_velocity: t at or below the time floor");
    if (t > 1.0)
        throw DomainError("conditional_velocity: t above 1");
    const double coeff = sched.df(t) / (1.0 - sched.f(t));
    return scale(sub(x0, x_t), coeff);
}

Tensor induced_velocity(const Tensor& mu, const Tensor& x_t, double t, const Schedule& sched) {
    if (t < kTimeFloor)
        throw TimeSingularityError("induced_velocity: t below the time floor");
    if (t > 1.0)
        throw DomainError("induced_velocity: t above 1");
    const double coeff = sched.df(t) / (1.0 - sched.f(t));
    return scale(sub(mu, x_t), coeff);
}

Tensor mu_from_velocity(const Tensor& x1, const Tensor& v, const Schedule& sched) {
    return add(x1, scale(v, 1.0 / sched.df(1.0)));
}

CouplingBatch encoder_coupling_batch(Tape& tape, const RecognitionNet& net, const Tensor& x1,
                                     Rng& rng) {
    if (x1.rank() != 2 || x1.dim(1) != net.data_dim())
        throw ShapeError("encoder_coupling_batch: x1 must be [B x (d_z + d_eps)]");
    const std::size_t b = x1.dim(0);

    EndpointEncoding enc = endpoint_encode(tape, net, x1);
    Tensor z = stop_gradient(reparam_sample(enc.mu_z, enc.sigma_z, rng));

    std::vector<double> eps(b * net.d_eps);
    for (auto& v : eps)
        v = rng.normal();
    Tensor x0 = concat(z, Tensor(Shape{b, net.d_eps}, std::move(eps)), 1);

    std::vector<double> t(b);
    for (auto& v : t)
        v = rng.uniform(); // U[0, 1)

    // Per-row interpolation; f(t) varies across the batch.
    const Schedule& sched = Schedule::linear();
    const std::size_t d = net.data_dim();
    std::vector<double> xt(b * d);
    for (std::size_t i = 0; i < b; ++i) {
        const double f = sched.f(t[i]);
        for (std::size_t j = 0; j < d; ++j)
            xt[i * d + j] = f * x0.at(i, j) + (1.0 - f) * x1.at(i, j);
    }

    CouplingBatch batch;
    batch.x0 = x0.detached();
    batch.x1 = x1.detached();
    batch.t = Tensor(Shape{b}, std::move(t));
    batch.x_t = Tensor(Shape{b, d}, std::move(xt));
    return batch;
}

} // namespace scfm
