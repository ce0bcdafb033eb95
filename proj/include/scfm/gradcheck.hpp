#pragma once

#include <cmath>
#include <functional>

#include "scfm/ops.hpp"
#include "scfm/tensor.hpp"

namespace scfm {

// Scalar-valued graph builder: receives the tape and the (watched) point and
// returns the taped scalar output.
using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

// Max relative error between the reverse-mode gradient of f at `point` and
// central finite differences with step h, over all coordinates:
//   max_i |ad_i - fd_i| / (|fd_i| + 1e-12)
inline double grad_check_finite_diff(const ScalarFn& f, const Tensor& point, double h) {
    Tape tape;
    Tensor x = tape.watch(point);
    Tensor out = f(tape, x);
    Tensor ad = tape.eval_and_grad(out, {x})[0];

    auto eval_at = [&](const std::vector<double>& vals) {
        Tensor p(point.shape(), vals);
        Tape t;
        t.set_recording(false);
        const double v = f(t, p).item();
        if (!std::isfinite(v))
            throw NumericalError("grad_check_finite_diff: non-finite value at perturbed point");
        return v;
    };

    double worst = 0.0;
    std::vector<double> vals = point.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double orig = vals[i];
        vals[i] = orig + h;
        const double fp = eval_at(vals);
        vals[i] = orig - h;
        const double fm = eval_at(vals);
        vals[i] = orig;
        const double fd = (fp - fm) / (2.0 * h);
        const double rel = std::abs(ad.at(i) - fd) / (std::abs(fd) + 1e-12);
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace scfm
