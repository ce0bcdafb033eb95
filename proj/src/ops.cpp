#include "scfm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scfm/parallel.hpp"

namespace scfm {
namespace {

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i)
            out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tape* resolve_tape(const Tensor& a, const Tensor& b) {
    Tape* ta = a.bound() ? a.tape() : nullptr;
    Tape* tb = b.bound() ? b.tape() : nullptr;
    if (ta && tb && ta != tb)
        throw GraphError("op inputs are bound to different tapes");
    return ta ? ta : tb;
}

bool tracked(Tape* tp) { return tp != nullptr && tp->recording(); }

// Shared wiring for elementwise binaries: out = f(a, b) with local gradients
// given by df_da/df_db evaluated per element.
template <typename Fwd, typename BwdA, typename BwdB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, BwdA dfa,
                 BwdB dfb) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(name) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    const std::size_t n = a.size();
    std::vector<double> out(n);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < n; ++i)
        out[i] = fwd(av[i], bv[i]);
    Tensor result(a.shape(), std::move(out));

    Tape* tp = resolve_tape(a, b);
    if (!tracked(tp))
        return result;
    std::vector<int> parents;
    const int ia = a.bound() ? a.node() : -1;
    const int ib = b.bound() ? b.node() : -1;
    if (ia >= 0)
        parents.push_back(ia);
    if (ib >= 0)
        parents.push_back(ib);
    auto ad = a.data();
    auto bd = b.data();
    int id = tp->push_node(n, std::move(parents),
                           [ia, ib, ad, bd, dfa, dfb, n](const double* g, Tape& t) {
                               if (ia >= 0) {
                                   auto& buf = t.grad_buffer(ia);
                                   for (std::size_t i = 0; i < n; ++i)
                                       buf[i] += g[i] * dfa(ad->values[i], bd->values[i]);
                               }
                               if (ib >= 0) {
                                   auto& buf = t.grad_buffer(ib);
                                   for (std::size_t i = 0; i < n; ++i)
                                       buf[i] += g[i] * dfb(ad->values[i], bd->values[i]);
                               }
                           });
    return tp->adopt(std::move(result), id);
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd dfa) {
    const std::size_t n = a.size();
    std::vector<double> out(n);
    const auto& av = a.values();
    for (std::size_t i = 0; i < n; ++i)
        out[i] = fwd(av[i]);
    Tensor result(a.shape(), std::move(out));

    Tape* tp = a.bound() ? a.tape() : nullptr;
    if (!tracked(tp))
        return result;
    const int ia = a.node();
    auto ad = a.data();
    auto rd = result.data();
    int id = tp->push_node(n, {ia}, [ia, ad, rd, dfa, n](const double* g, Tape& t) {
        auto& buf = t.grad_buffer(ia);
        for (std::size_t i = 0; i < n; ++i)
            buf[i] += g[i] * dfa(ad->values[i], rd->values[i]);
    });
    return tp->adopt(std::move(result), id);
}

double sigmoid(double x) {
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Strides of a row-major shape.
std::vector<std::size_t> strides_of(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;)
        st[i - 1] = st[i] * s[i];
    return st;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: operands must be rank 2");
    if (a.dim(1) != b.dim(0))
        throw ShapeError("matmul: inner extents differ: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    const double* av = a.values().data();
    const double* bv = b.values().data();
    parallel_ranges(m, [&](std::size_t rb, std::size_t re) {
        for (std::size_t i = rb; i < re; ++i) {
            double* orow = out.data() + i * n;
            const double* arow = av + i * k;
            for (std::size_t p = 0; p < k; ++p) {
                const double apv = arow[p];
                const double* brow = bv + p * n;
                for (std::size_t j = 0; j < n; ++j)
                    orow[j] += apv * brow[j];
            }
        }
    });
    Tensor result(Shape{m, n}, std::move(out));

    Tape* tp = resolve_tape(a, b);
    if (!tracked(tp))
        return result;
    const int ia = a.bound() ? a.node() : -1;
    const int ib = b.bound() ? b.node() : -1;
    std::vector<int> parents;
    if (ia >= 0)
        parents.push_back(ia);
    if (ib >= 0)
        parents.push_back(ib);
    auto ad = a.data();
    auto bd = b.data();
    int id = tp->push_node(
        m * n, std::move(parents), [ia, ib, ad, bd, m, k, n](const double* g, Tape& t) {
            if (ia >= 0) {
                // dA = G * B^T
                auto& buf = t.grad_buffer(ia);
                const double* bv = bd->values.data();
                parallel_ranges(m, [&](std::size_t rb, std::size_t re) {
                    for (std::size_t i = rb; i < re; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                            double acc = 0.0;
                            const double* grow = g + i * n;
                            const double* brow = bv + p * n;
                            for (std::size_t j = 0; j < n; ++j)
                                acc += grow[j] * brow[j];
                            buf[i * k + p] += acc;
                        }
                });
            }
            if (ib >= 0) {
                // dB = A^T * G
                auto& buf = t.grad_buffer(ib);
                const double* av = ad->values.data();
                parallel_ranges(k, [&](std::size_t rb, std::size_t re) {
                    for (std::size_t p = rb; p < re; ++p) {
                        double* brow = buf.data() + p * n;
                        for (std::size_t i = 0; i < m; ++i) {
                            const double apv = av[i * k + p];
                            const double* grow = g + i * n;
                            for (std::size_t j = 0; j < n; ++j)
                                brow[j] += apv * grow[j];
                        }
                    }
                });
            }
        });
    return tp->adopt(std::move(result), id);
}

Tensor exp(const Tensor& t) {
    return unary_op(
        t, [](double x) { return std::exp(x); }, [](double, double out) { return out; });
}

Tensor log(const Tensor& t) {
    return unary_op(
        t, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& t) {
    return unary_op(
        t, [](double x) { return std::tanh(x); },
        [](double, double out) { return 1.0 - out * out; });
}

Tensor softplus(const Tensor& t) {
    return unary_op(
        t,
        [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
        [](double x, double) { return sigmoid(x); });
}

Tensor square(const Tensor& t) {
    return unary_op(
        t, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sum(const Tensor& t) {
    const auto& v = t.values();
    double acc = 0.0;
    for (double x : v)
        acc += x;
    Tensor result = Tensor::scalar(acc);
    Tape* tp = t.bound() ? t.tape() : nullptr;
    if (!tracked(tp))
        return result;
    const int ia = t.node();
    const std::size_t n = t.size();
    int id = tp->push_node(1, {ia}, [ia, n](const double* g, Tape& tape) {
        auto& buf = tape.grad_buffer(ia);
        for (std::size_t i = 0; i < n; ++i)
            buf[i] += g[0];
    });
    return tp->adopt(std::move(result), id);
}

namespace {

// Generic axis reduction support: iterate (outer, axis, inner) blocks.
struct AxisView {
    std::size_t outer, extent, inner;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
    if (axis >= s.size())
        throw ShapeError("reduction axis out of range");
    AxisView v{1, s[axis], 1};
    for (std::size_t i = 0; i < axis; ++i)
        v.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i)
        v.inner *= s[i];
    return v;
}

Shape reduced_shape(const Shape& s, std::size_t axis, bool keepdim) {
    Shape out = s;
    if (keepdim)
        out[axis] = 1;
    else
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
    return out;
}

} // namespace

Tensor sum(const Tensor& t, std::size_t axis, bool keepdim) {
    const AxisView v = axis_view(t.shape(), axis);
    std::vector<double> out(v.outer * v.inner, 0.0);
    const auto& tv = t.values();
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t e = 0; e < v.extent; ++e)
            for (std::size_t i = 0; i < v.inner; ++i)
                out[o * v.inner + i] += tv[(o * v.extent + e) * v.inner + i];
    Tensor result(reduced_shape(t.shape(), axis, keepdim), std::move(out));

    Tape* tp = t.bound() ? t.tape() : nullptr;
    if (!tracked(tp))
        return result;
    const int ia = t.node();
    int id = tp->push_node(result.size(), {ia}, [ia, v](const double* g, Tape& tape) {
        auto& buf = tape.grad_buffer(ia);
        for (std::size_t o = 0; o < v.outer; ++o)
            for (std::size_t e = 0; e < v.extent; ++e)
                for (std::size_t i = 0; i < v.inner; ++i)
                    buf[(o * v.extent + e) * v.inner + i] += g[o * v.inner + i];
    });
    return tp->adopt(std::move(result), id);
}

Tensor mean(const Tensor& t) {
    return scale(sum(t), 1.0 / static_cast<double>(t.size()));
}

Tensor mean(const Tensor& t, std::size_t axis, bool keepdim) {
    const double inv = 1.0 / static_cast<double>(t.dim(axis));
    return scale(sum(t, axis, keepdim), inv);
}

Tensor logsumexp(const Tensor& t) {
    return logsumexp(reshape(t, Shape{t.size()}), 0);
}

Tensor logsumexp(const Tensor& t, std::size_t axis, bool keepdim) {
    const AxisView v = axis_view(t.shape(), axis);
    const auto& tv = t.values();
    std::vector<double> out(v.outer * v.inner);
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t i = 0; i < v.inner; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t e = 0; e < v.extent; ++e)
                mx = std::max(mx, tv[(o * v.extent + e) * v.inner + i]);
            double acc = 0.0;
            for (std::size_t e = 0; e < v.extent; ++e)
                acc += std::exp(tv[(o * v.extent + e) * v.inner + i] - mx);
            out[o * v.inner + i] = mx + std::log(acc);
        }
    Tensor result(reduced_shape(t.shape(), axis, keepdim), std::move(out));

    Tape* tp = t.bound() ? t.tape() : nullptr;
    if (!tracked(tp))
        return result;
    const int ia = t.node();
    auto td = t.data();
    auto rd = result.data();
    int id = tp->push_node(result.size(), {ia}, [ia, td, rd, v](const double* g, Tape& tape) {
        auto& buf = tape.grad_buffer(ia);
        for (std::size_t o = 0; o < v.outer; ++o)
            for (std::size_t i = 0; i < v.inner; ++i) {
                const double lse = rd->values[o * v.inner + i];
                const double gv = g[o * v.inner + i];
                for (std::size_t e = 0; e < v.extent; ++e) {
                    const std::size_t idx = (o * v.extent + e) * v.inner + i;
                    buf[idx] += gv * std::exp(td->values[idx] - lse);
                }
            }
    });
    return tp->adopt(std::move(result), id);
}

Tensor slice(const Tensor& t, std::size_t axis, std::size_t start, std::size_t end) {
    if (axis >= t.rank())
        throw ShapeError("slice: axis out of range");
    if (start > end || end > t.dim(axis))
        throw ShapeError("slice: bad range");
    const AxisView v = axis_view(t.shape(), axis);
    const std::size_t span = end - start;
    Shape oshape = t.shape();
    oshape[axis] = span;
    std::vector<double> out(shape_numel(oshape));
    const auto& tv = t.values();
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t e = 0; e < span; ++e)
            for (std::size_t i = 0; i < v.inner; ++i)
                out[(o * span + e) * v.inner + i] =
                    tv[(o * v.extent + start + e) * v.inner + i];
    Tensor result(std::move(oshape), std::move(out));

    Tape* tp = t.bound() ? t.tape() : nullptr;
    if (!tracked(tp))
        return result;
    const int ia = t.node();
    int id = tp->push_node(result.size(), {ia},
                           [ia, v, start, span](const double* g, Tape& tape) {
                               auto& buf = tape.grad_buffer(ia);
                               for (std::size_t o = 0; o < v.outer; ++o)
                                   for (std::size_t e = 0; e < span; ++e)
                                       for (std::size_t i = 0; i < v.inner; ++i)
                                           buf[(o * v.extent + start + e) * v.inner + i] +=
                                               g[(o * span + e) * v.inner + i];
                           });
    return tp->adopt(std::move(result), id);
}

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
    if (a.rank() != b.rank())
        throw ShapeError("concat: rank mismatch");
    if (axis >= a.rank())
        throw ShapeError("concat: axis out of range");
    for (std::size_t i = 0; i < a.rank(); ++i)
        if (i != axis && a.dim(i) != b.dim(i))
            throw ShapeError("concat: shapes differ off-axis");
    const AxisView va = axis_view(a.shape(), axis);
    const AxisView vb = axis_view(b.shape(), axis);
    const std::size_t ext = va.extent + vb.extent;
    Shape oshape = a.shape();
    oshape[axis] = ext;
    std::vector<double> out(shape_numel(oshape));
    const auto& avv = a.values();
    const auto& bvv = b.values();
    for (std::size_t o = 0; o < va.outer; ++o) {
        for (std::size_t e = 0; e < va.extent; ++e)
            for (std::size_t i = 0; i < va.inner; ++i)
                out[(o * ext + e) * va.inner + i] = avv[(o * va.extent + e) * va.inner + i];
        for (std::size_t e = 0; e < vb.extent; ++e)
            for (std::size_t i = 0; i < vb.inner; ++i)
                out[(o * ext + va.extent + e) * vb.inner + i] =
                    bvv[(o * vb.extent + e) * vb.inner + i];
    }
    Tensor result(std::move(oshape), std::move(out));

    Tape* tp = resolve_tape(a, b);
    if (!tracked(tp))
        return result;
    const int ia = a.bound() ? a.node() : -1;
    const int ib = b.bound() ? b.node() : -1;
    std::vector<int> parents;
    if (ia >= 0)
        parents.push_back(ia);
    if (ib >= 0)
        parents.push_back(ib);
    int id = tp->push_node(result.size(), std::move(parents),
                           [ia, ib, va, vb, ext](const double* g, Tape& tape) {
                               if (ia >= 0) {
                                   auto& buf = tape.grad_buffer(ia);
                                   for (std::size_t o = 0; o < va.outer; ++o)
                                       for (std::size_t e = 0; e < va.extent; ++e)
                                           for (std::size_t i = 0; i < va.inner; ++i)
                                               buf[(o * va.extent + e) * va.inner + i] +=
                                                   g[(o * ext + e) * va.inner + i];
                               }
                               if (ib >= 0) {
                                   auto& buf = tape.grad_buffer(ib);
                                   for (std::size_t o = 0; o < vb.outer; ++o)
                                       for (std::size_t e = 0; e < vb.extent; ++e)
                                           for (std::size_t i = 0; i < vb.inner; ++i)
                                               buf[(o * vb.extent + e) * vb.inner + i] +=
                                                   g[(o * ext + va.extent + e) * vb.inner + i];
                               }
                           });
    return tp->adopt(std::move(result), id);
}

Tensor broadcast(const Tensor& t, const Shape& target) {
    const Shape& src = t.shape();
    if (src.size() > target.size())
        throw ShapeError("broadcast: source rank exceeds target rank");
    const std::size_t off = target.size() - src.size();
    for (std::size_t i = 0; i < src.size(); ++i)
        if (src[i] != target[off + i] && src[i] != 1)
            throw ShapeError("broadcast: incompatible shapes " + shape_str(src) + " -> " +
                             shape_str(target));
    if (src == target)
        return t;

    // Source strides aligned to the target rank; broadcast axes get stride 0.
    const auto src_strides = strides_of(src);
    std::vector<std::size_t> aligned(target.size(), 0);
    for (std::size_t i = 0; i < src.size(); ++i)
        aligned[off + i] = (src[i] == 1 && target[off + i] != 1) ? 0 : src_strides[i];
    const auto tgt_strides = strides_of(target);
    const std::size_t n = shape_numel(target);
    const std::size_t rank = target.size();

    std::vector<double> out(n);
    const auto& tv = t.values();
    for (std::size_t idx = 0; idx < n; ++idx) {
        std::size_t rem = idx, sidx = 0;
        for (std::size_t d = 0; d < rank; ++d) {
            const std::size_t c = rem / tgt_strides[d];
            rem -= c * tgt_strides[d];
            sidx += c * aligned[d];
        }
        out[idx] = tv[sidx];
    }
    Tensor result(target, std::move(out));

    Tape* tp = t.bound() ? t.tape() : nullptr;
    if (!tracked(tp))
        return result;
    const int ia = t.node();
    int id = tp->push_node(
        n, {ia}, [ia, aligned, tgt_strides, n, rank](const double* g, Tape& tape) {
            auto& buf = tape.grad_buffer(ia);
            for (std::size_t idx = 0; idx < n; ++idx) {
                std::size_t rem = idx, sidx = 0;
                for (std::size_t d = 0; d < rank; ++d) {
                    const std::size_t c = rem / tgt_strides[d];
                    rem -= c * tgt_strides[d];
                    sidx += c * aligned[d];
                }
                buf[sidx] += g[idx];
            }
        });
    return tp->adopt(std::move(result), id);
}

Tensor stop_gradient(const Tensor& t) {
    // Shares the buffer, so forward values are bit-identical; with no tape
    // binding, downstream ops treat it as a constant.
    return t.detached();
}

Tensor reshape(const Tensor& t, Shape shape) {
    if (shape_numel(shape) != t.size())
        throw ShapeError("reshape: element count mismatch");
    Tensor result(std::move(shape), t.values());
    Tape* tp = t.bound() ? t.tape() : nullptr;
    if (!tracked(tp))
        return result;
    const int ia = t.node();
    const std::size_t n = t.size();
    int id = tp->push_node(n, {ia}, [ia, n](const double* g, Tape& tape) {
        tape.accumulate(ia, g, n);
    });
    return tp->adopt(std::move(result), id);
}

Tensor scale(const Tensor& t, double c) {
    return mul(t, Tensor::full(t.shape(), c));
}

Tensor add_scalar(const Tensor& t, double c) {
    return add(t, Tensor::full(t.shape(), c));
}

Tensor neg(const Tensor& t) { return scale(t, -1.0); }

Tensor clamp(const Tensor& t, double lo, double hi) {
    const std::size_t n = t.size();
    std::vector<double> mask(n), bound(n, 0.0);
    const auto& tv = t.values();
    for (std::size_t i = 0; i < n; ++i) {
        if (tv[i] < lo) {
            mask[i] = 0.0;
            bound[i] = lo;
        } else if (tv[i] > hi) {
            mask[i] = 0.0;
            bound[i] = hi;
        } else {
            mask[i] = 1.0;
        }
    }
    return add(mul(t, Tensor(t.shape(), std::move(mask))), Tensor(t.shape(), std::move(bound)));
}

} // namespace scfm
