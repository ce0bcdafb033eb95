#pragma once

#include <cstddef>
#include <vector>

#include "scfm/tensor.hpp"

namespace scfm {

// Primitive differentiable ops over Tensor. Binary elementwise ops require
// identical shapes; use broadcast() to align first. An op output is bound to
// a tape iff at least one input is bound and that tape is recording; inputs
// bound to two different tapes raise GraphError.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor exp(const Tensor& t);
Tensor log(const Tensor& t);
Tensor tanh(const Tensor& t);
Tensor softplus(const Tensor& t);
Tensor square(const Tensor& t);

// Reductions. Axis variants drop the reduced axis unless keepdim is set.
Tensor sum(const Tensor& t);
Tensor sum(const Tensor& t, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& t);
Tensor mean(const Tensor& t, std::size_t axis, bool keepdim = false);
Tensor logsumexp(const Tensor& t);
Tensor logsumexp(const Tensor& t, std::size_t axis, bool keepdim = false);

// Elements [start, end) along `axis`.
Tensor slice(const Tensor& t, std::size_t axis, std::size_t start, std::size_t end);
Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);

// Right-aligned shape broadcast: missing leading axes are prepended, size-1
// axes expand. Backward sums over the expanded axes.
Tensor broadcast(const Tensor& t, const Shape& target);

// Value-identical (shares the buffer), contributes exactly zero gradient.
Tensor stop_gradient(const Tensor& t);

// Differentiable view with a new shape (identity backward).
Tensor reshape(const Tensor& t, Shape shape);

// Conveniences composed from the primitives above.
Tensor scale(const Tensor& t, double c);           // t * c
Tensor add_scalar(const Tensor& t, double c);      // t + c
Tensor neg(const Tensor& t);                       // -t

// Elementwise clamp with the usual subgradient (1 inside [lo, hi], 0 outside),
// composed as mul/add against value-dependent constant masks.
Tensor clamp(const Tensor& t, double lo, double hi);

} // namespace scfm
