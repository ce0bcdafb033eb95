#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "scfm/errors.hpp"

namespace scfm {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s)
        n *= d;
    return n;
}

class Tape;

struct TensorData {
    Shape shape;
    std::vector<double> values;
};

// Dense row-major tensor of 64-bit reals. Copies share the underlying buffer;
// a tensor participates in autodiff once a Tape has bound it (see Tape::watch)
// or it was produced by an op applied to bound inputs. Unbound tensors are
// plain immutable values and can be shared freely across threads.
class Tensor {
public:
    Tensor() : data_(std::make_shared<TensorData>()) {}

    Tensor(Shape shape, std::vector<double> values)
        : data_(std::make_shared<TensorData>(TensorData{std::move(shape), std::move(values)})) {
        if (shape_numel(data_->shape) != data_->values.size())
            throw ShapeError("tensor: shape does not match value count");
    }

    static Tensor zeros(Shape shape) {
        std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0));
    }

    static Tensor full(Shape shape, double v) {
        std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, v));
    }

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    const Shape& shape() const { return data_->shape; }
    std::size_t rank() const { return data_->shape.size(); }
    std::size_t size() const { return data_->values.size(); }
    std::size_t dim(std::size_t axis) const { return data_->shape.at(axis); }

    const std::vector<double>& values() const { return data_->values; }
    std::vector<double>& values_mut() { return data_->values; }

    double item() const {
        if (size() != 1)
            throw ShapeError("item: tensor is not a scalar");
        return data_->values[0];
    }

    double at(std::size_t i) const { return data_->values.at(i); }
    double at(std::size_t r, std::size_t c) const {
        if (rank() != 2)
            throw ShapeError("at(r,c): tensor is not rank 2");
        return data_->values[r * dim(1) + c];
    }

    // Deep copy, detached from any tape.
    Tensor clone() const {
        return Tensor(data_->shape, data_->values);
    }

    // Same buffer, no tape binding.
    Tensor detached() const {
        Tensor t = *this;
        t.tape_ = nullptr;
        t.node_ = -1;
        return t;
    }

    bool bound() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int node() const { return node_; }

    const std::shared_ptr<TensorData>& data() const { return data_; }

private:
    std::shared_ptr<TensorData> data_;
    Tape* tape_ = nullptr;
    int node_ = -1;

    friend class Tape;
};

// Reverse-mode tape: an ordered record of primitive ops. Inputs of every node
// precede it, so backward is a single reverse sweep that visits each node once.
// Gradient accumulation is += in reverse tape order, left-to-right over each
// node's inputs, which makes repeated runs bit-identical.
//
// Single-threaded per tape; distinct tapes may live on distinct threads.
class Tape {
public:
    using BackwardFn = std::function<void(const double* grad_out, Tape& tape)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }
    void set_recording(bool r) { recording_ = r; }

    // Registers a leaf. Watching the same underlying buffer twice yields the
    // same node, so a parameter used in several places accumulates one grad.
    Tensor watch(const Tensor& t) {
        if (t.tape_ == this)
            return t;
        if (t.tape_ != nullptr)
            throw GraphError("watch: tensor already bound to another tape");
        if (!recording_)
            return t;
        auto it = leaves_.find(t.data_.get());
        Tensor handle = t;
        if (it != leaves_.end()) {
            handle.tape_ = this;
            handle.node_ = it->second;
            return handle;
        }
        int id = push_node(t.size(), {}, nullptr, t.data_);
        leaves_.emplace(t.data_.get(), id);
        handle.tape_ = this;
        handle.node_ = id;
        return handle;
    }

    int push_node(std::size_t out_size, std::vector<int> parents, BackwardFn backward,
                  std::shared_ptr<TensorData> keep_alive = nullptr) {
        nodes_.push_back(Node{out_size, std::move(parents), std::move(backward),
                              std::move(keep_alive)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    Tensor adopt(Tensor t, int node) {
        t.tape_ = this;
        t.node_ = node;
        return t;
    }

    std::size_t node_count() const { return nodes_.size(); }

    // Gradient buffer of a node, zero-initialized on first touch.
    std::vector<double>& grad_buffer(int node) {
        auto& g = grads_[static_cast<std::size_t>(node)];
        if (g.empty())
            g.assign(nodes_[static_cast<std::size_t>(node)].out_size, 0.0);
        return g;
    }

    void accumulate(int node, const double* g, std::size_t n) {
        auto& buf = grad_buffer(node);
        for (std::size_t i = 0; i < n; ++i)
            buf[i] += g[i];
    }

    // Backprop from a scalar output; returns d(output)/d(w) for each w in
    // `wrt`, in order. The tape itself is left intact (call reset() before the
    // next forward pass).
    std::vector<Tensor> eval_and_grad(const Tensor& output, const std::vector<Tensor>& wrt) {
        if (output.size() != 1)
            throw ShapeError("eval_and_grad: output is not a scalar");
        if (output.tape_ != this || output.node_ < 0)
            throw GraphError("eval_and_grad: output is not on this tape");

        std::vector<int> wrt_nodes;
        wrt_nodes.reserve(wrt.size());
        for (const Tensor& w : wrt)
            wrt_nodes.push_back(resolve_node(w));

        grads_.assign(nodes_.size(), {});
        grad_buffer(output.node_)[0] = 1.0;
        for (int i = output.node_; i >= 0; --i) {
            const auto& g = grads_[static_cast<std::size_t>(i)];
            if (g.empty())
                continue;
            const Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.backward)
                n.backward(g.data(), *this);
        }

        std::vector<Tensor> out;
        out.reserve(wrt.size());
        for (std::size_t k = 0; k < wrt.size(); ++k) {
            const auto& g = grads_[static_cast<std::size_t>(wrt_nodes[k])];
            if (g.empty())
                out.push_back(Tensor::zeros(wrt[k].shape()));
            else
                out.push_back(Tensor(wrt[k].shape(), g));
        }
        grads_.clear();
        return out;
    }

    // Convenience: gradient of `output` w.r.t. a single tensor.
    Tensor grad(const Tensor& output, const Tensor& wrt) {
        return eval_and_grad(output, {wrt})[0];
    }

    // Clears all recorded nodes; previously bound handles become stale and
    // must be re-watched.
    void reset() {
        nodes_.clear();
        grads_.clear();
        leaves_.clear();
    }

private:
    struct Node {
        std::size_t out_size;
        std::vector<int> parents;
        BackwardFn backward;
        std::shared_ptr<TensorData> keep_alive;
    };

    int resolve_node(const Tensor& w) const {
        if (w.tape_ == this && w.node_ >= 0)
            return w.node_;
        auto it = leaves_.find(w.data_.get());
        if (it == leaves_.end())
            throw GraphError("eval_and_grad: tensor is not on the tape");
        return it->second;
    }

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    std::unordered_map<const TensorData*, int> leaves_;
    bool recording_ = true;
};

} // namespace scfm
