#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace ism {

using Shape = std::vector<size_t>;

namespace detail {

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

// One recorded value in the computation graph. Leaves own persistent
// gradient buffers; op nodes get transient ones during backward().
struct TensorNode {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;  // trainable leaf
    bool grad_path = false;      // this node or some ancestor requires grad
    std::vector<double> grad;
    std::vector<detail::NodePtr> parents;
    // Reads this node's grad and accumulates into parents' grads.
    std::function<void(TensorNode&)> backprop;

    size_t size() const { return data.size(); }
};

size_t shape_size(const Shape& shape);

}  // namespace detail

// Dense f64 tensor participating in a reverse-mode differentiation graph.
// Copies are shallow (shared node), like a framework tensor handle. The
// graph is rebuilt on every forward pass; only leaves survive across passes.
class Tensor {
public:
    Tensor() = default;

    // Constant leaf (not trainable, never receives gradients).
    static Tensor from_values(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);

    // Trainable leaf; gradient buffer is allocated immediately (zeros).
    static Tensor param(Shape shape, std::vector<double> values);

    bool valid() const { return node_ != nullptr; }
    const Shape& shape() const;
    size_t rank() const { return shape().size(); }
    size_t size() const;
    size_t extent(size_t axis) const;

    std::span<const double> data() const;
    std::span<double> mutable_data();

    bool requires_grad() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    // Value of a 0-d tensor.
    double item() const;

    double at(size_t i) const;
    double at(size_t row, size_t col) const;

    // Value copy detached from the graph (constant leaf).
    Tensor detach() const;
    // Value copy as a fresh trainable leaf.
    Tensor clone_as_param() const;
    // Value copy as a fresh constant leaf.
    Tensor clone_frozen() const;

    // Internal: wrap/unwrap graph nodes. Used by the op library and losses.
    static Tensor wrap(detail::NodePtr node);
    const detail::NodePtr& node() const { return node_; }

    // Internal: record an op node with a custom backward closure.
    static Tensor make_op(Shape shape, std::vector<double> data,
                          std::vector<Tensor> parents,
                          std::function<void(detail::TensorNode&)> backprop);

private:
    detail::NodePtr node_;
};

// x[B x m] * w[m x n] + b[n] -> [B x n]
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

// Elementwise max(x, slope*x); slope in [0,1). Subgradient at 0 is `slope`
// on the way down, i.e. the negative-side derivative.
Tensor leaky_relu(const Tensor& x, double slope);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double k);
Tensor sum(const Tensor& a);

// Stack a on top of b along the row axis: [r1 x c] + [r2 x c] -> [(r1+r2) x c].
Tensor concat_rows(const Tensor& a, const Tensor& b);

// Reverse-mode sweep from a 0-d loss. Leaf gradients accumulate additively
// across calls; callers zero them between steps.
void backward(const Tensor& loss);

}  // namespace ism
