#include "ism/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ism/errors.hpp"

namespace ism {

namespace detail {

size_t shape_size(const Shape& shape) {
    size_t n = 1;
    for (size_t e : shape) n *= e;
    return n;
}

}  // namespace detail

namespace {

void check_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite value");
    }
}

detail::NodePtr make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
    if (detail::shape_size(shape) != values.size())
        throw DimensionError("tensor: data length does not match shape");
    check_finite(values, "tensor");
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    node->grad_path = requires_grad;
    if (requires_grad) node->grad.assign(node->data.size(), 0.0);
    return node;
}

}  // namespace

Tensor Tensor::from_values(Shape shape, std::vector<double> values) {
    return wrap(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::zeros(Shape shape) {
    const size_t n = detail::shape_size(shape);
    return wrap(make_leaf(std::move(shape), std::vector<double>(n, 0.0), false));
}

Tensor Tensor::full(Shape shape, double value) {
    const size_t n = detail::shape_size(shape);
    return wrap(make_leaf(std::move(shape), std::vector<double>(n, value), false));
}

Tensor Tensor::scalar(double value) { return from_values({}, {value}); }

Tensor Tensor::param(Shape shape, std::vector<double> values) {
    return wrap(make_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::wrap(detail::NodePtr node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

const Shape& Tensor::shape() const {
    if (!node_) throw ContractError("tensor: empty handle");
    return node_->shape;
}

size_t Tensor::size() const {
    if (!node_) throw ContractError("tensor: empty handle");
    return node_->data.size();
}

size_t Tensor::extent(size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) throw DimensionError("tensor: axis out of range");
    return s[axis];
}

std::span<const double> Tensor::data() const {
    if (!node_) throw ContractError("tensor: empty handle");
    return node_->data;
}

std::span<double> Tensor::mutable_data() {
    if (!node_) throw ContractError("tensor: empty handle");
    return node_->data;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!node_ || node_->grad.empty()) throw ContractError("tensor: no gradient buffer");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
    if (!node_ || node_->grad.empty()) throw ContractError("tensor: no gradient buffer");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_) throw ContractError("tensor: empty handle");
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
    if (!node_ || node_->data.size() != 1) throw ContractError("tensor: item() needs exactly one element");
    return node_->data[0];
}

double Tensor::at(size_t i) const {
    if (!node_ || i >= node_->data.size()) throw DimensionError("tensor: index out of range");
    return node_->data[i];
}

double Tensor::at(size_t row, size_t col) const {
    const Shape& s = shape();
    if (s.size() != 2 || row >= s[0] || col >= s[1]) throw DimensionError("tensor: 2-d index out of range");
    return node_->data[row * s[1] + col];
}

Tensor Tensor::detach() const {
    if (!node_) throw ContractError("tensor: empty handle");
    return from_values(node_->shape, node_->data);
}

Tensor Tensor::clone_as_param() const {
    if (!node_) throw ContractError("tensor: empty handle");
    return param(node_->shape, node_->data);
}

Tensor Tensor::clone_frozen() const { return detach(); }

Tensor Tensor::make_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                       std::function<void(detail::TensorNode&)> backprop) {
    if (detail::shape_size(shape) != data.size())
        throw DimensionError("tensor op: data length does not match shape");
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    for (const Tensor& p : parents) {
        if (!p.valid()) throw ContractError("tensor op: empty parent handle");
        node->parents.push_back(p.node());
        node->grad_path = node->grad_path || p.node()->grad_path;
    }
    if (node->grad_path) node->backprop = std::move(backprop);
    return wrap(std::move(node));
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

namespace {

void require_matrix(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw DimensionError(std::string(what) + ": expected a 2-d tensor");
}

// Accumulate g into a parent's grad buffer if it is on the grad path.
bool wants_grad(const detail::NodePtr& n) { return n->grad_path; }

}  // namespace

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_matrix(x, "affine");
    require_matrix(w, "affine");
    if (b.rank() != 1) throw DimensionError("affine: bias must be 1-d");
    const size_t rows = x.extent(0), inner = x.extent(1);
    const size_t wn = w.extent(1);
    if (w.extent(0) != inner) throw DimensionError("affine: inner dimensions disagree");
    if (b.extent(0) != wn) throw DimensionError("affine: bias width disagrees");

    std::vector<double> out(rows * wn);
    const auto xd = x.data(), wd = w.data(), bd = b.data();
    for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < wn; ++j) out[i * wn + j] = bd[j];
        for (size_t k = 0; k < inner; ++k) {
            const double xv = xd[i * inner + k];
            if (xv == 0.0) continue;
            for (size_t j = 0; j < wn; ++j) out[i * wn + j] += xv * wd[k * wn + j];
        }
    }

    return Tensor::make_op(
        {rows, wn}, std::move(out), {x, w, b}, [rows, inner, wn](detail::TensorNode& n) {
            const auto& g = n.grad;
            auto& px = n.parents[0];
            auto& pw = n.parents[1];
            auto& pb = n.parents[2];
            if (wants_grad(px)) {
                for (size_t i = 0; i < rows; ++i)
                    for (size_t k = 0; k < inner; ++k) {
                        double acc = 0.0;
                        for (size_t j = 0; j < wn; ++j) acc += g[i * wn + j] * pw->data[k * wn + j];
                        px->grad[i * inner + k] += acc;
                    }
            }
            if (wants_grad(pw)) {
                for (size_t k = 0; k < inner; ++k)
                    for (size_t j = 0; j < wn; ++j) {
                        double acc = 0.0;
                        for (size_t i = 0; i < rows; ++i) acc += px->data[i * inner + k] * g[i * wn + j];
                        pw->grad[k * wn + j] += acc;
                    }
            }
            if (wants_grad(pb)) {
                for (size_t j = 0; j < wn; ++j) {
                    double acc = 0.0;
                    for (size_t i = 0; i < rows; ++i) acc += g[i * wn + j];
                    pb->grad[j] += acc;
                }
            }
        });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    if (!(slope >= 0.0 && slope < 1.0)) throw ParameterError("leaky_relu: slope must be in [0,1)");
    std::vector<double> out(x.size());
    const auto xd = x.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > 0.0 ? xd[i] : slope * xd[i];
    return Tensor::make_op(x.shape(), std::move(out), {x}, [slope](detail::TensorNode& n) {
        auto& p = n.parents[0];
        if (!wants_grad(p)) return;
        for (size_t i = 0; i < n.grad.size(); ++i)
            p->grad[i] += n.grad[i] * (p->data[i] > 0.0 ? 1.0 : slope);
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw DimensionError("add: shape mismatch");
    std::vector<double> out(a.size());
    const auto ad = a.data(), bd = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
    return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](detail::TensorNode& n) {
        for (auto& p : n.parents) {
            if (!wants_grad(p)) continue;
            for (size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw DimensionError("mul: shape mismatch");
    std::vector<double> out(a.size());
    const auto ad = a.data(), bd = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
    return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](detail::TensorNode& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        if (wants_grad(pa))
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * pb->data[i];
        if (wants_grad(pb))
            for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i] * pa->data[i];
    });
}

Tensor scale(const Tensor& a, double k) {
    std::vector<double> out(a.size());
    const auto ad = a.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = k * ad[i];
    return Tensor::make_op(a.shape(), std::move(out), {a}, [k](detail::TensorNode& n) {
        auto& p = n.parents[0];
        if (!wants_grad(p)) return;
        for (size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += k * n.grad[i];
    });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    return Tensor::make_op({}, {acc}, {a}, [](detail::TensorNode& n) {
        auto& p = n.parents[0];
        if (!wants_grad(p)) return;
        for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += n.grad[0];
    });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    require_matrix(a, "concat_rows");
    require_matrix(b, "concat_rows");
    if (a.extent(1) != b.extent(1)) throw DimensionError("concat_rows: column counts disagree");
    const size_t cols = a.extent(1), ra = a.extent(0), rb = b.extent(0);
    std::vector<double> out;
    out.reserve((ra + rb) * cols);
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    return Tensor::make_op({ra + rb, cols}, std::move(out), {a, b}, [ra, cols](detail::TensorNode& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        const size_t split = ra * cols;
        if (wants_grad(pa))
            for (size_t i = 0; i < split; ++i) pa->grad[i] += n.grad[i];
        if (wants_grad(pb))
            for (size_t i = split; i < n.grad.size(); ++i) pb->grad[i - split] += n.grad[i];
    });
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.valid()) throw ContractError("backward: empty handle");
    const auto& root = loss.node();
    if (root->shape.size() != 0 || root->data.size() != 1)
        throw ContractError("backward: loss must be a 0-d scalar");
    if (!root->grad_path) return;  // constant graph, nothing trainable upstream

    // Iterative post-order DFS over the grad path.
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> seen;
    std::vector<std::pair<detail::TensorNode*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        bool descended = false;
        while (next < node->parents.size()) {
            detail::TensorNode* p = node->parents[next++].get();
            if (p->grad_path && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
                descended = true;
                break;
            }
        }
        if (!descended && (stack.back().second >= stack.back().first->parents.size())) {
            order.push_back(stack.back().first);
            stack.pop_back();
        }
    }

    // Fresh transient grads for op nodes; leaf grads accumulate.
    for (detail::TensorNode* n : order) {
        if (n->backprop)
            n->grad.assign(n->data.size(), 0.0);
        else if (n->grad.empty())
            n->grad.assign(n->data.size(), 0.0);
    }
    root->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorNode* n = *it;
        if (!n->backprop) continue;
        for (auto& p : n->parents)
            if (p->grad_path && p->grad.empty()) p->grad.assign(p->data.size(), 0.0);
        n->backprop(*n);
    }
}

}  // namespace ism
