#include "dscodec/ad/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace dscodec::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

Var Var::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Var Var::full(Shape shape, double value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value.assign(static_cast<std::size_t>(ad::numel(shape)), value);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
}

Var Var::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (ad::numel(shape) != static_cast<std::int64_t>(values.size()))
        throw std::invalid_argument("Var::from: " + std::to_string(values.size()) +
                                    " values do not fill shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
}

Var Var::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

std::int64_t Var::dim(int axis) const {
    int nd = ndim();
    int a = axis < 0 ? axis + nd : axis;
    if (a < 0 || a >= nd)
        throw std::out_of_range("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
    return node_->shape[static_cast<std::size_t>(a)];
}

std::span<double> Var::grad() {
    node_->ensure_grad();
    return node_->grad;
}

void Var::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Var::item() const {
    if (node_->value.size() != 1) throw std::logic_error("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

Var Var::detach() const {
    auto n = std::make_shared<Node>();
    n->shape = node_->shape;
    n->value = node_->value;
    return Var(std::move(n));
}

void Var::backward() const {
    if (node_->value.size() != 1) throw std::logic_error("backward() requires a single-element root");
    if (!node_->requires_grad) return;

    // Iterative post-order DFS yields a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_result(Shape shape, std::vector<double> value, const std::vector<Var>& parents,
                std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    if (g_grad_enabled) {
        bool any = false;
        for (const auto& p : parents) any = any || p.requires_grad();
        if (any) {
            n->requires_grad = true;
            n->parents.reserve(parents.size());
            for (const auto& p : parents) n->parents.push_back(p.ptr());
            n->backward_fn = std::move(backward_fn);
        }
    }
    return Var(std::move(n));
}

void accumulate(Node& self, std::size_t parent, std::span<const double> g) {
    Node& p = *self.parents[parent];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
}

}  // namespace dscodec::ad
