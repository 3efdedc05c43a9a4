#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

// Minimal reverse-mode automatic differentiation over dense row-major
// float64 arrays. Every operation records its parents and a backward closure
// only when gradients are enabled and at least one input requires them.
namespace dscodec::ad {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into its parents' grads.
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Var zeros(Shape shape, bool requires_grad = false);
    static Var full(Shape shape, double value, bool requires_grad = false);
    static Var from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Var scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }
    // Negative axes count from the back.
    std::int64_t dim(int axis) const;
    std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }

    std::span<double> data() { return node_->value; }
    std::span<const double> data() const { return node_->value; }
    std::vector<double>& values() { return node_->value; }
    const std::vector<double>& values() const { return node_->value; }

    // Allocates a zero gradient buffer on first access.
    std::span<double> grad();
    bool has_grad() const { return node_->grad.size() == node_->value.size(); }
    void zero_grad();

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    double item() const;
    // Seeds d(self)/d(self) = 1; self must hold exactly one element.
    void backward() const;
    Var detach() const;

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& ptr() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

bool grad_enabled();

// Disables graph recording for the lifetime of the guard.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Builds an op result. The backward closure is attached only if recording is
// on and some parent requires grad.
Var make_result(Shape shape, std::vector<double> value, const std::vector<Var>& parents,
                std::function<void(Node&)> backward_fn);

// Adds `g` into parent i's grad when that parent requires grad.
void accumulate(Node& self, std::size_t parent, std::span<const double> g);

}  // namespace dscodec::ad
