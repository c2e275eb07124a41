#pragma once

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Var is a shared handle to a graph node. Operations record their parents and
// a backward closure only while gradient recording is enabled and at least one
// input requires a gradient, so inference under NoGradGuard builds no graph.

#include <Eigen/Dense>

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

namespace hear::ag {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void accumulate(const Matrix& g);
};

class Var {
  public:
    Var() = default;
    explicit Var(Matrix value, bool requires_grad = false);

    static Var constant(Matrix value) { return Var(std::move(value), false); }
    static Var parameter(Matrix value) { return Var(std::move(value), true); }
    static Var scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Matrix& value() const { return node_->value; }
    Matrix& mutable_value() { return node_->value; }
    const Matrix& grad() const { return node_->grad; }
    Matrix& mutable_grad() { return node_->grad; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    Index rows() const { return node_->value.rows(); }
    Index cols() const { return node_->value.cols(); }
    double item() const;

    // Seeds d(this)/d(this) = 1 and propagates to every reachable node.
    void backward() const;
    void zero_grad();

    const std::shared_ptr<Node>& node() const { return node_; }

  private:
    friend Var make_result(Matrix value, std::initializer_list<Var> inputs,
                           std::function<void(Node&)> backward_fn);
    friend Var make_result(Matrix value, std::span<const Var> inputs,
                           std::function<void(Node&)> backward_fn);
    std::shared_ptr<Node> node_;
};

bool grad_enabled();

class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

Var make_result(Matrix value, std::initializer_list<Var> inputs,
                std::function<void(Node&)> backward_fn);
Var make_result(Matrix value, std::span<const Var> inputs, std::function<void(Node&)> backward_fn);

// Linear algebra
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var add_row(const Var& x, const Var& row);  // broadcast a 1xC row over every row of x
Var add_const(const Var& x, const Matrix& c);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& x, double s);
Var scale(const Var& x, const Var& s);  // s is 1x1
Var one_minus(const Var& s);            // 1 - s for 1x1 s

// Elementwise
Var gelu(const Var& x);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var hinge(const Var& x);  // max(x, 0); subgradient 0 at the kink

// Row-wise
Var softmax_rows(const Var& x);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

// Shape
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(const Var& x, Index start, Index count);
Var slice_cols(const Var& x, Index start, Index count);
Var gather_rows(const Var& table, std::span<const int> ids);
Var select_rows(const Var& x, std::span<const Index> rows);

// Reductions and losses
Var sum(const Var& x);
Var mean(const Var& x);
Var cross_entropy(const Var& logits, std::span<const int> targets);  // mean over rows
Var squared_error_sum(const Var& prediction, const Matrix& target);
Var detach(const Var& x);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }

}  // namespace hear::ag
