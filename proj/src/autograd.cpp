#include "hear/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace hear::ag {

namespace {

thread_local bool g_grad_enabled = true;

constexpr double kGeluK = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluC = 0.044715;

bool needs(const Node& self, std::size_t i) {
    return self.parents[i]->requires_grad;
}

}  // namespace

void Node::accumulate(const Matrix& g) {
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var Var::scalar(double v, bool requires_grad) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return Var(std::move(m), requires_grad);
}

double Var::item() const {
    if (rows() != 1 || cols() != 1) {
        throw std::logic_error("item() called on a non-scalar Var");
    }
    return node_->value(0, 0);
}

void Var::zero_grad() {
    if (node_) node_->grad.resize(0, 0);
}

void Var::backward() const {
    if (rows() != 1 || cols() != 1) {
        throw std::logic_error("backward() requires a scalar root");
    }
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->accumulate(Matrix::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.size() != 0) {
            n->backward_fn(*n);
        }
    }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_result(Matrix value, std::span<const Var> inputs, std::function<void(Node&)> backward_fn) {
    Var out(std::move(value), false);
    if (!g_grad_enabled) return out;
    bool any = false;
    for (const auto& v : inputs) any = any || v.requires_grad();
    if (!any) return out;
    out.node_->requires_grad = true;
    out.node_->parents.reserve(inputs.size());
    for (const auto& v : inputs) out.node_->parents.push_back(v.node_);
    out.node_->backward_fn = std::move(backward_fn);
    return out;
}

Var make_result(Matrix value, std::initializer_list<Var> inputs,
                std::function<void(Node&)> backward_fn) {
    return make_result(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                       std::move(backward_fn));
}

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    return make_result(a.value() * b.value(), {a, b}, [](Node& self) {
        const Matrix& av = self.parents[0]->value;
        const Matrix& bv = self.parents[1]->value;
        if (needs(self, 0)) self.parents[0]->accumulate(self.grad * bv.transpose());
        if (needs(self, 1)) self.parents[1]->accumulate(av.transpose() * self.grad);
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
    return make_result(a.value() * b.value().transpose(), {a, b}, [](Node& self) {
        const Matrix& av = self.parents[0]->value;
        const Matrix& bv = self.parents[1]->value;
        if (needs(self, 0)) self.parents[0]->accumulate(self.grad * bv);
        if (needs(self, 1)) self.parents[1]->accumulate(self.grad.transpose() * av);
    });
}

Var add(const Var& a, const Var& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("add: shape mismatch");
    return make_result(a.value() + b.value(), {a, b}, [](Node& self) {
        if (needs(self, 0)) self.parents[0]->accumulate(self.grad);
        if (needs(self, 1)) self.parents[1]->accumulate(self.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("sub: shape mismatch");
    return make_result(a.value() - b.value(), {a, b}, [](Node& self) {
        if (needs(self, 0)) self.parents[0]->accumulate(self.grad);
        if (needs(self, 1)) self.parents[1]->accumulate(-self.grad);
    });
}

Var add_row(const Var& x, const Var& row) {
    if (row.rows() != 1 || row.cols() != x.cols()) throw std::invalid_argument("add_row: shape mismatch");
    Matrix out = x.value().rowwise() + row.value().row(0);
    return make_result(std::move(out), {x, row}, [](Node& self) {
        if (needs(self, 0)) self.parents[0]->accumulate(self.grad);
        if (needs(self, 1)) self.parents[1]->accumulate(self.grad.colwise().sum());
    });
}

Var add_const(const Var& x, const Matrix& c) {
    return make_result(x.value() + c, {x}, [](Node& self) { self.parents[0]->accumulate(self.grad); });
}

Var hadamard(const Var& a, const Var& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("hadamard: shape mismatch");
    return make_result(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
        if (needs(self, 0)) self.parents[0]->accumulate(self.grad.cwiseProduct(self.parents[1]->value));
        if (needs(self, 1)) self.parents[1]->accumulate(self.grad.cwiseProduct(self.parents[0]->value));
    });
}

Var scale(const Var& x, double s) {
    return make_result(x.value() * s, {x}, [s](Node& self) { self.parents[0]->accumulate(self.grad * s); });
}

Var scale(const Var& x, const Var& s) {
    if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("scale: factor must be 1x1");
    return make_result(x.value() * s.value()(0, 0), {x, s}, [](Node& self) {
        const double sv = self.parents[1]->value(0, 0);
        if (needs(self, 0)) self.parents[0]->accumulate(self.grad * sv);
        if (needs(self, 1)) {
            Matrix g(1, 1);
            g(0, 0) = self.grad.cwiseProduct(self.parents[0]->value).sum();
            self.parents[1]->accumulate(g);
        }
    });
}

Var one_minus(const Var& s) {
    if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("one_minus: expects 1x1");
    Matrix out = Matrix::Ones(1, 1) - s.value();
    return make_result(std::move(out), {s}, [](Node& self) { self.parents[0]->accumulate(-self.grad); });
}

Var gelu(const Var& x) {
    const Matrix& xv = x.value();
    Matrix out = xv.unaryExpr([](double v) {
        return 0.5 * v * (1.0 + std::tanh(kGeluK * (v + kGeluC * v * v * v)));
    });
    return make_result(std::move(out), {x}, [](Node& self) {
        const Matrix& xv = self.parents[0]->value;
        Matrix d = xv.unaryExpr([](double v) {
            const double t = std::tanh(kGeluK * (v + kGeluC * v * v * v));
            return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluK * (1.0 + 3.0 * kGeluC * v * v);
        });
        self.parents[0]->accumulate(self.grad.cwiseProduct(d));
    });
}

Var relu(const Var& x) {
    return make_result(x.value().cwiseMax(0.0), {x}, [](Node& self) {
        Matrix mask = (self.parents[0]->value.array() > 0.0).cast<double>().matrix();
        self.parents[0]->accumulate(self.grad.cwiseProduct(mask));
    });
}

Var hinge(const Var& x) { return relu(x); }

Var sigmoid(const Var& x) {
    Matrix out = x.value().unaryExpr([](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
    return make_result(std::move(out), {x}, [](Node& self) {
        Matrix d = self.value.cwiseProduct((Matrix::Ones(self.value.rows(), self.value.cols()) - self.value));
        self.parents[0]->accumulate(self.grad.cwiseProduct(d));
    });
}

Var softmax_rows(const Var& x) {
    const Matrix& xv = x.value();
    Matrix out(xv.rows(), xv.cols());
    for (Index i = 0; i < xv.rows(); ++i) {
        const double mx = xv.row(i).maxCoeff();
        out.row(i) = (xv.row(i).array() - mx).exp().matrix();
        out.row(i) /= out.row(i).sum();
    }
    return make_result(std::move(out), {x}, [](Node& self) {
        const Matrix& y = self.value;
        Eigen::VectorXd dots = self.grad.cwiseProduct(y).rowwise().sum();
        Matrix dx = y.cwiseProduct(self.grad.colwise() - dots);
        self.parents[0]->accumulate(dx);
    });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
    const Matrix& xv = x.value();
    const Index n = xv.rows();
    const Index c = xv.cols();
    Matrix xhat(n, c);
    Eigen::VectorXd inv_std(n);
    for (Index i = 0; i < n; ++i) {
        const double mu = xv.row(i).mean();
        const double var = (xv.row(i).array() - mu).square().mean();
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (xv.row(i).array() - mu) * inv_std(i);
    }
    Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
    out.rowwise() += bias.value().row(0);
    return make_result(std::move(out), {x, gain, bias}, [xhat, inv_std](Node& self) {
        const Matrix& g = self.grad;
        const Matrix& gv = self.parents[1]->value;
        if (needs(self, 0)) {
            Matrix dxhat = (g.array().rowwise() * gv.row(0).array()).matrix();
            const double c = static_cast<double>(g.cols());
            Matrix dx(g.rows(), g.cols());
            for (Index i = 0; i < g.rows(); ++i) {
                const double m1 = dxhat.row(i).sum() / c;
                const double m2 = dxhat.row(i).dot(xhat.row(i)) / c;
                dx.row(i) = ((dxhat.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std(i)).matrix();
            }
            self.parents[0]->accumulate(dx);
        }
        if (needs(self, 1)) self.parents[1]->accumulate(g.cwiseProduct(xhat).colwise().sum());
        if (needs(self, 2)) self.parents[2]->accumulate(g.colwise().sum());
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const Index c = parts.front().cols();
    Index total = 0;
    for (const auto& p : parts) {
        if (p.cols() != c) throw std::invalid_argument("concat_rows: column mismatch");
        total += p.rows();
    }
    Matrix out(total, c);
    Index at = 0;
    for (const auto& p : parts) {
        out.middleRows(at, p.rows()) = p.value();
        at += p.rows();
    }
    return make_result(std::move(out), parts, [](Node& self) {
        Index at = 0;
        for (auto& p : self.parents) {
            const Index r = p->value.rows();
            if (p->requires_grad) p->accumulate(self.grad.middleRows(at, r));
            at += r;
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const Index r = parts.front().rows();
    Index total = 0;
    for (const auto& p : parts) {
        if (p.rows() != r) throw std::invalid_argument("concat_cols: row mismatch");
        total += p.cols();
    }
    Matrix out(r, total);
    Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    return make_result(std::move(out), parts, [](Node& self) {
        Index at = 0;
        for (auto& p : self.parents) {
            const Index c = p->value.cols();
            if (p->requires_grad) p->accumulate(self.grad.middleCols(at, c));
            at += c;
        }
    });
}

Var slice_rows(const Var& x, Index start, Index count) {
    if (start < 0 || count < 0 || start + count > x.rows()) throw std::out_of_range("slice_rows");
    return make_result(x.value().middleRows(start, count), {x}, [start, count](Node& self) {
        Matrix g = Matrix::Zero(self.parents[0]->value.rows(), self.parents[0]->value.cols());
        g.middleRows(start, count) = self.grad;
        self.parents[0]->accumulate(g);
    });
}

Var slice_cols(const Var& x, Index start, Index count) {
    if (start < 0 || count < 0 || start + count > x.cols()) throw std::out_of_range("slice_cols");
    return make_result(x.value().middleCols(start, count), {x}, [start, count](Node& self) {
        Matrix g = Matrix::Zero(self.parents[0]->value.rows(), self.parents[0]->value.cols());
        g.middleCols(start, count) = self.grad;
        self.parents[0]->accumulate(g);
    });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
    const Matrix& tv = table.value();
    Matrix out(static_cast<Index>(ids.size()), tv.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= tv.rows()) throw std::out_of_range("gather_rows: id out of range");
        out.row(static_cast<Index>(i)) = tv.row(ids[i]);
    }
    std::vector<int> idx(ids.begin(), ids.end());
    return make_result(std::move(out), {table}, [idx = std::move(idx)](Node& self) {
        Node& t = *self.parents[0];
        if (t.grad.size() == 0) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) t.grad.row(idx[i]) += self.grad.row(static_cast<Index>(i));
    });
}

Var select_rows(const Var& x, std::span<const Index> rows) {
    const Matrix& xv = x.value();
    Matrix out(static_cast<Index>(rows.size()), xv.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= xv.rows()) throw std::out_of_range("select_rows: index out of range");
        out.row(static_cast<Index>(i)) = xv.row(rows[i]);
    }
    std::vector<Index> idx(rows.begin(), rows.end());
    return make_result(std::move(out), {x}, [idx = std::move(idx)](Node& self) {
        Matrix g = Matrix::Zero(self.parents[0]->value.rows(), self.parents[0]->value.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += self.grad.row(static_cast<Index>(i));
        self.parents[0]->accumulate(g);
    });
}

Var sum(const Var& x) {
    Matrix out(1, 1);
    out(0, 0) = x.value().sum();
    return make_result(std::move(out), {x}, [](Node& self) {
        const auto& p = self.parents[0]->value;
        self.parents[0]->accumulate(Matrix::Constant(p.rows(), p.cols(), self.grad(0, 0)));
    });
}

Var mean(const Var& x) {
    const double n = static_cast<double>(x.value().size());
    return scale(sum(x), 1.0 / n);
}

Var cross_entropy(const Var& logits, std::span<const int> targets) {
    const Matrix& z = logits.value();
    if (static_cast<std::size_t>(z.rows()) != targets.size()) {
        throw std::invalid_argument("cross_entropy: target count does not match logit rows");
    }
    const Index t_count = z.rows();
    Matrix probs(z.rows(), z.cols());
    double total = 0.0;
    for (Index i = 0; i < t_count; ++i) {
        const int t = targets[static_cast<std::size_t>(i)];
        if (t < 0 || t >= z.cols()) throw std::out_of_range("cross_entropy: target id out of range");
        const double mx = z.row(i).maxCoeff();
        probs.row(i) = (z.row(i).array() - mx).exp().matrix();
        const double denom = probs.row(i).sum();
        probs.row(i) /= denom;
        total += -(z(i, t) - mx - std::log(denom));
    }
    Matrix out(1, 1);
    out(0, 0) = total / static_cast<double>(t_count);
    std::vector<int> tg(targets.begin(), targets.end());
    return make_result(std::move(out), {logits}, [probs = std::move(probs), tg = std::move(tg)](Node& self) {
        Matrix g = probs;
        for (std::size_t i = 0; i < tg.size(); ++i) g(static_cast<Index>(i), tg[i]) -= 1.0;
        g *= self.grad(0, 0) / static_cast<double>(tg.size());
        self.parents[0]->accumulate(g);
    });
}

Var squared_error_sum(const Var& prediction, const Matrix& target) {
    if (prediction.rows() != target.rows() || prediction.cols() != target.cols()) {
        throw std::invalid_argument("squared_error_sum: shape mismatch");
    }
    Matrix diff = prediction.value() - target;
    Matrix out(1, 1);
    out(0, 0) = diff.squaredNorm();
    return make_result(std::move(out), {prediction}, [diff = std::move(diff)](Node& self) {
        self.parents[0]->accumulate(diff * (2.0 * self.grad(0, 0)));
    });
}

Var detach(const Var& x) { return Var::constant(x.value()); }

}  // namespace hear::ag
