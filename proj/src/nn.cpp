#include "hear/nn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hear::nn {

Var ParameterStore::add(std::string name, Matrix init) {
    for (const auto& [n, _] : entries_) {
        if (n == name) throw std::logic_error("duplicate parameter name: " + name);
    }
    Var v = Var::parameter(std::move(init));
    entries_.emplace_back(std::move(name), v);
    return v;
}

std::optional<Var> ParameterStore::find(const std::string& name) const {
    for (const auto& [n, v] : entries_) {
        if (n == name) return v;
    }
    return std::nullopt;
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t total = 0;
    for (const auto& [_, v] : entries_) total += static_cast<std::size_t>(v.value().size());
    return total;
}

void ParameterStore::zero_grad() {
    for (auto& [_, v] : entries_) v.zero_grad();
}

std::vector<Matrix> ParameterStore::snapshot() const {
    std::vector<Matrix> out;
    out.reserve(entries_.size());
    for (const auto& [_, v] : entries_) out.push_back(v.value());
    return out;
}

void ParameterStore::restore(const std::vector<Matrix>& values) {
    if (values.size() != entries_.size()) throw std::invalid_argument("restore: parameter count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto& v = entries_[i].second;
        if (v.rows() != values[i].rows() || v.cols() != values[i].cols()) {
            throw std::invalid_argument("restore: shape mismatch for " + entries_[i].first);
        }
        v.mutable_value() = values[i];
    }
}

Matrix uniform_init(Index rows, Index cols, double fan_in, std::mt19937_64& rng) {
    const double a = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-a, a);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    }
    return m;
}

Linear::Linear(ParameterStore& store, const std::string& name, Index in, Index out, std::mt19937_64& rng,
               bool bias) {
    weight_ = store.add(name + ".weight", uniform_init(in, out, static_cast<double>(in), rng));
    if (bias) bias_ = store.add(name + ".bias", uniform_init(1, out, static_cast<double>(in), rng));
}

Var Linear::operator()(const Var& x) const {
    Var y = ag::matmul(x, weight_);
    return bias_.defined() ? ag::add_row(y, bias_) : y;
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, Index dim) {
    gain_ = store.add(name + ".gain", Matrix::Ones(1, dim));
    bias_ = store.add(name + ".bias", Matrix::Zero(1, dim));
}

Var LayerNorm::operator()(const Var& x) const { return ag::layer_norm(x, gain_, bias_); }

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& name, Index dim, int heads,
                                       std::mt19937_64& rng)
    : heads_(heads), dim_(dim) {
    if (heads < 1 || dim % heads != 0) throw std::invalid_argument("attention width must divide by head count");
    q_ = Linear(store, name + ".q", dim, dim, rng);
    k_ = Linear(store, name + ".k", dim, dim, rng);
    v_ = Linear(store, name + ".v", dim, dim, rng);
    o_ = Linear(store, name + ".o", dim, dim, rng);
}

Var MultiHeadAttention::operator()(const Var& queries, const Var& keys_values, const Matrix& additive_mask) const {
    const Index head_dim = dim_ / heads_;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    Var q = q_(queries);
    Var k = k_(keys_values);
    Var v = v_(keys_values);
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads_));
    for (int h = 0; h < heads_; ++h) {
        const Index at = h * head_dim;
        Var scores = ag::scale(ag::matmul_nt(ag::slice_cols(q, at, head_dim), ag::slice_cols(k, at, head_dim)),
                               inv_scale);
        if (additive_mask.size() != 0) scores = ag::add_const(scores, additive_mask);
        outs.push_back(ag::matmul(ag::softmax_rows(scores), ag::slice_cols(v, at, head_dim)));
    }
    Var merged = heads_ == 1 ? outs.front() : ag::concat_cols(outs);
    return o_(merged);
}

FeedForward::FeedForward(ParameterStore& store, const std::string& name, Index dim, Index hidden,
                         std::mt19937_64& rng) {
    in_ = Linear(store, name + ".in", dim, hidden, rng);
    out_ = Linear(store, name + ".out", hidden, dim, rng);
}

Var FeedForward::operator()(const Var& x) const { return out_(ag::gelu(in_(x))); }

EncoderLayer::EncoderLayer(ParameterStore& store, const std::string& name, Index dim, int heads, Index hidden,
                           std::mt19937_64& rng) {
    ln_attn_ = LayerNorm(store, name + ".ln_attn", dim);
    attn_ = MultiHeadAttention(store, name + ".attn", dim, heads, rng);
    ln_ff_ = LayerNorm(store, name + ".ln_ff", dim);
    ff_ = FeedForward(store, name + ".ff", dim, hidden, rng);
}

Var EncoderLayer::operator()(const Var& x) const {
    Var h = ln_attn_(x);
    Var y = x + attn_(h, h);
    return y + ff_(ln_ff_(y));
}

DecoderLayer::DecoderLayer(ParameterStore& store, const std::string& name, Index dim, int heads, Index hidden,
                           std::mt19937_64& rng) {
    ln_self_ = LayerNorm(store, name + ".ln_self", dim);
    self_attn_ = MultiHeadAttention(store, name + ".self_attn", dim, heads, rng);
    ln_cross_ = LayerNorm(store, name + ".ln_cross", dim);
    cross_attn_ = MultiHeadAttention(store, name + ".cross_attn", dim, heads, rng);
    ln_ff_ = LayerNorm(store, name + ".ln_ff", dim);
    ff_ = FeedForward(store, name + ".ff", dim, hidden, rng);
}

Var DecoderLayer::operator()(const Var& x, const Var& memory) const {
    Var h = ln_self_(x);
    Var y = x + self_attn_(h, h, causal_mask(x.rows()));
    y = y + cross_attn_(ln_cross_(y), memory);
    return y + ff_(ln_ff_(y));
}

Matrix causal_mask(Index n) {
    Matrix m = Matrix::Zero(n, n);
    const double neg = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) m(i, j) = neg;
    }
    return m;
}

}  // namespace hear::nn
