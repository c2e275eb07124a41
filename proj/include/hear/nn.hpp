#pragma once

#include "hear/autograd.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace hear::nn {

using ag::Index;
using ag::Matrix;
using ag::Var;

// Ordered registry of named trainable tensors. Layers register into it at
// construction; the optimizer and checkpoint code walk it in order.
class ParameterStore {
  public:
    Var add(std::string name, Matrix init);

    std::vector<std::pair<std::string, Var>>& entries() { return entries_; }
    const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
    std::optional<Var> find(const std::string& name) const;
    std::size_t scalar_count() const;
    void zero_grad();

    // Deep copy of the current values, in registration order.
    std::vector<Matrix> snapshot() const;
    void restore(const std::vector<Matrix>& values);

  private:
    std::vector<std::pair<std::string, Var>> entries_;
};

// Symmetric uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Matrix uniform_init(Index rows, Index cols, double fan_in, std::mt19937_64& rng);

class Linear {
  public:
    Linear() = default;
    Linear(ParameterStore& store, const std::string& name, Index in, Index out, std::mt19937_64& rng,
           bool bias = true);
    Var operator()(const Var& x) const;
    const Var& weight() const { return weight_; }

  private:
    Var weight_;
    Var bias_;
};

class LayerNorm {
  public:
    LayerNorm() = default;
    LayerNorm(ParameterStore& store, const std::string& name, Index dim);
    Var operator()(const Var& x) const;

  private:
    Var gain_;
    Var bias_;
};

class MultiHeadAttention {
  public:
    MultiHeadAttention() = default;
    MultiHeadAttention(ParameterStore& store, const std::string& name, Index dim, int heads,
                       std::mt19937_64& rng);
    // `additive_mask` (rows = queries, cols = keys) is added to the scores when non-empty.
    Var operator()(const Var& queries, const Var& keys_values, const Matrix& additive_mask = {}) const;

  private:
    Linear q_, k_, v_, o_;
    int heads_ = 1;
    Index dim_ = 0;
};

class FeedForward {
  public:
    FeedForward() = default;
    FeedForward(ParameterStore& store, const std::string& name, Index dim, Index hidden, std::mt19937_64& rng);
    Var operator()(const Var& x) const;

  private:
    Linear in_, out_;
};

// Pre-norm transformer blocks.
class EncoderLayer {
  public:
    EncoderLayer() = default;
    EncoderLayer(ParameterStore& store, const std::string& name, Index dim, int heads, Index hidden,
                 std::mt19937_64& rng);
    Var operator()(const Var& x) const;

  private:
    LayerNorm ln_attn_, ln_ff_;
    MultiHeadAttention attn_;
    FeedForward ff_;
};

class DecoderLayer {
  public:
    DecoderLayer() = default;
    DecoderLayer(ParameterStore& store, const std::string& name, Index dim, int heads, Index hidden,
                 std::mt19937_64& rng);
    Var operator()(const Var& x, const Var& memory) const;

  private:
    LayerNorm ln_self_, ln_cross_, ln_ff_;
    MultiHeadAttention self_attn_, cross_attn_;
    FeedForward ff_;
};

// Upper-triangular -inf mask so position t attends to positions <= t.
Matrix causal_mask(Index n);

}  // namespace hear::nn
