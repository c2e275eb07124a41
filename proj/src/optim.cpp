#include "hear/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace hear {

AdamW::AdamW(nn::ParameterStore& params, AdamWConfig config) : params_(&params), config_(config) {
    for (const auto& [_, p] : params.entries()) {
        m_.push_back(nn::Matrix::Zero(p.rows(), p.cols()));
        v_.push_back(nn::Matrix::Zero(p.rows(), p.cols()));
    }
}

void AdamW::step(double lr) {
    ++steps_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    auto& entries = params_->entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& p = entries[i].second;
        if (p.grad().size() == 0) continue;
        const nn::Matrix& g = p.grad();
        m_[i] = b1 * m_[i] + (1.0 - b1) * g;
        v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
        nn::Matrix& w = p.mutable_value();
        if (config_.weight_decay != 0.0) w *= (1.0 - lr * config_.weight_decay);
        w.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
    }
}

void AdamW::restore(std::int64_t steps, std::vector<nn::Matrix> first, std::vector<nn::Matrix> second) {
    if (first.size() != m_.size() || second.size() != v_.size()) {
        throw std::invalid_argument("AdamW::restore: moment count mismatch");
    }
    steps_ = steps;
    m_ = std::move(first);
    v_ = std::move(second);
}

double clip_grad_norm(nn::ParameterStore& params, double max_norm) {
    double sq = 0.0;
    for (const auto& [_, p] : params.entries()) {
        if (p.grad().size() != 0) sq += p.grad().squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / (norm + 1e-12);
        for (auto& [_, p] : params.entries()) {
            if (p.grad().size() != 0) p.mutable_grad() *= s;
        }
    }
    return norm;
}

}  // namespace hear
