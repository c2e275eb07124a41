#include "hear/estimator.hpp"

#include "hear/errors.hpp"
#include "hear/optim.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

namespace hear {

void EstimatorConfig::validate() const {
    if (d_model < 1) throw ConfigError("estimator.d_model", "must be >= 1");
    if (heads < 1 || d_model % heads != 0) throw ConfigError("estimator.heads", "must divide d_model");
    if (layers < 0) throw ConfigError("estimator.layers", "must be >= 0");
    if (ff_hidden < 1) throw ConfigError("estimator.ff_hidden", "must be >= 1");
    if (max_len < 2) throw ConfigError("estimator.max_len", "must be >= 2");
    if (epochs < 0) throw ConfigError("estimator.epochs", "must be >= 0");
    if (batch_size < 1) throw ConfigError("estimator.batch_size", "must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("estimator.lr", "must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("estimator.weight_decay", "must be >= 0");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        throw ConfigError("estimator.holdout_fraction", "must be in (0, 1)");
    }
}

nlohmann::json EstimatorConfig::to_json() const {
    return {{"d_model", d_model}, {"heads", heads},           {"layers", layers},
            {"ff_hidden", ff_hidden}, {"max_len", max_len},   {"epochs", epochs},
            {"batch_size", batch_size}, {"lr", lr},           {"weight_decay", weight_decay},
            {"holdout_fraction", holdout_fraction}, {"seed", seed}};
}

EstimatorConfig EstimatorConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("estimator", "expected an object");
    static const std::set<std::string> known = {"d_model", "heads", "layers", "ff_hidden", "max_len", "epochs", "batch_size", "lr", "weight_decay", "holdout_fraction", "seed"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ConfigError("estimator." + key, "unknown key");
    }
    EstimatorConfig c;
    auto read = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            field = j.at(key).get<std::decay_t<decltype(field)>>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(std::string("estimator.") + key, "wrong type");
        }
    };
    read("d_model", c.d_model);
    read("heads", c.heads);
    read("layers", c.layers);
    read("ff_hidden", c.ff_hidden);
    read("max_len", c.max_len);
    read("epochs", c.epochs);
    read("batch_size", c.batch_size);
    read("lr", c.lr);
    read("weight_decay", c.weight_decay);
    read("holdout_fraction", c.holdout_fraction);
    read("seed", c.seed);
    c.validate();
    return c;
}

EstimatorModel::EstimatorModel(const EstimatorConfig& config, int vocab_size, std::uint64_t seed)
    : config_(config), vocab_size_(vocab_size) {
    config_.validate();
    std::mt19937_64 rng(seed);
    const Index d = config_.d_model;
    tokens_ = params_.add("estimator.tokens", nn::uniform_init(vocab_size, d, static_cast<double>(d), rng));
    positions_ = params_.add("estimator.positions", nn::uniform_init(config_.max_len, d, static_cast<double>(d), rng));
    input_norm_ = nn::LayerNorm(params_, "estimator.input_norm", d);
    for (int i = 0; i < config_.layers; ++i) {
        layers_.emplace_back(params_, "estimator.layer" + std::to_string(i), d, config_.heads, config_.ff_hidden, rng);
    }
    output_norm_ = nn::LayerNorm(params_, "estimator.output_norm", d);
    head_ = nn::Linear(params_, "estimator.head", d, 1, rng);
}

Var EstimatorModel::logit(std::span<const int> question_ids) const {
    std::vector<int> ids{Vocabulary::kCls};
    const std::size_t keep = std::min(question_ids.size(), static_cast<std::size_t>(config_.max_len - 1));
    ids.insert(ids.end(), question_ids.begin(), question_ids.begin() + static_cast<std::ptrdiff_t>(keep));
    std::vector<int> pos(ids.size());
    std::iota(pos.begin(), pos.end(), 0);
    Var x = ag::gather_rows(tokens_, ids) + ag::gather_rows(positions_, pos);
    x = input_norm_(x);
    for (const auto& layer : layers_) x = layer(x);
    x = output_norm_(x);
    return head_(ag::slice_rows(x, 0, 1));
}

Var EstimatorModel::score_var(std::span<const int> question_ids) const { return ag::sigmoid(logit(question_ids)); }

double EstimatorModel::score(std::span<const int> question_ids) const {
    ag::NoGradGuard no_grad;
    return score_var(question_ids).item();
}

std::vector<LabeledQuestion> build_estimator_labels(const std::vector<std::vector<std::string>>& questions,
                                                    const KeywordSet& keywords, std::uint64_t seed,
                                                    double swap_fraction) {
    if (questions.empty()) throw std::invalid_argument("build_estimator_labels: empty question set");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution do_swap(swap_fraction);
    std::uniform_int_distribution<std::size_t> pick_keyword(0, keywords.base().size() - 1);

    std::set<std::vector<std::string>> seen;
    std::vector<LabeledQuestion> out;
    for (const auto& q : questions) {
        if (q.empty() || !seen.insert(q).second) continue;
        if (contains_audio_keyword(q, keywords)) {
            out.push_back({q, 1, "keyword"});
            const bool has_distinct_permutation = std::adjacent_find(q.begin(), q.end(), std::not_equal_to<>()) != q.end();
            if (!has_distinct_permutation) continue;
            std::vector<std::string> shuffled = q;
            do {
                std::shuffle(shuffled.begin(), shuffled.end(), rng);
            } while (shuffled == q);
            out.push_back({std::move(shuffled), 0, "shuffle"});
        } else {
            out.push_back({q, 0, "keyword"});
            if (do_swap(rng)) {
                std::vector<std::string> swapped = q;
                std::uniform_int_distribution<std::size_t> pos(0, q.size() - 1);
                swapped[pos(rng)] = keywords.base()[pick_keyword(rng)];
                out.push_back({std::move(swapped), 0, "swap"});
            }
        }
    }
    return out;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: size mismatch");
    double pairs = 0.0;
    double wins = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    if (pairs == 0.0) throw std::invalid_argument("roc_auc: need both classes");
    return wins / pairs;
}

namespace {

std::vector<int> encode_tokens(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab.id(t));
    return ids;
}

}  // namespace

EstimatorTrainResult train_estimator(const std::vector<LabeledQuestion>& labeled, const Vocabulary& vocab,
                                     const EstimatorConfig& config) {
    config.validate();
    if (labeled.empty()) throw std::invalid_argument("train_estimator: empty labeled set");
    const auto positives = std::count_if(labeled.begin(), labeled.end(), [](const auto& q) { return q.label == 1; });
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labeled.size())) {
        throw std::invalid_argument("train_estimator: labeled set has a single class");
    }

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(labeled.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_hold = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.holdout_fraction * static_cast<double>(labeled.size()))));

    EstimatorTrainResult result{EstimatorModel(config, static_cast<int>(vocab.size()), config.seed), 0.0, {}, {}, {}};
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_hold ? result.holdout : result.train).push_back(labeled[order[i]]);
    }

    std::vector<std::vector<int>> ids;
    double n_pos = 0.0;
    for (const auto& q : result.train) {
        ids.push_back(encode_tokens(vocab, q.tokens));
        n_pos += q.label;
    }
    const double n = static_cast<double>(result.train.size());
    const double n_neg = n - n_pos;
    const double w_pos = n_pos > 0 ? n / (2.0 * n_pos) : 0.0;
    const double w_neg = n_neg > 0 ? n / (2.0 * n_neg) : 0.0;

    auto& model = result.model;
    AdamW opt(model.parameters(), {0.9, 0.999, 1e-8, config.weight_decay});
    std::vector<std::size_t> idx(result.train.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(idx.begin(), idx.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(config.batch_size));
            model.parameters().zero_grad();
            std::vector<Var> terms;
            for (std::size_t k = start; k < end; ++k) {
                const auto& q = result.train[idx[k]];
                const double w = q.label == 1 ? w_pos : w_neg;
                Var err = ag::add_const(model.score_var(ids[idx[k]]), Matrix::Constant(1, 1, -q.label));
                terms.push_back(ag::scale(ag::hadamard(err, err), w));
            }
            Var loss = ag::scale(ag::sum(ag::concat_rows(terms)), 1.0 / static_cast<double>(end - start));
            loss.backward();
            opt.step(config.lr);
            epoch_loss += loss.item() * static_cast<double>(end - start);
        }
        result.epoch_losses.push_back(epoch_loss / n);
    }

    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& q : result.holdout) {
        scores.push_back(model.score(encode_tokens(vocab, q.tokens)));
        labels.push_back(q.label);
    }
    const bool both = std::find(labels.begin(), labels.end(), 1) != labels.end() &&
                      std::find(labels.begin(), labels.end(), 0) != labels.end();
    result.holdout_auc = both ? roc_auc(scores, labels) : 0.5;
    return result;
}

RelatednessDecision estimate_relatedness(const EstimatorModel& estimator, const Vocabulary& vocab,
                                         std::span<const int> question_ids, const KeywordSet& keywords,
                                         SalMode mode) {
    const auto tokens = vocab.tokens_of(question_ids);
    return decide_gating(mode, contains_audio_keyword(tokens, keywords), estimator.score(question_ids));
}

}  // namespace hear
