#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "acmca/data.hpp"
#include "acmca/error.hpp"
#include "acmca/io.hpp"
#include "acmca/model.hpp"
#include "acmca/tensor.hpp"

namespace acmca {

// Mean cross-entropy over the batch, computed from log-softmax. Backward is
// the closed form (softmax(logits) - onehot) / N.
inline Tensor cross_entropy(Graph& g, const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2)
        throw UsageError("cross_entropy wants (batch, classes) logits, got " +
                         shape_str(logits.shape()));
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    if (labels.size() != n)
        throw UsageError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw UsageError("cross_entropy: label " + std::to_string(y) + " out of range [0," +
                             std::to_string(k) + ")");

    const auto& x = logits.values();
    std::vector<double> probs(n * k);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = x[i * k];
        for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, x[i * k + c]);
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double e = std::exp(x[i * k + c] - mx);
            probs[i * k + c] = e;
            z += e;
        }
        for (std::size_t c = 0; c < k; ++c) probs[i * k + c] /= z;
        const double log_z = std::log(z) + mx;
        total += log_z - x[i * k + static_cast<std::size_t>(labels[i])];
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(n), logits.requires_grad());
    if (out.requires_grad()) {
        auto li = logits.impl(), oi = out.impl();
        g.record([li, oi, labels, probs = std::move(probs), n, k] {
            if (oi->grad.empty()) return;
            li->ensure_grad();
            const double scale = oi->grad[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < k; ++c) {
                    const double y = static_cast<std::size_t>(labels[i]) == c ? 1.0 : 0.0;
                    li->grad[i * k + c] += scale * (probs[i * k + c] - y);
                }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// optimizers

enum class OptimKind { sgd, adam };

inline const char* to_string(OptimKind k) { return k == OptimKind::sgd ? "sgd" : "adam"; }

inline OptimKind optim_from(const std::string& s) {
    if (s == "sgd") return OptimKind::sgd;
    if (s == "adam") return OptimKind::adam;
    throw ConfigError("unknown optimizer \"" + s + "\" (want sgd|adam)");
}

// Plain SGD or Adam (beta 0.9/0.999, eps 1e-8, bias correction). Moment
// state is keyed by parameter position, carried across step() calls.
class Optimizer {
  public:
    Optimizer(OptimKind kind, double lr) : kind_(kind), lr_(lr) {
        if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    }

    void step(const std::vector<Tensor>& params) {
        if (kind_ == OptimKind::adam && m_.empty()) {
            m_.resize(params.size());
            v_.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                m_[i].assign(params[i].size(), 0.0);
                v_[i].assign(params[i].size(), 0.0);
            }
        }
        ++t_;
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto impl = params[i].impl();
            if (impl->grad.empty()) continue;  // zero gradient, nothing to apply
            if (impl->grad.size() != impl->data.size())
                throw NumericError("optimizer: gradient size does not match parameter size");
            if (kind_ == OptimKind::sgd) {
                for (std::size_t j = 0; j < impl->data.size(); ++j)
                    impl->data[j] -= lr_ * impl->grad[j];
            } else {
                const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
                const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
                auto& m = m_[i];
                auto& v = v_[i];
                for (std::size_t j = 0; j < impl->data.size(); ++j) {
                    const double gj = impl->grad[j];
                    m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * gj;
                    v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * gj * gj;
                    impl->data[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + kEps);
                }
            }
        }
    }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

  private:
    OptimKind kind_;
    double lr_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// ---------------------------------------------------------------------------
// training loop

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 125;
    std::size_t feature_dim = 100;
    OptimKind optimizer = OptimKind::adam;
    std::uint64_t seed = 0;
    VariantSpec variant{};

    // architecture knobs; zero means "derive the default"
    std::size_t n_tokens_hint = 0;
    std::size_t encoder_layers = 2;
    std::size_t encoder_hidden = 256;
    std::size_t ffn_hidden = 0;
    MergeMode merge = MergeMode::sum;

    bool log_progress = true;
};

inline ModelConfig model_config_from(const TrainConfig& tc) {
    ModelConfig cfg;
    cfg.feature_dim = tc.feature_dim;
    cfg.encoder_layers = tc.encoder_layers;
    cfg.encoder_hidden = tc.encoder_hidden;
    cfg.ffn_hidden = tc.ffn_hidden;
    cfg.merge = tc.merge;
    resolve_token_layout(cfg, tc.n_tokens_hint);
    return cfg;
}

inline void validate_train_config(const TrainConfig& tc) {
    if (tc.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (tc.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (tc.epochs == 0) throw ConfigError("epochs must be positive");
    if (tc.feature_dim == 0) throw ConfigError("feature_dim must be positive");
}

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0, train_acc = 0, eval_acc = 0, wall_s = 0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
};

inline std::string trainlog_csv(const TrainLog& log) {
    CsvWriter w;
    w.header({"epoch", "loss", "train_acc", "eval_acc", "wall_s"});
    for (const auto& e : log.epochs)
        w.row({std::to_string(e.epoch), fmt_double(e.loss), fmt_double(e.train_acc),
               fmt_double(e.eval_acc), fmt_fixed(e.wall_s, 3)});
    return w.str();
}

inline ModelParams clone_model(const ModelParams& mp) {
    ModelParams copy = init_model(mp.config, mp.variant, mp.widths, 0);
    auto dst = named_params(copy);
    auto src = named_params(mp);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].second.values_mut() = src[i].second.values();
    return copy;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

// Posterior scores (n, 3) over a dataset, batched forwards.
inline Tensor scores_on(const ModelParams& mp, const Dataset& d, std::size_t batch = 64) {
    std::vector<double> all;
    all.reserve(d.size() * kNumClasses);
    const auto idx = all_indices(d.size());
    for (std::size_t start = 0; start < d.size(); start += batch) {
        const std::size_t stop = std::min(d.size(), start + batch);
        std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                      idx.begin() + static_cast<std::ptrdiff_t>(stop));
        Graph g;
        Tensor proba = predict_proba(g, make_batch(d, part), mp);
        const auto& v = proba.values();
        all.insert(all.end(), v.begin(), v.end());
    }
    return Tensor(Shape{d.size(), kNumClasses}, std::move(all));
}

inline std::vector<int> predict_labels(const ModelParams& mp, const Dataset& d,
                                       std::size_t batch = 64) {
    return argmax_rows(scores_on(mp, d, batch));
}

inline double accuracy_on(const ModelParams& mp, const Dataset& d) {
    if (d.size() == 0) return 0.0;
    const auto pred = predict_labels(mp, d);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == d.labels[i];
    return static_cast<double>(hits) / static_cast<double>(d.size());
}

struct TrainResult {
    ModelParams best;    // checkpoint at best evaluation accuracy
    ModelParams final_;  // parameters after the last epoch
    TrainLog log;
    std::size_t best_epoch = 0;
    double best_eval_acc = 0;
};

// Seeded, bit-reproducible loop: shuffled minibatches, gradients zeroed
// between steps, best checkpoint kept by evaluation accuracy. A non-finite
// loss aborts with the epoch/batch named. With an empty eval set the
// training split stands in for evaluation.
inline TrainResult train(const Dataset& train_set, const Dataset& eval_set,
                         const TrainConfig& tc) {
    validate_train_config(tc);
    if (train_set.size() == 0) throw UsageError("training dataset is empty");

    InputWidths widths{train_set.clinical_width(), train_set.genetic_width(),
                       train_set.mri_width(), train_set.pet_width()};
    ModelParams mp = init_model(model_config_from(tc), tc.variant, widths, tc.seed);
    auto params = param_tensors(mp);
    Optimizer opt(tc.optimizer, tc.learning_rate);
    std::mt19937_64 shuffle_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);

    TrainResult res;
    res.best_eval_acc = -1.0;
    auto order = all_indices(train_set.size());

    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size, ++batch_no) {
            const std::size_t stop = std::min(order.size(), start + tc.batch_size);
            std::vector<std::size_t> part(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(stop));
            Graph g;
            Tensor logits = model_forward(g, make_batch(train_set, part), mp);
            Tensor loss = cross_entropy(g, logits, make_batch(train_set, part).labels);
            if (!std::isfinite(loss.item()))
                throw NumericError("loss is not finite at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(batch_no));
            g.backward(loss);
            opt.step(params);
            zero_grads(mp);
            loss_sum += loss.item() * static_cast<double>(part.size());
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = loss_sum / static_cast<double>(train_set.size());
        rec.train_acc = accuracy_on(mp, train_set);
        rec.eval_acc = eval_set.size() > 0 ? accuracy_on(mp, eval_set) : rec.train_acc;
        rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.log.epochs.push_back(rec);
        if (tc.log_progress)
            std::cerr << "epoch=" << epoch << " loss=" << rec.loss
                      << " train_acc=" << rec.train_acc << " eval_acc=" << rec.eval_acc << "\n";
        if (rec.eval_acc > res.best_eval_acc) {
            res.best_eval_acc = rec.eval_acc;
            res.best_epoch = epoch;
            res.best = clone_model(mp);
        }
    }
    res.final_ = std::move(mp);
    return res;
}

// ---------------------------------------------------------------------------
// hyperparameter sweep

enum class SweepAxis { epochs, batch_size, feature_dim };

inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::epochs: return "epochs";
        case SweepAxis::batch_size: return "batch_size";
        case SweepAxis::feature_dim: return "feature_dim";
    }
    return "?";
}

inline SweepAxis sweep_axis_from(const std::string& s) {
    if (s == "epochs") return SweepAxis::epochs;
    if (s == "batch_size" || s == "batch-size") return SweepAxis::batch_size;
    if (s == "feature_dim" || s == "feature-dim") return SweepAxis::feature_dim;
    throw ConfigError("unknown sweep axis \"" + s + "\" (want epochs|batch_size|feature_dim)");
}

struct SweepRow {
    std::size_t value = 0;
    double test_accuracy = 0;
};

struct SweepResult {
    SweepAxis axis{};
    std::vector<SweepRow> rows;
};

// One train/eval cycle per value with everything else fixed (same seed).
inline SweepResult sweep(const Dataset& train_set, const Dataset& test_set, SweepAxis axis,
                         const std::vector<std::size_t>& values, const TrainConfig& base) {
    if (values.empty()) throw UsageError("sweep needs at least one value");
    SweepResult out;
    out.axis = axis;
    for (std::size_t v : values) {
        TrainConfig tc = base;
        switch (axis) {
            case SweepAxis::epochs: tc.epochs = v; break;
            case SweepAxis::batch_size: tc.batch_size = v; break;
            case SweepAxis::feature_dim: tc.feature_dim = v; break;
        }
        // surfaces invalid feature_dim values before any training happens
        model_config_from(tc);
        TrainResult r = train(train_set, test_set, tc);
        out.rows.push_back({v, r.best_eval_acc});
    }
    return out;
}

inline std::string sweep_csv(const SweepResult& s, const TrainConfig& base) {
    CsvWriter w;
    w.meta("axis", to_string(s.axis));
    w.meta("seed", static_cast<long>(base.seed));
    w.header({std::string(to_string(s.axis)), "test_accuracy"});
    for (const auto& r : s.rows)
        w.row({std::to_string(r.value), fmt_double(r.test_accuracy)});
    return w.str();
}

}  // namespace acmca
