#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tisc/folds.hpp"
#include "tisc/optimizer.hpp"
#include "tisc/source.hpp"
#include "tisc/threading.hpp"

namespace tisc {

struct TrainConfig {
    double learning_rate = 1e-3;
    double rms_decay = 0.99;
    double epsilon = 1e-8;
    double l2 = 1e-4;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 500;
    std::size_t patience = 20;  // epochs without validation improvement
    std::size_t folds = 10;
    double test_fraction = 0.3;
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0 = all cores

    void validate() const {
        if (!(rms_decay > 0.0 && rms_decay < 1.0)) {
            throw config_error("train config: rms_decay must lie in (0, 1)");
        }
        if (folds < 2) throw config_error("train config: folds must be >= 2");
        if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
            throw config_error("train config: test_fraction must lie in (0, 1)");
        }
        if (batch_size == 0) throw config_error("train config: batch_size must be positive");
        if (learning_rate < 0.0) throw config_error("train config: learning_rate must be >= 0");
        if (epsilon <= 0.0) throw config_error("train config: epsilon must be positive");
        if (l2 < 0.0) throw config_error("train config: l2 must be >= 0");
        if (max_epochs == 0) throw config_error("train config: max_epochs must be positive");
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"lr", c.learning_rate},   {"rms_decay", c.rms_decay},
                       {"epsilon", c.epsilon},    {"l2", c.l2},
                       {"batch", c.batch_size},   {"max_epochs", c.max_epochs},
                       {"patience", c.patience},  {"folds", c.folds},
                       {"test_fraction", c.test_fraction}};
}
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.learning_rate = j.value("lr", 1e-3);
    c.rms_decay = j.value("rms_decay", 0.99);
    c.epsilon = j.value("epsilon", 1e-8);
    c.l2 = j.value("l2", 1e-4);
    c.batch_size = j.value("batch", std::size_t(256));
    c.max_epochs = j.value("max_epochs", std::size_t(500));
    c.patience = j.value("patience", std::size_t(20));
    c.folds = j.value("folds", std::size_t(10));
    c.test_fraction = j.value("test_fraction", 0.3);
}

struct EpochStats {
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct FoldMetrics {
    std::size_t fold = 0;
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    double test_loss = 0.0;
    double test_acc = 0.0;
};

struct Metrics {
    std::vector<FoldMetrics> folds;
    double test_acc_mean = 0.0;
    double test_acc_std = 0.0;  // population std over folds
};

using EpochCallback = std::function<void(std::size_t fold, std::size_t epoch,
                                         const EpochStats&)>;

namespace detail {

constexpr std::size_t kGradBlock = 32;  // fixed reduction granularity

// per-worker scratch for forward/backward passes
struct WorkerScratch {
    std::vector<double> x;
    ForwardTrace trace;
    BackpropBuffers buffers;
};

struct BlockStats {
    double loss_sum = 0.0;
    std::size_t correct = 0;
};

constexpr std::uint64_t kStreamDropout = 0xD20;
constexpr std::uint64_t kStreamShuffle = 0x5F1E;
constexpr std::uint64_t kStreamNet = 0x4E7;

}  // namespace detail

// Deterministic parallel evaluation: per-block partial sums are reduced in
// block order, so (loss, accuracy) never depend on the worker count.
template <class Source>
inline std::pair<double, double> evaluate(const Network& net, const Source& src,
                                          const std::vector<std::size_t>& indices,
                                          unsigned threads) {
    if (indices.empty()) throw data_error("evaluate: empty index set");
    const unsigned workers = resolve_threads(threads);
    std::vector<detail::WorkerScratch> scratch(workers);
    const std::size_t n_blocks = block_count(indices.size(), detail::kGradBlock);
    std::vector<detail::BlockStats> partial(n_blocks);
    parallel_blocks(indices.size(), detail::kGradBlock, workers,
                    [&](std::size_t b, std::size_t begin, std::size_t end, unsigned w) {
                        auto& ws = scratch[w];
                        detail::BlockStats stats;
                        for (std::size_t i = begin; i < end; ++i) {
                            src.input(indices[i], ws.x);
                            forward(net, ws.x, false, nullptr, ws.trace);
                            stats.loss_sum +=
                                softmax_cross_entropy(ws.trace.scores, src.label(indices[i]));
                            if (argmax(ws.trace.scores) == src.label(indices[i])) ++stats.correct;
                        }
                        partial[b] = stats;
                    });
    double loss = 0.0;
    std::size_t correct = 0;
    for (const auto& p : partial) {
        loss += p.loss_sum;
        correct += p.correct;
    }
    return {loss / double(indices.size()), double(correct) / double(indices.size())};
}

namespace detail {

// One optimizer pass over the (already shuffled) training order. Per-sample
// gradients are accumulated into fixed per-block partials that are summed in
// block order before the update, and dropout masks are keyed by the sample's
// source index, so results match across worker counts.
template <class Source>
inline std::pair<double, double> run_epoch(Network& net, const Source& src,
                                           const std::vector<std::size_t>& order,
                                           const TrainConfig& cfg, RmsPropState& state,
                                           std::uint64_t fold, std::uint64_t epoch,
                                           std::vector<WorkerScratch>& scratch,
                                           std::vector<NetworkGrads>& block_grads,
                                           NetworkGrads& total) {
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t batch_n = std::min(cfg.batch_size, order.size() - start);
        const std::size_t n_blocks = block_count(batch_n, kGradBlock);
        std::vector<BlockStats> stats(n_blocks);
        parallel_blocks(batch_n, kGradBlock, cfg.threads,
                        [&](std::size_t b, std::size_t begin, std::size_t end, unsigned w) {
                            auto& ws = scratch[w];
                            NetworkGrads& g = block_grads[b];
                            g.zero();
                            BlockStats bs;
                            for (std::size_t i = begin; i < end; ++i) {
                                const std::size_t idx = order[start + i];
                                src.input(idx, ws.x);
                                Rng drop(mix_seed(cfg.seed, kStreamDropout,
                                                  (fold << 32) | epoch, idx));
                                const double loss = sample_loss_and_grad(
                                    net, ws.x, src.label(idx), true, &drop, g, ws.trace,
                                    ws.buffers);
                                bs.loss_sum += loss;
                                if (argmax(ws.trace.scores) == src.label(idx)) ++bs.correct;
                            }
                            stats[b] = bs;
                        });
        total.zero();
        for (std::size_t b = 0; b < n_blocks; ++b) {
            add_scaled(total, block_grads[b], 1.0);
            loss_sum += stats[b].loss_sum;
            correct += stats[b].correct;
        }
        scale(total, 1.0 / double(batch_n));
        apply_l2(net, total, cfg.l2);
        rmsprop_step(net, total, state, cfg.learning_rate, cfg.rms_decay, cfg.epsilon);
    }
    const double mean_loss = loss_sum / double(order.size());
    if (!std::isfinite(mean_loss)) {
        throw numeric_error("divergence: non-finite training loss at fold " +
                            std::to_string(fold) + " epoch " + std::to_string(epoch));
    }
    return {mean_loss, double(correct) / double(order.size())};
}

}  // namespace detail

struct FitResult {
    std::vector<Network> nets;  // best-validation snapshot per fold
    Metrics metrics;
};

// Cross-validated training: per fold, mini-batch RMSprop epochs with dropout
// active and early stopping on validation accuracy; the best-validation
// snapshot is restored and the untouched test split is evaluated exactly once.
template <class Source>
inline FitResult fit(const NetworkConfig& netcfg, const Source& src, const FoldPlan& plan,
                     const TrainConfig& cfg, EpochCallback on_epoch = {}) {
    netcfg.validate();
    cfg.validate();
    if (plan.folds.empty()) throw config_error("fit: fold plan has no folds");

    FitResult result;
    const unsigned workers = resolve_threads(cfg.threads);
    std::vector<detail::WorkerScratch> scratch(workers);

    for (std::size_t fold = 0; fold < plan.folds.size(); ++fold) {
        Network net = build(netcfg, mix_seed(cfg.seed, detail::kStreamNet, fold));
        RmsPropState state = RmsPropState::like(net);
        std::vector<NetworkGrads> block_grads(
            block_count(cfg.batch_size, detail::kGradBlock), NetworkGrads::like(net));
        NetworkGrads total = NetworkGrads::like(net);

        const std::vector<std::size_t> train_idx = plan.train_indices(fold);
        const std::vector<std::size_t>& val_idx = plan.folds[fold];
        if (train_idx.empty()) throw config_error("fit: fold " + std::to_string(fold) +
                                                  " has no training samples");

        FoldMetrics fm;
        fm.fold = fold;
        Network best = net;
        double best_val_acc = -1.0;
        std::size_t since_improvement = 0;

        for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
            std::vector<std::size_t> order = train_idx;
            Rng shuffle_rng(mix_seed(cfg.seed, detail::kStreamShuffle, fold, epoch));
            shuffle_rng.shuffle(order);

            EpochStats stats;
            std::tie(stats.train_loss, stats.train_acc) = detail::run_epoch(
                net, src, order, cfg, state, fold, epoch, scratch, block_grads, total);
            std::tie(stats.val_loss, stats.val_acc) = evaluate(net, src, val_idx, cfg.threads);
            fm.epochs.push_back(stats);
            if (on_epoch) on_epoch(fold, epoch, stats);

            // ties refresh the snapshot (the latest equally good epoch is the
            // most consolidated one) but only strict gains reset the patience
            if (stats.val_acc >= best_val_acc) {
                const bool improved = stats.val_acc > best_val_acc;
                best_val_acc = stats.val_acc;
                best = net;
                fm.best_epoch = epoch;
                if (improved) {
                    since_improvement = 0;
                } else if (++since_improvement >= cfg.patience) {
                    break;
                }
            } else if (++since_improvement >= cfg.patience) {
                break;
            }
        }

        std::tie(fm.test_loss, fm.test_acc) = evaluate(best, src, plan.test, cfg.threads);
        result.nets.push_back(std::move(best));
        result.metrics.folds.push_back(std::move(fm));
    }

    double mean = 0.0;
    for (const auto& fm : result.metrics.folds) mean += fm.test_acc;
    mean /= double(result.metrics.folds.size());
    double var = 0.0;
    for (const auto& fm : result.metrics.folds) {
        var += (fm.test_acc - mean) * (fm.test_acc - mean);
    }
    var /= double(result.metrics.folds.size());
    result.metrics.test_acc_mean = mean;
    result.metrics.test_acc_std = std::sqrt(var);
    return result;
}

// convenience pipeline: balance -> stratified folds -> fit
inline FitResult fit(const NetworkConfig& netcfg, const SegmentDataset& ds,
                     const TrainConfig& cfg, EpochCallback on_epoch = {}) {
    std::vector<std::size_t> raw_labels(ds.labels.begin(), ds.labels.end());
    const std::vector<std::size_t> kept = balance(raw_labels, ds.n_classes, cfg.seed);
    SegmentSource src(ds, netcfg, kept);
    const FoldPlan plan = make_folds(src.labels(), cfg.folds, cfg.test_fraction, cfg.seed);
    return fit(netcfg, src, plan, cfg, std::move(on_epoch));
}

inline nlohmann::json metrics_json(const Metrics& m, const NetworkConfig& netcfg,
                                   const TrainConfig& cfg) {
    nlohmann::json folds = nlohmann::json::array();
    for (const FoldMetrics& fm : m.folds) {
        nlohmann::json epochs = nlohmann::json::array();
        for (const EpochStats& e : fm.epochs) {
            epochs.push_back({{"train_loss", e.train_loss},
                              {"train_acc", e.train_acc},
                              {"val_loss", e.val_loss},
                              {"val_acc", e.val_acc}});
        }
        folds.push_back({{"fold", fm.fold},
                         {"epochs", epochs},
                         {"best_epoch", fm.best_epoch},
                         {"test_loss", fm.test_loss},
                         {"test_acc", fm.test_acc}});
    }
    return nlohmann::json{{"schema", "tisc-metrics-v1"},
                          {"network", netcfg},
                          {"train", cfg},
                          {"seed", cfg.seed},
                          {"folds", folds},
                          {"summary",
                           {{"test_acc_mean", m.test_acc_mean},
                            {"test_acc_std", m.test_acc_std},
                            {"folds", m.folds.size()}}}};
}

// one row per epoch per fold
inline std::string metrics_csv(const Metrics& m) {
    std::ostringstream out;
    out << "fold,epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (const FoldMetrics& fm : m.folds) {
        for (std::size_t e = 0; e < fm.epochs.size(); ++e) {
            const EpochStats& s = fm.epochs[e];
            out << fm.fold << ',' << e << ',' << fmt_g17(s.train_loss) << ','
                << fmt_g17(s.train_acc) << ',' << fmt_g17(s.val_loss) << ','
                << fmt_g17(s.val_acc) << '\n';
        }
    }
    return out.str();
}

}  // namespace tisc
