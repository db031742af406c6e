#pragma once

#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tisc/trainer.hpp"

namespace tisc {

struct BenchReport {
    double inference_ms_mean = 0.0;
    double inference_ms_std = 0.0;
    std::size_t trials = 0;
    double epoch_seconds = 0.0;
    std::size_t n_segments = 0;
    std::string machine;
};

inline std::string machine_descriptor(unsigned threads) {
    std::ostringstream out;
#if defined(__clang__)
    out << "clang " << __clang_major__ << "." << __clang_minor__;
#elif defined(__GNUC__)
    out << "gcc " << __GNUC__ << "." << __GNUC_MINOR__;
#else
    out << "unknown compiler";
#endif
    out << ", " << std::thread::hardware_concurrency() << " hw threads, using "
        << resolve_threads(threads);
    return out.str();
}

// Mean single-sample eval latency over `trials` repetitions (cycling through
// the dataset) plus the wall time of one full training epoch.
inline BenchReport benchmark(const Network& net, const SegmentDataset& ds,
                             const TrainConfig& cfg, std::size_t trials = 200) {
    if (ds.n_segments == 0) throw data_error("benchmark: empty dataset");
    if (trials < 100) trials = 100;
    check_compatible(net.config, ds);
    SegmentSource src(ds, net.config);

    using clock = std::chrono::steady_clock;
    BenchReport report;
    report.trials = trials;
    report.n_segments = ds.n_segments;
    report.machine = machine_descriptor(cfg.threads);

    std::vector<double> x;
    ForwardTrace trace;
    double sum = 0.0, sum_sq = 0.0;
    volatile double sink = 0.0;  // keep the forward pass alive
    for (std::size_t t = 0; t < trials; ++t) {
        src.input(t % ds.n_segments, x);
        const auto t0 = clock::now();
        forward(net, x, false, nullptr, trace);
        const auto t1 = clock::now();
        sink = sink + trace.scores[0];
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        sum += ms;
        sum_sq += ms * ms;
    }
    report.inference_ms_mean = sum / double(trials);
    report.inference_ms_std =
        std::sqrt(std::max(0.0, sum_sq / double(trials) -
                                    report.inference_ms_mean * report.inference_ms_mean));

    // epoch timing on a scratch copy so the caller's network stays untouched
    Network work = net;
    RmsPropState state = RmsPropState::like(work);
    std::vector<detail::WorkerScratch> scratch(resolve_threads(cfg.threads));
    std::vector<NetworkGrads> block_grads(block_count(cfg.batch_size, detail::kGradBlock),
                                          NetworkGrads::like(work));
    NetworkGrads total = NetworkGrads::like(work);
    std::vector<std::size_t> order(ds.n_segments);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const auto e0 = clock::now();
    detail::run_epoch(work, src, order, cfg, state, 0, 0, scratch, block_grads, total);
    const auto e1 = clock::now();
    report.epoch_seconds = std::chrono::duration<double>(e1 - e0).count();
    return report;
}

inline void to_json(nlohmann::json& j, const BenchReport& r) {
    j = nlohmann::json{{"schema", "tisc-bench-v1"},
                       {"inference_ms_mean", r.inference_ms_mean},
                       {"inference_ms_std", r.inference_ms_std},
                       {"trials", r.trials},
                       {"epoch_seconds", r.epoch_seconds},
                       {"n_segments", r.n_segments},
                       {"machine", r.machine}};
}

}  // namespace tisc
