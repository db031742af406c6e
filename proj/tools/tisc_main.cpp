// tisc command line: synth | train | eval | saliency | count | bench
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "tisc/tisc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
    json raw;
    std::uint64_t seed = 0;

    static RunConfig from_file(const std::string& path) {
        std::string text;
        try {
            text = tisc::read_file(path);
        } catch (const tisc::data_error& e) {
            throw tisc::config_error(std::string("config: ") + e.what());
        }
        RunConfig cfg;
        try {
            cfg.raw = json::parse(text);
        } catch (const json::exception& e) {
            throw tisc::config_error("config " + path + ": " + e.what());
        }
        cfg.seed = cfg.raw.value("seed", std::uint64_t(0));
        return cfg;
    }

    tisc::NetworkConfig network() const {
        if (!raw.contains("network")) throw tisc::config_error("config: missing 'network' block");
        tisc::NetworkConfig c;
        try {
            c = raw.at("network").get<tisc::NetworkConfig>();
        } catch (const json::exception& e) {
            throw tisc::config_error(std::string("config: bad network block: ") + e.what());
        }
        c.validate();
        return c;
    }

    tisc::TrainConfig train(std::uint64_t seed, unsigned threads) const {
        tisc::TrainConfig c;
        if (raw.contains("train")) {
            try {
                c = raw.at("train").get<tisc::TrainConfig>();
            } catch (const json::exception& e) {
                throw tisc::config_error(std::string("config: bad train block: ") + e.what());
            }
        }
        c.seed = seed;
        c.threads = threads;
        c.validate();
        return c;
    }

    tisc::SynthSpec synth(std::uint64_t seed) const {
        if (!raw.contains("synth")) throw tisc::config_error("config: missing 'synth' block");
        const json& s = raw.at("synth");
        tisc::SynthSpec spec;
        try {
            spec.n_per_class = s.value("n_per_class", std::size_t(100));
            spec.seg_len = s.value("seg_len", std::size_t(1024));
            spec.n_channels = s.value("channels", std::size_t(1));
            const std::string noise = s.value("noise", std::string("white"));
            if (noise == "white") {
                spec.noise = tisc::NoiseKind::white;
            } else if (noise == "pink") {
                spec.noise = tisc::NoiseKind::pink;
            } else {
                throw tisc::config_error("config: synth.noise must be white or pink");
            }
            spec.burst_scale = s.value("burst_scale", 7);
            spec.amplitude = s.value("amplitude", 3.0);
            const std::string align = s.value("alignment", std::string("grid-aligned"));
            if (align == "grid-aligned") {
                spec.alignment = tisc::Alignment::grid_aligned;
            } else if (align == "random") {
                spec.alignment = tisc::Alignment::uniform_random;
            } else {
                throw tisc::config_error("config: synth.alignment must be grid-aligned or random");
            }
            spec.sample_rate = s.value("sample_rate", 256.0f);
        } catch (const json::exception& e) {
            throw tisc::config_error(std::string("config: bad synth block: ") + e.what());
        }
        spec.seed = seed;
        spec.validate();
        return spec;
    }
};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw tisc::data_error("cannot create output directory " + dir + ": " + ec.message());
}

int cmd_synth(const std::string& config_path, const std::string& out_path,
              std::int64_t seed_override, const std::string& mode) {
    RunConfig cfg = RunConfig::from_file(config_path);
    const std::uint64_t seed = seed_override >= 0 ? std::uint64_t(seed_override) : cfg.seed;
    tisc::SynthSpec spec = cfg.synth(seed);
    if (mode == "grid-aligned") {
        spec.alignment = tisc::Alignment::grid_aligned;
    } else if (mode == "random") {
        spec.alignment = tisc::Alignment::uniform_random;
    } else if (!mode.empty()) {
        throw tisc::config_error("--mode must be grid-aligned or random");
    }
    const tisc::SegmentDataset ds = tisc::synthesize(spec);
    tisc::write_tseg(ds, out_path);
    std::cout << json{{"written", out_path},
                      {"segments", ds.n_segments},
                      {"channels", ds.n_channels},
                      {"seg_len", ds.seg_len},
                      {"seed", seed}}
                     .dump()
              << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, std::int64_t seed_override, unsigned threads) {
    RunConfig cfg = RunConfig::from_file(config_path);
    const std::uint64_t seed = seed_override >= 0 ? std::uint64_t(seed_override) : cfg.seed;
    const tisc::NetworkConfig netcfg = cfg.network();
    const tisc::TrainConfig traincfg = cfg.train(seed, threads);
    const tisc::SegmentDataset ds = tisc::read_tseg(data_path);
    tisc::check_compatible(netcfg, ds);

    ensure_dir(out_dir);
    const tisc::FitResult result = tisc::fit(netcfg, ds, traincfg);

    for (std::size_t f = 0; f < result.nets.size(); ++f) {
        tisc::save(result.nets[f], out_dir + "/fold_" + std::to_string(f) + ".tscm");
    }
    tisc::write_file(out_dir + "/metrics.json",
                     tisc::metrics_json(result.metrics, netcfg, traincfg).dump(2) + "\n");
    tisc::write_file(out_dir + "/metrics.csv", tisc::metrics_csv(result.metrics));

    std::cout << json{{"test_acc_mean", result.metrics.test_acc_mean},
                      {"test_acc_std", result.metrics.test_acc_std},
                      {"folds", result.metrics.folds.size()},
                      {"out", out_dir}}
                     .dump()
              << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& out_dir, unsigned threads) {
    const tisc::Network net = tisc::load(model_path);
    const tisc::SegmentDataset ds = tisc::read_tseg(data_path);
    if (ds.n_segments == 0) throw tisc::data_error(data_path + ": empty dataset");
    tisc::check_compatible(net.config, ds);

    tisc::SegmentSource src(ds, net.config);
    std::vector<std::size_t> all(ds.n_segments);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    // confusion[true][predicted]
    std::vector<std::vector<std::size_t>> confusion(
        net.config.num_classes, std::vector<std::size_t>(net.config.num_classes, 0));
    std::vector<double> x;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.n_segments; ++i) {
        src.input(i, x);
        const std::size_t pred = tisc::argmax(tisc::forward_eval(net, x));
        confusion[src.label(i)][pred]++;
        if (pred == src.label(i)) ++correct;
    }
    const auto [loss, acc] = tisc::evaluate(net, src, all, threads);

    const json report{{"schema", "tisc-eval-v1"},
                      {"accuracy", acc},
                      {"mean_loss", loss},
                      {"n_segments", ds.n_segments},
                      {"correct", correct},
                      {"confusion", confusion}};
    std::cout << report.dump(2) << "\n";
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        tisc::write_file(out_dir + "/eval.json", report.dump(2) + "\n");
    }
    return 0;
}

int cmd_count(const std::string& config_path, const std::string& out_dir) {
    RunConfig cfg = RunConfig::from_file(config_path);
    const tisc::CostReport report = tisc::count_costs(cfg.network());
    const json j = report;
    std::cout << j.dump(2) << "\n";
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        tisc::write_file(out_dir + "/cost.json", j.dump(2) + "\n");
    }
    return 0;
}

int cmd_saliency(const std::string& model_path, const std::string& data_path,
                 const std::string& out_dir, const std::string& class_mode, bool abs_grad,
                 unsigned threads) {
    const tisc::Network net = tisc::load(model_path);
    const tisc::SegmentDataset ds = tisc::read_tseg(data_path);
    if (ds.n_segments == 0) throw tisc::data_error(data_path + ": empty dataset");
    tisc::check_compatible(net.config, ds);

    tisc::ClassMode cm;
    if (class_mode == "predicted") {
        cm = tisc::ClassMode::predicted;
    } else if (class_mode == "true") {
        cm = tisc::ClassMode::true_label;
    } else {
        throw tisc::config_error("--class-mode must be predicted or true");
    }
    const tisc::SaliencyMode mode =
        abs_grad ? tisc::SaliencyMode::abs_grad : tisc::SaliencyMode::grad_x_act;

    ensure_dir(out_dir);
    const tisc::CumulativeSaliency cum = tisc::cumulative(net, ds, cm, mode, threads);
    tisc::write_file(out_dir + "/cumulative.csv", tisc::cumulative_csv(cum));

    // per-example maps for the first segment
    tisc::SegmentSource src(ds, net.config);
    std::vector<double> x;
    src.input(0, x);
    const std::size_t target = cm == tisc::ClassMode::predicted
                                   ? tisc::argmax(tisc::forward_eval(net, x))
                                   : src.label(0);
    for (const tisc::SaliencyMap& map : tisc::gradcam(net, x, target, mode)) {
        tisc::write_file(out_dir + "/map_seg0_ch" + std::to_string(map.channel) + "_layer" +
                             std::to_string(map.layer) + ".csv",
                         tisc::saliency_map_csv(map));
    }
    const auto waveforms = tisc::export_waveforms(net, out_dir);

    std::cout << json{{"out", out_dir},
                      {"segments", ds.n_segments},
                      {"argmax_scale", tisc::argmax_scale(cum)},
                      {"waveform_files", waveforms.size()}}
                     .dump()
              << "\n";
    return 0;
}

int cmd_bench(const std::string& config_path, const std::string& data_path,
              std::int64_t seed_override, unsigned threads) {
    RunConfig cfg = RunConfig::from_file(config_path);
    const std::uint64_t seed = seed_override >= 0 ? std::uint64_t(seed_override) : cfg.seed;
    const tisc::NetworkConfig netcfg = cfg.network();
    const tisc::TrainConfig traincfg = cfg.train(seed, threads);
    const tisc::SegmentDataset ds = tisc::read_tseg(data_path);
    const tisc::Network net = tisc::build(netcfg, seed);
    const tisc::BenchReport report = tisc::benchmark(net, ds, traincfg);
    std::cout << json(report).dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time Scale Network: training, evaluation, cost accounting and saliency"};
    app.require_subcommand(1);

    std::string config_path, data_path, model_path, out_path;
    std::int64_t seed = -1;
    unsigned threads = 0;
    std::string mode, class_mode = "true";
    bool abs_grad = false;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic TSEG dataset");
    synth->add_option("--config", config_path, "run config JSON")->required();
    synth->add_option("--out", out_path, "output .tseg path")->required();
    synth->add_option("--seed", seed, "seed override");
    synth->add_option("--mode", mode, "grid-aligned|random");

    CLI::App* train = app.add_subcommand("train", "balance, fold and train");
    train->add_option("--config", config_path, "run config JSON")->required();
    train->add_option("--data", data_path, "input .tseg")->required();
    train->add_option("--out", out_path, "output directory")->required();
    train->add_option("--seed", seed, "seed override");
    train->add_option("--threads", threads, "worker cap (0 = all cores)");

    CLI::App* eval = app.add_subcommand("eval", "accuracy and confusion counts");
    eval->add_option("--model", model_path, "model .tscm")->required();
    eval->add_option("--data", data_path, "input .tseg")->required();
    eval->add_option("--out", out_path, "output directory (optional)");
    eval->add_option("--threads", threads, "worker cap");

    CLI::App* count = app.add_subcommand("count", "parameter and MAC accounting");
    count->add_option("--config", config_path, "run config JSON")->required();
    count->add_option("--out", out_path, "output directory (optional)");

    CLI::App* saliency = app.add_subcommand("saliency", "GradCAM maps and waveform export");
    saliency->add_option("--model", model_path, "model .tscm")->required();
    saliency->add_option("--data", data_path, "input .tseg")->required();
    saliency->add_option("--out", out_path, "output directory")->required();
    saliency->add_option("--class-mode", class_mode, "predicted|true");
    saliency->add_flag("--abs-grad", abs_grad, "use |gradient| instead of grad*activation");
    saliency->add_option("--threads", threads, "worker cap");

    CLI::App* bench = app.add_subcommand("bench", "inference and epoch timing");
    bench->add_option("--config", config_path, "run config JSON")->required();
    bench->add_option("--data", data_path, "input .tseg")->required();
    bench->add_option("--seed", seed, "seed override");
    bench->add_option("--threads", threads, "worker cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(config_path, out_path, seed, mode);
        if (train->parsed()) return cmd_train(config_path, data_path, out_path, seed, threads);
        if (eval->parsed()) return cmd_eval(model_path, data_path, out_path, threads);
        if (count->parsed()) return cmd_count(config_path, out_path);
        if (saliency->parsed()) {
            return cmd_saliency(model_path, data_path, out_path, class_mode, abs_grad, threads);
        }
        if (bench->parsed()) return cmd_bench(config_path, data_path, seed, threads);
    } catch (const tisc::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const tisc::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const tisc::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
