#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "tisc/tisc.hpp"

using namespace tisc;

namespace {

NetworkConfig demo_config() {
    NetworkConfig cfg;
    cfg.seg_len = 128;
    cfg.input_scales = {2, 6};
    cfg.hidden_stack = {{3, 6}};
    cfg.dropout_rate = 0.0;
    cfg.normalize_input = false;
    return cfg;
}

SegmentDataset demo_dataset(std::size_t n, std::uint64_t seed) {
    SynthSpec spec;
    spec.n_per_class = n / 2;
    spec.seg_len = 128;
    spec.burst_scale = 4;
    spec.seed = seed;
    return synthesize(spec);
}

SegmentDataset dataset_subset(const SegmentDataset& ds, std::size_t begin, std::size_t end) {
    SegmentDataset out = ds;
    out.n_segments = end - begin;
    out.labels.assign(ds.labels.begin() + std::ptrdiff_t(begin),
                      ds.labels.begin() + std::ptrdiff_t(end));
    const std::size_t stride = ds.n_channels * ds.seg_len;
    out.data.assign(ds.data.begin() + std::ptrdiff_t(begin * stride),
                    ds.data.begin() + std::ptrdiff_t(end * stride));
    return out;
}

}  // namespace

TEST_CASE("gradcam basics") {
    Network net = build(demo_config(), 8);
    Rng rng(9);
    std::vector<double> x(128);
    for (double& v : x) v = rng.normal();

    SECTION("map shapes match the layer trees") {
        const auto maps = gradcam(net, x, 0);
        REQUIRE(maps.size() == 2);  // input + one hidden
        CHECK(maps[0].values.size() == tree_node_count(128, 2));
        CHECK(maps[1].values.size() == tree_node_count(128, 3));
        for (const auto& m : maps) {
            for (double v : m.values) CHECK(v >= 0.0);
        }
    }

    SECTION("zero head weights give all-zero maps") {
        Network zeroed = net;
        std::fill(zeroed.head.weights.begin(), zeroed.head.weights.end(), 0.0);
        for (const auto& m : gradcam(zeroed, x, 1)) {
            CHECK(std::all_of(m.values.begin(), m.values.end(),
                              [](double v) { return v == 0.0; }));
        }
    }

    SECTION("invalid class is rejected") {
        CHECK_THROWS_AS(gradcam(net, x, 2), std::out_of_range);
    }

    SECTION("max-1 normalization rescales the peak to one") {
        const auto raw = gradcam(net, x, 0, SaliencyMode::grad_x_act, false);
        const auto norm = gradcam(net, x, 0, SaliencyMode::grad_x_act, true);
        for (std::size_t m = 0; m < raw.size(); ++m) {
            const double peak = *std::max_element(raw[m].values.begin(), raw[m].values.end());
            if (peak == 0.0) continue;
            CHECK(norm[m].normalization == "max-1");
            CHECK(*std::max_element(norm[m].values.begin(), norm[m].values.end()) ==
                  Catch::Approx(1.0));
        }
    }
}

TEST_CASE("a single positive head weight lights up exactly one node") {
    NetworkConfig cfg;
    cfg.seg_len = 64;
    cfg.input_scales = {3, 3};
    cfg.activation = ActivationKind::identity;
    cfg.dropout_rate = 0.0;
    cfg.normalize_input = false;
    Network net = build(cfg, 1);

    // ones kernel, zero bias, positive input: every activation positive
    TiScInputLayer& input = net.channels[0].input;
    std::fill(input.weights.begin() + 7, input.weights.end(), 1.0);
    input.biases[0] = 0.0;
    std::fill(net.head.weights.begin(), net.head.weights.end(), 0.0);
    std::fill(net.head.biases.begin(), net.head.biases.end(), 0.0);
    const std::size_t j = 2;  // head input index == scale-3 offset 2
    net.head.weights[j * 2 + 1] = 1.5;  // class 1 only

    std::vector<double> x(64, 1.0);
    const auto maps = gradcam(net, x, 1);
    REQUIRE(maps.size() == 1);
    const SaliencyMap& m = maps[0];
    for (std::size_t i = 0; i < 8; ++i) {
        const double v = m.values[node_index(64, 3, i)];
        if (i == j) {
            CHECK(v == Catch::Approx(8.0 * 1.5));  // activation 8 times weight 1.5
        } else {
            CHECK(v == 0.0);
        }
    }

    SECTION("abs-grad mode sees the gradient magnitude instead") {
        const auto am = gradcam(net, x, 1, SaliencyMode::abs_grad);
        CHECK(am[0].values[node_index(64, 3, j)] == Catch::Approx(1.5));
        CHECK(am[0].values[node_index(64, 3, 0)] == 0.0);
    }
}

TEST_CASE("cumulative saliency") {
    const SegmentDataset ds = demo_dataset(24, 33);
    Network net = build(demo_config(), 44);

    SECTION("a one-sample dataset equals that sample's per-scale sums") {
        const SegmentDataset one = dataset_subset(ds, 3, 4);
        const CumulativeSaliency c = cumulative(net, one, ClassMode::true_label);
        REQUIRE(c.samples == 1);

        SegmentSource src(one, net.config);
        std::vector<double> x;
        src.input(0, x);
        std::vector<double> expected(c.per_scale.size(), 0.0);
        for (const SaliencyMap& m : gradcam(net, x, src.label(0))) {
            for (int l = m.scales.lambda_min; l <= m.scales.lambda_max; ++l) {
                for (std::size_t i = 0; i < windows_at(m.segment_length, l); ++i) {
                    expected[std::size_t(l)] += m.values[node_index(m.segment_length, l, i)];
                }
            }
        }
        for (std::size_t l = 0; l < expected.size(); ++l) {
            REQUIRE(c.per_scale[l] == Catch::Approx(expected[l]).margin(1e-12));
        }
    }

    SECTION("shard additivity") {
        const CumulativeSaliency whole = cumulative(net, ds, ClassMode::true_label);
        const CumulativeSaliency a =
            cumulative(net, dataset_subset(ds, 0, 10), ClassMode::true_label);
        const CumulativeSaliency b =
            cumulative(net, dataset_subset(ds, 10, ds.n_segments), ClassMode::true_label);
        for (std::size_t l = 0; l < whole.per_scale.size(); ++l) {
            REQUIRE(whole.per_scale[l] ==
                    Catch::Approx(a.per_scale[l] + b.per_scale[l]).margin(1e-9));
        }
    }

    SECTION("order of segments does not matter") {
        SegmentDataset shuffled = ds;
        // rotate the segments by five
        const std::size_t stride = ds.n_channels * ds.seg_len;
        std::rotate(shuffled.labels.begin(), shuffled.labels.begin() + 5,
                    shuffled.labels.end());
        std::rotate(shuffled.data.begin(), shuffled.data.begin() + std::ptrdiff_t(5 * stride),
                    shuffled.data.end());
        const CumulativeSaliency a = cumulative(net, ds, ClassMode::true_label);
        const CumulativeSaliency b = cumulative(net, shuffled, ClassMode::true_label);
        for (std::size_t l = 0; l < a.per_scale.size(); ++l) {
            REQUIRE(a.per_scale[l] == Catch::Approx(b.per_scale[l]).margin(1e-9));
        }
    }

    SECTION("predicted and true modes both run") {
        const CumulativeSaliency p = cumulative(net, ds, ClassMode::predicted);
        CHECK(p.samples == ds.n_segments);
    }

    SECTION("empty dataset is an error") {
        const SegmentDataset none = dataset_subset(ds, 0, 0);
        CHECK_THROWS_AS(cumulative(net, none, ClassMode::true_label), data_error);
    }
}

TEST_CASE("export_waveforms") {
    NetworkConfig cfg = demo_config();
    cfg.tisc_channels = 2;
    Network net = build(cfg, 314);

    const std::string dir =
        (std::filesystem::temp_directory_path() / "tisc_waveforms").string();
    std::filesystem::create_directories(dir);
    const auto files = export_waveforms(net, dir);
    REQUIRE(files.size() == 2);

    for (std::size_t ch = 0; ch < 2; ++ch) {
        std::ifstream in(files[ch]);
        REQUIRE(in.good());
        std::string header;
        std::getline(in, header);
        CHECK(header == "scale,tap,weight");

        std::vector<std::size_t> rows_per_scale(7, 0);
        std::string line;
        const TiScInputLayer& input = net.channels[ch].input;
        while (std::getline(in, line)) {
            const std::size_t c1 = line.find(',');
            const std::size_t c2 = line.find(',', c1 + 1);
            const int scale = std::stoi(line.substr(0, c1));
            const std::size_t tap = std::stoul(line.substr(c1 + 1, c2 - c1 - 1));
            const double w = std::strtod(line.c_str() + c2 + 1, nullptr);
            ++rows_per_scale[std::size_t(scale)];
            // untrained export carries the exact initialization values
            const WeightSlice ws = weight_slice(input, scale);
            REQUIRE(w == input.weights[ws.begin + tap]);
        }
        for (int l = 2; l <= 6; ++l) {
            CHECK(rows_per_scale[std::size_t(l)] == (std::size_t(1) << l));
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("saliency is zero wherever the class gradient is zero") {
    // relu-dead paths carry zero gradient and must show zero relevance
    NetworkConfig cfg = demo_config();
    Network net = build(cfg, 71);
    Rng rng(72);
    std::vector<double> x(128);
    for (double& v : x) v = rng.normal();

    ForwardTrace t;
    forward(net, x, false, nullptr, t);
    const auto maps = gradcam(net, x, 0);
    // input layer nodes whose activation is clamped at zero by relu have
    // grad*act = 0 by construction
    const SaliencyMap& m0 = maps[0];
    const LayerTrace& lt = t.channels[0].layers[0];
    for (std::size_t j = lt.out.active_begin(); j < lt.out.active_end(); ++j) {
        if (lt.out.values[j] == 0.0) CHECK(m0.values[j] == 0.0);
    }
}

TEST_CASE("csv emitters") {
    Network net = build(demo_config(), 5);
    Rng rng(6);
    std::vector<double> x(128);
    for (double& v : x) v = rng.normal();
    const auto maps = gradcam(net, x, 0);

    const std::string csv = saliency_map_csv(maps[0]);
    CHECK(csv.rfind("layer,scale,offset,t_start_sample,t_end_sample,relevance\n", 0) == 0);
    // one row per active node plus the header
    std::size_t lines = std::count(csv.begin(), csv.end(), '\n');
    std::size_t active = 0;
    for (int l = 2; l <= 6; ++l) active += 128 >> l;
    CHECK(lines == active + 1);

    const SegmentDataset ds = demo_dataset(8, 2);
    const CumulativeSaliency c = cumulative(net, ds, ClassMode::true_label);
    const std::string cc = cumulative_csv(c);
    CHECK(cc.rfind("scale,total,mean\n", 0) == 0);
    CHECK(std::count(cc.begin(), cc.end(), '\n') == 8);  // scales 1..7 + header
}
