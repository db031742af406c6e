#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "oracles.hpp"
#include "tisc/tisc.hpp"

using namespace tisc;

namespace {

NetworkConfig small_config(ActivationKind act) {
    NetworkConfig cfg;
    cfg.seg_len = 64;
    cfg.data_channels = 1;
    cfg.tisc_channels = 1;
    cfg.input_scales = {1, 5};
    cfg.hidden_stack = {{2, 5}};
    cfg.activation = act;
    cfg.dropout_rate = 0.0;
    cfg.num_classes = 2;
    cfg.normalize_input = false;
    return cfg;
}

}  // namespace

TEST_CASE("backward_input") {
    TiScInputLayer layer = TiScInputLayer::zeros({1, 3}, ActivationKind::tanh);
    Rng rng(21);
    for (std::size_t k = 1; k < layer.weights.size(); ++k) layer.weights[k] = rng.normal();
    for (double& b : layer.biases) b = rng.normal();
    std::vector<double> x(8);
    for (double& v : x) v = rng.normal();

    EmbeddingTree out, pre;
    forward_input(layer, x, out, &pre);

    SECTION("zero upstream gives zero gradients") {
        InputLayerGrads g = InputLayerGrads::like(layer);
        EmbeddingTree d_out = EmbeddingTree::zeros(8, {1, 3});
        std::vector<double> dx(8, 0.0);
        backward_input(layer, x, pre, d_out, g, &dx);
        CHECK(std::all_of(g.weights.begin(), g.weights.end(), [](double v) { return v == 0.0; }));
        CHECK(std::all_of(g.biases.begin(), g.biases.end(), [](double v) { return v == 0.0; }));
        CHECK(std::all_of(dx.begin(), dx.end(), [](double v) { return v == 0.0; }));
    }

    SECTION("a single upstream pulse reaches only its receptive field") {
        InputLayerGrads g = InputLayerGrads::like(layer);
        EmbeddingTree d_out = EmbeddingTree::zeros(8, {1, 3});
        d_out.at(2, 1) = 1.0;
        std::vector<double> dx(8, 0.0);
        backward_input(layer, x, pre, d_out, g, &dx);
        const SampleInterval f = receptive_field(8, 2, 1);
        for (std::size_t n = 0; n < 8; ++n) {
            if (n < f.begin || n >= f.end) {
                CHECK(dx[n] == 0.0);
            }
        }
        bool inside_nonzero = false;
        for (std::size_t n = f.begin; n < f.end; ++n) inside_nonzero |= dx[n] != 0.0;
        CHECK(inside_nonzero);
    }
}

TEST_CASE("backward_hidden") {
    TiScHiddenLayer layer = TiScHiddenLayer::zeros({1, 2}, {2, 2}, ActivationKind::identity);
    std::fill(layer.kernel(2).begin(), layer.kernel(2).end(), 1.0);
    EmbeddingTree e = EmbeddingTree::zeros(8, {1, 2});
    Rng rng(31);
    for (std::size_t j = e.active_begin(); j < e.active_end(); ++j) e.values[j] = rng.normal();
    EmbeddingTree out, pre;
    forward_hidden(layer, e, out, &pre);

    SECTION("zero upstream gives zero gradients") {
        HiddenLayerGrads g = HiddenLayerGrads::like(layer);
        EmbeddingTree d_out = EmbeddingTree::zeros(8, {2, 2});
        backward_hidden(layer, e, pre, d_out, g);
        for (const auto& k : g.kernels) {
            CHECK(std::all_of(k.begin(), k.end(), [](double v) { return v == 0.0; }));
        }
    }

    SECTION("ones kernel routes a unit pulse exactly onto the support") {
        HiddenLayerGrads g = HiddenLayerGrads::like(layer);
        EmbeddingTree d_out = EmbeddingTree::zeros(8, {2, 2});
        d_out.at(2, 0) = 1.0;
        EmbeddingTree d_e = EmbeddingTree::zeros(8, {1, 2});
        backward_hidden(layer, e, pre, d_out, g, &d_e);
        // support of window (2, 0): nodes (1,0), (1,1), (2,0)
        CHECK(d_e.at(1, 0) == 1.0);
        CHECK(d_e.at(1, 1) == 1.0);
        CHECK(d_e.at(2, 0) == 1.0);
        CHECK(d_e.at(1, 2) == 0.0);
        CHECK(d_e.at(1, 3) == 0.0);
        CHECK(d_e.at(2, 1) == 0.0);
    }
}

TEST_CASE("backward_dense and the fused loss gradient") {
    SECTION("prediction equal to the one-hot target zeroes the fused gradient") {
        // exp(-2000) underflows, so softmax(1000, -1000) is exactly (1, 0)
        const std::vector<double> scores{1000.0, -1000.0};
        std::vector<double> ds(2);
        softmax_cross_entropy(scores, 0, ds);
        CHECK(ds[0] == 0.0);
        CHECK(ds[1] == 0.0);
    }

    SECTION("symmetric two-class logits split the gradient") {
        const std::vector<double> scores{0.0, 0.0};
        std::vector<double> ds(2);
        softmax_cross_entropy(scores, 0, ds);
        CHECK(ds[0] == Catch::Approx(-0.5).margin(1e-15));
        CHECK(ds[1] == Catch::Approx(0.5).margin(1e-15));
    }

    SECTION("class index out of range") {
        const std::vector<double> scores{0.0, 0.0};
        CHECK_THROWS_AS(softmax_cross_entropy(scores, 2), std::out_of_range);
    }

    SECTION("finite differences confirm the dense adjoint") {
        DenseHead head = DenseHead::zeros(5, 3);
        Rng rng(41);
        for (double& w : head.weights) w = rng.normal();
        for (double& b : head.biases) b = rng.normal();
        std::vector<double> a(5);
        for (double& v : a) v = rng.normal();

        std::vector<double> scores(3), ds(3);
        forward_dense(head, a, scores);
        const std::size_t label = 1;
        softmax_cross_entropy(scores, label, ds);
        DenseGrads g = DenseGrads::like(head);
        std::vector<double> da(5, 0.0);
        backward_dense(head, a, ds, g, da);

        const double h = 1e-6;
        auto loss_at = [&]() {
            std::vector<double> s(3);
            forward_dense(head, a, s);
            return softmax_cross_entropy(s, label);
        };
        for (std::size_t i = 0; i < head.weights.size(); ++i) {
            const double saved = head.weights[i];
            head.weights[i] = saved + h;
            const double up = loss_at();
            head.weights[i] = saved - h;
            const double dn = loss_at();
            head.weights[i] = saved;
            CHECK(oracles::rel_err(g.weights[i], (up - dn) / (2 * h), 1e-6) < 1e-6);
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double saved = a[i];
            a[i] = saved + h;
            const double up = loss_at();
            a[i] = saved - h;
            const double dn = loss_at();
            a[i] = saved;
            CHECK(oracles::rel_err(da[i], (up - dn) / (2 * h), 1e-6) < 1e-6);
        }
    }
}

TEST_CASE("grad_check against central finite differences") {
    SECTION("random nets stay under 1e-4 for both activations") {
        for (ActivationKind act : {ActivationKind::relu, ActivationKind::tanh}) {
            for (std::uint64_t seed = 0; seed < 4; ++seed) {
                auto [net, x] = oracles::conditioned_case(small_config(act), seed);
                const GradCheckReport report = grad_check(net, x, seed % 2, 1e-4);
                INFO("activation " << to_string(act) << " seed " << seed << " worst "
                                   << report.worst.block << "[" << report.worst.index
                                   << "] analytic " << report.worst.analytic << " fd "
                                   << report.worst.fd);
                CHECK(report.pass());
                CHECK(report.checked == active_param_count(net));
            }
        }
    }

    SECTION("an identity-activation linear net is near machine precision") {
        auto [net, x] = oracles::conditioned_case(small_config(ActivationKind::identity), 3);
        const GradCheckReport report = grad_check(net, x, 1, 1e-7);
        INFO("worst " << report.worst.block << " rel " << report.max_rel_err);
        CHECK(report.pass());
    }

    SECTION("zero tolerance always fails and reports coordinates") {
        auto [net, x] = oracles::conditioned_case(small_config(ActivationKind::tanh), 5);
        const GradCheckReport report = grad_check(net, x, 0, 0.0);
        CHECK_FALSE(report.pass());
        CHECK_FALSE(report.failures.empty());
        CHECK(!report.failures.front().block.empty());
    }
}

TEST_CASE("placeholder parameters receive identically zero gradient") {
    NetworkConfig cfg = small_config(ActivationKind::relu);
    cfg.input_scales = {3, 5};  // slots below 2^3-1 are placeholders
    cfg.hidden_stack = {{4, 5}};
    Network net = build(cfg, 17);
    Rng rng(18);
    std::vector<double> x(64);
    for (double& v : x) v = rng.normal();

    NetworkGrads g = NetworkGrads::like(net);
    ForwardTrace t;
    BackpropBuffers ws;
    sample_loss_and_grad(net, x, 1, false, nullptr, g, t, ws);

    for (std::size_t k = 0; k < 7; ++k) {
        CHECK(g.channels[0].input.weights[k] == 0.0);
        CHECK(net.channels[0].input.weights[k] == 0.0);
    }
}

TEST_CASE("gradient of a sum of losses is the sum of gradients") {
    NetworkConfig cfg = small_config(ActivationKind::tanh);
    Network net = build(cfg, 23);
    Rng rng(24);
    std::vector<double> xa(64), xb(64);
    for (double& v : xa) v = rng.normal();
    for (double& v : xb) v = rng.normal();

    ForwardTrace t;
    BackpropBuffers ws;
    NetworkGrads ga = NetworkGrads::like(net);
    NetworkGrads gb = NetworkGrads::like(net);
    NetworkGrads gsum = NetworkGrads::like(net);
    sample_loss_and_grad(net, xa, 0, false, nullptr, ga, t, ws);
    sample_loss_and_grad(net, xb, 1, false, nullptr, gb, t, ws);
    sample_loss_and_grad(net, xa, 0, false, nullptr, gsum, t, ws);
    sample_loss_and_grad(net, xb, 1, false, nullptr, gsum, t, ws);

    add_scaled(ga, gb, 1.0);
    auto a_blocks = grad_blocks(ga);
    auto s_blocks = grad_blocks(gsum);
    REQUIRE(a_blocks.size() == s_blocks.size());
    for (std::size_t b = 0; b < a_blocks.size(); ++b) {
        for (std::size_t i = 0; i < a_blocks[b].size(); ++i) {
            REQUIRE(a_blocks[b][i] == Catch::Approx(s_blocks[b][i]).margin(1e-12));
        }
    }
}

TEST_CASE("backward through dropout rescales surviving paths") {
    NetworkConfig cfg = small_config(ActivationKind::tanh);
    cfg.dropout_rate = 0.25;
    Network net = build(cfg, 29);
    Rng rng(30);
    std::vector<double> x(64);
    for (double& v : x) v = rng.normal();

    // finite differences through a frozen mask: replay the same dropout seed
    NetworkGrads g = NetworkGrads::like(net);
    ForwardTrace t;
    BackpropBuffers ws;
    Rng drop(777);
    sample_loss_and_grad(net, x, 0, true, &drop, g, t, ws);

    auto loss_with_mask = [&](Network& n) {
        Rng d2(777);
        ForwardTrace tt;
        forward(n, x, true, &d2, tt);
        return softmax_cross_entropy(tt.scores, 0);
    };
    Network work = net;
    auto params = param_blocks(work);
    auto grads = grad_blocks(g);
    const double h = 1e-5;
    for (std::size_t b = 0; b < params.size(); ++b) {
        const std::size_t step = std::max<std::size_t>(1, params[b].size() / 5);
        for (std::size_t i = 0; i < params[b].size(); i += step) {
            const double saved = params[b][i];
            params[b][i] = saved + h;
            const double up = loss_with_mask(work);
            params[b][i] = saved - h;
            const double dn = loss_with_mask(work);
            params[b][i] = saved;
            const double fd = (up - dn) / (2 * h);
            REQUIRE(oracles::rel_err(grads[b][i], fd, 1e-6) < 1e-4);
        }
    }
}
