#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "depthedge/net.hpp"
#include "depthedge/rng.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace depthedge {
namespace {

// Nested-loop reference of the whole encoder-decoder, written against the
// layer description rather than the library's layer helpers.
std::vector<double> oracle_forward(const NetworkParameters<double>& p, const std::vector<double>& x, int h, int w) {
    const auto& a = p.arch;
    const int n = a.encoder_depth;
    struct Map {
        std::vector<double> v;
        int c, h, w;
    };
    std::vector<Map> pre(static_cast<std::size_t>(2 * n));
    Map act{x, a.in_channels, h, w};
    for (int l = 0; l < 2 * n; ++l) {
        const auto& lp = p.layers[static_cast<std::size_t>(l)];
        Map in = act;
        if (l >= n) {
            Map up{std::vector<double>(static_cast<std::size_t>(in.c) * in.h * in.w * 4), in.c, in.h * 2, in.w * 2};
            for (int c = 0; c < in.c; ++c)
                for (int y = 0; y < up.h; ++y)
                    for (int xx = 0; xx < up.w; ++xx)
                        up.v[(static_cast<std::size_t>(c) * up.h + y) * up.w + xx] = in.v[(static_cast<std::size_t>(c) * in.h + y / 2) * in.w + xx / 2];
            in = up;
        }
        const int cout = static_cast<int>(lp.bias.size());
        int oh, ow;
        std::vector<double> wt(lp.weight.begin(), lp.weight.end()), b(lp.bias.begin(), lp.bias.end());
        auto z = l < n ? oracle::conv2d(in.v, in.c, in.h, in.w, wt, b, cout, 4, 2, 1, 1, oh, ow)
                       : oracle::conv2d(in.v, in.c, in.h, in.w, wt, b, cout, 4, 1, 1, 2, oh, ow);
        if (a.batch_norm[static_cast<std::size_t>(l)]) {
            for (int c = 0; c < cout; ++c) {
                const double inv = 1.0 / std::sqrt(lp.running_var[c] + 1e-5);
                for (int i = 0; i < oh * ow; ++i) {
                    double& v = z[static_cast<std::size_t>(c) * oh * ow + i];
                    v = lp.gamma[c] * (v - lp.running_mean[c]) * inv + lp.beta[c];
                }
            }
        }
        Map pz{z, cout, oh, ow};
        const int d = l - n;
        if (l >= n && d < n - 1) {
            const Map& s = pre[static_cast<std::size_t>(n - 2 - d)];
            pz.v.insert(pz.v.end(), s.v.begin(), s.v.end());
            pz.c += s.c;
        }
        pre[static_cast<std::size_t>(l)] = pz;
        act = pz;
        for (std::size_t i = 0; i < act.v.size(); ++i) {
            const int c = static_cast<int>(i / (static_cast<std::size_t>(act.h) * act.w));
            double& v = act.v[i];
            if (l == 2 * n - 1) {
                v = c == 0 ? 1.0 / (1.0 + std::exp(-v)) : std::tanh(v);
            } else {
                v = v >= 0 ? v : 0.2 * v;
            }
        }
    }
    return act.v;
}

NetworkParameters<double> random_params(const ArchitectureConfig& arch, Rng& rng) {
    auto p = NetworkParameters<double>::initialize(arch, rng.next());
    for (auto& l : p.layers) {
        for (auto& v : l.bias) v = rng.uniform(-0.3, 0.3);
        for (auto& v : l.gamma) v = rng.uniform(0.5, 1.5);
        for (auto& v : l.beta) v = rng.uniform(-0.3, 0.3);
        for (auto& v : l.running_mean) v = rng.uniform(-0.3, 0.3);
        for (auto& v : l.running_var) v = rng.uniform(0.5, 2.0);
    }
    return p;
}

TEST(Net, LeakyRelu) {
    EXPECT_EQ(leaky_relu(3.0), 3.0);
    EXPECT_DOUBLE_EQ(leaky_relu(-5.0), -1.0);
    EXPECT_EQ(leaky_relu_derivative(-1.0), 0.2);
    EXPECT_EQ(leaky_relu_derivative(2.0), 1.0);
}

TEST(Net, DefaultArchitecture) {
    const auto a = ArchitectureConfig::make_default(5);
    EXPECT_EQ(a.widths, (std::vector<int>{16, 32, 64, 128, 256}));
    EXPECT_EQ(a.layer_count(), 10);
    EXPECT_EQ(a.batch_norm, (std::vector<bool>{true, true, true, false, false, false, false, true, true, false}));
    const auto b = ArchitectureConfig::make_default(8);
    EXPECT_EQ(b.widths.back(), 256);
    EXPECT_EQ(b.widths[3], 128);
    EXPECT_EQ(b.min_input(), 256);
    EXPECT_EQ(a.conv_in(5), 256);
    EXPECT_EQ(a.conv_out(5), 128);
    EXPECT_EQ(a.conv_in(6), 256);
    EXPECT_EQ(a.conv_out(9), 1);
    EXPECT_EQ(a.conv_in(9), 32);
    EXPECT_EQ(a.skip_source(5), 3);
    EXPECT_EQ(a.skip_source(8), 0);
    EXPECT_EQ(a.skip_source(9), -1);
}

TEST(Net, ForwardMatchesOracle) {
    Rng rng(21);
    for (int t = 0; t < 10; ++t) {
        ArchitectureConfig arch;
        arch.encoder_depth = 2;
        arch.widths = {4, 8};
        arch.batch_norm = {true, false, rng.uniform() < 0.5, false};
        arch.head = t % 2 ? OutputHead::ContourDirection : OutputHead::Edge;
        const auto p = random_params(arch, rng);
        Tensor<double> x = gradcheck::random_tensor(rng, 1, 7, 8, 8);
        const auto out = forward(p, x, Mode::Infer);
        const auto want = oracle_forward(p, x.data, 8, 8);
        ASSERT_EQ(out.data.size(), want.size());
        for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(out.data[i], want[i], 1e-5);
        // The float network agrees too.
        const auto pf = p.cast<float>();
        Tensor<float> xf(1, 7, 8, 8);
        for (std::size_t i = 0; i < x.data.size(); ++i) xf.data[i] = static_cast<float>(x.data[i]);
        const auto of = forward(pf, xf, Mode::Infer);
        for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(of.data[i], want[i], 1e-4);
    }
}

TEST(Net, ConvolutionMatchesOracle) {
    Rng rng(22);
    for (int t = 0; t < 50; ++t) {
        const int h = 1 + static_cast<int>(rng.below(16)), w = 1 + static_cast<int>(rng.below(16));
        const int cin = 1 + static_cast<int>(rng.below(3)), cout = 1 + static_cast<int>(rng.below(3));
        const ConvGeometry g = t % 2 ? ConvGeometry{4, 2, 1, 1} : ConvGeometry{4, 1, 1, 2};
        if (g.out_size(h) < 1 || g.out_size(w) < 1) continue;
        const auto x = gradcheck::random_tensor(rng, 1, cin, h, w);
        std::vector<double> wt(static_cast<std::size_t>(cout) * cin * 16), b(static_cast<std::size_t>(cout));
        for (auto& v : wt) v = rng.uniform(-1, 1);
        for (auto& v : b) v = rng.uniform(-1, 1);
        const auto y = conv2d_forward(x, wt, b, cout, g);
        int oh, ow;
        const auto want = oracle::conv2d(x.data, cin, h, w, wt, b, cout, 4, g.stride, g.pad_before, g.pad_after, oh, ow);
        ASSERT_EQ(y.h, oh);
        ASSERT_EQ(y.w, ow);
        for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(y.data[i], want[i], 1e-10);
    }
}

TEST(Net, IdentityToyNetwork) {
    // One encoder + one decoder; kernels route input channel 3 straight through.
    ArchitectureConfig arch;
    arch.encoder_depth = 1;
    arch.widths = {1};
    arch.batch_norm = {false, false};
    auto p = NetworkParameters<double>::initialize(arch, 1);
    for (auto& l : p.layers) std::fill(l.weight.begin(), l.weight.end(), 0.0);
    // Encoder: stride 2, pad 1: output (y, x) reads input (2y - 1 + ky, 2x - 1 + kx); take ky = kx = 1.
    p.layers[0].weight[(0 * 7 + 3) * 16 + 1 * 4 + 1] = 1.0;
    // Decoder: stride 1, pad 1: output (y, x) reads upsampled (y - 1 + ky); take ky = kx = 1.
    p.layers[1].weight[1 * 4 + 1] = 1.0;
    Tensor<double> x(1, 7, 4, 4);
    Rng rng(3);
    for (int y = 0; y < 4; ++y)
        for (int xx = 0; xx < 4; ++xx) x(0, 3, y, xx) = rng.uniform(0.1, 1.0);
    const auto out = forward(p, x, Mode::Infer);
    // Output is sigmoid of the nearest-neighbour upsampled even-index samples.
    for (int y = 0; y < 4; ++y)
        for (int xx = 0; xx < 4; ++xx) {
            const double v = x(0, 3, (y / 2) * 2, (xx / 2) * 2);
            EXPECT_NEAR(out(0, 0, y, xx), 1.0 / (1.0 + std::exp(-v)), 1e-12);
        }
}

TEST(Net, ShapeErrors) {
    const auto arch = ArchitectureConfig::make_default(3);
    const auto p = NetworkParameters<float>::initialize(arch, 1);
    EXPECT_THROW(forward(p, Tensor<float>(1, 7, 12, 16), Mode::Infer), Error);
    EXPECT_THROW(forward(p, Tensor<float>(1, 6, 16, 16), Mode::Infer), Error);
    try {
        forward(p, Tensor<float>(1, 7, 12, 16), Mode::Infer);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Shape);
        EXPECT_NE(std::string(e.what()).find("multiple of 8"), std::string::npos);
    }
    EXPECT_NO_THROW(forward(p, Tensor<float>(1, 7, 8, 16), Mode::Infer));
}

TEST(Net, MinimumInputHasSinglePixelBottleneck) {
    const auto arch = ArchitectureConfig::make_default(4);
    const auto p = NetworkParameters<double>::initialize(arch, 2);
    ForwardCache<double> cache;
    Rng rng(1);
    const auto out = forward(p, gradcheck::random_tensor(rng, 2, 7, 16, 16), Mode::Train, &cache);
    EXPECT_EQ(cache.pre_activation[3].h, 1);
    EXPECT_EQ(cache.pre_activation[3].w, 1);
    EXPECT_EQ(out.h, 16);
    EXPECT_EQ(out.w, 16);
}

TEST(Net, OutputRanges) {
    Rng rng(5);
    for (auto head : {OutputHead::Edge, OutputHead::ContourDirection}) {
        auto arch = ArchitectureConfig::make_default(3, head);
        auto p = random_params(arch, rng);
        for (auto& l : p.layers)
            for (auto& v : l.weight) v *= 5.0;
        const auto out = forward(p, gradcheck::random_tensor(rng, 1, 7, 16, 16, -5, 5), Mode::Infer);
        for (int c = 0; c < out.c; ++c)
            for (int i = 0; i < 256; ++i) {
                const double v = out.data[static_cast<std::size_t>(c) * 256 + i];
                EXPECT_GE(v, c == 0 ? 0.0 : -1.0);
                EXPECT_LE(v, 1.0);
            }
    }
}

TEST(Net, ReceptiveField) {
    // Bottleneck pixel (0,0) of a depth-3 encoder sees input rows/cols -7..14 at most;
    // a perturbation far outside leaves it unchanged.
    auto arch = ArchitectureConfig::make_default(3);
    arch.batch_norm.assign(6, false);
    const auto p = NetworkParameters<double>::initialize(arch, 4);
    Rng rng(9);
    Tensor<double> x = gradcheck::random_tensor(rng, 1, 7, 64, 64);
    ForwardCache<double> a, b;
    forward(p, x, Mode::Train, &a);
    for (int c = 0; c < 7; ++c) x(0, c, 40, 40) += 10.0;
    forward(p, x, Mode::Train, &b);
    const auto& ba = a.pre_activation[2];
    const auto& bb = b.pre_activation[2];
    for (int c = 0; c < ba.c; ++c) EXPECT_EQ(ba(0, c, 0, 0), bb(0, c, 0, 0));
    bool changed = false;
    for (std::size_t i = 0; i < ba.data.size(); ++i) changed |= ba.data[i] != bb.data[i];
    EXPECT_TRUE(changed);
}

TEST(Net, BatchNormTrainStatistics) {
    Rng rng(7);
    auto x = gradcheck::random_tensor(rng, 4, 3, 5, 5, -3, 7);
    for (int b = 0; b < 4; ++b)
        for (int i = 0; i < 25; ++i) x.data[x.index(b, 2, 0, 0) + i] = 2.5;
    LayerTensors<double> layer;
    layer.gamma.assign(3, 1.0);
    layer.beta.assign(3, 0.0);
    BatchNormCache cache;
    const auto y = batch_norm_forward(x, layer, Mode::Train, &cache, nullptr);
    for (int c = 0; c < 3; ++c) {
        double m = 0, v = 0;
        for (int b = 0; b < 4; ++b)
            for (int i = 0; i < 25; ++i) m += y.data[y.index(b, c, 0, 0) + i];
        m /= 100;
        for (int b = 0; b < 4; ++b)
            for (int i = 0; i < 25; ++i) v += std::pow(y.data[y.index(b, c, 0, 0) + i] - m, 2);
        v /= 100;
        EXPECT_LT(std::abs(m), 1e-6);
        if (c < 2) {
            EXPECT_NEAR(v, 1.0, 1e-4);
        } else {
            EXPECT_EQ(v, 0.0);
            EXPECT_EQ(y(0, 2, 0, 0), 0.0);
        }
    }
}

TEST(Net, BatchNormInferIsAffine) {
    LayerTensors<double> layer{{}, {}, {2.0}, {0.5}, {1.0}, {4.0}};
    Tensor<double> x(1, 1, 1, 3);
    x.data = {0.0, 1.0, 3.0};
    const auto y = batch_norm_forward(x, layer, Mode::Infer, nullptr, nullptr);
    const double inv = 1.0 / std::sqrt(4.0 + 1e-5);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(y.data[i], 2.0 * (x.data[i] - 1.0) * inv + 0.5, 1e-12);
    EXPECT_EQ(y.data, batch_norm_forward(x, layer, Mode::Infer, nullptr, nullptr).data);
}

TEST(Net, LayersWithoutBatchNormIgnoreMode) {
    auto arch = ArchitectureConfig::make_default(3);
    arch.batch_norm.assign(6, false);
    const auto p = NetworkParameters<double>::initialize(arch, 8);
    Rng rng(2);
    const auto x = gradcheck::random_tensor(rng, 2, 7, 16, 16);
    EXPECT_EQ(forward(p, x, Mode::Train).data, forward(p, x, Mode::Infer).data);
}

TEST(Net, RunningStatsUpdate) {
    auto arch = ArchitectureConfig::make_default(3);
    auto p = NetworkParameters<double>::initialize(arch, 8);
    Rng rng(2);
    ForwardCache<double> cache;
    forward(p, gradcheck::random_tensor(rng, 2, 7, 16, 16), Mode::Train, &cache);
    update_running_stats(p, cache);
    const double m = cache.bn[0].mean[0];
    EXPECT_NEAR(p.layers[0].running_mean[0], 0.1 * m, 1e-12);
    EXPECT_NE(p.layers[0].running_var[0], 1.0);
}

TEST(Net, LossSinglePixelCases) {
    Image pred(1, 1, 1, 0.5f), zero(1, 1, 1, 0.0f), m10(1, 1, 1, 10.0f), m1(1, 1, 1, 1.0f);
    EXPECT_EQ(loss(pred, zero, m10), 25.0);
    EXPECT_EQ(loss(pred, zero, m1), 0.25);
    EXPECT_EQ(loss(pred, pred, m10), 0.0);
    Tensor<double> p(1, 1, 1, 1, 0.5), t(1, 1, 1, 1, 0.0), w(1, 1, 1, 1, 10.0);
    EXPECT_EQ(masked_mse(p, t, w), 25.0);
    EXPECT_THROW(loss(pred, Image(2, 1, 1), m1), Error);
}

TEST(Net, MaskScalesGradientBySquare) {
    Tensor<double> p(1, 1, 1, 2), t(1, 1, 1, 2), w(1, 1, 1, 2);
    p.data = {0.7, 0.7};
    t.data = {0.2, 0.2};
    w.data = {10.0, 1.0};
    Tensor<double> g;
    masked_mse(p, t, w, &g);
    EXPECT_NEAR(g.data[0] / g.data[1], 100.0, 1e-12);
}

TEST(Net, ZeroLossGradientLeavesOnlyL2) {
    const auto arch = ArchitectureConfig::make_default(2);
    const auto p = NetworkParameters<double>::initialize(arch, 3);
    Rng rng(4);
    ForwardCache<double> cache;
    const auto out = forward(p, gradcheck::random_tensor(rng, 2, 7, 8, 8), Mode::Train, &cache);
    const Tensor<double> zero(out.n, out.c, out.h, out.w);
    const auto g0 = backward(p, cache, zero, 0.0);
    for (const auto& l : g0)
        for (const auto* v : {&l.weight, &l.bias, &l.gamma, &l.beta})
            for (double x : *v) EXPECT_EQ(x, 0.0);
    const auto g1 = backward(p, cache, zero, 1e-5);
    for (std::size_t l = 0; l < g1.size(); ++l)
        for (std::size_t i = 0; i < g1[l].weight.size(); ++i) EXPECT_DOUBLE_EQ(g1[l].weight[i], 2e-5 * p.layers[l].weight[i]);
}

TEST(Net, BackwardRequiresCache) {
    const auto p = NetworkParameters<double>::initialize(ArchitectureConfig::make_default(2), 3);
    EXPECT_THROW(backward(p, ForwardCache<double>{}, Tensor<double>(1, 1, 4, 4), 0.0), Error);
}

TEST(Net, LayerGradientsMatchFiniteDifferences) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        for (const auto& r : {gradcheck::check_conv(s), gradcheck::check_upsample(s), gradcheck::check_batch_norm(s),
                              gradcheck::check_activations(s), gradcheck::check_loss(s)}) {
            EXPECT_GT(r.checked, 0u);
            EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << s;
        }
    }
}

TEST(Net, NetworkGradientsMatchFiniteDifferences) {
    for (std::uint64_t s = 0; s < 6; ++s) {
        const auto head = s % 2 ? OutputHead::ContourDirection : OutputHead::Edge;
        const auto r = gradcheck::check_network(s, head);
        EXPECT_GT(r.checked, 100u);
        EXPECT_LT(r.skipped, r.checked / 10);
        EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << s;
    }
}

TEST(Net, NetworkGradientEntriesConvergeWithStep) {
    // Entry-wise agreement is limited by O(h^2) truncation; at h = 1e-4 every
    // single entry agrees to 1e-4.
    for (std::uint64_t s = 0; s < 6; ++s) {
        const auto r = gradcheck::check_network(s, OutputHead::Edge, 1e-4);
        EXPECT_LT(r.max_entry_rel_error, 1e-4) << "seed " << s;
    }
}

TEST(Net, AdamStep) {
    const auto arch = ArchitectureConfig::make_default(2);
    auto p = NetworkParameters<double>::initialize(arch, 3);
    const auto orig = p;
    auto state = make_adam_state(p);
    auto zero = zero_gradients(p);
    adam_step(p, zero, state, {});
    EXPECT_EQ(p.layers[0].weight, orig.layers[0].weight);

    auto g = zero_gradients(p);
    Rng rng(1);
    for (auto& l : g)
        for (auto& v : l.weight) v = rng.uniform(-1, 1) * 1e-3;
    auto p1 = orig;
    auto s1 = make_adam_state(p1);
    adam_step(p1, g, s1, {});
    for (std::size_t i = 0; i < g[0].weight.size(); ++i) {
        const double step = orig.layers[0].weight[i] - p1.layers[0].weight[i];
        const double gi = g[0].weight[i];
        // m_hat / sqrt(v_hat) = g / |g| on the first step.
        EXPECT_NEAR(step, 1e-3 * gi / (std::abs(gi) + 1e-8), 1e-12);
    }
    auto p2 = orig;
    auto s2 = make_adam_state(p2);
    adam_step(p2, g, s2, {});
    adam_step(p1, g, s1, {});
    adam_step(p2, g, s2, {});
    EXPECT_EQ(p1.layers[0].weight, p2.layers[0].weight);
}

TEST(Net, NetworkInputAssembly) {
    Image color(4, 4, 3, 0.5f), disp(4, 4, 1, 32.0f), normals(4, 4, 3, 0.0f);
    normals.at(1, 1, 0) = std::nanf("");
    const auto x = make_network_input(color, disp, normals, 1.0 / 32.0);
    EXPECT_EQ(x.channels(), 7);
    EXPECT_EQ(x.at(2, 2, 3), 1.0f);
    EXPECT_EQ(x.at(1, 1, 4), 0.0f);
    const Image batch[] = {x, x};
    const auto t = to_tensor(batch);
    EXPECT_EQ(t.n, 2);
    EXPECT_EQ(t(1, 3, 2, 2), 1.0f);
    EXPECT_EQ(from_tensor(t, 1), x);
}

}  // namespace
}  // namespace depthedge
