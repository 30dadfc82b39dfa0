#include "pdetect/error.hpp"
#include "pdetect/nn/bundle.hpp"
#include "pdetect/nn/features.hpp"
#include "pdetect/nn/layers.hpp"
#include "pdetect/nn/model.hpp"
#include "pdetect/nn/recurrent.hpp"
#include "pdetect/nn/train.hpp"
#include "support.hpp"
#include "tempdir.hpp"

#include <doctest.h>

#include <cmath>

using namespace pdetect;
using namespace pdetect::nn;
using doctest::Approx;
using testsupport::Gen;

namespace {

Tensor random_tensor(Gen& g, std::vector<std::size_t> shape, double sd = 0.5) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return Tensor(std::move(shape), g.normals(n, sd));
}

LstmDirectionParams random_direction(Gen& g, std::size_t in, std::size_t h) {
    return {random_tensor(g, {4 * h, in}), random_tensor(g, {4 * h, h}), random_tensor(g, {4 * h})};
}

std::vector<std::vector<double>> rows_of(const Tensor& t) {
    std::vector<std::vector<double>> out(t.dim(0), std::vector<double>(t.dim(1)));
    for (std::size_t i = 0; i < t.dim(0); ++i) {
        for (std::size_t j = 0; j < t.dim(1); ++j) out[i][j] = t.at(i, j);
    }
    return out;
}

CompositeClassifier tiny_model(std::uint64_t seed) {
    auto m = init_model(testsupport::tiny_architecture(), seed);
    return m;
}

}  // namespace

// --- layers ---------------------------------------------------------------

TEST_CASE("conv1d examples") {
    const Tensor x({1, 4}, {1, 2, 3, 4});
    const auto same = conv1d(x, Tensor({1, 1, 1}, {1.0}), Tensor({1}, {0.0}));
    CHECK(same == x);
    const auto diff = conv1d(x, Tensor({1, 1, 2}, {1.0, -1.0}), Tensor({1}, {0.0}));
    CHECK(diff.values() == std::vector<double>{-1, -1, -1});
    try {
        conv1d(Tensor({1, 3}, {1, 2, 3}), Tensor({1, 1, 5}, 1.0), Tensor({1}, 0.0));
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ShapeMismatch);
    }
}

TEST_CASE("property: conv1d equals the sliding-window sum") {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        Gen g(seed);
        const std::size_t ci = g.index(1, 3), co = g.index(1, 3), k = g.index(1, 4), L = g.index(k, 12);
        const std::size_t stride = g.index(1, 2);
        const auto x = random_tensor(g, {ci, L});
        const auto w = random_tensor(g, {co, ci, k});
        const auto b = random_tensor(g, {co});
        const auto y = conv1d(x, w, b, stride);
        const std::size_t out_len = (L - k) / stride + 1;
        REQUIRE(y.shape() == std::vector<std::size_t>{co, out_len});
        for (std::size_t o = 0; o < co; ++o) {
            for (std::size_t t = 0; t < out_len; ++t) {
                double acc = b[o];
                for (std::size_t c = 0; c < ci; ++c) {
                    for (std::size_t j = 0; j < k; ++j) acc += w.at(o, c, j) * x.at(c, t * stride + j);
                }
                CHECK(y.at(o, t) == Approx(acc).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("activation and pooling examples") {
    CHECK(leaky_relu(-2.0) == Approx(-0.02));
    CHECK(leaky_relu(3.0) == 3.0);
    CHECK(max_pool(std::vector<double>{1, 5, 2, 3}, 2) == std::vector<double>{5, 3});
    CHECK(max_pool(std::vector<double>{1, 5, 2}, 2) == std::vector<double>{5});
    const auto p = max_pool(Tensor({2, 4}, {1, 5, 2, 3, 9, 8, 7, 6}), 2);
    CHECK(p.output.values() == std::vector<double>{5, 3, 9, 7});
    CHECK(p.argmax == std::vector<std::size_t>{1, 3, 4, 6});
}

// --- recurrent ------------------------------------------------------------

TEST_CASE("bilstm with zero parameters outputs zeros") {
    const std::size_t r = 3, h = 2;
    std::vector<BiLstmLayerParams> layers(2);
    for (std::size_t l = 0; l < 2; ++l) {
        const std::size_t in = l == 0 ? r : 2 * h;
        for (auto* d : {&layers[l].forward, &layers[l].backward}) {
            *d = {Tensor({4 * h, in}), Tensor({4 * h, h}), Tensor({4 * h})};
        }
    }
    Gen g(1);
    const auto out = bilstm_forward(layers, random_tensor(g, {5, r}, 3.0));
    CHECK(out.shape() == std::vector<std::size_t>{5, 2 * h});
    for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("single step: identical directions give identical halves") {
    Gen g(2);
    const std::size_t r = 3, h = 2;
    BiLstmLayerParams layer;
    layer.forward = random_direction(g, r, h);
    layer.backward = layer.forward;
    const auto x = random_tensor(g, {1, r});
    const auto out = bilstm_forward(std::vector<BiLstmLayerParams>{layer}, x);
    // Hand recurrence from zero state: c = i*g, h = o*tanh(c).
    for (std::size_t u = 0; u < h; ++u) {
        double z[4];
        for (int gate = 0; gate < 4; ++gate) {
            const std::size_t row = gate * h + u;
            z[gate] = layer.forward.bias[row];
            for (std::size_t c = 0; c < r; ++c) z[gate] += layer.forward.w_input.at(row, c) * x.at(0, c);
        }
        const double cell = testsupport::sigmoid(z[0]) * std::tanh(z[2]);
        const double want = testsupport::sigmoid(z[3]) * std::tanh(cell);
        CHECK(out.at(0, u) == Approx(want).epsilon(1e-12));
        CHECK(out.at(0, h + u) == out.at(0, u));
    }
}

TEST_CASE("property: bilstm matches the scalar reference recurrence") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        Gen g(seed);
        const std::size_t r = seed == 0 ? 3 : g.index(1, 5), m = seed == 0 ? 4 : g.index(1, 7);
        const std::size_t h = seed == 0 ? 2 : g.index(1, 4), depth = g.index(1, 3);
        std::vector<BiLstmLayerParams> layers(depth);
        for (std::size_t l = 0; l < depth; ++l) {
            const std::size_t in = l == 0 ? r : 2 * h;
            layers[l].forward = random_direction(g, in, h);
            layers[l].backward = random_direction(g, in, h);
        }
        const auto x = random_tensor(g, {m, r}, 1.0);
        const auto got = bilstm_forward(layers, x);
        const auto want = testsupport::reference_bilstm(rows_of(x), layers);
        for (std::size_t t = 0; t < m; ++t) {
            for (std::size_t j = 0; j < 2 * h; ++j) CHECK(std::abs(got.at(t, j) - want[t][j]) <= 1e-9);
        }
    }
}

TEST_CASE("attention examples") {
    Gen g(3);
    const std::size_t m = 5, w = 4, a = 3;
    AttentionParams p{random_tensor(g, {a, w}), random_tensor(g, {a}), random_tensor(g, {a})};

    SUBCASE("equal rows give uniform weights") {
        Tensor hidden({m, w});
        const auto row = g.normals(w);
        for (std::size_t t = 0; t < m; ++t) {
            for (std::size_t j = 0; j < w; ++j) hidden.at(t, j) = row[j];
        }
        const auto res = attention(hidden, p);
        for (double v : res.weights.data()) CHECK(v == Approx(1.0 / m).epsilon(1e-12));
        for (std::size_t j = 0; j < w; ++j) CHECK(res.context[j] == Approx(row[j]).epsilon(1e-12));
    }
    SUBCASE("a dominant score takes all the weight") {
        // One projection unit reads feature 0; only row 2 has it set, tanh saturates at 1.
        AttentionParams q{Tensor({1, w}), Tensor({1}), Tensor({1}, {50.0})};
        q.proj.at(0, 0) = 100.0;
        Tensor hidden({m, w});
        for (std::size_t t = 0; t < m; ++t) {
            for (std::size_t j = 1; j < w; ++j) hidden.at(t, j) = g.normal();
        }
        hidden.at(2, 0) = 1.0;
        const auto res = attention(hidden, q);
        CHECK(res.weights[2] >= 1.0 - 1e-6);
        for (std::size_t j = 0; j < w; ++j) CHECK(res.context[j] == Approx(hidden.at(2, j)).epsilon(1e-5));
    }
    SUBCASE("one timestep") {
        const auto hidden = random_tensor(g, {1, w});
        const auto res = attention(hidden, p);
        CHECK(res.weights.values() == std::vector<double>{1.0});
        CHECK(res.context.values() == hidden.values());
    }
    SUBCASE("weights always sum to one") {
        for (int rep = 0; rep < 10; ++rep) {
            const auto res = attention(random_tensor(g, {g.index(1, 9), w}, 3.0), p);
            double s = 0.0;
            for (double v : res.weights.data()) {
                CHECK(v >= 0.0);
                s += v;
            }
            CHECK(s == Approx(1.0).epsilon(1e-12));
        }
    }
}

// --- composite model ------------------------------------------------------

TEST_CASE("architecture widths and validation") {
    Architecture a;
    a.freq_bins = 41;
    CHECK(a.conv1_length() == 37);
    CHECK(a.pool1_length() == 18);
    CHECK(a.conv2_length() == 9);
    CHECK(a.pool2_length() == 4);
    CHECK(a.cnn_flat_width() == 64);
    CHECK(a.fusion_width() == 2 * a.hidden + a.cnn_out + a.peak_features);
    a.freq_bins = 5;
    CHECK_THROWS_AS(a.validate(), Error);
    CHECK_NOTHROW(testsupport::tiny_architecture().validate());
}

TEST_CASE("forward examples") {
    Gen g(4);
    const auto arch = testsupport::tiny_architecture();
    const auto s = testsupport::random_sample(g, arch, 4);
    auto zero = CompositeClassifier::zeros(arch);
    CHECK(forward(zero, s) == 0.5);
    zero.fusion.bias[0] = 10.0;
    CHECK(forward(zero, s) == Approx(0.9999546).epsilon(1e-7));
    const auto m = tiny_model(5);
    CHECK(forward(m, s) == forward(m, s));
    CHECK(m.all_finite());

    auto bad = s;
    bad.freq.pop_back();
    CHECK_THROWS_AS(forward(m, bad), Error);
    bad = s;
    bad.sequence = Tensor({4, arch.chunk_stats + 1});
    CHECK_THROWS_AS(forward(m, bad), Error);
}

TEST_CASE("weighted cross-entropy") {
    using data::Label;
    CHECK(weighted_bce(std::vector<double>{0.999999, 1e-6}, std::vector<Label>{1, 0}, 1, 1) <= 2e-6);
    CHECK(weighted_bce(std::vector<double>{0.5, 0.5, 0.5}, std::vector<Label>{1, 0, 1}, 1, 1) ==
          Approx(std::log(2.0)).epsilon(1e-15));
    // Clipping keeps the loss finite at exact 0 and 1.
    CHECK(std::isfinite(weighted_bce(std::vector<double>{0.0, 1.0}, std::vector<Label>{1, 0}, 1, 1)));
    const double mixed = weighted_bce(std::vector<double>{0.8, 0.3}, std::vector<Label>{1, 0}, 3.0, 0.5);
    CHECK(mixed == Approx(-(3.0 * std::log(0.8) + 0.5 * std::log(0.7)) / 2.0).epsilon(1e-15));
    CHECK_THROWS_AS(weighted_bce(std::vector<double>{0.5}, std::vector<Label>{1}, 0.0, 1.0), Error);
    CHECK_THROWS_AS(weighted_bce(std::vector<double>{0.5}, std::vector<Label>{1, 0}, 1.0, 1.0), Error);

    std::vector<Label> table(8712, 0);
    std::fill(table.begin(), table.begin() + 525, 1);
    const auto w = inverse_ratio_weights(table);
    CHECK(w.positive == Approx(16.5943).epsilon(1e-5));
    CHECK(w.negative == Approx(1.06413).epsilon(1e-5));
    CHECK_THROWS_AS(inverse_ratio_weights(std::vector<Label>{1, 1}), Error);
}

TEST_CASE("backward examples") {
    Gen g(6);
    const auto arch = testsupport::tiny_architecture();
    const auto s = testsupport::random_sample(g, arch, 4);
    const auto zero = CompositeClassifier::zeros(arch);
    for (data::Label y : {data::Label{0}, data::Label{1}}) {
        const ClassWeights w{2.5, 0.75};
        const auto gr = backward(zero, std::vector<Sample>{s}, std::vector<data::Label>{y}, w);
        const double weight = y ? w.positive : w.negative;
        CHECK(gr.probabilities[0] == 0.5);
        CHECK(gr.grad.fusion.bias[0] == Approx((0.5 - y) * weight).epsilon(1e-15));
    }

    const auto m = tiny_model(7);
    const auto one = backward(m, std::vector<Sample>{s}, std::vector<data::Label>{1}, {});
    const auto two = backward(m, std::vector<Sample>{s, s}, std::vector<data::Label>{1, 1}, {});
    CHECK(two.loss == Approx(one.loss).epsilon(1e-15));
    const auto a = one.grad.parameters();
    const auto b = two.grad.parameters();
    for (std::size_t t = 0; t < a.size(); ++t) {
        CHECK(a[t].tensor->shape() == b[t].tensor->shape());
        for (std::size_t i = 0; i < a[t].tensor->size(); ++i) {
            CHECK((*b[t].tensor)[i] == Approx((*a[t].tensor)[i]).epsilon(1e-12).scale(1e-15));
        }
    }
}

TEST_CASE("property: analytic gradients match central differences") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        Gen g(100 + seed);
        const auto arch = testsupport::tiny_architecture();
        auto m = tiny_model(seed);
        testsupport::scale_parameters(m, 2.0);
        std::vector<Sample> batch;
        for (int i = 0; i < 3; ++i) batch.push_back(testsupport::random_sample(g, arch, 4));
        const auto check = testsupport::gradient_check(m, batch, {1, 0, 1}, {1.7, 0.6});
        INFO("worst " << check.worst);
        CHECK(check.max_rel_err <= 1e-4);
    }
}

TEST_CASE("gradients of the default-width model at a larger input") {
    Gen g(8);
    Architecture arch;
    arch.chunk_stats = 4;
    arch.freq_bins = 24;
    arch.hidden = 3;
    arch.attention_dim = 4;
    arch.conv1_channels = 2;
    arch.conv2_channels = 2;
    arch.conv2_kernel = 3;
    arch.cnn_out = 3;
    const auto m = init_model(arch, 9);
    std::vector<Sample> batch{testsupport::random_sample(g, arch, 6), testsupport::random_sample(g, arch, 6)};
    const auto check = testsupport::gradient_check(m, batch, {0, 1}, {1.0, 1.0});
    INFO("worst " << check.worst);
    CHECK(check.max_rel_err <= 1e-4);
}

TEST_CASE("adam examples") {
    Tensor theta({1}, {0.3});
    Tensor grad({1}, {0.0});
    std::vector<Tensor*> params{&theta};
    std::vector<const Tensor*> grads{&grad};
    AdamState st;
    adam_step(params, grads, st, 0.1);
    CHECK(theta[0] == 0.3);

    Tensor phi({1}, {0.0});
    Tensor one({1}, {1.0});
    std::vector<Tensor*> p2{&phi};
    std::vector<const Tensor*> g2{&one};
    AdamState st2;
    adam_step(p2, g2, st2, 1e-3);
    CHECK(phi[0] == Approx(-1e-3).epsilon(1e-6));

    Tensor x({1}, {1.0});
    Tensor gx({1});
    std::vector<Tensor*> p3{&x};
    std::vector<const Tensor*> g3{&gx};
    AdamState st3;
    for (int i = 0; i < 500; ++i) {
        gx[0] = 2.0 * x[0];
        adam_step(p3, g3, st3, 0.01);
    }
    CHECK(std::abs(x[0]) < 1e-2);
    CHECK(st3.step == 500);

    Tensor wrong({2});
    std::vector<const Tensor*> g4{&wrong};
    CHECK_THROWS_AS(adam_step(p3, g4, st3, 0.01), Error);
}

TEST_CASE("gradient clipping") {
    auto g = CompositeClassifier::zeros(testsupport::tiny_architecture());
    g.fusion.bias[0] = 3.0;
    g.fusion.weight[0] = 4.0;
    CHECK(clip_gradient(g, 1.0) == Approx(5.0));
    CHECK(g.fusion.bias[0] == Approx(0.6));
    CHECK(clip_gradient(g, 10.0) == Approx(1.0));
    CHECK(g.fusion.weight[0] == Approx(0.8));
}

// --- training -------------------------------------------------------------

namespace {

// Linearly separable toy problem: the sign of the first peak feature decides the class.
std::pair<std::vector<Sample>, std::vector<data::Label>> toy_problem(std::uint64_t seed, std::size_t n) {
    Gen g(seed);
    const auto arch = testsupport::tiny_architecture();
    std::vector<Sample> xs;
    std::vector<data::Label> ys;
    for (std::size_t i = 0; i < n; ++i) {
        auto s = testsupport::random_sample(g, arch, 4);
        const data::Label y = i % 3 == 0 ? 1 : 0;
        s.peaks[0] = y ? g.uniform(1.0, 2.0) : -g.uniform(1.0, 2.0);
        xs.push_back(std::move(s));
        ys.push_back(y);
    }
    return {xs, ys};
}

}  // namespace

TEST_CASE("training examples") {
    const auto [xs, ys] = toy_problem(1, 24);
    const auto arch = testsupport::tiny_architecture();
    TrainConfig cfg;
    cfg.lr = 0.02;
    cfg.batch_size = 8;

    SUBCASE("zero epochs returns the initialization") {
        cfg.epochs = 0;
        const auto r = train(arch, xs, ys, cfg);
        CHECK(r.model == init_model(arch, cfg.seed));
        CHECK(r.loss_history.empty());
    }
    SUBCASE("separable data is fitted") {
        cfg.epochs = 200;
        const auto r = train(arch, xs, ys, cfg);
        std::vector<double> p0 = predict_all(init_model(arch, cfg.seed), xs);
        const double initial = weighted_bce(p0, ys, 1.0, 1.0);
        const double final_loss = weighted_bce(predict_all(r.model, xs), ys, 1.0, 1.0);
        CHECK(final_loss < 0.1 * initial);
        CHECK(r.loss_history.size() == 200);
    }
    SUBCASE("same seed, same history") {
        cfg.epochs = 5;
        CHECK(train(arch, xs, ys, cfg).loss_history == train(arch, xs, ys, cfg).loss_history);
    }
    SUBCASE("invalid configurations") {
        cfg.lr = 0.0;
        CHECK_THROWS_AS(train(arch, xs, ys, cfg), Error);
        cfg.lr = 0.01;
        cfg.batch_size = 0;
        CHECK_THROWS_AS(train(arch, xs, ys, cfg), Error);
        cfg.batch_size = 4;
        cfg.w_p = -1.0;
        CHECK_THROWS_AS(train(arch, xs, ys, cfg), Error);
    }
}

TEST_CASE("fine-tuning per cluster") {
    const auto [xs, ys] = toy_problem(2, 30);
    const auto arch = testsupport::tiny_architecture();
    const auto base = init_model(arch, 3);
    std::vector<std::size_t> assign(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) assign[i] = i % 3 == 0 ? 0 : (i < 15 ? 1 : 2);
    // Cluster 0 holds only positives and must fall back to the base model.
    TrainConfig cfg;
    cfg.epochs = 0;
    auto tuned = fine_tune_per_cluster(base, assign, 3, xs, ys, cfg);
    CHECK(tuned.empty());

    for (std::size_t i = 0; i < xs.size(); ++i) assign[i] = i % 2;
    tuned = fine_tune_per_cluster(base, assign, 3, xs, ys, cfg);
    REQUIRE(tuned.size() == 2);
    for (const auto& [id, m] : tuned) {
        CHECK(id < 3);
        CHECK(m == base);
    }
    cfg.epochs = 3;
    tuned = fine_tune_per_cluster(base, assign, 3, xs, ys, cfg);
    CHECK_FALSE(tuned.at(0) == base);
}

TEST_CASE("decoy cluster negatives lose probability after fine-tuning") {
    // Cluster 1 contains PD-like peaks that are labeled normal; the pooled model learns
    // "large first peak feature means positive" from cluster 0.
    Gen g(11);
    const auto arch = testsupport::tiny_architecture();
    std::vector<Sample> xs;
    std::vector<data::Label> ys;
    std::vector<std::size_t> cl;
    for (std::size_t i = 0; i < 60; ++i) {
        auto s = testsupport::random_sample(g, arch, 4);
        const bool decoy = i % 4 == 3;
        data::Label y = !decoy && i % 4 == 0 ? 1 : 0;
        if (decoy && i % 20 == 3) y = 1;  // a few genuine positives inside the decoy cluster
        s.peaks[0] = (y || decoy) ? g.uniform(1.0, 2.0) : -g.uniform(1.0, 2.0);
        s.freq[0] = decoy ? 3.0 : -3.0;
        xs.push_back(s);
        ys.push_back(y);
        cl.push_back(decoy ? 1 : 0);
    }
    TrainConfig cfg;
    cfg.lr = 0.01;
    cfg.epochs = 40;
    cfg.batch_size = 8;
    auto base = train(arch, xs, ys, cfg).model;
    auto ft = cfg;
    ft.epochs = 40;
    const auto tuned = fine_tune_per_cluster(base, cl, 2, xs, ys, ft);
    REQUIRE(tuned.count(1));
    double before = 0.0, after = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (cl[i] != 1 || ys[i]) continue;
        before += forward(base, xs[i]);
        after += forward(tuned.at(1), xs[i]);
        ++n;
    }
    CHECK(after / n < before / n);
}

// --- scaling and persistence ----------------------------------------------

namespace {

SignalFeatures random_features(Gen& g, std::size_t r, std::size_t m, std::size_t bins) {
    SignalFeatures f;
    f.chunks.r = r;
    f.chunks.m = m;
    f.chunks.values = g.normals(r * m, 2.0);
    for (std::size_t i = 0; i < r; ++i) f.chunks.stat_names.push_back("s" + std::to_string(i));
    for (std::size_t i = 0; i < bins; ++i) f.freq.values.push_back(std::abs(g.normal(10.0)));
    const auto p = g.normals(9);
    f.peaks = {p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8]};
    return f;
}

}  // namespace

TEST_CASE("feature scaler") {
    Gen g(12);
    std::vector<SignalFeatures> fs;
    for (int i = 0; i < 30; ++i) fs.push_back(random_features(g, 3, 4, 5));
    for (auto& f : fs) f.peaks.count = 2.0;  // constant column
    const auto sc = FeatureScaler::fit(fs);
    const auto samples = sc.transform(fs);
    REQUIRE(samples.size() == fs.size());
    CHECK(samples[0].sequence.shape() == std::vector<std::size_t>{4, 3});
    // Standardized chunk statistic 0 has zero mean over all chunks of all signals.
    double sum = 0.0;
    for (const auto& s : samples) {
        for (std::size_t t = 0; t < 4; ++t) sum += s.sequence.at(t, 0);
        CHECK(s.peaks[0] == 0.0);
        for (double v : s.freq) CHECK(std::abs(v) <= sc.clamp);
    }
    CHECK(sum == Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(FeatureScaler::fit(std::vector<SignalFeatures>{}), Error);
    CHECK_THROWS_AS(sc.transform(random_features(g, 3, 4, 6)), Error);

    const auto arch = architecture_for(fs[0], testsupport::tiny_architecture());
    CHECK(arch.chunk_stats == 3);
    CHECK(arch.freq_bins == 5);
}

TEST_CASE("checkpoint round trip") {
    TempDir dir;
    auto m = tiny_model(13);
    round_to_float(m);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.w_p = 2.0;
    save_checkpoint(m, dir / "ck", {42, cfg, {0.5, 0.25}});
    CheckpointMeta meta;
    const auto back = load_checkpoint(dir / "ck", &meta);
    CHECK(back == m);
    CHECK(meta.seed == 42);
    REQUIRE(meta.config.has_value());
    CHECK(meta.config->epochs == 3);
    CHECK(meta.config->w_p == 2.0);
    CHECK(meta.loss_history == std::vector<double>{0.5, 0.25});

    std::filesystem::resize_file(dir / "ck" / "fusion.f32", 8);
    CHECK_THROWS_AS(load_checkpoint(dir / "ck"), Error);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing"), Error);
}

TEST_CASE("bundle routing and persistence") {
    TempDir dir;
    Gen g(14);
    ModelBundle b;
    std::vector<SignalFeatures> fs;
    for (int i = 0; i < 20; ++i) fs.push_back(random_features(g, 3, 4, 4));
    for (int i = 0; i < 10; ++i) fs[i].freq.values[0] += 100.0;  // two routing groups
    b.scaler = FeatureScaler::fit(fs);
    b.base = tiny_model(15);
    round_to_float(b.base);
    cluster::FeatureMatrix routing;
    for (const auto& f : fs) routing.push_back(f.freq.values);
    b.cluster_model = cluster::kmeans_fit(routing, {.k = 2, .seed = 1});
    b.selection.T = 8;
    b.selection.n_bins_total = 5;
    b.selection.mi_scores.assign(5, 0.0);
    b.selection.selected_bins = {0, 1, 2, 3};

    // Without per-cluster models every prediction is the base forward.
    for (const auto& f : fs) CHECK(predict(b, f) == forward(b.base, b.scaler.transform(f)));

    const std::size_t high = b.route(fs[0]);
    const std::size_t low = b.route(fs[15]);
    REQUIRE(high != low);
    auto other = tiny_model(16);
    round_to_float(other);
    b.per_cluster.emplace(high, other);
    CHECK(predict(b, fs[0]) == forward(other, b.scaler.transform(fs[0])));
    CHECK(predict(b, fs[15]) == forward(b.base, b.scaler.transform(fs[15])));
    // Same signal with only the routing feature moved: the output changes only through the model choice.
    auto moved = fs[15];
    moved.freq.values[0] = fs[0].freq.values[0];
    if (b.route(moved) == high) CHECK(predict(b, moved) == forward(other, b.scaler.transform(moved)));

    save_bundle(b, dir / "bundle");
    const auto back = load_bundle(dir / "bundle");
    CHECK(back.base == b.base);
    CHECK(back.per_cluster.size() == 1);
    CHECK(back.scaler == b.scaler);
    CHECK(predict(back, fs) == predict(b, fs));
    CHECK(predict_pooled(back, fs) == predict_pooled(b, fs));
}
