#include "pdetect/nn/model.hpp"

#include "pdetect/error.hpp"

#include <cmath>
#include <random>

namespace pdetect::nn {

// --- architecture ---------------------------------------------------------

std::size_t Architecture::conv1_length() const {
    return freq_bins >= conv1_kernel ? freq_bins - conv1_kernel + 1 : 0;
}
std::size_t Architecture::pool1_length() const { return pool_width ? conv1_length() / pool_width : 0; }
std::size_t Architecture::conv2_length() const {
    return pool1_length() >= conv2_kernel ? pool1_length() - conv2_kernel + 1 : 0;
}
std::size_t Architecture::pool2_length() const { return pool_width ? conv2_length() / pool_width : 0; }
std::size_t Architecture::cnn_flat_width() const { return conv2_channels * pool2_length(); }

void Architecture::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::ShapeMismatch, msg); };
    if (chunk_stats == 0 || hidden == 0 || lstm_layers == 0 || attention_dim == 0) {
        fail("recurrent branch dimensions must be positive");
    }
    if (conv1_channels == 0 || conv2_channels == 0 || conv1_kernel == 0 || conv2_kernel == 0 || pool_width == 0 ||
        cnn_out == 0) {
        fail("convolutional branch dimensions must be positive");
    }
    if (pool2_length() == 0) {
        fail("frequency input of " + std::to_string(freq_bins) + " bins is too short for kernels " +
             std::to_string(conv1_kernel) + " and " + std::to_string(conv2_kernel));
    }
}

// --- parameters -----------------------------------------------------------

namespace {

template <typename Model, typename Out>
void collect(Model& m, Out& out) {
    auto add = [&](std::string name, auto& t) { out.push_back({std::move(name), &t}); };
    add("conv1.weight", m.conv1.weight);
    add("conv1.bias", m.conv1.bias);
    add("conv2.weight", m.conv2.weight);
    add("conv2.bias", m.conv2.bias);
    add("cnn_dense.weight", m.cnn_dense.weight);
    add("cnn_dense.bias", m.cnn_dense.bias);
    for (std::size_t l = 0; l < m.rnn.size(); ++l) {
        const std::string p = "rnn." + std::to_string(l) + ".";
        add(p + "fwd.w_input", m.rnn[l].forward.w_input);
        add(p + "fwd.w_hidden", m.rnn[l].forward.w_hidden);
        add(p + "fwd.bias", m.rnn[l].forward.bias);
        add(p + "bwd.w_input", m.rnn[l].backward.w_input);
        add(p + "bwd.w_hidden", m.rnn[l].backward.w_hidden);
        add(p + "bwd.bias", m.rnn[l].backward.bias);
    }
    add("attn.proj", m.attn.proj);
    add("attn.bias", m.attn.bias);
    add("attn.score", m.attn.score);
    add("fusion.weight", m.fusion.weight);
    add("fusion.bias", m.fusion.bias);
}

LstmDirectionParams lstm_direction(std::size_t in, std::size_t h) {
    return {Tensor({4 * h, in}), Tensor({4 * h, h}), Tensor({4 * h})};
}

}  // namespace

std::vector<CompositeClassifier::NamedTensor> CompositeClassifier::parameters() {
    std::vector<NamedTensor> out;
    collect(*this, out);
    return out;
}

std::vector<CompositeClassifier::ConstNamedTensor> CompositeClassifier::parameters() const {
    std::vector<ConstNamedTensor> out;
    collect(*this, out);
    return out;
}

std::size_t CompositeClassifier::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor->size();
    return n;
}

bool CompositeClassifier::all_finite() const {
    for (const auto& p : parameters()) {
        if (!p.tensor->all_finite()) return false;
    }
    return true;
}

CompositeClassifier CompositeClassifier::zeros(const Architecture& arch) {
    arch.validate();
    CompositeClassifier m;
    m.arch = arch;
    m.conv1 = {Tensor({arch.conv1_channels, 1, arch.conv1_kernel}), Tensor({arch.conv1_channels})};
    m.conv2 = {Tensor({arch.conv2_channels, arch.conv1_channels, arch.conv2_kernel}), Tensor({arch.conv2_channels})};
    m.cnn_dense = {Tensor({arch.cnn_out, arch.cnn_flat_width()}), Tensor({arch.cnn_out})};
    for (std::size_t l = 0; l < arch.lstm_layers; ++l) {
        const std::size_t in = l == 0 ? arch.chunk_stats : 2 * arch.hidden;
        m.rnn.push_back({lstm_direction(in, arch.hidden), lstm_direction(in, arch.hidden)});
    }
    m.attn = {Tensor({arch.attention_dim, 2 * arch.hidden}), Tensor({arch.attention_dim}),
              Tensor({arch.attention_dim})};
    m.fusion = {Tensor({arch.fusion_width()}), Tensor({1})};
    return m;
}

CompositeClassifier init_model(const Architecture& arch, std::uint64_t seed) {
    auto m = CompositeClassifier::zeros(arch);
    std::mt19937_64 rng(seed);
    auto fill = [&](Tensor& t, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : t.data()) v = dist(rng);
    };
    const std::size_t c1_fan = arch.conv1_kernel;
    const std::size_t c2_fan = arch.conv1_channels * arch.conv2_kernel;
    fill(m.conv1.weight, c1_fan);
    fill(m.conv1.bias, c1_fan);
    fill(m.conv2.weight, c2_fan);
    fill(m.conv2.bias, c2_fan);
    fill(m.cnn_dense.weight, arch.cnn_flat_width());
    fill(m.cnn_dense.bias, arch.cnn_flat_width());
    for (auto& layer : m.rnn) {
        for (auto* dir : {&layer.forward, &layer.backward}) {
            fill(dir->w_input, dir->w_input.dim(1));
            fill(dir->w_hidden, arch.hidden);
            fill(dir->bias, arch.hidden);
        }
    }
    fill(m.attn.proj, 2 * arch.hidden);
    fill(m.attn.bias, 2 * arch.hidden);
    fill(m.attn.score, arch.attention_dim);
    fill(m.fusion.weight, arch.fusion_width());
    fill(m.fusion.bias, arch.fusion_width());
    return m;
}

// --- forward / backward ---------------------------------------------------

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct Trace {
    Tensor freq_in;
    Tensor conv1_pre;
    PoolResult pool1;
    Tensor conv2_pre;
    PoolResult pool2;
    Tensor conv2_act;
    Tensor conv1_act;
    Vec dense_pre;
    BiLstmTrace lstm;
    Tensor lstm_out;
    AttentionResult att;
    Vec fused;
    double probability = 0.5;
};

void check_sample(const Architecture& a, const Sample& s) {
    if (s.sequence.rank() != 2 || s.sequence.dim(0) == 0 || s.sequence.dim(1) != a.chunk_stats) {
        throw Error(ErrorKind::ShapeMismatch, "chunk sequence must be [m >= 1, " + std::to_string(a.chunk_stats) + "]");
    }
    if (s.freq.size() != a.freq_bins) {
        throw Error(ErrorKind::ShapeMismatch, "frequency vector has " + std::to_string(s.freq.size()) +
                                                  " entries, model expects " + std::to_string(a.freq_bins));
    }
    if (s.peaks.size() != a.peak_features) {
        throw Error(ErrorKind::ShapeMismatch, "peak vector has " + std::to_string(s.peaks.size()) +
                                                  " entries, model expects " + std::to_string(a.peak_features));
    }
}

void run_forward(const CompositeClassifier& m, const Sample& s, Trace& tr) {
    const auto& a = m.arch;
    check_sample(a, s);
    const double slope = a.leaky_slope;

    tr.freq_in = Tensor({1, a.freq_bins}, s.freq);
    tr.conv1_pre = conv1d(tr.freq_in, m.conv1.weight, m.conv1.bias);
    tr.conv1_act = leaky_relu(tr.conv1_pre, slope);
    tr.pool1 = max_pool(tr.conv1_act, a.pool_width);
    tr.conv2_pre = conv1d(tr.pool1.output, m.conv2.weight, m.conv2.bias);
    tr.conv2_act = leaky_relu(tr.conv2_pre, slope);
    tr.pool2 = max_pool(tr.conv2_act, a.pool_width);
    tr.dense_pre = dense_forward(m.cnn_dense, tr.pool2.output.vec());

    tr.lstm_out = bilstm_forward(m.rnn, s.sequence, &tr.lstm);
    tr.att = attention(tr.lstm_out, m.attn);

    tr.fused.resize(static_cast<Eigen::Index>(a.fusion_width()));
    Eigen::Index o = 0;
    for (double v : tr.att.context.data()) tr.fused[o++] = v;
    for (Eigen::Index i = 0; i < tr.dense_pre.size(); ++i) tr.fused[o++] = leaky_relu(tr.dense_pre[i], slope);
    for (double v : s.peaks) tr.fused[o++] = v;

    const double logit = m.fusion.weight.vec().dot(tr.fused) + m.fusion.bias[0];
    tr.probability = sigmoid(logit);
}

void run_backward(const CompositeClassifier& m, const Trace& tr, double d_logit, CompositeClassifier& g) {
    const auto& a = m.arch;
    const double slope = a.leaky_slope;

    g.fusion.weight.vec() += d_logit * tr.fused;
    g.fusion.bias[0] += d_logit;
    const Vec d_fused = d_logit * m.fusion.weight.vec();

    const auto ctx_w = static_cast<Eigen::Index>(a.context_width());
    const auto cnn_w = static_cast<Eigen::Index>(a.cnn_out);

    // Recurrent branch.
    const Vec d_ctx = d_fused.head(ctx_w);
    const Tensor d_hidden = attention_backward(tr.lstm_out, m.attn, tr.att, {d_ctx.data(), static_cast<std::size_t>(d_ctx.size())}, g.attn);
    bilstm_backward(m.rnn, tr.lstm, d_hidden, g.rnn);

    // Convolutional branch.
    Vec d_dense = d_fused.segment(ctx_w, cnn_w);
    for (Eigen::Index i = 0; i < d_dense.size(); ++i) {
        if (!(tr.dense_pre[i] > 0.0)) d_dense[i] *= slope;
    }
    g.cnn_dense.weight.mat().noalias() += d_dense * tr.pool2.output.vec().transpose();
    g.cnn_dense.bias.vec() += d_dense;
    Tensor d_pool2(tr.pool2.output.shape());
    d_pool2.vec().noalias() = m.cnn_dense.weight.mat().transpose() * d_dense;

    const Tensor d_conv2_act = max_pool_backward(tr.conv2_act, tr.pool2, d_pool2);
    const Tensor d_conv2_pre = leaky_relu_backward(tr.conv2_pre, d_conv2_act, slope);
    const Tensor d_pool1 = conv1d_backward(tr.pool1.output, m.conv2, d_conv2_pre, g.conv2, true);
    const Tensor d_conv1_act = max_pool_backward(tr.conv1_act, tr.pool1, d_pool1);
    const Tensor d_conv1_pre = leaky_relu_backward(tr.conv1_pre, d_conv1_act, slope);
    conv1d_backward(tr.freq_in, m.conv1, d_conv1_pre, g.conv1, false);
}

}  // namespace

double forward(const CompositeClassifier& model, const Sample& sample, std::vector<double>* attention_weights) {
    Trace tr;
    run_forward(model, sample, tr);
    if (attention_weights) attention_weights->assign(tr.att.weights.data().begin(), tr.att.weights.data().end());
    return tr.probability;
}

double forward(const CompositeClassifier& model, const Sample& sample) { return forward(model, sample, nullptr); }

ClassWeights inverse_ratio_weights(std::span<const data::Label> labels) {
    std::size_t pos = 0;
    for (auto y : labels) pos += y ? 1 : 0;
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw Error(ErrorKind::DegenerateLabels, "both classes must be present");
    const double n = static_cast<double>(labels.size());
    return {n / static_cast<double>(pos), n / static_cast<double>(neg)};
}

double weighted_bce(std::span<const double> p, std::span<const data::Label> y, double w_p, double w_n) {
    if (!(w_p > 0.0) || !(w_n > 0.0)) throw Error(ErrorKind::WeightNonPositive, "class weights must be positive");
    if (p.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "probabilities and labels differ in length");
    if (p.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::clamp(p[i], kProbabilityClip, 1.0 - kProbabilityClip);
        total += y[i] ? -w_p * std::log(q) : -w_n * std::log(1.0 - q);
    }
    return total / static_cast<double>(p.size());
}

Gradients backward(const CompositeClassifier& model, std::span<const Sample> batch, std::span<const data::Label> labels,
                   ClassWeights weights) {
    if (batch.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "batch and labels differ in length");
    if (!(weights.positive > 0.0) || !(weights.negative > 0.0)) {
        throw Error(ErrorKind::WeightNonPositive, "class weights must be positive");
    }
    Gradients out;
    out.grad = CompositeClassifier::zeros(model.arch);
    out.probabilities.reserve(batch.size());
    const double inv_b = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
    Trace tr;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        run_forward(model, batch[i], tr);
        const double p = tr.probability;
        out.probabilities.push_back(p);
        // d/dlogit of the per-sample loss through the sigmoid: w_y (p - y).
        const double d_logit = (labels[i] ? weights.positive * (p - 1.0) : weights.negative * p) * inv_b;
        run_backward(model, tr, d_logit, out.grad);
    }
    out.loss = weighted_bce(out.probabilities, labels, weights.positive, weights.negative);
    return out;
}

// --- optimisation ---------------------------------------------------------

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state, double lr) {
    if (params.size() != grads.size()) throw Error(ErrorKind::ShapeMismatch, "parameter and gradient counts differ");
    if (state.first.empty()) {
        for (const auto* p : params) {
            state.first.emplace_back(p->shape());
            state.second.emplace_back(p->shape());
        }
    }
    if (state.first.size() != params.size()) throw Error(ErrorKind::ShapeMismatch, "optimizer state does not match");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(state.first[i])) {
            throw Error(ErrorKind::ShapeMismatch, "parameter " + std::to_string(i) + " shape mismatch");
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i]->data();
        const auto g = grads[i]->data();
        auto m1 = state.first[i].data();
        auto m2 = state.second[i].data();
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m1[j] = state.beta1 * m1[j] + (1.0 - state.beta1) * g[j];
            m2[j] = state.beta2 * m2[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double m_hat = m1[j] / bc1;
            const double v_hat = m2[j] / bc2;
            theta[j] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

void adam_step(CompositeClassifier& model, const CompositeClassifier& grad, AdamState& state, double lr) {
    std::vector<Tensor*> p;
    std::vector<const Tensor*> g;
    for (auto& t : model.parameters()) p.push_back(t.tensor);
    for (const auto& t : grad.parameters()) g.push_back(t.tensor);
    adam_step(p, g, state, lr);
}

double clip_gradient(CompositeClassifier& grad, double max_norm) {
    double sq = 0.0;
    for (const auto& p : std::as_const(grad).parameters()) sq += p.tensor->vec().squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (auto& p : grad.parameters()) p.tensor->vec() *= scale;
    }
    return norm;
}

}  // namespace pdetect::nn
