#include "pdetect/nn/recurrent.hpp"

#include "pdetect/error.hpp"

#include <cmath>

namespace pdetect::nn {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void run_direction(const LstmDirectionParams& p, const Mat& x, bool reverse, LstmDirectionTrace& tr) {
    const auto m = x.rows();
    const auto h = static_cast<Eigen::Index>(p.w_hidden.dim(1));
    if (x.cols() != static_cast<Eigen::Index>(p.w_input.dim(1))) {
        throw Error(ErrorKind::ShapeMismatch, "LSTM input width " + std::to_string(x.cols()) + " but weights expect " +
                                                  std::to_string(p.w_input.dim(1)));
    }
    Mat zx = x * p.w_input.mat().transpose();
    zx.rowwise() += p.bias.vec().transpose();

    tr.gates.resize(m, 4 * h);
    tr.cell.resize(m, h);
    tr.cell_tanh.resize(m, h);
    tr.hidden.resize(m, h);
    const auto u = p.w_hidden.mat();
    Vec h_prev = Vec::Zero(h), c_prev = Vec::Zero(h);
    Vec z(4 * h);
    for (Eigen::Index s = 0; s < m; ++s) {
        const Eigen::Index t = reverse ? m - 1 - s : s;
        z.noalias() = zx.row(t).transpose();
        z.noalias() += u * h_prev;
        for (Eigen::Index j = 0; j < h; ++j) {
            const double gi = sigmoid(z[j]);
            const double gf = sigmoid(z[h + j]);
            const double gg = std::tanh(z[2 * h + j]);
            const double go = sigmoid(z[3 * h + j]);
            const double c = gf * c_prev[j] + gi * gg;
            const double tc = std::tanh(c);
            tr.gates(t, j) = gi;
            tr.gates(t, h + j) = gf;
            tr.gates(t, 2 * h + j) = gg;
            tr.gates(t, 3 * h + j) = go;
            tr.cell(t, j) = c;
            tr.cell_tanh(t, j) = tc;
            tr.hidden(t, j) = go * tc;
            c_prev[j] = c;
            h_prev[j] = go * tc;
        }
    }
}

Mat backprop_direction(const LstmDirectionParams& p, const LstmDirectionTrace& tr, const Mat& x,
                       const Eigen::Ref<const Mat>& d_hidden, bool reverse, LstmDirectionParams& g) {
    const auto m = x.rows();
    const auto h = static_cast<Eigen::Index>(p.w_hidden.dim(1));
    Mat dz(m, 4 * h);
    Vec dh_next = Vec::Zero(h), dc_next = Vec::Zero(h);
    const auto u = p.w_hidden.mat();
    auto du = g.w_hidden.mat();
    for (Eigen::Index s = m - 1; s >= 0; --s) {
        const Eigen::Index t = reverse ? m - 1 - s : s;
        const bool has_prev = s > 0;
        const Eigen::Index tp = reverse ? t + 1 : t - 1;
        for (Eigen::Index j = 0; j < h; ++j) {
            const double gi = tr.gates(t, j);
            const double gf = tr.gates(t, h + j);
            const double gg = tr.gates(t, 2 * h + j);
            const double go = tr.gates(t, 3 * h + j);
            const double tc = tr.cell_tanh(t, j);
            const double dh = d_hidden(t, j) + dh_next[j];
            const double dc = dh * go * (1.0 - tc * tc) + dc_next[j];
            const double c_prev = has_prev ? tr.cell(tp, j) : 0.0;
            dz(t, j) = dc * gg * gi * (1.0 - gi);
            dz(t, h + j) = dc * c_prev * gf * (1.0 - gf);
            dz(t, 2 * h + j) = dc * gi * (1.0 - gg * gg);
            dz(t, 3 * h + j) = dh * tc * go * (1.0 - go);
            dc_next[j] = dc * gf;
        }
        if (has_prev) du.noalias() += dz.row(t).transpose() * tr.hidden.row(tp);
        dh_next.noalias() = u.transpose() * dz.row(t).transpose();
    }
    g.w_input.mat().noalias() += dz.transpose() * x;
    g.bias.vec() += dz.colwise().sum().transpose();
    return dz * p.w_input.mat();
}

}  // namespace

Tensor bilstm_forward(std::span<const BiLstmLayerParams> layers, const Tensor& sequence, BiLstmTrace* trace) {
    if (sequence.rank() != 2) throw Error(ErrorKind::ShapeMismatch, "LSTM input must be [m, r]");
    if (layers.empty()) throw Error(ErrorKind::ShapeMismatch, "LSTM needs at least one layer");
    BiLstmTrace local;
    BiLstmTrace& tr = trace ? *trace : local;
    tr = BiLstmTrace{};
    Mat input = sequence.mat();
    for (const auto& layer : layers) {
        tr.layer_inputs.push_back(input);
        tr.forward.emplace_back();
        tr.backward.emplace_back();
        run_direction(layer.forward, input, false, tr.forward.back());
        run_direction(layer.backward, input, true, tr.backward.back());
        Mat out(input.rows(), tr.forward.back().hidden.cols() + tr.backward.back().hidden.cols());
        out << tr.forward.back().hidden, tr.backward.back().hidden;
        input = std::move(out);
    }
    Tensor result({static_cast<std::size_t>(input.rows()), static_cast<std::size_t>(input.cols())});
    result.mat() = input;
    return result;
}

Tensor bilstm_backward(std::span<const BiLstmLayerParams> layers, const BiLstmTrace& trace, const Tensor& d_output,
                       std::span<BiLstmLayerParams> grads) {
    Mat d_out = d_output.mat();
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& x = trace.layer_inputs[li];
        const auto h = trace.forward[li].hidden.cols();
        Mat dx = backprop_direction(layers[li].forward, trace.forward[li], x, d_out.leftCols(h), false,
                                    grads[li].forward);
        dx += backprop_direction(layers[li].backward, trace.backward[li], x, d_out.rightCols(h), true,
                                 grads[li].backward);
        d_out = std::move(dx);
    }
    Tensor result({static_cast<std::size_t>(d_out.rows()), static_cast<std::size_t>(d_out.cols())});
    result.mat() = d_out;
    return result;
}

AttentionResult attention(const Tensor& hidden, const AttentionParams& params) {
    if (hidden.rank() != 2 || hidden.dim(0) == 0) throw Error(ErrorKind::ShapeMismatch, "attention needs [m >= 1, 2h]");
    if (params.proj.dim(1) != hidden.dim(1)) throw Error(ErrorKind::ShapeMismatch, "attention width mismatch");
    const auto hmat = hidden.mat();
    AttentionResult r;
    r.activation = hmat * params.proj.mat().transpose();
    r.activation.rowwise() += params.bias.vec().transpose();
    r.activation = r.activation.array().tanh();
    Vec scores = r.activation * params.score.vec();
    const double top = scores.maxCoeff();
    Vec w = (scores.array() - top).exp();
    w /= w.sum();
    r.weights = Tensor({hidden.dim(0)});
    r.weights.vec() = w;
    r.context = Tensor({hidden.dim(1)});
    r.context.vec().noalias() = hmat.transpose() * w;
    return r;
}

Tensor attention_backward(const Tensor& hidden, const AttentionParams& params, const AttentionResult& fwd,
                          std::span<const double> d_context, AttentionParams& grads) {
    const auto hmat = hidden.mat();
    const ConstVecMap dctx(d_context.data(), static_cast<Eigen::Index>(d_context.size()));
    const auto w = fwd.weights.vec();
    Vec dw = hmat * dctx;
    Vec ds = w.array() * (dw.array() - w.dot(dw));
    grads.score.vec().noalias() += fwd.activation.transpose() * ds;
    Mat dpre = (ds * params.score.vec().transpose()).array() * (1.0 - fwd.activation.array().square());
    grads.proj.mat().noalias() += dpre.transpose() * hmat;
    grads.bias.vec() += dpre.colwise().sum().transpose();
    Tensor d_hidden(hidden.shape());
    auto dh = d_hidden.mat();
    dh.noalias() = w * dctx.transpose();
    dh.noalias() += dpre * params.proj.mat();
    return d_hidden;
}

}  // namespace pdetect::nn
