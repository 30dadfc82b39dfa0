#include "pdetect/nn/layers.hpp"

#include "pdetect/error.hpp"

namespace pdetect::nn {

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride) {
    if (input.rank() != 2 || weight.rank() != 3 || bias.rank() != 1) {
        throw Error(ErrorKind::ShapeMismatch, "conv1d expects input [c_in, L], weight [c_out, c_in, k], bias [c_out]");
    }
    const std::size_t c_in = input.dim(0), L = input.dim(1);
    const std::size_t c_out = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != c_in || bias.dim(0) != c_out || stride == 0) {
        throw Error(ErrorKind::ShapeMismatch, "conv1d channel counts disagree");
    }
    if (L < k) {
        throw Error(ErrorKind::ShapeMismatch,
                    "conv1d input length " + std::to_string(L) + " shorter than kernel " + std::to_string(k));
    }
    const std::size_t out_len = (L - k) / stride + 1;
    Tensor out({c_out, out_len});
    for (std::size_t o = 0; o < c_out; ++o) {
        for (std::size_t t = 0; t < out_len; ++t) {
            double acc = bias[o];
            for (std::size_t c = 0; c < c_in; ++c) {
                for (std::size_t kk = 0; kk < k; ++kk) acc += weight.at(o, c, kk) * input.at(c, t * stride + kk);
            }
            out.at(o, t) = acc;
        }
    }
    return out;
}

Tensor conv1d_backward(const Tensor& input, const Conv1dParams& params, const Tensor& d_output, Conv1dParams& grads,
                       bool want_input, std::size_t stride) {
    const std::size_t c_in = input.dim(0);
    const std::size_t c_out = params.weight.dim(0), k = params.weight.dim(2);
    const std::size_t out_len = d_output.dim(1);
    Tensor d_input;
    if (want_input) d_input = Tensor(input.shape());
    for (std::size_t o = 0; o < c_out; ++o) {
        for (std::size_t t = 0; t < out_len; ++t) {
            const double g = d_output.at(o, t);
            grads.bias[o] += g;
            for (std::size_t c = 0; c < c_in; ++c) {
                for (std::size_t kk = 0; kk < k; ++kk) {
                    grads.weight.at(o, c, kk) += g * input.at(c, t * stride + kk);
                    if (want_input) d_input.at(c, t * stride + kk) += g * params.weight.at(o, c, kk);
                }
            }
        }
    }
    return d_input;
}

double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

Tensor leaky_relu(const Tensor& x, double slope) {
    Tensor out = x;
    for (auto& v : out.data()) v = leaky_relu(v, slope);
    return out;
}

Tensor leaky_relu_backward(const Tensor& pre, const Tensor& d_output, double slope) {
    Tensor d = d_output;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(pre[i] > 0.0)) d[i] *= slope;
    }
    return d;
}

PoolResult max_pool(const Tensor& input, std::size_t width) {
    if (input.rank() != 2 || width == 0) throw Error(ErrorKind::ShapeMismatch, "max_pool expects [c, L] and width > 0");
    const std::size_t c = input.dim(0), L = input.dim(1), out_len = L / width;
    PoolResult r{Tensor({c, out_len}), std::vector<std::size_t>(c * out_len)};
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t t = 0; t < out_len; ++t) {
            std::size_t best = ch * L + t * width;
            for (std::size_t w = 1; w < width; ++w) {
                const std::size_t idx = ch * L + t * width + w;
                if (input[idx] > input[best]) best = idx;
            }
            r.output.at(ch, t) = input[best];
            r.argmax[ch * out_len + t] = best;
        }
    }
    return r;
}

std::vector<double> max_pool(const std::vector<double>& input, std::size_t width) {
    Tensor t({1, input.size()}, input);
    const auto v = max_pool(t, width).output.values();
    return v;
}

Tensor max_pool_backward(const Tensor& input, const PoolResult& pooled, const Tensor& d_output) {
    Tensor d(input.shape());
    for (std::size_t i = 0; i < pooled.argmax.size(); ++i) d[pooled.argmax[i]] += d_output[i];
    return d;
}

Vec dense_forward(const DenseParams& p, const Vec& x) { return p.weight.mat() * x + p.bias.vec(); }

}  // namespace pdetect::nn
