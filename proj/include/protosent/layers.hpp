#pragma once

#include <cmath>
#include <vector>

#include "protosent/ops.hpp"

namespace protosent {

inline constexpr double kLayerNormEps = 1e-5;

struct LinearParams {
    Tensor w;  // in x out
    Tensor b;  // 1 x out
};

inline LinearParams make_linear(std::size_t in, std::size_t out, Rng& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(in + out));
    return {Tensor::randn(in, out, rng, stddev, true), Tensor::zeros(1, out, true)};
}

inline Tensor linear(const Tensor& x, const LinearParams& p) { return add(matmul(x, p.w), p.b); }

struct LayerNormParams {
    Tensor gain;
    Tensor bias;
};

inline LayerNormParams make_layer_norm(std::size_t d) {
    return {Tensor::filled(1, d, real(1), true), Tensor::zeros(1, d, true)};
}

inline Tensor apply_layer_norm(const Tensor& x, const LayerNormParams& p) {
    return layer_norm(x, p.gain, p.bias, kLayerNormEps);
}

struct AttentionParams {
    LinearParams q, k, v, o;
    std::size_t heads = 1;
};

inline AttentionParams make_attention(std::size_t d, std::size_t heads, Rng& rng) {
    return {make_linear(d, d, rng), make_linear(d, d, rng), make_linear(d, d, rng),
            make_linear(d, d, rng), heads};
}

// Scaled dot-product attention, queries_in (Lq x d) against keys_in (Lk x d).
// key_bias, when given, is a (1 x Lk) additive mask applied to every score
// row before the softmax. Dropout acts on the attention weights.
inline Tensor multihead_attention(const Tensor& queries_in, const Tensor& keys_in,
                                  const AttentionParams& p, const Tensor* key_bias,
                                  double dropout_p, Rng* rng, bool training) {
    const std::size_t d = p.q.w.cols();
    const std::size_t dh = d / p.heads;
    Tensor q = linear(queries_in, p.q);
    Tensor k = linear(keys_in, p.k);
    Tensor v = linear(keys_in, p.v);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> contexts;
    contexts.reserve(p.heads);
    for (std::size_t h = 0; h < p.heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, dh);
        Tensor kh = slice_cols(k, h * dh, dh);
        Tensor vh = slice_cols(v, h * dh, dh);
        Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        if (key_bias) scores = add(scores, *key_bias);
        Tensor attn = softmax_rows(scores);
        if (training && dropout_p > 0.0) attn = dropout(attn, dropout_p, *rng, true);
        contexts.push_back(matmul(attn, vh));
    }
    Tensor ctx = p.heads == 1 ? contexts.front() : concat(contexts, 1);
    return linear(ctx, p.o);
}

struct FfnParams {
    LinearParams hidden;  // d -> widen
    LinearParams out;     // widen -> d
};

inline FfnParams make_ffn(std::size_t d, std::size_t widen, Rng& rng) {
    return {make_linear(d, widen, rng), make_linear(widen, d, rng)};
}

inline Tensor apply_ffn(const Tensor& x, const FfnParams& p, double dropout_p, Rng* rng,
                        bool training) {
    Tensor h = relu(linear(x, p.hidden));
    if (training && dropout_p > 0.0) h = dropout(h, dropout_p, *rng, true);
    return linear(h, p.out);
}

}  // namespace protosent
