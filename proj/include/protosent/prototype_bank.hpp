#pragma once

#include "protosent/encoder.hpp"

namespace protosent {

// K learnable prototype vectors forming the shared query basis. Small-norm
// init keeps the early cross-attention away from saturation.
inline constexpr double kPrototypeInitStd = 0.02;

inline Tensor make_prototype_bank(std::size_t prototypes, std::size_t d, Rng& rng) {
    return Tensor::randn(prototypes, d, rng, kPrototypeInitStd, true);
}

// Modality-specific extraction parameters. The bank is shared across the
// three modalities; everything here is independent per modality. The block is
// post-norm: the residual sums are normalized, not the inputs.
struct CrossAttnParams {
    AttentionParams attn;
    LayerNormParams ln_attn;
    FfnParams ffn;
    LayerNormParams ln_ffn;
};

inline CrossAttnParams make_cross_attn(std::size_t d, std::size_t heads, Rng& rng) {
    return {make_attention(d, heads, rng), make_layer_norm(d), make_ffn(d, 4 * d, rng),
            make_layer_norm(d)};
}

// Prototype-aligned response of one modality: each prototype row queries the
// encoded sequence via cross-attention, respecting the validity mask. Row k
// of every modality's response answers the same prototype k.
inline Tensor extract(const Tensor& bank, const EncodedSequence& enc, const CrossAttnParams& p,
                      double dropout_p, Rng* rng, bool training) {
    if (enc.h.cols() != bank.cols())
        throw SchemaError("extract: encoded width " + std::to_string(enc.h.cols()) +
                          " does not match bank width " + std::to_string(bank.cols()));
    Tensor key_bias = mask_bias_tensor(enc.mask);
    Tensor attended =
        multihead_attention(bank, enc.h, p.attn, &key_bias, dropout_p, rng, training);
    Tensor pre = apply_layer_norm(add(bank, attended), p.ln_attn);
    return apply_layer_norm(add(pre, apply_ffn(pre, p.ffn, dropout_p, rng, training)), p.ln_ffn);
}

// Ablation substitute for extract: masked mean over time, broadcast to K
// identical rows so downstream shapes are unchanged. No parameters.
inline Tensor mean_pool_fallback(const EncodedSequence& enc, std::size_t prototypes) {
    Tensor mask_col = mask_column_tensor(enc.mask);
    double count = 0.0;
    for (auto m : enc.mask) count += m ? 1.0 : 0.0;
    if (count == 0.0) throw ContractError("mean_pool_fallback: empty mask");
    Tensor mean = scale(sum_axis(mul(enc.h, mask_col), 0), 1.0 / count);  // 1 x d
    Tensor ones = Tensor::filled(prototypes, 1, real(1));
    return matmul(ones, mean);
}

}  // namespace protosent
