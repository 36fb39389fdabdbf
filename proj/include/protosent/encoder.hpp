#pragma once

#include <vector>

#include "protosent/batching.hpp"
#include "protosent/layers.hpp"

namespace protosent {

// Per-modality encoder: input projection into the shared width, optional
// learnable positional embeddings, then one pre-norm self-attention block and
// one pre-norm feed-forward block. The three modalities share nothing.
struct EncoderParams {
    LinearParams input_proj;  // d_m -> d
    Tensor pos;               // max_len x d; undefined when positional info is off
    LayerNormParams ln_attn;
    AttentionParams attn;
    LayerNormParams ln_ffn;
    FfnParams ffn;
    bool use_positional = true;
};

inline EncoderParams make_encoder(std::size_t input_width, std::size_t d, std::size_t heads,
                                  std::size_t max_seq_len, bool use_positional, Rng& rng) {
    EncoderParams p;
    p.input_proj = make_linear(input_width, d, rng);
    p.use_positional = use_positional;
    if (use_positional) p.pos = Tensor::randn(max_seq_len, d, rng, 0.02, true);
    p.ln_attn = make_layer_norm(d);
    p.attn = make_attention(d, heads, rng);
    p.ln_ffn = make_layer_norm(d);
    p.ffn = make_ffn(d, 4 * d, rng);
    return p;
}

struct EncodedSequence {
    Tensor h;  // L x d, masked rows zeroed
    std::vector<std::uint8_t> mask;
    Modality tag = kText;
};

inline EncodedSequence encode(const PaddedSequence& seq, const EncoderParams& p, Modality tag,
                              double dropout_p, Rng* rng, bool training) {
    if (seq.width != p.input_proj.w.rows())
        throw SchemaError("encode(" + std::string(modality_name(tag)) + "): feature width " +
                          std::to_string(seq.width) + " does not match encoder input width " +
                          std::to_string(p.input_proj.w.rows()));
    Tensor x = Tensor::from_values(seq.len, seq.width, seq.data);
    Tensor h = linear(x, p.input_proj);
    if (p.use_positional) {
        if (seq.len > p.pos.rows())
            throw ConfigError("sequence length " + std::to_string(seq.len) +
                              " exceeds max_seq_len " + std::to_string(p.pos.rows()));
        h = add(h, slice_rows(p.pos, 0, seq.len));
    }
    Tensor key_bias = mask_bias_tensor(seq.mask);
    Tensor normed = apply_layer_norm(h, p.ln_attn);
    h = add(h, multihead_attention(normed, normed, p.attn, &key_bias, dropout_p, rng, training));
    h = add(h, apply_ffn(apply_layer_norm(h, p.ln_ffn), p.ffn, dropout_p, rng, training));
    h = mul(h, mask_column_tensor(seq.mask));
    return EncodedSequence{h, std::vector<std::uint8_t>(seq.mask), tag};
}

}  // namespace protosent
