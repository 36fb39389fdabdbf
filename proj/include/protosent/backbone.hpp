#pragma once

#include <array>
#include <vector>

#include "protosent/selection.hpp"

namespace protosent {

// Reasoning backbone: pre-norm Transformer layers over the token sequence
// [cls; fused; text; audio; visual], with a per-layer sigmoid gate (read from
// the updated cls token after both sub-blocks) that rescales each modality's
// K response tokens. cls and fused tokens are never gated.
struct BackboneLayerParams {
    LayerNormParams ln_attn;
    AttentionParams attn;
    LayerNormParams ln_ffn;
    FfnParams ffn;
    LinearParams gate;  // d -> 3; undefined when the layer is ungated
    bool has_gate = false;
};

struct BackboneParams {
    Tensor cls;  // 1 x d
    Tensor pos;  // (1+4K) x d, or (1+K) x d without the fine path
    std::vector<BackboneLayerParams> layers;
    LayerNormParams ln_final;
    std::size_t prototypes = 0;
    bool fine_path = true;
};

inline BackboneParams make_backbone(std::size_t d, std::size_t heads, std::size_t layers,
                                    std::size_t prototypes, bool fine_path, bool gated, Rng& rng) {
    BackboneParams p;
    p.prototypes = prototypes;
    p.fine_path = fine_path;
    const std::size_t seq_len = fine_path ? 1 + 4 * prototypes : 1 + prototypes;
    p.cls = Tensor::randn(1, d, rng, 0.02, true);
    p.pos = Tensor::randn(seq_len, d, rng, 0.02, true);
    const bool use_gates = gated && fine_path;
    for (std::size_t l = 0; l < layers; ++l) {
        BackboneLayerParams layer;
        layer.ln_attn = make_layer_norm(d);
        layer.attn = make_attention(d, heads, rng);
        layer.ln_ffn = make_layer_norm(d);
        layer.ffn = make_ffn(d, 4 * d, rng);
        if (use_gates) {
            layer.gate = make_linear(d, 3, rng);
            layer.has_gate = true;
        }
        p.layers.push_back(std::move(layer));
    }
    p.ln_final = make_layer_norm(d);
    return p;
}

struct RegressionHeadParams {
    LinearParams hidden;  // d -> max(1, d/2)
    LinearParams out;     // -> 1
};

inline RegressionHeadParams make_regression_head(std::size_t d, Rng& rng) {
    const std::size_t mid = d / 2 > 0 ? d / 2 : 1;
    return {make_linear(d, mid, rng), make_linear(mid, 1, rng)};
}

struct BackboneTrace {
    std::vector<std::array<double, 3>> gates;  // one (t, a, v) triple per gated layer
    Tensor cls_final;                          // 1 x d, after the closing layer norm
    Tensor prediction;                         // 1 x 1, filled by predict()

    // Debug captures (token matrices after the FFN residual, before and after
    // gating) used by structural tests; populated only on request.
    std::vector<std::vector<real>> pre_gate_tokens;
    std::vector<std::vector<real>> post_gate_tokens;
};

struct BackboneRunOptions {
    bool capture_internals = false;
    // Test hook: zero one modality's token group right after the given
    // layer's FFN residual, as the independent route for gate-equivalence
    // checks. -1 disables.
    int zero_after_ffn_layer = -1;
    int zero_after_ffn_modality = -1;
};

// Fixed token layout: cls, K fused, K text, K audio, K visual (1 + 4K rows),
// positional embeddings added to every token once at assembly.
inline Tensor assemble_tokens(const Tensor& fused, const std::array<Tensor, 3>& responses,
                              const BackboneParams& p) {
    const std::size_t k = p.prototypes;
    if (fused.rows() != k) throw SchemaError("assemble_tokens: fused must be Kxd, got " + fused.shape());
    for (Modality m : kAllModalities)
        if (responses[m].rows() != k || responses[m].cols() != fused.cols())
            throw SchemaError("assemble_tokens: response shape mismatch at " +
                              std::string(modality_name(m)));
    if (p.cls.cols() != fused.cols())
        throw SchemaError("assemble_tokens: cls width does not match token width");
    Tensor seq = concat({p.cls, fused, responses[kText], responses[kAudio], responses[kVisual]}, 0);
    return add(seq, p.pos);
}

inline Tensor assemble_tokens_fused_only(const Tensor& fused, const BackboneParams& p) {
    if (fused.rows() != p.prototypes)
        throw SchemaError("assemble_tokens_fused_only: fused must be Kxd, got " + fused.shape());
    return add(concat({p.cls, fused}, 0), p.pos);
}

inline BackboneTrace backbone_forward(const Tensor& tokens, const BackboneParams& p,
                                      double dropout_p, Rng* rng, bool training,
                                      const BackboneRunOptions& opt = {}) {
    if (p.layers.empty()) throw ContractError("backbone_forward: need at least one layer");
    const std::size_t k = p.prototypes;
    BackboneTrace trace;
    Tensor x = tokens;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const BackboneLayerParams& layer = p.layers[l];
        Tensor normed = apply_layer_norm(x, layer.ln_attn);
        x = add(x, multihead_attention(normed, normed, layer.attn, nullptr, dropout_p, rng, training));
        x = add(x, apply_ffn(apply_layer_norm(x, layer.ln_ffn), layer.ffn, dropout_p, rng, training));

        if (opt.zero_after_ffn_layer == static_cast<int>(l) && p.fine_path) {
            const std::size_t m = static_cast<std::size_t>(opt.zero_after_ffn_modality);
            std::vector<Tensor> parts{slice_rows(x, 0, 1 + k + m * k),
                                      scale(slice_rows(x, 1 + k + m * k, k), 0.0)};
            if (1 + k + (m + 1) * k < x.rows())
                parts.push_back(slice_rows(x, 1 + k + (m + 1) * k, x.rows() - (1 + k + (m + 1) * k)));
            x = concat(parts, 0);
        }
        if (opt.capture_internals) trace.pre_gate_tokens.push_back(x.values());

        if (layer.has_gate) {
            Tensor gate = sigmoid(linear(row(x, 0), layer.gate));  // 1 x 3
            trace.gates.push_back({gate.at(0, 0), gate.at(0, 1), gate.at(0, 2)});
            std::vector<Tensor> parts{slice_rows(x, 0, 1 + k)};
            for (Modality m : kAllModalities)
                parts.push_back(mul(slice_rows(x, 1 + k + static_cast<std::size_t>(m) * k, k),
                                    slice_cols(gate, static_cast<std::size_t>(m), 1)));
            x = concat(parts, 0);
        }
        if (opt.capture_internals) trace.post_gate_tokens.push_back(x.values());
    }
    trace.cls_final = apply_layer_norm(row(x, 0), p.ln_final);
    return trace;
}

// Regression head over the final cls hidden state; stores and returns the
// scalar prediction.
inline Tensor predict(BackboneTrace& trace, const RegressionHeadParams& head) {
    if (!trace.cls_final.defined()) throw ContractError("predict: trace has no cls hidden state");
    trace.prediction = linear(relu(linear(trace.cls_final, head.hidden)), head.out);
    return trace.prediction;
}

}  // namespace protosent
