#pragma once

#include <string>
#include <vector>

#include "protosent/backbone.hpp"
#include "protosent/config.hpp"
#include "protosent/losses.hpp"

namespace protosent {

enum class Variant { full, no_spb, no_selection, no_fine_path, no_gates, no_shared_proto };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_spb: return "no_spb";
        case Variant::no_selection: return "no_selection";
        case Variant::no_fine_path: return "no_fine_path";
        case Variant::no_gates: return "no_gates";
        case Variant::no_shared_proto: return "no_shared_proto";
    }
    return "?";
}

struct ParamRef {
    std::string name;
    Tensor tensor;
    bool decay = false;  // weight decay applies only to projection matrices
};

struct ModelOutput {
    Tensor prediction;               // 1 x 1
    Tensor fused;                    // K x d
    Tensor alpha;                    // K x 3
    std::array<Tensor, 3> responses; // per-modality K x d
    BackboneTrace trace;
};

// The full assembled network. One instance owns all parameters; forward
// passes build a fresh graph referencing them.
struct Model {
    Config cfg;
    Variant variant = Variant::full;
    std::array<std::size_t, 3> feature_widths{};

    std::array<EncoderParams, 3> encoders;
    std::vector<Tensor> banks;            // one shared bank, or three per-modality banks
    std::array<CrossAttnParams, 3> cross; // absent under no_spb
    bool has_cross = true;
    ScorerParams scorer;  // absent under no_selection
    bool has_scorer = true;
    BackboneParams backbone;
    RegressionHeadParams head;
    AuxHeadParams aux;

    const Tensor& bank_for(Modality m) const {
        return banks.size() == 1 ? banks.front() : banks[static_cast<std::size_t>(m)];
    }

    bool shared_bank() const { return banks.size() == 1; }

    std::vector<ParamRef> parameters() const {
        std::vector<ParamRef> out;
        auto push = [&](const std::string& name, const Tensor& t, bool decay) {
            out.push_back({name, t, decay});
        };
        auto push_linear = [&](const std::string& name, const LinearParams& p, bool decay = true) {
            push(name + ".w", p.w, decay);
            push(name + ".b", p.b, false);
        };
        auto push_ln = [&](const std::string& name, const LayerNormParams& p) {
            push(name + ".gain", p.gain, false);
            push(name + ".bias", p.bias, false);
        };
        auto push_attn = [&](const std::string& name, const AttentionParams& p) {
            push_linear(name + ".q", p.q);
            push_linear(name + ".k", p.k);
            push_linear(name + ".v", p.v);
            push_linear(name + ".o", p.o);
        };
        auto push_ffn = [&](const std::string& name, const FfnParams& p) {
            push_linear(name + ".hidden", p.hidden);
            push_linear(name + ".out", p.out);
        };

        for (Modality m : kAllModalities) {
            const std::string base = std::string("enc_") + modality_letter(m);
            const EncoderParams& e = encoders[m];
            push_linear(base + ".in", e.input_proj);
            if (e.use_positional) push(base + ".pos", e.pos, false);
            push_ln(base + ".ln_attn", e.ln_attn);
            push_attn(base + ".attn", e.attn);
            push_ln(base + ".ln_ffn", e.ln_ffn);
            push_ffn(base + ".ffn", e.ffn);
        }
        if (banks.size() == 1) {
            push("bank", banks.front(), false);
        } else {
            for (Modality m : kAllModalities)
                push(std::string("bank_") + modality_letter(m), banks[m], false);
        }
        if (has_cross) {
            for (Modality m : kAllModalities) {
                const std::string base = std::string("cross_") + modality_letter(m);
                push_attn(base + ".attn", cross[m].attn);
                push_ln(base + ".ln_attn", cross[m].ln_attn);
                push_ffn(base + ".ffn", cross[m].ffn);
                push_ln(base + ".ln_ffn", cross[m].ln_ffn);
            }
        }
        if (has_scorer) {
            push_linear("scorer.hidden", scorer.hidden);
            push_linear("scorer.out", scorer.out);
        }
        push("backbone.cls", backbone.cls, false);
        push("backbone.pos", backbone.pos, false);
        for (std::size_t l = 0; l < backbone.layers.size(); ++l) {
            const std::string base = "backbone.layer" + std::to_string(l);
            const BackboneLayerParams& layer = backbone.layers[l];
            push_ln(base + ".ln_attn", layer.ln_attn);
            push_attn(base + ".attn", layer.attn);
            push_ln(base + ".ln_ffn", layer.ln_ffn);
            push_ffn(base + ".ffn", layer.ffn);
            if (layer.has_gate) push_linear(base + ".gate", layer.gate);
        }
        push_ln("backbone.ln_final", backbone.ln_final);
        push_linear("head.hidden", head.hidden);
        push_linear("head.out", head.out);
        for (std::size_t i = 0; i < aux.heads.size(); ++i)
            push_linear("aux.head" + std::to_string(i), aux.heads[i]);
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : parameters()) n += p.tensor.numel();
        return n;
    }

    void zero_grads() const {
        for (const auto& p : parameters()) p.tensor.node()->grad.assign(p.tensor.numel(), real(0));
    }

    // Full pipeline for one (padded) sample: encode each modality, extract
    // prototype responses, select and fuse, reason over the token sequence,
    // and read the prediction off the cls state.
    ModelOutput forward(const BatchItem& item, bool training, Rng* rng,
                        const BackboneRunOptions& opt = {}) const {
        std::array<EncodedSequence, 3> encoded;
        for (Modality m : kAllModalities)
            encoded[m] = encode(item.mods[m], encoders[m], m, cfg.dropout, rng, training);

        std::array<Tensor, 3> responses;
        for (Modality m : kAllModalities) {
            responses[m] = has_cross
                               ? extract(bank_for(m), encoded[m], cross[m], cfg.dropout, rng, training)
                               : mean_pool_fallback(encoded[m], cfg.prototypes);
        }

        SelectionOutput sel;
        if (has_scorer) {
            sel = select_and_fuse(responses,
                                  std::array<Tensor, 3>{bank_for(kText), bank_for(kAudio),
                                                        bank_for(kVisual)},
                                  scorer);
        } else {
            sel = uniform_fuse(responses);
        }

        Tensor tokens = backbone.fine_path ? assemble_tokens(sel.fused, responses, backbone)
                                           : assemble_tokens_fused_only(sel.fused, backbone);
        ModelOutput out;
        out.trace = backbone_forward(tokens, backbone, cfg.dropout, rng, training, opt);
        out.prediction = predict(out.trace, head);
        out.fused = sel.fused;
        out.alpha = sel.alpha;
        out.responses = responses;
        return out;
    }

    // Diversity term over the bank(s); with per-modality banks the penalty is
    // averaged across them.
    Tensor diversity_loss() const {
        Tensor acc;
        for (const Tensor& b : banks) {
            Tensor d = div_loss(b);
            acc = acc.defined() ? add(acc, d) : d;
        }
        return banks.size() == 1 ? acc : scale(acc, 1.0 / static_cast<double>(banks.size()));
    }
};

// Wires the requested variant. At most one ablation flag may be set.
inline Model build_variant(const Config& cfg, const std::array<std::size_t, 3>& feature_widths) {
    cfg.validate();
    if (cfg.ablation_count() > 1)
        throw ConfigError("at most one ablation flag may be set, got " +
                          std::to_string(cfg.ablation_count()));
    Model m;
    m.cfg = cfg;
    m.feature_widths = feature_widths;
    if (cfg.no_spb) m.variant = Variant::no_spb;
    else if (cfg.no_selection) m.variant = Variant::no_selection;
    else if (cfg.no_fine_path) m.variant = Variant::no_fine_path;
    else if (cfg.no_gates) m.variant = Variant::no_gates;
    else if (cfg.no_shared_proto) m.variant = Variant::no_shared_proto;

    Rng rng = derive_rng(cfg.seed, 0);
    const std::size_t d = cfg.hidden_dim;
    for (Modality mod : kAllModalities)
        m.encoders[mod] = make_encoder(feature_widths[mod], d, cfg.heads, cfg.max_seq_len,
                                       cfg.use_positional, rng);
    if (cfg.no_shared_proto) {
        for (int i = 0; i < 3; ++i) m.banks.push_back(make_prototype_bank(cfg.prototypes, d, rng));
    } else {
        m.banks.push_back(make_prototype_bank(cfg.prototypes, d, rng));
    }
    m.has_cross = !cfg.no_spb;
    if (m.has_cross)
        for (Modality mod : kAllModalities) m.cross[mod] = make_cross_attn(d, cfg.heads, rng);
    m.has_scorer = !cfg.no_selection;
    if (m.has_scorer) m.scorer = make_scorer(d, rng);
    m.backbone = make_backbone(d, cfg.heads, cfg.layers, cfg.prototypes,
                               /*fine_path=*/!cfg.no_fine_path,
                               /*gated=*/!cfg.no_gates, rng);
    m.head = make_regression_head(d, rng);
    m.aux = make_aux_head(d, cfg.prototypes, cfg.per_slot_aux_heads, rng);
    return m;
}

}  // namespace protosent
