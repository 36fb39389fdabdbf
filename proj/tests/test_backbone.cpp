#include <catch2/catch_amalgamated.hpp>

#include "protosent/backbone.hpp"
#include "protosent/gradcheck.hpp"

using namespace protosent;

namespace {

std::array<Tensor, 3> random_responses(std::size_t k, std::size_t d, Rng& rng) {
    return {Tensor::randn(k, d, rng, 1.0), Tensor::randn(k, d, rng, 1.0),
            Tensor::randn(k, d, rng, 1.0)};
}

void force_gates(BackboneParams& p, double logit) {
    for (auto& layer : p.layers) {
        if (!layer.has_gate) continue;
        for (auto& v : layer.gate.w.values_mut()) v = real(0);
        for (auto& v : layer.gate.b.values_mut()) v = static_cast<real>(logit);
    }
}

}  // namespace

TEST_CASE("token assembly layout") {
    Rng rng(83);
    const std::size_t d = 8;

    {
        const std::size_t k = 8;
        BackboneParams p = make_backbone(d, 2, 1, k, true, true, rng);
        Tensor fused = Tensor::randn(k, d, rng, 1.0);
        auto responses = random_responses(k, d, rng);
        Tensor tokens = assemble_tokens(fused, responses, p);
        REQUIRE(tokens.rows() == 33);  // 1 + 4K at K=8
        REQUIRE(tokens.cols() == d);

        // token 0 is cls plus its positional embedding
        for (std::size_t c = 0; c < d; ++c)
            REQUIRE(tokens.at(0, c) == Catch::Approx(p.cls.at(0, c) + p.pos.at(0, c)).margin(1e-12));
        // fused block follows, then text/audio/visual
        for (std::size_t c = 0; c < d; ++c) {
            REQUIRE(tokens.at(1, c) == Catch::Approx(fused.at(0, c) + p.pos.at(1, c)).margin(1e-12));
            REQUIRE(tokens.at(1 + k, c) ==
                    Catch::Approx(responses[kText].at(0, c) + p.pos.at(1 + k, c)).margin(1e-12));
            REQUIRE(tokens.at(1 + 3 * k, c) ==
                    Catch::Approx(responses[kVisual].at(0, c) + p.pos.at(1 + 3 * k, c)).margin(1e-12));
        }
    }
    {
        BackboneParams p1 = make_backbone(d, 2, 1, 1, true, true, rng);
        Tensor tokens =
            assemble_tokens(Tensor::randn(1, d, rng, 1.0), random_responses(1, d, rng), p1);
        REQUIRE(tokens.rows() == 5);  // 1 + 4K at K=1
    }
    {
        const std::size_t k = 8;
        BackboneParams pf = make_backbone(d, 2, 1, k, false, true, rng);
        Tensor tokens = assemble_tokens_fused_only(Tensor::randn(k, d, rng, 1.0), pf);
        REQUIRE(tokens.rows() == 9);  // 1 + K
        REQUIRE(pf.layers.front().has_gate == false);  // nothing to gate without the fine path
    }
}

TEST_CASE("zero-initialized gate parameters give gates of exactly one half") {
    Rng rng(89);
    const std::size_t d = 8, k = 2;
    BackboneParams p = make_backbone(d, 2, 3, k, true, true, rng);
    force_gates(p, 0.0);
    Tensor tokens = assemble_tokens(Tensor::randn(k, d, rng, 1.0), random_responses(k, d, rng), p);
    BackboneTrace trace = backbone_forward(tokens, p, 0.0, nullptr, false);
    REQUIRE(trace.gates.size() == 3);
    for (const auto& g : trace.gates)
        for (double v : g) REQUIRE(v == 0.5);
}

TEST_CASE("gates forced to one reproduce the ungated backbone") {
    Rng rng(97);
    const std::size_t d = 8, k = 3, L = 2;
    BackboneParams gated = make_backbone(d, 2, L, k, true, true, rng);
    // sigmoid(1000) is exactly 1.0 in double arithmetic
    force_gates(gated, 1000.0);

    BackboneParams ungated = gated;
    for (auto& layer : ungated.layers) layer.has_gate = false;

    Tensor fused = Tensor::randn(k, d, rng, 1.0);
    auto responses = random_responses(k, d, rng);
    Tensor tokens = assemble_tokens(fused, responses, gated);

    BackboneTrace a = backbone_forward(tokens, gated, 0.0, nullptr, false);
    BackboneTrace b = backbone_forward(tokens, ungated, 0.0, nullptr, false);
    RegressionHeadParams head = make_regression_head(d, rng);
    REQUIRE(predict(a, head).item() == Catch::Approx(predict(b, head).item()).margin(1e-9));
    REQUIRE(a.gates.size() == L);
    REQUIRE(b.gates.empty());
}

TEST_CASE("gate zero equals zeroing the modality tokens after that layer's ffn") {
    Rng rng(101);
    const std::size_t d = 8, k = 2, L = 3;
    for (int target_modality = 0; target_modality < 3; ++target_modality) {
        for (std::size_t target_layer = 0; target_layer + 1 < L; ++target_layer) {
            BackboneParams p = make_backbone(d, 2, L, k, true, true, rng);
            // open every gate except the target, which is slammed shut for
            // one modality at one layer
            force_gates(p, 1000.0);
            p.layers[target_layer].gate.b.values_mut()[target_modality] = real(-1000.0);

            Tensor fused = Tensor::randn(k, d, rng, 1.0);
            auto responses = random_responses(k, d, rng);
            Tensor tokens = assemble_tokens(fused, responses, p);
            BackboneTrace gated = backbone_forward(tokens, p, 0.0, nullptr, false);

            // independent route: gates fully open, tokens zeroed by the hook
            BackboneParams open = p;
            open.layers[target_layer].gate.b.values_mut()[target_modality] = real(1000.0);
            BackboneRunOptions hook;
            hook.zero_after_ffn_layer = static_cast<int>(target_layer);
            hook.zero_after_ffn_modality = target_modality;
            BackboneTrace zeroed = backbone_forward(tokens, open, 0.0, nullptr, false, hook);

            RegressionHeadParams head = make_regression_head(d, rng);
            REQUIRE(predict(gated, head).item() ==
                    Catch::Approx(predict(zeroed, head).item()).margin(1e-6));
        }
    }
}

TEST_CASE("gating after the final layer cannot change the prediction") {
    Rng rng(103);
    const std::size_t d = 8, k = 2;
    BackboneParams p = make_backbone(d, 2, 1, k, true, true, rng);
    force_gates(p, 1000.0);
    p.layers[0].gate.b.values_mut()[kText] = real(-1000.0);  // text gate -> 0 at the only layer

    Tensor tokens = assemble_tokens(Tensor::randn(k, d, rng, 1.0), random_responses(k, d, rng), p);
    RegressionHeadParams head = make_regression_head(d, rng);
    BackboneTrace a = backbone_forward(tokens, p, 0.0, nullptr, false);
    p.layers[0].gate.b.values_mut()[kText] = real(1000.0);  // reopen and rerun
    BackboneTrace b = backbone_forward(tokens, p, 0.0, nullptr, false);
    REQUIRE(predict(a, head).item() == Catch::Approx(predict(b, head).item()).margin(1e-12));
    // the closing gate is still recorded for trace consumers
    REQUIRE(a.gates.size() == 1);
    REQUIRE(a.gates[0][kText] == 0.0);
}

TEST_CASE("cls and fused tokens are exempt from gating") {
    Rng rng(107);
    const std::size_t d = 8, k = 2, L = 2;
    BackboneParams p = make_backbone(d, 2, L, k, true, true, rng);
    Tensor fused = Tensor::randn(k, d, rng, 1.0);
    auto responses = random_responses(k, d, rng);
    Tensor tokens = assemble_tokens(fused, responses, p);

    BackboneRunOptions capture;
    capture.capture_internals = true;
    BackboneTrace before = backbone_forward(tokens, p, 0.0, nullptr, false, capture);

    // perturb only the first layer's gate parameters
    for (auto& v : p.layers[0].gate.w.values_mut()) v += real(0.37);
    for (auto& v : p.layers[0].gate.b.values_mut()) v -= real(0.21);
    BackboneTrace after = backbone_forward(tokens, p, 0.0, nullptr, false, capture);

    // pre-gate tokens of that layer are bit-identical
    REQUIRE(before.pre_gate_tokens[0] == after.pre_gate_tokens[0]);
    // post-gate: cls and fused rows unchanged, modality rows rescaled
    const std::size_t ungated_len = (1 + k) * d;
    for (std::size_t i = 0; i < ungated_len; ++i)
        REQUIRE(before.post_gate_tokens[0][i] == after.post_gate_tokens[0][i]);
    bool any_changed = false;
    for (std::size_t i = ungated_len; i < before.post_gate_tokens[0].size(); ++i)
        any_changed |= before.post_gate_tokens[0][i] != after.post_gate_tokens[0][i];
    REQUIRE(any_changed);
}

TEST_CASE("every recorded gate lies strictly inside (0,1)") {
    Rng rng(109);
    const std::size_t d = 16, k = 4, L = 4;
    BackboneParams p = make_backbone(d, 4, L, k, true, true, rng);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor tokens =
            assemble_tokens(Tensor::randn(k, d, rng, 2.0), random_responses(k, d, rng), p);
        BackboneTrace trace = backbone_forward(tokens, p, 0.0, nullptr, false);
        REQUIRE(trace.gates.size() == L);
        for (const auto& g : trace.gates)
            for (double v : g) {
                REQUIRE(v > 0.0);
                REQUIRE(v < 1.0);
            }
    }
}

TEST_CASE("regression head") {
    Rng rng(113);
    const std::size_t d = 8;
    RegressionHeadParams head = make_regression_head(d, rng);

    SECTION("zero weights reduce to the bias") {
        RegressionHeadParams zeroed = head;
        for (auto& v : zeroed.hidden.w.values_mut()) v = real(0);
        for (auto& v : zeroed.hidden.b.values_mut()) v = real(0);
        for (auto& v : zeroed.out.w.values_mut()) v = real(0);
        zeroed.out.b.values_mut()[0] = real(2.5);
        BackboneTrace trace;
        trace.cls_final = Tensor::randn(1, d, rng, 5.0);
        REQUIRE(predict(trace, zeroed).item() == 2.5);
    }

    SECTION("gradients flow through the head") {
        Tensor cls = Tensor::randn(1, d, rng, 1.0, true);
        const double err =
            check_gradients({cls, head.hidden.w, head.hidden.b, head.out.w, head.out.b}, [&] {
                BackboneTrace t;
                t.cls_final = add(cls, Tensor::zeros(1, d));
                return square(predict(t, head));
            });
        REQUIRE(err < 1e-4);
    }

    SECTION("predictions are finite at init across seeds") {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            Rng r(seed);
            RegressionHeadParams h = make_regression_head(d, r);
            BackboneTrace t;
            t.cls_final = Tensor::randn(1, d, r, 3.0);
            REQUIRE(std::isfinite(predict(t, h).item()));
        }
    }
}
