#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "protosent/model.hpp"
#include "protosent/prototype_bank.hpp"
#include "support/reference.hpp"

using namespace protosent;

namespace {

EncodedSequence fixed_sequence(std::size_t len, std::size_t d, Rng& rng,
                               std::vector<std::uint8_t> mask = {}) {
    if (mask.empty()) mask.assign(len, 1);
    EncodedSequence enc;
    enc.h = Tensor::randn(len, d, rng, 1.0);
    enc.mask = std::move(mask);
    // zero masked rows, matching the encoder's output contract
    auto& vals = enc.h.values_mut();
    for (std::size_t r = 0; r < len; ++r)
        if (!enc.mask[r])
            for (std::size_t c = 0; c < d; ++c) vals[r * d + c] = real(0);
    return enc;
}

}  // namespace

TEST_CASE("extract matches an independent step-by-step recomputation") {
    for (std::size_t heads : {std::size_t(1), std::size_t(2)}) {
        Rng rng(23 + heads);
        const std::size_t K = 2, d = 4, L = 3;
        Tensor bank = make_prototype_bank(K, d, rng);
        CrossAttnParams p = make_cross_attn(d, heads, rng);
        EncodedSequence enc = fixed_sequence(L, d, rng);

        Tensor z = extract(bank, enc, p, 0.0, nullptr, false);
        REQUIRE(z.rows() == K);
        REQUIRE(z.cols() == d);

        refimpl::Mat expected =
            refimpl::extract_reference(bank, refimpl::from_tensor(enc.h), enc.mask, p, kLayerNormEps);
        REQUIRE(refimpl::max_abs_diff(expected, z) < 1e-6);
    }
}

TEST_CASE("extract with a single key puts all attention on it") {
    Rng rng(29);
    const std::size_t K = 3, d = 8;
    Tensor bank = make_prototype_bank(K, d, rng);
    CrossAttnParams p = make_cross_attn(d, 2, rng);
    EncodedSequence enc = fixed_sequence(1, d, rng);

    Tensor z = extract(bank, enc, p, 0.0, nullptr, false);

    // reference where the attention context is forced to the single value row
    refimpl::Mat m = refimpl::from_tensor(bank);
    refimpl::Mat v = refimpl::linear(refimpl::from_tensor(enc.h), p.attn.v);
    refimpl::Mat ctx(K, v[0]);  // every prototype attends to the only key with weight 1
    refimpl::Mat attended = refimpl::linear(ctx, p.attn.o);
    refimpl::Mat pre = refimpl::layer_norm(refimpl::add(m, attended), refimpl::row_of(p.ln_attn.gain),
                                           refimpl::row_of(p.ln_attn.bias), kLayerNormEps);
    refimpl::Mat expected =
        refimpl::layer_norm(refimpl::add(pre, refimpl::ffn(pre, p.ffn)),
                            refimpl::row_of(p.ln_ffn.gain), refimpl::row_of(p.ln_ffn.bias),
                            kLayerNormEps);
    REQUIRE(refimpl::max_abs_diff(expected, z) < 1e-9);
}

TEST_CASE("extract is invariant to permuting keys together with their mask") {
    Rng rng(31);
    const std::size_t K = 4, d = 8, L = 6;
    Tensor bank = make_prototype_bank(K, d, rng);
    CrossAttnParams p = make_cross_attn(d, 2, rng);

    for (int trial = 0; trial < 10; ++trial) {
        EncodedSequence enc = fixed_sequence(L, d, rng, {1, 1, 0, 1, 0, 1});
        Tensor base = extract(bank, enc, p, 0.0, nullptr, false);

        std::vector<std::size_t> perm(L);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        EncodedSequence shuffled;
        shuffled.mask.resize(L);
        std::vector<real> rows(L * d);
        for (std::size_t r = 0; r < L; ++r) {
            shuffled.mask[r] = enc.mask[perm[r]];
            for (std::size_t c = 0; c < d; ++c) rows[r * d + c] = enc.h.at(perm[r], c);
        }
        shuffled.h = Tensor::from_values(L, d, std::move(rows));

        Tensor permuted = extract(bank, shuffled, p, 0.0, nullptr, false);
        for (std::size_t i = 0; i < base.numel(); ++i)
            REQUIRE(std::abs(base.values()[i] - permuted.values()[i]) < 1e-6);
    }
}

TEST_CASE("extract output is always KxD regardless of sequence length") {
    Rng rng(37);
    const std::size_t K = 5, d = 8;
    Tensor bank = make_prototype_bank(K, d, rng);
    CrossAttnParams p = make_cross_attn(d, 4, rng);
    for (std::size_t L : {std::size_t(1), std::size_t(2), std::size_t(7), std::size_t(19)}) {
        EncodedSequence enc = fixed_sequence(L, d, rng);
        Tensor z = extract(bank, enc, p, 0.0, nullptr, false);
        REQUIRE(z.rows() == K);
        REQUIRE(z.cols() == d);
    }

    EncodedSequence wrong = fixed_sequence(3, d + 1, rng);
    REQUIRE_THROWS_AS(extract(bank, wrong, p, 0.0, nullptr, false), SchemaError);
}

TEST_CASE("mean pooling fallback") {
    Rng rng(41);
    const std::size_t d = 6, K = 4;

    SECTION("constant sequence broadcasts the constant") {
        EncodedSequence enc;
        enc.h = Tensor::filled(5, d, 1.25);
        enc.mask.assign(5, 1);
        Tensor z = mean_pool_fallback(enc, K);
        REQUIRE(z.rows() == K);
        for (std::size_t r = 0; r < K; ++r)
            for (std::size_t c = 0; c < d; ++c) REQUIRE(z.at(r, c) == Catch::Approx(1.25).margin(1e-12));
    }

    SECTION("mask excludes padded rows from the mean") {
        EncodedSequence enc = fixed_sequence(4, d, rng, {1, 1, 0, 0});
        Tensor z = mean_pool_fallback(enc, K);
        for (std::size_t c = 0; c < d; ++c) {
            const double expect = (enc.h.at(0, c) + enc.h.at(1, c)) / 2.0;
            REQUIRE(z.at(0, c) == Catch::Approx(expect).margin(1e-12));
        }
    }

    SECTION("all K rows are identical") {
        EncodedSequence enc = fixed_sequence(7, d, rng);
        Tensor z = mean_pool_fallback(enc, K);
        for (std::size_t r = 1; r < K; ++r)
            for (std::size_t c = 0; c < d; ++c) REQUIRE(z.at(r, c) == z.at(0, c));
    }
}

TEST_CASE("the three modality paths share one bank object") {
    Config cfg;
    cfg.prototypes = 4;
    cfg.hidden_dim = 16;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.max_seq_len = 8;
    Model model = build_variant(cfg, {3, 4, 5});

    REQUIRE(model.shared_bank());
    REQUIRE(model.bank_for(kText).node() == model.bank_for(kAudio).node());
    REQUIRE(model.bank_for(kText).node() == model.bank_for(kVisual).node());

    // mutating the bank changes all three responses
    Rng rng(43);
    std::array<EncodedSequence, 3> encs;
    std::array<Tensor, 3> before;
    for (Modality m : kAllModalities) {
        encs[m] = fixed_sequence(4, 16, rng);
        before[m] = extract(model.bank_for(m), encs[m], model.cross[m], 0.0, nullptr, false);
    }
    for (auto& v : model.banks.front().values_mut()) v += real(0.05);
    for (Modality m : kAllModalities) {
        Tensor after = extract(model.bank_for(m), encs[m], model.cross[m], 0.0, nullptr, false);
        REQUIRE(after.values() != before[m].values());
    }
}
