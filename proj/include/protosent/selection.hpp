#pragma once

#include <array>

#include "protosent/prototype_bank.hpp"

namespace protosent {

// Reliability scorer: one MLP (2d -> d -> 1, ReLU) shared across every
// (slot, modality) pair.
struct ScorerParams {
    LinearParams hidden;
    LinearParams out;
};

inline ScorerParams make_scorer(std::size_t d, Rng& rng) {
    return {make_linear(2 * d, d, rng), make_linear(d, 1, rng)};
}

// Score of one modality response against its prototype.
inline Tensor score(const Tensor& response_row, const Tensor& prototype_row, const ScorerParams& p) {
    if (response_row.rows() != 1 || prototype_row.rows() != 1 ||
        response_row.cols() != prototype_row.cols())
        throw SchemaError("score: expected two 1xd vectors, got " + response_row.shape() + " and " +
                          prototype_row.shape());
    Tensor joint = concat({response_row, prototype_row}, 1);
    return linear(relu(linear(joint, p.hidden)), p.out);
}

struct SelectionOutput {
    Tensor scores;  // K x 3 raw reliabilities, columns (t, a, v)
    Tensor alpha;   // K x 3 row-softmax of scores
    Tensor fused;   // K x d convex combination per slot
};

namespace detail {

inline Tensor fuse_with_alpha(const std::array<Tensor, 3>& responses, const Tensor& alpha) {
    Tensor fused;
    for (Modality m : kAllModalities) {
        Tensor weighted = mul(responses[m], slice_cols(alpha, static_cast<std::size_t>(m), 1));
        fused = fused.defined() ? add(fused, weighted) : weighted;
    }
    return fused;
}

}  // namespace detail

// Per-slot modality weights via softmax over the three reliability scores,
// then the alpha-weighted sum of the aligned responses. `banks` carries the
// prototype matrix each modality was extracted with; with a shared bank all
// three entries are the same tensor.
inline SelectionOutput select_and_fuse(const std::array<Tensor, 3>& responses,
                                       const std::array<Tensor, 3>& banks, const ScorerParams& p) {
    const std::size_t k = responses[kText].rows();
    for (Modality m : kAllModalities)
        if (responses[m].rows() != k || responses[m].cols() != banks[m].cols() ||
            banks[m].rows() != k)
            throw SchemaError("select_and_fuse: response/bank shape mismatch at " +
                              std::string(modality_name(m)));
    std::vector<Tensor> cols;
    cols.reserve(3);
    for (Modality m : kAllModalities) {
        Tensor joint = concat({responses[m], banks[m]}, 1);  // K x 2d
        cols.push_back(linear(relu(linear(joint, p.hidden)), p.out));  // K x 1
    }
    SelectionOutput out;
    out.scores = concat(cols, 1);
    out.alpha = softmax_rows(out.scores);
    out.fused = detail::fuse_with_alpha(responses, out.alpha);
    return out;
}

inline SelectionOutput select_and_fuse(const std::array<Tensor, 3>& responses, const Tensor& bank,
                                       const ScorerParams& p) {
    return select_and_fuse(responses, std::array<Tensor, 3>{bank, bank, bank}, p);
}

// Ablation substitute: fixed uniform weights, same fusion rule.
inline SelectionOutput uniform_fuse(const std::array<Tensor, 3>& responses) {
    const std::size_t k = responses[kText].rows();
    SelectionOutput out;
    out.scores = Tensor::zeros(k, 3);
    out.alpha = Tensor::filled(k, 3, real(1.0 / 3.0));
    out.fused = detail::fuse_with_alpha(responses, out.alpha);
    return out;
}

}  // namespace protosent
