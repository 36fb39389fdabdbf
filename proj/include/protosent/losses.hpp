#pragma once

#include <vector>

#include "protosent/layers.hpp"

namespace protosent {

// Slot-level auxiliary supervision: a linear map d -> 1 applied to every
// fused slot. Shared across slots by default; per-slot heads are available
// for study.
struct AuxHeadParams {
    std::vector<LinearParams> heads;  // size 1 (shared) or K (per slot)
    bool per_slot = false;
};

inline AuxHeadParams make_aux_head(std::size_t d, std::size_t prototypes, bool per_slot, Rng& rng) {
    AuxHeadParams p;
    p.per_slot = per_slot;
    const std::size_t n = per_slot ? prototypes : 1;
    for (std::size_t i = 0; i < n; ++i) p.heads.push_back(make_linear(d, 1, rng));
    return p;
}

// K x 1 predictions, one per fused slot.
inline Tensor aux_predictions(const Tensor& fused, const AuxHeadParams& p) {
    if (!p.per_slot) return linear(fused, p.heads.front());
    if (p.heads.size() != fused.rows())
        throw SchemaError("aux_predictions: " + std::to_string(p.heads.size()) + " heads for " +
                          std::to_string(fused.rows()) + " slots");
    std::vector<Tensor> rows;
    rows.reserve(p.heads.size());
    for (std::size_t k = 0; k < p.heads.size(); ++k)
        rows.push_back(linear(row(fused, k), p.heads[k]));
    return concat(rows, 0);
}

// Mean squared error over the batch.
inline Tensor reg_loss(const Tensor& predictions, const Tensor& labels) {
    if (predictions.numel() == 0 || labels.numel() == 0)
        throw ContractError("reg_loss: empty batch");
    if (predictions.rows() != labels.rows() || predictions.cols() != labels.cols())
        throw DimensionError("reg_loss: shape mismatch " + predictions.shape() + " vs " +
                             labels.shape());
    return mean_all(square(sub(predictions, labels)));
}

// Mean over slots of the squared error of each slot's auxiliary prediction
// against the sample label.
inline Tensor aux_loss(const Tensor& fused, const AuxHeadParams& head, double label) {
    Tensor preds = aux_predictions(fused, head);
    return mean_all(square(sub(preds, Tensor::scalar(label))));
}

inline constexpr double kPrototypeNormGuard = 1e-8;

// Diversity penalty: squared Frobenius distance between the Gram matrix of
// the row-normalized bank and the identity. Zero iff rows are orthonormal
// after normalization.
inline Tensor div_loss(const Tensor& bank) {
    const std::size_t k = bank.rows();
    Tensor norms2 = sum_axis(square(bank), 1);  // K x 1
    for (std::size_t r = 0; r < k; ++r)
        if (norms2.values()[r] <= kPrototypeNormGuard * kPrototypeNormGuard)
            throw DegeneratePrototypeError("div_loss: prototype row " + std::to_string(r) +
                                           " has norm below " + std::to_string(kPrototypeNormGuard));
    Tensor normed = div(bank, sqrt_elem(norms2));  // row-wise unit norm
    Tensor gram = matmul(normed, transpose(normed));
    std::vector<real> eye(k * k, real(0));
    for (std::size_t i = 0; i < k; ++i) eye[i * k + i] = real(1);
    return sum_all(square(sub(gram, Tensor::from_values(k, k, std::move(eye)))));
}

struct LossBreakdown {
    double reg = 0.0;
    double aux = 0.0;
    double div = 0.0;
    double total = 0.0;
    double lambda_aux = 0.0;
    double lambda_div = 0.0;
    Tensor total_tensor;
};

inline LossBreakdown total_loss(const Tensor& reg, const Tensor& aux, const Tensor& div,
                                double lambda_aux, double lambda_div) {
    if (lambda_aux < 0.0 || lambda_div < 0.0) throw ContractError("total_loss: lambdas must be >= 0");
    LossBreakdown b;
    b.reg = reg.item();
    b.aux = aux.item();
    b.div = div.item();
    b.lambda_aux = lambda_aux;
    b.lambda_div = lambda_div;
    b.total_tensor = add(reg, add(scale(aux, lambda_aux), scale(div, lambda_div)));
    b.total = b.total_tensor.item();
    return b;
}

}  // namespace protosent
