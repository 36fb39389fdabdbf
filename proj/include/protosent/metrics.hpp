#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "protosent/errors.hpp"

namespace protosent {

// Evaluation summary. Multi-class accuracy is 7-way for wide score ranges
// (clamp to [-3,3], round half away from zero) and 3-way
// (negative/neutral/positive) for the [-1,1] range. Binary accuracy and F1
// come in two conventions: NN treats zero labels as non-negative and keeps
// them; NP drops zero-labeled samples entirely. F1 is support-weighted.
struct MetricReport {
    double mae = 0.0;
    double corr = 0.0;
    bool corr_defined = true;  // false when either side is constant (corr reported as 0)
    double acc_multi = 0.0;
    int multi_classes = 7;
    double acc2_nn = 0.0, f1_nn = 0.0;
    double acc2_np = 0.0, f1_np = 0.0;
    std::size_t n = 0;
    std::size_t n_np = 0;

    nlohmann::json to_json() const {
        nlohmann::json j{{"mae", mae},
                         {"corr", corr},
                         {"corr_defined", corr_defined},
                         {"acc2_nn", acc2_nn},
                         {"f1_nn", f1_nn},
                         {"acc2_np", acc2_np},
                         {"f1_np", f1_np},
                         {"n", n},
                         {"n_np", n_np}};
        j[multi_classes == 7 ? "acc7" : "acc3"] = acc_multi;
        return j;
    }
};

namespace detail {

inline constexpr double kZeroLabelTol = 1e-6;

inline int bin7(double v) {
    return static_cast<int>(std::round(std::clamp(v, -3.0, 3.0)));  // half away from zero
}

inline int bin3_label(double y) {
    if (y < -kZeroLabelTol) return 0;
    if (y > kZeroLabelTol) return 2;
    return 1;
}

inline int bin3_pred(double p) {
    if (p < -1.0 / 3.0) return 0;
    if (p > 1.0 / 3.0) return 2;
    return 1;  // nearest of {-1, 0, 1}
}

// Binary accuracy plus support-weighted F1 over index pairs.
struct BinaryScores {
    double accuracy = 0.0;
    double f1 = 0.0;
};

template <typename ClassOf>
BinaryScores binary_scores(const std::vector<double>& preds, const std::vector<double>& labels,
                           const std::vector<std::size_t>& idx, ClassOf label_class,
                           ClassOf pred_class) {
    // confusion[label][pred]
    double confusion[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i : idx) confusion[label_class(labels[i])][pred_class(preds[i])] += 1.0;
    const double total = static_cast<double>(idx.size());
    BinaryScores out;
    out.accuracy = (confusion[0][0] + confusion[1][1]) / total;
    double f1_weighted = 0.0;
    for (int cls = 0; cls < 2; ++cls) {
        const double support = confusion[cls][0] + confusion[cls][1];
        if (support == 0.0) continue;
        const double tp = confusion[cls][cls];
        const double predicted = confusion[0][cls] + confusion[1][cls];
        const double precision = predicted > 0 ? tp / predicted : 0.0;
        const double recall = tp / support;
        const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
        f1_weighted += f1 * (support / total);
    }
    out.f1 = f1_weighted;
    return out;
}

}  // namespace detail

inline MetricReport compute_metrics(const std::vector<double>& preds,
                                    const std::vector<double>& labels,
                                    std::pair<double, double> score_range) {
    if (preds.empty() || preds.size() != labels.size())
        throw ContractError("compute_metrics: need equal nonempty prediction/label lists");
    const std::size_t n = preds.size();
    MetricReport r;
    r.n = n;

    double mae = 0.0;
    for (std::size_t i = 0; i < n; ++i) mae += std::abs(preds[i] - labels[i]);
    r.mae = mae / static_cast<double>(n);

    // Pearson correlation; degenerate (constant) inputs are flagged and
    // reported as 0.
    double mp = 0.0, ml = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mp += preds[i];
        ml += labels[i];
    }
    mp /= static_cast<double>(n);
    ml /= static_cast<double>(n);
    double cov = 0.0, vp = 0.0, vl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (preds[i] - mp) * (labels[i] - ml);
        vp += (preds[i] - mp) * (preds[i] - mp);
        vl += (labels[i] - ml) * (labels[i] - ml);
    }
    if (vp <= 1e-24 || vl <= 1e-24) {
        r.corr = 0.0;
        r.corr_defined = false;
    } else {
        r.corr = cov / std::sqrt(vp * vl);
    }

    // Multi-class accuracy by score range: 7 bins for wide ranges, 3 for
    // [-1,1]-style ranges.
    r.multi_classes = score_range.second > 1.5 ? 7 : 3;
    std::size_t multi_hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool hit = r.multi_classes == 7
                             ? detail::bin7(preds[i]) == detail::bin7(labels[i])
                             : detail::bin3_pred(preds[i]) == detail::bin3_label(labels[i]);
        multi_hits += hit ? 1 : 0;
    }
    r.acc_multi = static_cast<double>(multi_hits) / static_cast<double>(n);

    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    std::vector<std::size_t> nonzero;
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(labels[i]) > detail::kZeroLabelTol) nonzero.push_back(i);
    r.n_np = nonzero.size();

    auto nn_class = [](double v) { return v < 0.0 ? 0 : 1; };
    const auto nn = detail::binary_scores(preds, labels, all, +nn_class, +nn_class);
    r.acc2_nn = nn.accuracy;
    r.f1_nn = nn.f1;
    if (!nonzero.empty()) {
        const auto np = detail::binary_scores(preds, labels, nonzero, +nn_class, +nn_class);
        r.acc2_np = np.accuracy;
        r.f1_np = np.f1;
    }
    return r;
}

}  // namespace protosent
