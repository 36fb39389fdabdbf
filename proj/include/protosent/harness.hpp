#pragma once

#include <string>
#include <vector>

#include "protosent/gradcheck.hpp"
#include "protosent/trainer.hpp"

namespace protosent {

struct FullModelCheckReport {
    double max_rel_err = 0.0;
    std::size_t entries_checked = 0;
    bool pass = false;
};

// End-to-end derivative check: the total training loss of a small model on a
// small batch, differentiated against 20 randomly chosen parameter entries.
inline FullModelCheckReport run_full_model_gradient_check(std::uint64_t seed = 0,
                                                          std::size_t entries = 20,
                                                          double tolerance = 1e-4) {
    Config cfg;
    cfg.prototypes = 4;
    cfg.hidden_dim = 16;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.dropout = 0.0;
    cfg.max_seq_len = 12;
    cfg.seed = seed;

    SynthSpec spec;
    spec.seed = seed + 1;
    spec.n_per_split = {4, 1, 1};
    spec.len_ranges = {{{2, 5}, {2, 5}, {2, 5}}};
    spec.feature_widths = {5, 4, 6};
    spec.noise_sigma = 0.2;
    Dataset ds = generate_synthetic(spec);
    Batch batch = make_batch(ds.split(kTrain));

    Model model = build_variant(cfg, spec.feature_widths);
    auto params = model.parameters();
    std::vector<Tensor> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(p.tensor);

    Rng pick(seed + 2);
    std::vector<std::pair<std::size_t, std::size_t>> chosen;
    for (std::size_t i = 0; i < entries; ++i) {
        const std::size_t li = pick.uniform_int(leaves.size());
        chosen.emplace_back(li, pick.uniform_int(leaves[li].numel()));
    }

    FullModelCheckReport report;
    report.entries_checked = entries;
    report.max_rel_err = check_gradient_entries(
        leaves, chosen, [&] { return batch_loss(model, batch, false, nullptr).total_tensor; });
    report.pass = report.max_rel_err < tolerance;
    return report;
}

struct AblationRow {
    std::string variant;
    std::size_t param_count = 0;
    double final_train_loss = 0.0;
    std::uint64_t steps_run = 0;
    MetricReport test;
};

inline Config config_for_variant(Config base, Variant v) {
    base.no_spb = v == Variant::no_spb;
    base.no_selection = v == Variant::no_selection;
    base.no_fine_path = v == Variant::no_fine_path;
    base.no_gates = v == Variant::no_gates;
    base.no_shared_proto = v == Variant::no_shared_proto;
    return base;
}

inline constexpr std::array<Variant, 6> kAllVariants{Variant::full,         Variant::no_spb,
                                                     Variant::no_selection, Variant::no_fine_path,
                                                     Variant::no_gates,     Variant::no_shared_proto};

// Trains the full model and all five single-component ablations on the same
// seed and dataset, reporting parameter counts and test metrics per row.
inline std::vector<AblationRow> run_ablation(const Config& base, const Dataset& ds,
                                             const std::function<void(const AblationRow&)>& on_row = {},
                                             const TrainOptions& train_opts = {}) {
    std::vector<AblationRow> rows;
    for (Variant v : kAllVariants) {
        const Config cfg = config_for_variant(base, v);
        TrainResult res = train(cfg, ds, nullptr, train_opts);
        Model best = restore_model(res.best);
        AblationRow row;
        row.variant = variant_name(v);
        row.param_count = best.parameter_count();
        row.final_train_loss = res.log.empty() ? 0.0 : res.log.back().reg;
        row.test = evaluate_split(best, ds, kTest);
        row.steps_run = res.log.empty() ? 0 : res.log.back().step;
        if (on_row) on_row(row);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace protosent
