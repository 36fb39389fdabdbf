#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "protosent/evaluation.hpp"

namespace protosent {

struct TrainLogRecord {
    std::uint64_t step = 0;
    double reg = 0, aux = 0, div = 0, total = 0;
    double lr = 0;
    double grad_norm = 0;

    nlohmann::json to_json() const {
        return nlohmann::json{{"step", step},   {"l_reg", reg}, {"l_aux", aux},
                              {"l_div", div},   {"total", total}, {"lr", lr},
                              {"grad_norm", grad_norm}};
    }
};

struct TrainOptions {
    // Stop at this epoch boundary (after its validation pass); -1 runs to
    // total_steps. Resume from the returned `last` checkpoint replays the
    // uninterrupted run exactly.
    int stop_after_epochs = -1;
    // Early stop once a step's training regression loss drops below this.
    double stop_below_train_loss = -std::numeric_limits<double>::infinity();
    // Called after each optimizer step with the latest record.
    std::function<void(const TrainLogRecord&)> on_step;
    // Called after each epoch's validation pass.
    std::function<void(std::uint64_t /*step*/, double /*valid_mae*/)> on_epoch;
};

struct TrainResult {
    Checkpoint best;  // best-by-validation-MAE state
    Checkpoint last;  // state at the stopping point (epoch boundary)
    std::vector<TrainLogRecord> log;
    std::vector<std::pair<std::uint64_t, double>> valid_curve;
    double best_valid_mae = std::numeric_limits<double>::infinity();
    std::uint64_t best_step = 0;
};

// One training step over a padded batch: mean regression loss across the
// batch, slot-level auxiliary loss averaged the same way, diversity penalty
// on the bank(s).
inline LossBreakdown batch_loss(const Model& model, const Batch& batch, bool training, Rng* rng) {
    if (batch.empty()) throw ContractError("batch_loss: empty batch");
    std::vector<Tensor> preds;
    std::vector<real> labels;
    Tensor aux_sum;
    preds.reserve(batch.size());
    for (const BatchItem& item : batch) {
        ModelOutput out = model.forward(item, training, rng);
        preds.push_back(out.prediction);
        labels.push_back(static_cast<real>(item.label));
        Tensor a = aux_loss(out.fused, model.aux, item.label);
        aux_sum = aux_sum.defined() ? add(aux_sum, a) : a;
    }
    Tensor predictions = concat(preds, 0);
    const std::size_t n = labels.size();
    Tensor label_tensor = Tensor::from_values(n, 1, std::move(labels));
    Tensor reg = reg_loss(predictions, label_tensor);
    Tensor aux = scale(aux_sum, 1.0 / static_cast<double>(batch.size()));
    return total_loss(reg, aux, model.diversity_loss(), model.cfg.lambda_aux, model.cfg.lambda_div);
}

inline TrainResult train(const Config& cfg, const Dataset& ds, const Checkpoint* resume = nullptr,
                         const TrainOptions& opts = {}) {
    cfg.validate();
    Model model = resume ? restore_model(*resume)
                         : build_variant(cfg, ds.manifest.feature_widths);
    AdamW opt(model.parameters(), AdamWConfig{0.9, 0.999, 1e-8, cfg.weight_decay});
    Rng shuffle_rng = resume ? Rng::deserialize(resume->shuffle_rng_state) : derive_rng(cfg.seed, 1);
    Rng dropout_rng = resume ? Rng::deserialize(resume->dropout_rng_state) : derive_rng(cfg.seed, 2);
    std::uint64_t step = resume ? resume->step : 0;
    if (resume) restore_optimizer(opt, *resume);

    TrainResult result;
    result.best_valid_mae = resume ? resume->best_valid_mae
                                   : std::numeric_limits<double>::infinity();

    const auto train_samples = ds.split(kTrain);
    if (train_samples.empty()) throw ContractError("train: empty training split");
    const Schedule sched{cfg.warmup_steps, cfg.total_steps, cfg.learning_rate};
    const bool has_valid = !ds.manifest.splits[kValid].empty();

    int epochs_done = 0;
    bool target_reached = false;
    while (step < cfg.total_steps && !target_reached) {
        BatchIterator batches(train_samples, cfg.batch_size, &shuffle_rng, /*shuffle=*/true);
        while (auto batch = batches.next()) {
            if (step >= cfg.total_steps) break;
            ++step;
            model.zero_grads();
            LossBreakdown loss = batch_loss(model, *batch, /*training=*/true, &dropout_rng);
            if (!std::isfinite(loss.total))
                throw NumericError("non-finite loss at step " + std::to_string(step) +
                                   " (batch starting at sample '" + batch->front().id +
                                   "'): reg=" + std::to_string(loss.reg) +
                                   " aux=" + std::to_string(loss.aux) +
                                   " div=" + std::to_string(loss.div));
            backward(loss.total_tensor);
            const double grad_norm = clip_gradients(opt.params(), 1.0);
            const double lr = lr_at(step, sched);
            opt.step(lr);
            TrainLogRecord rec{step, loss.reg, loss.aux, loss.div, loss.total, lr, grad_norm};
            result.log.push_back(rec);
            if (opts.on_step) opts.on_step(rec);
            if (loss.reg < opts.stop_below_train_loss) {
                target_reached = true;
                break;
            }
        }
        ++epochs_done;

        double valid_mae = std::numeric_limits<double>::quiet_NaN();
        if (has_valid) {
            valid_mae = evaluate_split(model, ds, kValid).mae;
            result.valid_curve.emplace_back(step, valid_mae);
            if (valid_mae < result.best_valid_mae) {
                result.best_valid_mae = valid_mae;
                result.best_step = step;
                result.best = make_checkpoint(model, opt, step, result.best_valid_mae, shuffle_rng,
                                              dropout_rng);
            }
        }
        if (opts.on_epoch) opts.on_epoch(step, valid_mae);
        if (opts.stop_after_epochs > 0 && epochs_done >= opts.stop_after_epochs) break;
    }

    result.last = make_checkpoint(model, opt, step, result.best_valid_mae, shuffle_rng, dropout_rng);
    if (!result.best.entries.size()) result.best = result.last;
    return result;
}

inline void write_train_log(const std::string& path, const std::vector<TrainLogRecord>& log) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write training log: " + path);
    for (const auto& rec : log) os << rec.to_json().dump() << '\n';
}

}  // namespace protosent
