// Minimal end-to-end use of the library API: synthesize a text-dominant
// dataset, train a small model, inspect metrics, selection weights, and
// layer gates.

#include <cstdio>

#include "protosent/protosent.hpp"

using namespace protosent;

int main() {
    SynthSpec spec;
    spec.seed = 7;
    spec.n_per_split = {96, 24, 24};
    spec.weights = {0.8, 0.1, 0.1};  // text carries most of the label
    spec.noise_sigma = 0.1;
    Dataset ds = generate_synthetic(spec);

    Config cfg;
    cfg.prototypes = 4;
    cfg.hidden_dim = 32;
    cfg.heads = 4;
    cfg.layers = 2;
    cfg.batch_size = 32;
    cfg.learning_rate = 1.5e-3;
    cfg.warmup_steps = 30;
    cfg.total_steps = 300;
    cfg.seed = 1;

    TrainResult result = train(cfg, ds);
    std::printf("best valid mae %.4f at step %llu\n", result.best_valid_mae,
                static_cast<unsigned long long>(result.best_step));

    Model model = restore_model(result.best);
    MetricReport test = evaluate_split(model, ds, kTest);
    std::printf("test: mae %.4f corr %.4f acc-%d %.1f%%\n", test.mae, test.corr,
                test.multi_classes, 100.0 * test.acc_multi);

    // how much does the model lean on each modality?
    for (const char* mask : {"t", "a", "v"})
        std::printf("masking %s -> mae %.4f\n", mask,
                    eval_masked(model, ds, MaskSpec::parse(mask)).mae);

    // per-slot selection weights and per-layer gates for one sample
    const Sample* sample = ds.split(kTest).front();
    ModelOutput out = model.forward(make_batch({sample}).front(), false, nullptr);
    std::printf("sample %s: label %+.2f predicted %+.2f\n", sample->id.c_str(), sample->label,
                out.prediction.item());
    for (std::size_t k = 0; k < out.alpha.rows(); ++k)
        std::printf("  slot %zu alpha (t,a,v) = %.2f %.2f %.2f\n", k, out.alpha.at(k, 0),
                    out.alpha.at(k, 1), out.alpha.at(k, 2));
    for (std::size_t l = 0; l < out.trace.gates.size(); ++l)
        std::printf("  layer %zu gates (t,a,v) = %.2f %.2f %.2f\n", l + 1,
                    out.trace.gates[l][0], out.trace.gates[l][1], out.trace.gates[l][2]);
    return 0;
}
