// Command-line front end: data generation, training, evaluation, the
// missing-modality protocol, the ablation table, trace extraction, and the
// gradient-check suite.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "protosent/protosent.hpp"

namespace {

using namespace protosent;

// Accuracies and F1 are stored in [0,1] and displayed x100.
void print_report(const MetricReport& r, const std::string& title) {
    std::printf("%s\n", title.c_str());
    std::printf("  n        %zu (np subset %zu)\n", r.n, r.n_np);
    std::printf("  mae      %.4f\n", r.mae);
    std::printf("  corr     %.4f%s\n", r.corr, r.corr_defined ? "" : " (undefined, flagged 0)");
    std::printf("  acc-%d    %.2f\n", r.multi_classes, 100.0 * r.acc_multi);
    std::printf("  acc-2    %.2f / %.2f (nn/np)\n", 100.0 * r.acc2_nn, 100.0 * r.acc2_np);
    std::printf("  f1       %.2f / %.2f (nn/np)\n", 100.0 * r.f1_nn, 100.0 * r.f1_np);
}

void append_jsonl(const std::string& path, const nlohmann::json& record) {
    std::ofstream os(path, std::ios::app);
    if (!os) throw IoError("cannot write report file: " + path);
    os << record.dump() << '\n';
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir) {
    SynthSpec spec = SynthSpec::load(spec_path);
    Dataset ds = generate_synthetic(spec);
    save_dataset(out_dir, ds);
    std::printf("wrote %zu samples (%zu/%zu/%zu train/valid/test) to %s\n", ds.samples.size(),
                ds.manifest.splits[kTrain].size(), ds.manifest.splits[kValid].size(),
                ds.manifest.splits[kTest].size(), out_dir.c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_path, std::string log_path) {
    Config cfg = Config::load(config_path);
    Dataset ds = load_dataset(data_dir);
    if (log_path.empty()) log_path = out_path + ".log.jsonl";

    TrainOptions opts;
    opts.on_epoch = [](std::uint64_t step, double valid_mae) {
        std::fprintf(stderr, "epoch done at step %llu, valid mae %.4f\n",
                     static_cast<unsigned long long>(step), valid_mae);
    };
    TrainResult res = train(cfg, ds, nullptr, opts);
    write_train_log(log_path, res.log);
    save_checkpoint(out_path, res.best);
    std::printf("trained %zu steps; best valid mae %.4f at step %llu\n", res.log.size(),
                res.best_valid_mae, static_cast<unsigned long long>(res.best_step));
    std::printf("checkpoint: %s\nlog: %s\n", out_path.c_str(), log_path.c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& split,
             const std::string& report_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model model = restore_model(ckpt);
    Dataset ds = load_dataset(data_dir);
    Split sp = split == "train" ? kTrain : split == "valid" ? kValid : kTest;
    MetricReport r = evaluate_split(model, ds, sp);
    print_report(r, "evaluation on " + split + " split");
    nlohmann::json record = r.to_json();
    record["split"] = split;
    record["checkpoint"] = ckpt_path;
    append_jsonl(report_path, record);
    return 0;
}

int cmd_eval_masked(const std::string& ckpt_path, const std::string& data_dir,
                    const std::string& mask_text, const std::string& report_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model model = restore_model(ckpt);
    Dataset ds = load_dataset(data_dir);
    MaskSpec mask = MaskSpec::parse(mask_text);
    MetricReport r = eval_masked(model, ds, mask);
    print_report(r, "test split with masked modalities: " + mask.to_string());
    nlohmann::json record = r.to_json();
    record["mask"] = mask.to_string();
    record["checkpoint"] = ckpt_path;
    append_jsonl(report_path, record);
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& data_dir,
               const std::string& report_path) {
    Config cfg = Config::load(config_path);
    Dataset ds = load_dataset(data_dir);
    std::printf("%-16s %10s %12s %8s %8s %8s %8s\n", "variant", "params", "train_loss", "mae",
                "corr", "acc", "f1_nn");
    auto rows = run_ablation(cfg, ds, [&](const AblationRow& row) {
        std::printf("%-16s %10zu %12.4f %8.4f %8.4f %8.4f %8.4f\n", row.variant.c_str(),
                    row.param_count, row.final_train_loss, row.test.mae, row.test.corr,
                    row.test.acc_multi, row.test.f1_nn);
        std::fflush(stdout);
        nlohmann::json record = row.test.to_json();
        record["variant"] = row.variant;
        record["param_count"] = row.param_count;
        record["final_train_loss"] = row.final_train_loss;
        append_jsonl(report_path, record);
    });
    return rows.size() == 6 ? 0 : 1;
}

int cmd_trace(const std::string& ckpt_path, const std::string& data_dir, const std::string& out_path,
              const std::string& plots_dir) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model model = restore_model(ckpt);
    Dataset ds = load_dataset(data_dir);
    auto records = extract_traces(model, ds, kTest);
    write_traces_jsonl(out_path, records);
    std::printf("wrote %zu trace records to %s\n", records.size(), out_path.c_str());
    if (!plots_dir.empty()) {
        write_gate_plots(plots_dir, records);
        std::printf("gate distribution plots in %s\n", plots_dir.c_str());
    }
    return 0;
}

int cmd_gradcheck() {
    bool all_pass = true;
    for (const auto& report : run_op_gradient_checks()) {
        std::printf("[%s] %-18s max rel err %.3e\n", report.pass ? "PASS" : "FAIL",
                    report.name.c_str(), report.max_rel_err);
        all_pass &= report.pass;
    }
    const FullModelCheckReport full = run_full_model_gradient_check();
    std::printf("[%s] %-18s max rel err %.3e over %zu sampled parameters\n",
                full.pass ? "PASS" : "FAIL", "full_model", full.max_rel_err, full.entries_checked);
    all_pass &= full.pass;
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prototype-bank multimodal sentiment regression toolkit"};
    app.require_subcommand(1);

    std::string spec_path, out_dir;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen->add_option("--spec", spec_path, "synthesis spec (json)")->required();
    gen->add_option("--out", out_dir, "output dataset directory")->required();

    std::string config_path, data_dir, ckpt_out, log_path;
    auto* tr = app.add_subcommand("train", "train a model");
    tr->add_option("--config", config_path, "config file (json)")->required();
    tr->add_option("--data", data_dir, "dataset directory")->required();
    tr->add_option("--out", ckpt_out, "output checkpoint path")->required();
    tr->add_option("--log", log_path, "training log path (default: <out>.log.jsonl)");

    std::string ckpt_path, split = "test", report_path = "eval_report.jsonl";
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    ev->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    ev->add_option("--data", data_dir, "dataset directory")->required();
    ev->add_option("--split", split, "split to evaluate (train|valid|test)")
        ->check(CLI::IsMember({"train", "valid", "test"}));
    ev->add_option("--report", report_path, "jsonl report path");

    std::string mask_text, masked_report = "eval_masked_report.jsonl";
    auto* em = app.add_subcommand("eval-masked", "evaluate with zeroed modalities");
    em->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    em->add_option("--data", data_dir, "dataset directory")->required();
    em->add_option("--mask", mask_text, "modalities to zero, e.g. t or a,v")->required();
    em->add_option("--report", masked_report, "jsonl report path");

    std::string ablate_report = "ablate_report.jsonl";
    auto* ab = app.add_subcommand("ablate", "train the full model and all five ablations");
    ab->add_option("--config", config_path, "config file (json)")->required();
    ab->add_option("--data", data_dir, "dataset directory")->required();
    ab->add_option("--report", ablate_report, "jsonl report path");

    std::string trace_out, plots_dir;
    auto* tc = app.add_subcommand("trace", "extract gate/selection traces");
    tc->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    tc->add_option("--data", data_dir, "dataset directory")->required();
    tc->add_option("--out", trace_out, "output jsonl path")->required();
    tc->add_option("--plots", plots_dir, "emit per-layer gate plots into this directory");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference checks for every op and the full model");
    (void)gc;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(spec_path, out_dir);
        if (tr->parsed()) return cmd_train(config_path, data_dir, ckpt_out, log_path);
        if (ev->parsed()) return cmd_eval(ckpt_path, data_dir, split, report_path);
        if (em->parsed()) return cmd_eval_masked(ckpt_path, data_dir, mask_text, masked_report);
        if (ab->parsed()) return cmd_ablate(config_path, data_dir, ablate_report);
        if (tc->parsed()) return cmd_trace(ckpt_path, data_dir, trace_out, plots_dir);
        if (gc->parsed()) return cmd_gradcheck();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
