#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "protosent/checkpoint.hpp"
#include "protosent/metrics.hpp"
#include "protosent/svg.hpp"

namespace protosent {

// Which modalities to blank out during evaluation. Masked modalities have
// their raw feature matrices replaced by zeros of the same shape before
// encoding; the validity masks are untouched. At least one modality must
// remain.
struct MaskSpec {
    std::array<bool, 3> masked{false, false, false};

    std::size_t count() const {
        return std::size_t(masked[0]) + std::size_t(masked[1]) + std::size_t(masked[2]);
    }

    void validate() const {
        if (count() >= 3) throw ConfigError("mask would remove all three modalities");
    }

    std::string to_string() const {
        std::string out;
        for (Modality m : kAllModalities)
            if (masked[m]) {
                if (!out.empty()) out += ',';
                out += modality_letter(m);
            }
        return out.empty() ? "none" : out;
    }

    // Parses forms like "t", "a,v", "" (empty -> nothing masked).
    static MaskSpec parse(const std::string& text) {
        MaskSpec spec;
        std::string token;
        auto apply = [&](const std::string& tok) {
            if (tok.empty()) return;
            if (tok == "t" || tok == "text") spec.masked[kText] = true;
            else if (tok == "a" || tok == "audio") spec.masked[kAudio] = true;
            else if (tok == "v" || tok == "visual") spec.masked[kVisual] = true;
            else throw ConfigError("unknown modality in mask: '" + tok + "'");
        };
        for (char ch : text) {
            if (ch == ',') {
                apply(token);
                token.clear();
            } else if (!std::isspace(static_cast<unsigned char>(ch))) {
                token += ch;
            }
        }
        apply(token);
        spec.validate();
        return spec;
    }
};

inline BatchItem apply_mask(BatchItem item, const MaskSpec& mask) {
    for (Modality m : kAllModalities)
        if (mask.masked[m])
            std::fill(item.mods[m].data.begin(), item.mods[m].data.end(), real(0));
    return item;
}

// Forward passes over a sample list (no dropout, no gradients consumed).
inline std::vector<double> predict_split(const Model& model,
                                         const std::vector<const Sample*>& samples,
                                         const MaskSpec& mask = {},
                                         std::size_t batch_size = 32) {
    std::vector<double> preds;
    preds.reserve(samples.size());
    BatchIterator it(samples, batch_size, nullptr, false);
    while (auto batch = it.next()) {
        for (const BatchItem& item : *batch) {
            const BatchItem masked = mask.count() ? apply_mask(item, mask) : item;
            preds.push_back(model.forward(masked, false, nullptr).prediction.item());
        }
    }
    return preds;
}

inline MetricReport evaluate_split(const Model& model, const Dataset& ds, Split split,
                                   const MaskSpec& mask = {}) {
    const auto samples = ds.split(split);
    const auto preds = predict_split(model, samples, mask);
    std::vector<double> labels;
    labels.reserve(samples.size());
    for (const Sample* s : samples) labels.push_back(s->label);
    return compute_metrics(preds, labels, ds.manifest.score_range);
}

// Missing-modality protocol over the test split.
inline MetricReport eval_masked(const Model& model, const Dataset& ds, const MaskSpec& mask) {
    mask.validate();
    return evaluate_split(model, ds, kTest, mask);
}

// Per-sample analysis record: label, prediction, every layer's gate triple,
// and the K x 3 selection weights.
struct TraceRecord {
    std::string id;
    double label = 0.0;
    double prediction = 0.0;
    std::vector<std::array<double, 3>> gates;  // one per gated layer
    std::vector<std::array<double, 3>> alpha;  // one per slot
};

inline std::vector<TraceRecord> extract_traces(const Model& model, const Dataset& ds,
                                               Split split = kTest) {
    std::vector<TraceRecord> records;
    for (const Sample* s : ds.split(split)) {
        const BatchItem item = make_batch({s}).front();
        ModelOutput out = model.forward(item, false, nullptr);
        TraceRecord rec;
        rec.id = s->id;
        rec.label = s->label;
        rec.prediction = out.prediction.item();
        rec.gates = out.trace.gates;
        for (std::size_t k = 0; k < out.alpha.rows(); ++k)
            rec.alpha.push_back({out.alpha.at(k, 0), out.alpha.at(k, 1), out.alpha.at(k, 2)});
        records.push_back(std::move(rec));
    }
    return records;
}

// Serialization boundary re-asserts the structural invariants: gates strictly
// inside (0,1) and selection rows summing to 1.
inline void write_traces_jsonl(const std::string& path, const std::vector<TraceRecord>& records) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write trace file: " + path);
    for (const auto& rec : records) {
        for (const auto& g : rec.gates)
            for (double v : g)
                if (!(v > 0.0 && v < 1.0))
                    throw NumericError("trace: gate value " + std::to_string(v) +
                                       " outside (0,1) for sample " + rec.id);
        for (const auto& row : rec.alpha) {
            const double sum = row[0] + row[1] + row[2];
            if (std::abs(sum - 1.0) > 1e-6)
                throw NumericError("trace: selection row sums to " + std::to_string(sum) +
                                   " for sample " + rec.id);
        }
        nlohmann::json j{{"id", rec.id},
                         {"label", rec.label},
                         {"prediction", rec.prediction},
                         {"gates", rec.gates},
                         {"alpha", rec.alpha}};
        os << j.dump() << '\n';
    }
}

// One SVG per layer: box plots of the three modality gates, split by label
// sign (non-negative vs negative).
inline void write_gate_plots(const std::string& dir, const std::vector<TraceRecord>& records) {
    if (records.empty() || records.front().gates.empty()) return;
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::size_t layers = records.front().gates.size();
    const char* group_names[6] = {"text+", "text-", "audio+", "audio-", "visual+", "visual-"};
    const char* fills[2] = {"#7fb3d5", "#f1948a"};
    for (std::size_t l = 0; l < layers; ++l) {
        std::array<std::vector<double>, 6> groups;
        for (const auto& rec : records)
            for (int m = 0; m < 3; ++m)
                groups[2 * m + (rec.label >= 0.0 ? 0 : 1)].push_back(rec.gates[l][m]);

        const double w = 460, h = 260, left = 50, bottom = h - 40, top = 20;
        SvgCanvas svg(w, h);
        auto ycoord = [&](double gate) { return bottom - gate * (bottom - top); };
        svg.line(left, top, left, bottom, "black");
        svg.line(left, bottom, w - 10, bottom, "black");
        for (int tick = 0; tick <= 4; ++tick) {
            const double gv = tick / 4.0;
            svg.line(left - 4, ycoord(gv), left, ycoord(gv), "black");
            svg.text(left - 8, ycoord(gv) + 4, std::to_string(tick * 25 / 100.0).substr(0, 4), 10,
                     "end");
        }
        for (int g = 0; g < 6; ++g) {
            const BoxStats s = box_stats(groups[g]);
            if (s.empty) continue;
            const double cx = left + 30 + g * 62;
            const double bw = 34;
            svg.line(cx, ycoord(s.lo), cx, ycoord(s.q1), "black");
            svg.line(cx, ycoord(s.q3), cx, ycoord(s.hi), "black");
            svg.rect(cx - bw / 2, ycoord(s.q3), bw, ycoord(s.q1) - ycoord(s.q3), fills[g % 2],
                     "black");
            svg.line(cx - bw / 2, ycoord(s.median), cx + bw / 2, ycoord(s.median), "black", 2.0);
            svg.text(cx, bottom + 16, group_names[g], 11);
        }
        svg.text(w / 2, 14, "gate distribution, layer " + std::to_string(l + 1), 13);
        svg.save((fs::path(dir) / ("gates_layer" + std::to_string(l + 1) + ".svg")).string());
    }
}

}  // namespace protosent
