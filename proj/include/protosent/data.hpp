#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "protosent/errors.hpp"
#include "protosent/rng.hpp"

namespace protosent {

// Column order (text, audio, visual) is fixed everywhere: selection weights,
// gates, traces, and serialized reports all use this ordering.
enum Modality : int { kText = 0, kAudio = 1, kVisual = 2 };
inline constexpr std::array<Modality, 3> kAllModalities{kText, kAudio, kVisual};

inline const char* modality_name(Modality m) {
    switch (m) {
        case kText: return "text";
        case kAudio: return "audio";
        case kVisual: return "visual";
    }
    return "?";
}

inline char modality_letter(Modality m) { return "tav"[static_cast<int>(m)]; }

struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct Sample {
    std::string id;
    double label = 0.0;
    std::array<FeatureMatrix, 3> feats;  // indexed by Modality
};

enum Split : int { kTrain = 0, kValid = 1, kTest = 2 };
inline constexpr std::array<Split, 3> kAllSplits{kTrain, kValid, kTest};

inline const char* split_name(Split s) {
    switch (s) {
        case kTrain: return "train";
        case kValid: return "valid";
        case kTest: return "test";
    }
    return "?";
}

struct DatasetManifest {
    std::pair<double, double> score_range{-3.0, 3.0};
    std::array<std::size_t, 3> feature_widths{};     // indexed by Modality
    std::array<std::vector<std::string>, 3> splits;  // indexed by Split

    nlohmann::json to_json() const {
        return nlohmann::json{
            {"score_range", {score_range.first, score_range.second}},
            {"feature_widths",
             {{"text", feature_widths[kText]},
              {"audio", feature_widths[kAudio]},
              {"visual", feature_widths[kVisual]}}},
            {"splits", {{"train", splits[kTrain]}, {"valid", splits[kValid]}, {"test", splits[kTest]}}}};
    }
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<Sample> samples;
    std::unordered_map<std::string, std::size_t> by_id;

    const Sample& sample(const std::string& id) const {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw ValidationError("unknown sample id: " + id);
        return samples[it->second];
    }

    std::vector<const Sample*> split(Split s) const {
        std::vector<const Sample*> out;
        out.reserve(manifest.splits[s].size());
        for (const auto& id : manifest.splits[s]) out.push_back(&sample(id));
        return out;
    }
};

namespace detail {

inline FeatureMatrix parse_matrix(const nlohmann::json& j, const char* field, std::size_t expect_width,
                                  std::size_t line_no) {
    const std::string where = "samples.jsonl line " + std::to_string(line_no);
    if (!j.is_array() || j.empty())
        throw SchemaError(where + ": field '" + field + "' must be a non-empty array of rows");
    FeatureMatrix m;
    m.rows = j.size();
    m.cols = expect_width;
    m.data.reserve(m.rows * m.cols);
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != expect_width)
            throw SchemaError(where + ": field '" + field + "' expects width " +
                              std::to_string(expect_width) + ", got " + std::to_string(row.size()));
        for (const auto& v : row) {
            if (!v.is_number()) throw SchemaError(where + ": non-numeric entry in '" + field + "'");
            m.data.push_back(v.get<double>());
        }
    }
    return m;
}

}  // namespace detail

// Loads a dataset directory: manifest.json plus samples.jsonl (one record per
// line). Validation is fail-fast with the offending line in the message.
inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    const fs::path manifest_path = root / "manifest.json";
    const fs::path samples_path = root / "samples.jsonl";
    std::ifstream mf(manifest_path);
    if (!mf) throw IoError("cannot open " + manifest_path.string());
    nlohmann::json mj;
    try {
        mf >> mj;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("manifest.json: " + std::string(e.what()));
    }

    Dataset ds;
    try {
        ds.manifest.score_range = {mj.at("score_range").at(0).get<double>(),
                                   mj.at("score_range").at(1).get<double>()};
        ds.manifest.feature_widths[kText] = mj.at("feature_widths").at("text").get<std::size_t>();
        ds.manifest.feature_widths[kAudio] = mj.at("feature_widths").at("audio").get<std::size_t>();
        ds.manifest.feature_widths[kVisual] = mj.at("feature_widths").at("visual").get<std::size_t>();
        ds.manifest.splits[kTrain] = mj.at("splits").at("train").get<std::vector<std::string>>();
        ds.manifest.splits[kValid] = mj.at("splits").at("valid").get<std::vector<std::string>>();
        ds.manifest.splits[kTest] = mj.at("splits").at("test").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("manifest.json: " + std::string(e.what()));
    }
    const auto [lo, hi] = ds.manifest.score_range;
    if (!(lo < hi)) throw ValidationError("manifest.json: score_range low must be < high");

    std::unordered_set<std::string> seen_split_ids;
    for (Split s : kAllSplits)
        for (const auto& id : ds.manifest.splits[s])
            if (!seen_split_ids.insert(id).second)
                throw ValidationError("splits are not disjoint: duplicate id '" + id + "'");

    std::ifstream sf(samples_path);
    if (!sf) throw IoError("cannot open " + samples_path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(sf, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("samples.jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
        Sample s;
        try {
            s.id = j.at("id").get<std::string>();
            s.label = j.at("label").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("samples.jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
        if (s.label < lo || s.label > hi)
            throw ValidationError("samples.jsonl line " + std::to_string(line_no) + ": label " +
                                  std::to_string(s.label) + " outside score range [" +
                                  std::to_string(lo) + ", " + std::to_string(hi) + "]");
        s.feats[kText] = detail::parse_matrix(j.contains("text") ? j.at("text") : nlohmann::json(),
                                              "text", ds.manifest.feature_widths[kText], line_no);
        s.feats[kAudio] = detail::parse_matrix(j.contains("audio") ? j.at("audio") : nlohmann::json(),
                                               "audio", ds.manifest.feature_widths[kAudio], line_no);
        s.feats[kVisual] = detail::parse_matrix(j.contains("visual") ? j.at("visual") : nlohmann::json(),
                                                "visual", ds.manifest.feature_widths[kVisual], line_no);
        if (ds.by_id.count(s.id))
            throw ValidationError("samples.jsonl line " + std::to_string(line_no) + ": duplicate id '" +
                                  s.id + "'");
        ds.by_id.emplace(s.id, ds.samples.size());
        ds.samples.push_back(std::move(s));
    }

    for (Split sp : kAllSplits)
        for (const auto& id : ds.manifest.splits[sp])
            if (!ds.by_id.count(id))
                throw ValidationError("split '" + std::string(split_name(sp)) +
                                      "' references missing sample id '" + id + "'");
    if (seen_split_ids.size() != ds.samples.size())
        throw ValidationError("samples.jsonl contains records not referenced by any split");
    return ds;
}

inline void save_dataset(const std::string& dir, const Dataset& ds) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream mf(fs::path(dir) / "manifest.json");
        if (!mf) throw IoError("cannot write manifest.json under " + dir);
        mf << ds.manifest.to_json().dump(2) << '\n';
    }
    std::ofstream sf(fs::path(dir) / "samples.jsonl");
    if (!sf) throw IoError("cannot write samples.jsonl under " + dir);
    for (const auto& s : ds.samples) {
        nlohmann::json j{{"id", s.id}, {"label", s.label}};
        for (Modality m : kAllModalities) {
            nlohmann::json rows = nlohmann::json::array();
            const FeatureMatrix& fm = s.feats[m];
            for (std::size_t r = 0; r < fm.rows; ++r) {
                nlohmann::json row = nlohmann::json::array();
                for (std::size_t c = 0; c < fm.cols; ++c) row.push_back(fm.at(r, c));
                rows.push_back(std::move(row));
            }
            j[modality_name(m)] = std::move(rows);
        }
        sf << j.dump() << '\n';
    }
}

// Controls for the synthetic generator. Each modality carries a latent
// scalar; the informativeness weights decide how much of the label each
// modality explains, which gives behavioral tests a known ground truth.
struct SynthSpec {
    std::uint64_t seed = 0;
    std::array<std::size_t, 3> n_per_split{256, 64, 64};  // train, valid, test
    std::array<std::pair<std::size_t, std::size_t>, 3> len_ranges{{{4, 12}, {6, 16}, {4, 10}}};
    std::array<double, 3> weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};  // (t, a, v)
    double noise_sigma = 0.1;
    std::array<std::size_t, 3> feature_widths{8, 6, 10};
    std::pair<double, double> score_range{-3.0, 3.0};

    void validate() const {
        double sum = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw ConfigError("synth weights must be nonnegative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("synth weights must sum to 1");
        if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
        if (!(score_range.first < score_range.second))
            throw ConfigError("score_range low must be < high");
        for (std::size_t i = 0; i < 3; ++i) {
            if (len_ranges[i].first < 1 || len_ranges[i].first > len_ranges[i].second)
                throw ConfigError("len_ranges must satisfy 1 <= min <= max");
            if (feature_widths[i] < 1) throw ConfigError("feature_widths must be >= 1");
            if (n_per_split[i] < 1) throw ConfigError("n_per_split entries must be >= 1");
        }
    }

    nlohmann::json to_json() const {
        return nlohmann::json{
            {"seed", seed},
            {"n_train", n_per_split[0]},
            {"n_valid", n_per_split[1]},
            {"n_test", n_per_split[2]},
            {"len_ranges",
             {{"text", {len_ranges[0].first, len_ranges[0].second}},
              {"audio", {len_ranges[1].first, len_ranges[1].second}},
              {"visual", {len_ranges[2].first, len_ranges[2].second}}}},
            {"weights", weights},
            {"noise_sigma", noise_sigma},
            {"feature_widths",
             {{"text", feature_widths[kText]},
              {"audio", feature_widths[kAudio]},
              {"visual", feature_widths[kVisual]}}},
            {"score_range", {score_range.first, score_range.second}}};
    }

    static SynthSpec from_json(const nlohmann::json& j) {
        SynthSpec s;
        static const std::array<std::string, 9> known{"seed",      "n_train",        "n_valid",
                                                      "n_test",    "len_ranges",     "weights",
                                                      "noise_sigma", "feature_widths", "score_range"};
        for (const auto& [key, value] : j.items()) {
            (void)value;
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw ConfigError("unknown synth spec key: " + key);
        }
        try {
            if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
            if (j.contains("n_train")) s.n_per_split[0] = j.at("n_train").get<std::size_t>();
            if (j.contains("n_valid")) s.n_per_split[1] = j.at("n_valid").get<std::size_t>();
            if (j.contains("n_test")) s.n_per_split[2] = j.at("n_test").get<std::size_t>();
            if (j.contains("len_ranges")) {
                const auto& lr = j.at("len_ranges");
                const char* names[3] = {"text", "audio", "visual"};
                for (int m = 0; m < 3; ++m)
                    if (lr.contains(names[m]))
                        s.len_ranges[m] = {lr.at(names[m]).at(0).get<std::size_t>(),
                                           lr.at(names[m]).at(1).get<std::size_t>()};
            }
            if (j.contains("weights")) s.weights = j.at("weights").get<std::array<double, 3>>();
            if (j.contains("noise_sigma")) s.noise_sigma = j.at("noise_sigma").get<double>();
            if (j.contains("feature_widths")) {
                const auto& fw = j.at("feature_widths");
                s.feature_widths = {fw.at("text").get<std::size_t>(), fw.at("audio").get<std::size_t>(),
                                    fw.at("visual").get<std::size_t>()};
            }
            if (j.contains("score_range"))
                s.score_range = {j.at("score_range").at(0).get<double>(),
                                 j.at("score_range").at(1).get<double>()};
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("synth spec: ") + e.what());
        }
        s.validate();
        return s;
    }

    static SynthSpec load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open synth spec file: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("synth spec " + path + ": " + e.what());
        }
        return from_json(j);
    }
};

// Draws a dataset from the spec. Per modality, a fixed unit direction u_m is
// chosen once; sample features are s_m * u_m plus iid Gaussian noise, so the
// latent scalar is linearly recoverable from any single modality. The label
// is the weight-mixed combination of the three latent scalars.
inline Dataset generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const auto [lo, hi] = spec.score_range;

    std::array<std::vector<double>, 3> directions;
    for (Modality m : kAllModalities) {
        auto& u = directions[m];
        u.resize(spec.feature_widths[m]);
        double norm2 = 0.0;
        for (auto& v : u) {
            v = rng.normal();
            norm2 += v * v;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& v : u) v *= inv;
    }

    Dataset ds;
    ds.manifest.score_range = spec.score_range;
    ds.manifest.feature_widths = spec.feature_widths;

    for (Split sp : kAllSplits) {
        const std::size_t n = spec.n_per_split[static_cast<int>(sp)];
        for (std::size_t i = 0; i < n; ++i) {
            Sample s;
            {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%s-%05zu", split_name(sp), i);
                s.id = buf;
            }
            std::array<double, 3> latent{};
            for (Modality m : kAllModalities) latent[m] = rng.uniform(lo, hi);
            double y = 0.0;
            for (Modality m : kAllModalities) y += spec.weights[m] * latent[m];
            s.label = std::clamp(y, lo, hi);
            for (Modality m : kAllModalities) {
                const auto [lmin, lmax] = spec.len_ranges[m];
                const std::size_t len = lmin + rng.uniform_int(lmax - lmin + 1);
                FeatureMatrix& fm = s.feats[m];
                fm.rows = len;
                fm.cols = spec.feature_widths[m];
                fm.data.resize(len * fm.cols);
                for (std::size_t r = 0; r < len; ++r)
                    for (std::size_t c = 0; c < fm.cols; ++c) {
                        double v = latent[m] * directions[m][c];
                        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
                        fm.data[r * fm.cols + c] = v;
                    }
            }
            ds.manifest.splits[sp].push_back(s.id);
            ds.by_id.emplace(s.id, ds.samples.size());
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

}  // namespace protosent
