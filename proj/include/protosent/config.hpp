#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "protosent/errors.hpp"

namespace protosent {

// Run configuration. The on-disk form is a flat JSON object whose keys match
// the field names exactly; unknown keys are rejected.
struct Config {
    std::size_t prototypes = 8;   // K: slots in the prototype bank
    std::size_t hidden_dim = 128; // d: shared embedding width
    std::size_t heads = 8;
    std::size_t layers = 2;       // backbone depth
    std::size_t batch_size = 64;
    double dropout = 0.1;
    double lambda_aux = 0.1;
    double lambda_div = 0.001;
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    std::size_t warmup_steps = 200;
    std::size_t total_steps = 2000;
    std::uint64_t seed = 0;
    std::size_t max_seq_len = 64;     // positional table length in the encoders
    bool use_positional = true;       // learnable positional embeddings in the encoders
    bool per_slot_aux_heads = false;  // one auxiliary head per slot instead of a shared one

    // Ablation switches; at most one may be set.
    bool no_spb = false;          // mean pooling instead of prototype extraction
    bool no_selection = false;    // uniform modality weights
    bool no_fine_path = false;    // backbone sees only the fused tokens
    bool no_gates = false;        // no layer-wise modality gates
    bool no_shared_proto = false; // per-modality prototype banks

    void validate() const {
        if (prototypes < 1) throw ConfigError("prototypes must be >= 1");
        if (layers < 1) throw ConfigError("layers must be >= 1");
        if (heads < 1) throw ConfigError("heads must be >= 1");
        if (hidden_dim % heads != 0)
            throw ConfigError("hidden_dim (" + std::to_string(hidden_dim) +
                              ") must be divisible by heads (" + std::to_string(heads) + ")");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must satisfy 0 <= p < 1");
        if (lambda_aux < 0.0 || lambda_div < 0.0) throw ConfigError("loss weights must be >= 0");
        if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
        if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
        if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
        if (warmup_steps > total_steps) throw ConfigError("warmup_steps must not exceed total_steps");
        if (max_seq_len < 1) throw ConfigError("max_seq_len must be >= 1");
    }

    int ablation_count() const {
        return int(no_spb) + int(no_selection) + int(no_fine_path) + int(no_gates) +
               int(no_shared_proto);
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"prototypes", prototypes},
                              {"hidden_dim", hidden_dim},
                              {"heads", heads},
                              {"layers", layers},
                              {"batch_size", batch_size},
                              {"dropout", dropout},
                              {"lambda_aux", lambda_aux},
                              {"lambda_div", lambda_div},
                              {"learning_rate", learning_rate},
                              {"weight_decay", weight_decay},
                              {"warmup_steps", warmup_steps},
                              {"total_steps", total_steps},
                              {"seed", seed},
                              {"max_seq_len", max_seq_len},
                              {"use_positional", use_positional},
                              {"per_slot_aux_heads", per_slot_aux_heads},
                              {"no_spb", no_spb},
                              {"no_selection", no_selection},
                              {"no_fine_path", no_fine_path},
                              {"no_gates", no_gates},
                              {"no_shared_proto", no_shared_proto}};
    }

    static Config from_json(const nlohmann::json& j) {
        Config c;
        const nlohmann::json defaults = c.to_json();
        for (const auto& [key, value] : j.items()) {
            if (!defaults.contains(key)) throw ConfigError("unknown config key: " + key);
            (void)value;
        }
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) {
                try {
                    field = j.at(key).get<std::decay_t<decltype(field)>>();
                } catch (const nlohmann::json::exception& e) {
                    throw ConfigError(std::string("config key '") + key + "': " + e.what());
                }
            }
        };
        get("prototypes", c.prototypes);
        get("hidden_dim", c.hidden_dim);
        get("heads", c.heads);
        get("layers", c.layers);
        get("batch_size", c.batch_size);
        get("dropout", c.dropout);
        get("lambda_aux", c.lambda_aux);
        get("lambda_div", c.lambda_div);
        get("learning_rate", c.learning_rate);
        get("weight_decay", c.weight_decay);
        get("warmup_steps", c.warmup_steps);
        get("total_steps", c.total_steps);
        get("seed", c.seed);
        get("max_seq_len", c.max_seq_len);
        get("use_positional", c.use_positional);
        get("per_slot_aux_heads", c.per_slot_aux_heads);
        get("no_spb", c.no_spb);
        get("no_selection", c.no_selection);
        get("no_fine_path", c.no_fine_path);
        get("no_gates", c.no_gates);
        get("no_shared_proto", c.no_shared_proto);
        c.validate();
        return c;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config file: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("config file " + path + ": " + e.what());
        }
        return from_json(j);
    }
};

}  // namespace protosent
