#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "protosent/optimizer.hpp"

namespace protosent {

// Single-file binary checkpoint. Layout: magic, format version, scalar width,
// config JSON, feature widths, step counters, rng states, then parameter
// blobs (values + both optimizer moments) in registration order. Round trips
// are bit-exact for the native scalar width.
struct Checkpoint {
    Config config;
    std::array<std::size_t, 3> feature_widths{};
    std::uint64_t step = 0;
    double best_valid_mae = std::numeric_limits<double>::infinity();
    std::string shuffle_rng_state;
    std::string dropout_rng_state;
    std::uint64_t adam_step = 0;

    struct Entry {
        std::string name;
        std::size_t rows = 0, cols = 0;
        std::vector<real> values, m, v;
    };
    std::vector<Entry> entries;
};

namespace detail {

inline constexpr char kCkptMagic[8] = {'P', 'S', 'N', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw IoError("checkpoint: truncated file");
    return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
    const auto len = read_pod<std::uint64_t>(is);
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) throw IoError("checkpoint: truncated string");
    return s;
}

inline void write_reals(std::ostream& os, const std::vector<real>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(real)));
}

inline std::vector<real> read_reals(std::istream& is, std::size_t n) {
    std::vector<real> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(real)));
    if (!is) throw IoError("checkpoint: truncated tensor blob");
    return v;
}

}  // namespace detail

inline Checkpoint make_checkpoint(const Model& model, const AdamW& opt, std::uint64_t step,
                                  double best_valid_mae, const Rng& shuffle_rng,
                                  const Rng& dropout_rng) {
    Checkpoint c;
    c.config = model.cfg;
    c.feature_widths = model.feature_widths;
    c.step = step;
    c.best_valid_mae = best_valid_mae;
    c.shuffle_rng_state = shuffle_rng.serialize();
    c.dropout_rng_state = dropout_rng.serialize();
    c.adam_step = opt.step_count();
    const auto& params = opt.params();
    auto& m = const_cast<AdamW&>(opt).first_moments();
    auto& v = const_cast<AdamW&>(opt).second_moments();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Checkpoint::Entry e;
        e.name = params[i].name;
        e.rows = params[i].tensor.rows();
        e.cols = params[i].tensor.cols();
        e.values = params[i].tensor.values();
        e.m = m[i];
        e.v = v[i];
        c.entries.push_back(std::move(e));
    }
    return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint: " + path);
    os.write(detail::kCkptMagic, sizeof detail::kCkptMagic);
    detail::write_pod(os, detail::kCkptVersion);
    detail::write_pod<std::uint8_t>(os, sizeof(real));
    detail::write_string(os, c.config.to_json().dump());
    for (std::size_t w : c.feature_widths) detail::write_pod<std::uint64_t>(os, w);
    detail::write_pod<std::uint64_t>(os, c.step);
    detail::write_pod(os, c.best_valid_mae);
    detail::write_string(os, c.shuffle_rng_state);
    detail::write_string(os, c.dropout_rng_state);
    detail::write_pod<std::uint64_t>(os, c.adam_step);
    detail::write_pod<std::uint64_t>(os, c.entries.size());
    for (const auto& e : c.entries) {
        detail::write_string(os, e.name);
        detail::write_pod<std::uint64_t>(os, e.rows);
        detail::write_pod<std::uint64_t>(os, e.cols);
        detail::write_reals(os, e.values);
        detail::write_reals(os, e.m);
        detail::write_reals(os, e.v);
    }
    if (!os) throw IoError("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, detail::kCkptMagic, sizeof magic) != 0)
        throw ParseError("not a checkpoint file: " + path);
    const auto version = detail::read_pod<std::uint32_t>(is);
    if (version != detail::kCkptVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(version));
    const auto scalar_width = detail::read_pod<std::uint8_t>(is);
    if (scalar_width != sizeof(real))
        throw ParseError("checkpoint scalar width " + std::to_string(scalar_width) +
                         " does not match this build (" + std::to_string(sizeof(real)) + ")");
    Checkpoint c;
    c.config = Config::from_json(nlohmann::json::parse(detail::read_string(is)));
    for (auto& w : c.feature_widths) w = detail::read_pod<std::uint64_t>(is);
    c.step = detail::read_pod<std::uint64_t>(is);
    c.best_valid_mae = detail::read_pod<double>(is);
    c.shuffle_rng_state = detail::read_string(is);
    c.dropout_rng_state = detail::read_string(is);
    c.adam_step = detail::read_pod<std::uint64_t>(is);
    const auto n = detail::read_pod<std::uint64_t>(is);
    for (std::uint64_t i = 0; i < n; ++i) {
        Checkpoint::Entry e;
        e.name = detail::read_string(is);
        e.rows = detail::read_pod<std::uint64_t>(is);
        e.cols = detail::read_pod<std::uint64_t>(is);
        const std::size_t numel = e.rows * e.cols;
        e.values = detail::read_reals(is, numel);
        e.m = detail::read_reals(is, numel);
        e.v = detail::read_reals(is, numel);
        c.entries.push_back(std::move(e));
    }
    return c;
}

// Rebuilds the model from the stored config and overwrites every parameter
// with the checkpointed values. Names and shapes must match the fresh build.
inline Model restore_model(const Checkpoint& c) {
    Model model = build_variant(c.config, c.feature_widths);
    auto params = model.parameters();
    if (params.size() != c.entries.size())
        throw ParseError("checkpoint parameter count mismatch: expected " +
                         std::to_string(params.size()) + ", found " +
                         std::to_string(c.entries.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& e = c.entries[i];
        if (params[i].name != e.name || params[i].tensor.rows() != e.rows ||
            params[i].tensor.cols() != e.cols)
            throw ParseError("checkpoint entry mismatch at '" + e.name + "'");
        params[i].tensor.values_mut() = e.values;
    }
    return model;
}

inline void restore_optimizer(AdamW& opt, const Checkpoint& c) {
    if (opt.params().size() != c.entries.size())
        throw ParseError("optimizer/checkpoint size mismatch");
    opt.set_step_count(c.adam_step);
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
        opt.first_moments()[i] = c.entries[i].m;
        opt.second_moments()[i] = c.entries[i].v;
    }
}

}  // namespace protosent
