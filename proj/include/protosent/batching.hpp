#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "protosent/data.hpp"
#include "protosent/tensor.hpp"

namespace protosent {

// One modality of one sample, zero-padded to the batch maximum with an
// explicit validity mask. Masked positions never contribute to attention or
// pooling downstream.
struct PaddedSequence {
    std::size_t len = 0;    // padded length
    std::size_t width = 0;
    std::size_t valid_len = 0;
    std::vector<real> data;          // len x width, zeros past valid_len
    std::vector<std::uint8_t> mask;  // len entries, 1 = real position
};

struct BatchItem {
    std::string id;
    double label = 0.0;
    std::array<PaddedSequence, 3> mods;  // indexed by Modality
};

using Batch = std::vector<BatchItem>;

inline PaddedSequence pad_sequence(const FeatureMatrix& fm, std::size_t target_len) {
    PaddedSequence p;
    p.len = target_len;
    p.width = fm.cols;
    p.valid_len = fm.rows;
    p.data.assign(target_len * fm.cols, real(0));
    for (std::size_t i = 0; i < fm.data.size(); ++i) p.data[i] = static_cast<real>(fm.data[i]);
    p.mask.assign(target_len, 0);
    for (std::size_t r = 0; r < fm.rows; ++r) p.mask[r] = 1;
    return p;
}

inline Batch make_batch(const std::vector<const Sample*>& samples) {
    std::array<std::size_t, 3> max_len{1, 1, 1};
    for (const Sample* s : samples)
        for (Modality m : kAllModalities) max_len[m] = std::max(max_len[m], s->feats[m].rows);
    Batch batch;
    batch.reserve(samples.size());
    for (const Sample* s : samples) {
        BatchItem item;
        item.id = s->id;
        item.label = s->label;
        for (Modality m : kAllModalities) item.mods[m] = pad_sequence(s->feats[m], max_len[m]);
        batch.push_back(std::move(item));
    }
    return batch;
}

// Single-consumer stream of padded batches over a sample list. With shuffle,
// the order comes from the supplied rng (deterministic under seed).
class BatchIterator {
public:
    BatchIterator(std::vector<const Sample*> samples, std::size_t batch_size, Rng* rng, bool shuffle)
        : samples_(std::move(samples)), batch_size_(batch_size) {
        if (batch_size_ < 1) throw ContractError("batch_size must be >= 1");
        if (shuffle) {
            if (!rng) throw ContractError("shuffle requires an rng");
            rng->shuffle(samples_);
        }
    }

    std::optional<Batch> next() {
        if (cursor_ >= samples_.size()) return std::nullopt;
        const std::size_t end = std::min(cursor_ + batch_size_, samples_.size());
        std::vector<const Sample*> chunk(samples_.begin() + cursor_, samples_.begin() + end);
        cursor_ = end;
        return make_batch(chunk);
    }

private:
    std::vector<const Sample*> samples_;
    std::size_t batch_size_;
    std::size_t cursor_ = 0;
};

// Key-mask additive bias (1 x L): 0 on valid positions, a large negative
// constant on padding. exp(-1e9 - max) underflows to exactly zero, so padded
// keys get weight 0 and padding invariance is exact.
inline Tensor mask_bias_tensor(const std::vector<std::uint8_t>& mask) {
    std::vector<real> bias(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) bias[i] = mask[i] ? real(0) : real(-1e9);
    return Tensor::from_values(1, mask.size(), std::move(bias));
}

// Column of {0,1} validity flags (L x 1) for zeroing or pooling.
inline Tensor mask_column_tensor(const std::vector<std::uint8_t>& mask) {
    std::vector<real> col(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) col[i] = mask[i] ? real(1) : real(0);
    return Tensor::from_values(mask.size(), 1, std::move(col));
}

}  // namespace protosent
