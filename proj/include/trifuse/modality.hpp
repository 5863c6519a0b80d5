#pragma once

#include "trifuse/tensor.hpp"

#include <string>

namespace trifuse {

enum class Modality { visual, question, answer, generic };

std::string to_string(Modality m);

/// One input's channel matrix: n_t channels (rows) by d_t feature dims.
class ModalityFeatures {
public:
    ModalityFeatures() = default;
    explicit ModalityFeatures(DenseTensor channels, Modality tag = Modality::generic);

    std::size_t num_channels() const { return channels_.extent(0); }
    std::size_t dim() const { return channels_.extent(1); }

    const DenseTensor& channels() const { return channels_; }
    DenseTensor& channels() { return channels_; }

    /// Feature row of one channel, as a row-vector.
    DenseTensor channel(std::size_t i) const { return row_of(channels_, i); }

    Modality tag() const { return tag_; }

private:
    DenseTensor channels_{};
    Modality tag_ = Modality::generic;
};

/// Row-major flattening of the channel matrix into a row-vector of
/// length n_t * d_t (channel-by-channel). Invertible given (n_t, d_t).
DenseTensor vectorize(const ModalityFeatures& m);

/// Inverse of vectorize for known channel count and dim.
ModalityFeatures devectorize(const DenseTensor& v, std::size_t num_channels, std::size_t dim,
                             Modality tag = Modality::generic);

/// Attention weights over channel triplets, shape n1 x n2 x n3.
class AttentionMap {
public:
    AttentionMap() = default;
    explicit AttentionMap(DenseTensor weights);

    const DenseTensor& weights() const { return weights_; }
    std::size_t n1() const { return weights_.extent(0); }
    std::size_t n2() const { return weights_.extent(1); }
    std::size_t n3() const { return weights_.extent(2); }

private:
    DenseTensor weights_{};
};

}  // namespace trifuse
