#include "trifuse/modality.hpp"

namespace trifuse {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::visual: return "V";
        case Modality::question: return "Q";
        case Modality::answer: return "A";
        case Modality::generic: return "generic";
    }
    return "generic";
}

ModalityFeatures::ModalityFeatures(DenseTensor channels, Modality tag)
    : channels_(std::move(channels)), tag_(tag) {
    if (channels_.order() != 2) {
        throw DimensionError("modality features must be an order-2 channel matrix");
    }
}

DenseTensor vectorize(const ModalityFeatures& m) {
    // Row-major storage already is the channel-by-channel flattening.
    return DenseTensor({m.channels().size()}, m.channels().values());
}

ModalityFeatures devectorize(const DenseTensor& v, std::size_t num_channels, std::size_t dim,
                             Modality tag) {
    if (v.order() != 1 || v.size() != num_channels * dim) {
        throw DimensionError("devectorize: vector length " + std::to_string(v.size()) +
                             " does not match " + std::to_string(num_channels) + "x" +
                             std::to_string(dim));
    }
    return ModalityFeatures(DenseTensor({num_channels, dim}, v.values()), tag);
}

AttentionMap::AttentionMap(DenseTensor weights) : weights_(std::move(weights)) {
    if (weights_.order() != 3) {
        throw DimensionError("attention map must be an order-3 tensor");
    }
}

}  // namespace trifuse
