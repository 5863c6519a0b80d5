#include "trifuse/oracle.hpp"

#include <string>

namespace trifuse::oracle {

namespace {

void check_order4(const DenseTensor& t, const char* what) {
    if (t.order() != 4) {
        throw DimensionError(std::string(what) + " must be an order-4 tensor");
    }
}

// Shared contraction kernel: ((t x1 u) x1 v) x1 w with row-vector operands,
// each contraction dropping the leading mode. Both oracle routes go through
// this helper so their per-triplet values are bit-identical.
DenseTensor contract_triplet(const DenseTensor& t, const DenseTensor& u, const DenseTensor& v,
                             const DenseTensor& w) {
    return mode_product(mode_product(mode_product(t, u, 1), v, 1), w, 1);
}

}  // namespace

FullInteractionTensor::FullInteractionTensor(DenseTensor tensor) : t(std::move(tensor)) {
    check_order4(t, "full interaction tensor");
}

TripletInteractionTensor::TripletInteractionTensor(DenseTensor tensor) : t(std::move(tensor)) {
    check_order4(t, "triplet interaction tensor");
}

DenseTensor full_interaction(const FullInteractionTensor& t, const ModalityFeatures& m1,
                             const ModalityFeatures& m2, const ModalityFeatures& m3,
                             std::size_t size_cap) {
    if (t.t.size() > size_cap) {
        throw OracleScaleError("full interaction tensor holds " + std::to_string(t.t.size()) +
                               " entries, above the oracle cap of " + std::to_string(size_cap) +
                               "; use the decomposed path instead");
    }
    const ModalityFeatures* ms[3] = {&m1, &m2, &m3};
    for (std::size_t i = 0; i < 3; ++i) {
        const std::size_t want = ms[i]->num_channels() * ms[i]->dim();
        if (t.t.extent(i) != want) {
            throw DimensionError("full interaction mode " + std::to_string(i + 1) + " extent " +
                                 std::to_string(t.t.extent(i)) + " does not match input size " +
                                 std::to_string(want));
        }
    }
    return contract_triplet(t.t, vectorize(m1), vectorize(m2), vectorize(m3));
}

DenseTensor triplet_interaction(const TripletInteractionTensor& t, const DenseTensor& m1i,
                                const DenseTensor& m2j, const DenseTensor& m3k) {
    const DenseTensor* ms[3] = {&m1i, &m2j, &m3k};
    for (std::size_t i = 0; i < 3; ++i) {
        if (ms[i]->order() != 1 || ms[i]->size() != t.t.extent(i)) {
            throw DimensionError("triplet interaction mode " + std::to_string(i + 1) + " extent " +
                                 std::to_string(t.t.extent(i)) +
                                 " does not match channel vector length " +
                                 std::to_string(ms[i]->size()));
        }
    }
    return contract_triplet(t.t, m1i, m2j, m3k);
}

DenseTensor unitary_attention_combine(const std::vector<DenseTensor>& zps,
                                      const AttentionMap& weights) {
    const std::size_t count = weights.weights().size();
    if (zps.size() != count) {
        throw DimensionError("triplet count " + std::to_string(zps.size()) +
                             " does not match attention map size " + std::to_string(count));
    }
    if (zps.empty()) {
        throw DimensionError("unitary attention needs at least one triplet");
    }
    const std::size_t dz = zps.front().size();
    DenseTensor z({dz});
    for (std::size_t p = 0; p < count; ++p) {
        if (zps[p].size() != dz) {
            throw DimensionError("triplet representation length mismatch at index " +
                                 std::to_string(p));
        }
        const double w = weights.weights()[p];
        for (std::size_t k = 0; k < dz; ++k) z[k] += w * zps[p][k];
    }
    return z;
}

DenseTensor expanded_interaction(const TripletInteractionTensor& t, const AttentionMap& attention,
                                 const ModalityFeatures& m1, const ModalityFeatures& m2,
                                 const ModalityFeatures& m3) {
    const std::size_t n1 = m1.num_channels(), n2 = m2.num_channels(), n3 = m3.num_channels();
    if (attention.n1() != n1 || attention.n2() != n2 || attention.n3() != n3) {
        throw DimensionError("attention map shape does not match channel counts");
    }
    DenseTensor z({t.dz()});
    // Row-major triplet order, accumulating exactly like
    // unitary_attention_combine does over a precomputed triplet list.
    std::size_t p = 0;
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            for (std::size_t k = 0; k < n3; ++k, ++p) {
                const DenseTensor zp =
                    triplet_interaction(t, m1.channel(i), m2.channel(j), m3.channel(k));
                const double w = attention.weights()[p];
                for (std::size_t s = 0; s < zp.size(); ++s) z[s] += w * zp[s];
            }
        }
    }
    return z;
}

}  // namespace trifuse::oracle
