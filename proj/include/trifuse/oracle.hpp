#pragma once

#include "trifuse/modality.hpp"
#include "trifuse/tensor.hpp"

#include <vector>

namespace trifuse::oracle {

/// Brute-force paths refuse to materialize tensors above this many entries.
inline constexpr std::size_t kDefaultSizeCap = 10'000'000;

/// Order-4 interaction tensor over the three vectorized inputs,
/// shape (n1*d1) x (n2*d2) x (n3*d3) x d_z.
struct FullInteractionTensor {
    DenseTensor t;

    explicit FullInteractionTensor(DenseTensor tensor);
    std::size_t dz() const { return t.extent(3); }
};

/// Order-4 interaction tensor over one channel triplet, shape d1 x d2 x d3 x d_z.
struct TripletInteractionTensor {
    DenseTensor t;

    explicit TripletInteractionTensor(DenseTensor tensor);
    std::size_t dz() const { return t.extent(3); }
};

/// Joint representation from the fully parameterized interaction:
/// contracts the three vectorized inputs against the order-4 tensor.
/// Only usable at tiny dimensions; guarded by the size cap.
DenseTensor full_interaction(const FullInteractionTensor& t, const ModalityFeatures& m1,
                             const ModalityFeatures& m2, const ModalityFeatures& m3,
                             std::size_t size_cap = kDefaultSizeCap);

/// Joint representation of a single channel triplet (three row-vectors).
DenseTensor triplet_interaction(const TripletInteractionTensor& t, const DenseTensor& m1i,
                                const DenseTensor& m2j, const DenseTensor& m3k);

/// Weighted sum of per-triplet representations. `zps` must enumerate all
/// n1*n2*n3 triplets in (i,j,k) row-major order, matching `weights`.
DenseTensor unitary_attention_combine(const std::vector<DenseTensor>& zps,
                                      const AttentionMap& weights);

/// The same weighted sum written as an explicit triple loop over channels.
/// Bit-for-bit equal to composing triplet_interaction with
/// unitary_attention_combine, since it accumulates in the same order.
DenseTensor expanded_interaction(const TripletInteractionTensor& t, const AttentionMap& attention,
                                 const ModalityFeatures& m1, const ModalityFeatures& m2,
                                 const ModalityFeatures& m3);

}  // namespace trifuse::oracle
