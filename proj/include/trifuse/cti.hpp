#pragma once

#include "trifuse/modality.hpp"
#include "trifuse/paralind.hpp"

namespace trifuse {

/// The interaction equations define raw multilinear attention scores; softmax
/// over all triplets is exposed as an opt-in alternative.
enum class AttentionNormalize { none, softmax_over_triplets };

/// Learnable state of one compact trilinear interaction layer: sliced factors
/// for the attention map plus joint-embedding factor matrices and the
/// normalization choice.
struct CtiLayerParams {
    ParalindFactors attention;
    JointEmbeddingFactors joint;
    AttentionNormalize normalize = AttentionNormalize::none;

    std::size_t dz() const { return joint.dz(); }
    void validate() const;

    static CtiLayerParams random(std::array<std::size_t, 3> dims, std::size_t dz, std::size_t R,
                                 Rng& rng);
};

/// Softmax over every entry of a tensor, treated as one flat distribution.
DenseTensor softmax_all(const DenseTensor& t);

/// Attention map over channel triplets: each modality is projected once per
/// slice, then contracted against the slice core. Never materializes the
/// full interaction tensor.
AttentionMap attention_map(const CtiLayerParams& p, const ModalityFeatures& v,
                           const ModalityFeatures& q, const ModalityFeatures& a);

/// Joint representation: projects each modality to d_z once, then takes the
/// attention-weighted sum of elementwise products over all triplets.
DenseTensor joint_representation(const CtiLayerParams& p, const AttentionMap& att,
                                 const ModalityFeatures& v, const ModalityFeatures& q,
                                 const ModalityFeatures& a);

struct CtiForward {
    DenseTensor z;
    AttentionMap attention;
};

/// attention_map followed by joint_representation; the map is returned for
/// inspection and export.
CtiForward cti_forward(const CtiLayerParams& p, const ModalityFeatures& v,
                       const ModalityFeatures& q, const ModalityFeatures& a);

}  // namespace trifuse
