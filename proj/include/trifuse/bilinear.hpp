#pragma once

#include "trifuse/modality.hpp"
#include "trifuse/rng.hpp"
#include "trifuse/tensor.hpp"

#include <array>
#include <vector>

namespace trifuse {

/// Two-input special case of the trilinear layer: sliced matrix cores for the
/// attention map and a pair of joint factor matrices. Inputs follow the same
/// rows-as-channels convention as the trilinear path.
struct BilinearParams {
    std::size_t R = 0;
    std::vector<DenseTensor> cores;  // R matrices, d_vr x d_qr
    std::vector<DenseTensor> wv;     // R matrices, d_v x d_vr
    std::vector<DenseTensor> wq;     // R matrices, d_q x d_qr
    DenseTensor wzv;                 // d_v x dz
    DenseTensor wzq;                 // d_q x dz

    std::size_t dz() const { return wzv.extent(1); }
    std::size_t dv() const { return wv.front().extent(0); }
    std::size_t dq() const { return wq.front().extent(0); }
    void validate() const;

    static BilinearParams random(std::array<std::size_t, 2> dims, std::size_t dz, std::size_t R,
                                 Rng& rng);
};

/// Attention map over channel pairs, shape n_v x n_q.
DenseTensor bilinear_attention(const BilinearParams& p, const ModalityFeatures& v,
                               const ModalityFeatures& q);

/// Joint representation: attention-weighted sum of elementwise products of
/// the projected channel rows.
DenseTensor bilinear_joint(const BilinearParams& p, const DenseTensor& att,
                           const ModalityFeatures& v, const ModalityFeatures& q);

/// Same value computed coordinate-by-coordinate through the rank-1 matrix
/// form: z_k is the attention-weighted bilinear form of each channel pair
/// under the outer product of the k-th factor columns. Kept as a distinct
/// route for identity checks.
DenseTensor bilinear_joint_ban_form(const BilinearParams& p, const DenseTensor& att,
                                    const ModalityFeatures& v, const ModalityFeatures& q);

struct BilinearForward {
    DenseTensor z;
    DenseTensor attention;
};

BilinearForward bilinear_forward(const BilinearParams& p, const ModalityFeatures& v,
                                 const ModalityFeatures& q);

}  // namespace trifuse
