#include "trifuse/cti.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace trifuse {

void CtiLayerParams::validate() const {
    attention.validate();
    joint.validate();
    if (attention.dim(1) != joint.wz1.extent(0) || attention.dim(2) != joint.wz2.extent(0) ||
        attention.dim(3) != joint.wz3.extent(0)) {
        throw DimensionError("attention and joint factors disagree on modality dims");
    }
}

CtiLayerParams CtiLayerParams::random(std::array<std::size_t, 3> dims, std::size_t dz,
                                      std::size_t R, Rng& rng) {
    CtiLayerParams p;
    p.attention = ParalindFactors::random(dims, R, rng);
    p.joint = JointEmbeddingFactors::random(dims, dz, rng);
    return p;
}

DenseTensor softmax_all(const DenseTensor& t) {
    DenseTensor out = t;
    double m = *std::max_element(t.values().begin(), t.values().end());
    double sum = 0.0;
    for (double& x : out.values()) {
        x = std::exp(x - m);
        sum += x;
    }
    for (double& x : out.values()) x /= sum;
    return out;
}

namespace {

void check_features(const ParalindFactors& f, const ModalityFeatures& v,
                    const ModalityFeatures& q, const ModalityFeatures& a) {
    const ModalityFeatures* ms[3] = {&v, &q, &a};
    for (std::size_t t = 1; t <= 3; ++t) {
        if (ms[t - 1]->dim() != f.dim(t)) {
            throw DimensionError("modality " + std::to_string(t) + " feature dim " +
                                 std::to_string(ms[t - 1]->dim()) +
                                 " does not match factor dim " + std::to_string(f.dim(t)));
        }
    }
}

}  // namespace

AttentionMap attention_map(const CtiLayerParams& p, const ModalityFeatures& v,
                           const ModalityFeatures& q, const ModalityFeatures& a) {
    check_features(p.attention, v, q, a);
    const auto& f = p.attention;
    DenseTensor m({v.num_channels(), q.num_channels(), a.num_channels()});
    for (std::size_t r = 0; r < f.R; ++r) {
        const DenseTensor p1 = matmul(v.channels(), f.w1[r]);
        const DenseTensor p2 = matmul(q.channels(), f.w2[r]);
        const DenseTensor p3 = matmul(a.channels(), f.w3[r]);
        const DenseTensor slice =
            mode_product(mode_product(mode_product(f.cores[r], p1, 1), p2, 2), p3, 3);
        m = add(m, slice);
    }
    if (p.normalize == AttentionNormalize::softmax_over_triplets) {
        m = softmax_all(m);
    }
    return AttentionMap(std::move(m));
}

DenseTensor joint_representation(const CtiLayerParams& p, const AttentionMap& att,
                                 const ModalityFeatures& v, const ModalityFeatures& q,
                                 const ModalityFeatures& a) {
    p.joint.validate();
    if (att.n1() != v.num_channels() || att.n2() != q.num_channels() ||
        att.n3() != a.num_channels()) {
        throw DimensionError("attention map shape does not match channel counts");
    }
    const DenseTensor pv = matmul(v.channels(), p.joint.wz1);
    const DenseTensor pq = matmul(q.channels(), p.joint.wz2);
    const DenseTensor pa = matmul(a.channels(), p.joint.wz3);
    const std::size_t n1 = att.n1(), n2 = att.n2(), n3 = att.n3(), dz = p.dz();
    DenseTensor z({dz});
    const auto& w = att.weights().values();
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n1; ++i) {
        const double* pvi = pv.values().data() + i * dz;
        for (std::size_t j = 0; j < n2; ++j) {
            const double* pqj = pq.values().data() + j * dz;
            for (std::size_t k = 0; k < n3; ++k, ++idx) {
                const double wijk = w[idx];
                if (wijk == 0.0) continue;
                const double* pak = pa.values().data() + k * dz;
                for (std::size_t s = 0; s < dz; ++s) {
                    z[s] += wijk * pvi[s] * pqj[s] * pak[s];
                }
            }
        }
    }
    return z;
}

CtiForward cti_forward(const CtiLayerParams& p, const ModalityFeatures& v,
                       const ModalityFeatures& q, const ModalityFeatures& a) {
    AttentionMap att = attention_map(p, v, q, a);
    DenseTensor z = joint_representation(p, att, v, q, a);
    return CtiForward{std::move(z), std::move(att)};
}

}  // namespace trifuse
