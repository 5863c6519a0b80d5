#include "trifuse/bilinear.hpp"

#include <string>

namespace trifuse {

void BilinearParams::validate() const {
    if (R < 1 || cores.size() != R || wv.size() != R || wq.size() != R) {
        throw DimensionError("bilinear params need R >= 1 slices with matching containers");
    }
    for (std::size_t r = 0; r < R; ++r) {
        if (cores[r].order() != 2 || wv[r].order() != 2 || wq[r].order() != 2 ||
            !cores[r].same_shape(cores[0]) || !wv[r].same_shape(wv[0]) ||
            !wq[r].same_shape(wq[0])) {
            throw DimensionError("bilinear slices must be matrices of identical shapes");
        }
    }
    if (cores[0].extent(0) != wv[0].extent(1) || cores[0].extent(1) != wq[0].extent(1)) {
        throw DimensionError("bilinear core dims do not match factor projection dims");
    }
    if (wv[0].extent(1) * R != wv[0].extent(0) || wq[0].extent(1) * R != wq[0].extent(0)) {
        throw DimensionError("slicing parameter " + std::to_string(R) +
                             " must divide both mode dims exactly");
    }
    if (wzv.order() != 2 || wzq.order() != 2 || wzv.extent(1) != wzq.extent(1)) {
        throw DimensionError("joint factor matrices must share output dim d_z");
    }
    if (wzv.extent(0) != wv[0].extent(0) || wzq.extent(0) != wq[0].extent(0)) {
        throw DimensionError("joint factors disagree with attention factors on mode dims");
    }
}

BilinearParams BilinearParams::random(std::array<std::size_t, 2> dims, std::size_t dz,
                                      std::size_t R, Rng& rng) {
    for (std::size_t t = 0; t < 2; ++t) {
        if (R < 1 || dims[t] % R != 0) {
            throw DimensionError("slicing parameter " + std::to_string(R) +
                                 " must divide mode dim " + std::to_string(dims[t]) + " exactly");
        }
    }
    const std::size_t ev = dims[0] / R, eq = dims[1] / R;
    BilinearParams p;
    p.R = R;
    const double core_scale = fan_in_scale(R * ev * eq);
    for (std::size_t r = 0; r < R; ++r) {
        p.cores.push_back(gaussian_tensor({ev, eq}, core_scale, rng));
        p.wv.push_back(gaussian_tensor({dims[0], ev}, fan_in_scale(dims[0]), rng));
        p.wq.push_back(gaussian_tensor({dims[1], eq}, fan_in_scale(dims[1]), rng));
    }
    p.wzv = gaussian_tensor({dims[0], dz}, fan_in_scale(dims[0]), rng);
    p.wzq = gaussian_tensor({dims[1], dz}, fan_in_scale(dims[1]), rng);
    return p;
}

DenseTensor bilinear_attention(const BilinearParams& p, const ModalityFeatures& v,
                               const ModalityFeatures& q) {
    p.validate();
    if (v.dim() != p.dv() || q.dim() != p.dq()) {
        throw DimensionError("feature dims do not match bilinear params");
    }
    DenseTensor m({v.num_channels(), q.num_channels()});
    for (std::size_t r = 0; r < p.R; ++r) {
        const DenseTensor pv = matmul(v.channels(), p.wv[r]);
        const DenseTensor pq = matmul(q.channels(), p.wq[r]);
        // [[G_r; pv, pq]] = pv * G_r * pq^T
        m = add(m, matmul(matmul(pv, p.cores[r]), transpose(pq)));
    }
    return m;
}

DenseTensor bilinear_joint(const BilinearParams& p, const DenseTensor& att,
                           const ModalityFeatures& v, const ModalityFeatures& q) {
    if (att.order() != 2 || att.extent(0) != v.num_channels() ||
        att.extent(1) != q.num_channels()) {
        throw DimensionError("attention map shape does not match channel counts");
    }
    const DenseTensor pv = matmul(v.channels(), p.wzv);
    const DenseTensor pq = matmul(q.channels(), p.wzq);
    const std::size_t nv = att.extent(0), nq = att.extent(1), dz = p.dz();
    DenseTensor z({dz});
    for (std::size_t i = 0; i < nv; ++i) {
        const double* pvi = pv.values().data() + i * dz;
        for (std::size_t j = 0; j < nq; ++j) {
            const double wij = att[i * nq + j];
            if (wij == 0.0) continue;
            const double* pqj = pq.values().data() + j * dz;
            for (std::size_t s = 0; s < dz; ++s) z[s] += wij * pvi[s] * pqj[s];
        }
    }
    return z;
}

DenseTensor bilinear_joint_ban_form(const BilinearParams& p, const DenseTensor& att,
                                    const ModalityFeatures& v, const ModalityFeatures& q) {
    if (att.order() != 2 || att.extent(0) != v.num_channels() ||
        att.extent(1) != q.num_channels()) {
        throw DimensionError("attention map shape does not match channel counts");
    }
    const std::size_t nv = att.extent(0), nq = att.extent(1), dz = p.dz();
    const std::size_t dv = p.wzv.extent(0), dq = p.wzq.extent(0);
    DenseTensor z({dz});
    for (std::size_t k = 0; k < dz; ++k) {
        // Rank-1 interaction matrix from the k-th factor columns.
        DenseTensor bk({dv, dq});
        for (std::size_t a = 0; a < dv; ++a)
            for (std::size_t b = 0; b < dq; ++b) bk(a, b) = p.wzv(a, k) * p.wzq(b, k);
        double zk = 0.0;
        for (std::size_t i = 0; i < nv; ++i) {
            for (std::size_t j = 0; j < nq; ++j) {
                double form = 0.0;
                for (std::size_t a = 0; a < dv; ++a) {
                    double inner = 0.0;
                    for (std::size_t b = 0; b < dq; ++b) inner += bk(a, b) * q.channels()(j, b);
                    form += v.channels()(i, a) * inner;
                }
                zk += att(i, j) * form;
            }
        }
        z[k] = zk;
    }
    return z;
}

BilinearForward bilinear_forward(const BilinearParams& p, const ModalityFeatures& v,
                                 const ModalityFeatures& q) {
    DenseTensor att = bilinear_attention(p, v, q);
    DenseTensor z = bilinear_joint(p, att, v, q);
    return BilinearForward{std::move(z), std::move(att)};
}

}  // namespace trifuse
