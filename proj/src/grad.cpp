#include "trifuse/grad.hpp"

#include <cmath>
#include <string>

namespace trifuse::grad {

void accumulate(GradientBundle& bundle, const std::string& name, const DenseTensor& g) {
    auto it = bundle.find(name);
    if (it == bundle.end()) {
        bundle.emplace(name, g);
    } else {
        if (!it->second.same_shape(g)) {
            throw DimensionError("gradient shape mismatch for " + name);
        }
        for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
    }
}

void scale_bundle(GradientBundle& bundle, double c) {
    for (auto& [name, g] : bundle) {
        for (double& x : g.values()) x *= c;
    }
}

double bundle_norm(const GradientBundle& bundle) {
    double sq = 0.0;
    for (const auto& [name, g] : bundle) {
        for (double x : g.values()) sq += x * x;
    }
    return std::sqrt(sq);
}

void check_bundle(const ParamRefs& params, const GradientBundle& bundle) {
    if (params.size() != bundle.size()) {
        throw UsageError("gradient bundle holds " + std::to_string(bundle.size()) +
                         " entries for " + std::to_string(params.size()) + " parameters");
    }
    for (const auto& [name, p] : params) {
        auto it = bundle.find(name);
        if (it == bundle.end()) {
            throw UsageError("gradient bundle is missing parameter " + name);
        }
        if (!it->second.same_shape(*p)) {
            throw DimensionError("gradient shape mismatch for " + name);
        }
    }
}

CtiTape cti_forward_taped(const CtiLayerParams& p, const ModalityFeatures& v,
                          const ModalityFeatures& q, const ModalityFeatures& a) {
    p.validate();
    const auto& f = p.attention;
    CtiTape tape;
    tape.v = v.channels();
    tape.q = q.channels();
    tape.a = a.channels();

    DenseTensor m({v.num_channels(), q.num_channels(), a.num_channels()});
    for (std::size_t r = 0; r < f.R; ++r) {
        tape.p1.push_back(matmul(tape.v, f.w1[r]));
        tape.p2.push_back(matmul(tape.q, f.w2[r]));
        tape.p3.push_back(matmul(tape.a, f.w3[r]));
        tape.t1.push_back(mode_product(f.cores[r], tape.p1[r], 1));
        tape.t2.push_back(mode_product(tape.t1[r], tape.p2[r], 2));
        m = add(m, mode_product(tape.t2[r], tape.p3[r], 3));
    }
    tape.raw_att = m;
    tape.att = (p.normalize == AttentionNormalize::softmax_over_triplets) ? softmax_all(m) : m;

    tape.pv = matmul(tape.v, p.joint.wz1);
    tape.pq = matmul(tape.q, p.joint.wz2);
    tape.pa = matmul(tape.a, p.joint.wz3);

    const std::size_t n1 = tape.att.extent(0), n2 = tape.att.extent(1), n3 = tape.att.extent(2);
    const std::size_t dz = p.dz();
    DenseTensor z({dz});
    const double* pv = tape.pv.values().data();
    const double* pq = tape.pq.values().data();
    const double* pa = tape.pa.values().data();
    const double* att = tape.att.values().data();
    double* zd = z.values().data();
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            for (std::size_t k = 0; k < n3; ++k, ++idx) {
                const double w = att[idx];
                const double* pvi = pv + i * dz;
                const double* pqj = pq + j * dz;
                const double* pak = pa + k * dz;
                for (std::size_t s = 0; s < dz; ++s) {
                    zd[s] += w * pvi[s] * pqj[s] * pak[s];
                }
            }
        }
    }
    tape.z = std::move(z);
    tape.valid = true;
    return tape;
}

void cti_backward(const CtiLayerParams& p, const CtiTape& tape, const DenseTensor& dz,
                  GradientBundle& out, const std::string& prefix, CtiInputGrads* dinputs) {
    if (!tape.valid) {
        throw UsageError("cti_backward needs a recorded forward tape");
    }
    if (dz.size() != p.dz()) {
        throw DimensionError("upstream gradient length does not match d_z");
    }
    const auto& f = p.attention;
    const std::size_t n1 = tape.att.extent(0), n2 = tape.att.extent(1), n3 = tape.att.extent(2);
    const std::size_t dz_n = p.dz();

    // ---- joint stage ----
    DenseTensor dpv({n1, dz_n}), dpq({n2, dz_n}), dpa({n3, dz_n});
    DenseTensor datt({n1, n2, n3});
    {
        const double* pv = tape.pv.values().data();
        const double* pq = tape.pq.values().data();
        const double* pa = tape.pa.values().data();
        const double* att = tape.att.values().data();
        const double* g = dz.values().data();
        std::size_t idx = 0;
        for (std::size_t i = 0; i < n1; ++i) {
            double* dpvi = dpv.values().data() + i * dz_n;
            const double* pvi = pv + i * dz_n;
            for (std::size_t j = 0; j < n2; ++j) {
                double* dpqj = dpq.values().data() + j * dz_n;
                const double* pqj = pq + j * dz_n;
                for (std::size_t k = 0; k < n3; ++k, ++idx) {
                    double* dpak = dpa.values().data() + k * dz_n;
                    const double* pak = pa + k * dz_n;
                    const double w = att[idx];
                    double dm = 0.0;
                    for (std::size_t s = 0; s < dz_n; ++s) {
                        const double vqs = pvi[s] * pqj[s];
                        const double gs = g[s];
                        dm += gs * vqs * pak[s];
                        dpvi[s] += gs * w * pqj[s] * pak[s];
                        dpqj[s] += gs * w * pvi[s] * pak[s];
                        dpak[s] += gs * w * vqs;
                    }
                    datt[idx] = dm;
                }
            }
        }
    }
    accumulate(out, prefix + "joint.wz1", matmul(transpose(tape.v), dpv));
    accumulate(out, prefix + "joint.wz2", matmul(transpose(tape.q), dpq));
    accumulate(out, prefix + "joint.wz3", matmul(transpose(tape.a), dpa));

    DenseTensor dv = matmul(dpv, transpose(p.joint.wz1));
    DenseTensor dq = matmul(dpq, transpose(p.joint.wz2));
    DenseTensor da = matmul(dpa, transpose(p.joint.wz3));

    // ---- normalization ----
    DenseTensor draw = datt;
    if (p.normalize == AttentionNormalize::softmax_over_triplets) {
        double inner = 0.0;
        for (std::size_t t = 0; t < datt.size(); ++t) inner += datt[t] * tape.att[t];
        for (std::size_t t = 0; t < datt.size(); ++t) {
            draw[t] = tape.att[t] * (datt[t] - inner);
        }
    }

    // ---- attention stage ----
    const std::size_t e1 = f.slice_dim(1), e2 = f.slice_dim(2), e3 = f.slice_dim(3);
    const double* dw = draw.values().data();
    for (std::size_t r = 0; r < f.R; ++r) {
        const double* p1 = tape.p1[r].values().data();
        const double* p2 = tape.p2[r].values().data();
        const double* p3 = tape.p3[r].values().data();
        const double* t1 = tape.t1[r].values().data();  // n1 x e2 x e3
        const double* t2 = tape.t2[r].values().data();  // n1 x n2 x e3

        // dP3[k,c] = sum_ij draw[i,j,k] * t2[i,j,c]
        DenseTensor dp3({n3, e3});
        double* dp3d = dp3.values().data();
        for (std::size_t i = 0; i < n1; ++i)
            for (std::size_t j = 0; j < n2; ++j) {
                const double* t2ij = t2 + (i * n2 + j) * e3;
                const double* dwij = dw + (i * n2 + j) * n3;
                for (std::size_t k = 0; k < n3; ++k) {
                    const double w = dwij[k];
                    if (w == 0.0) continue;
                    double* dp3k = dp3d + k * e3;
                    for (std::size_t c = 0; c < e3; ++c) dp3k[c] += w * t2ij[c];
                }
            }

        // F[i,b,k] = sum_c t1[i,b,c] * p3[k,c]; dP2[j,b] = sum_ik draw[i,j,k] F[i,b,k]
        DenseTensor dp2({n2, e2});
        double* dp2d = dp2.values().data();
        for (std::size_t i = 0; i < n1; ++i)
            for (std::size_t b = 0; b < e2; ++b) {
                const double* t1ib = t1 + (i * e2 + b) * e3;
                for (std::size_t k = 0; k < n3; ++k) {
                    const double* p3k = p3 + k * e3;
                    double fv = 0.0;
                    for (std::size_t c = 0; c < e3; ++c) fv += t1ib[c] * p3k[c];
                    const double* dwi = dw + i * n2 * n3 + k;
                    for (std::size_t j = 0; j < n2; ++j) dp2d[j * e2 + b] += dwi[j * n3] * fv;
                }
            }

        // H[a,j,k] = core x2 p2 x3 p3; dP1[i,a] = sum_jk draw[i,j,k] H[a,j,k]
        const DenseTensor h = mode_product(mode_product(f.cores[r], tape.p2[r], 2),
                                           tape.p3[r], 3);
        const double* hd = h.values().data();
        DenseTensor dp1({n1, e1});
        double* dp1d = dp1.values().data();
        for (std::size_t i = 0; i < n1; ++i) {
            const double* dwi = dw + i * n2 * n3;
            for (std::size_t a = 0; a < e1; ++a) {
                const double* ha = hd + a * n2 * n3;
                double s = 0.0;
                for (std::size_t jk = 0; jk < n2 * n3; ++jk) s += dwi[jk] * ha[jk];
                dp1d[i * e1 + a] = s;
            }
        }

        // dG[a,b,c] = sum_ijk draw[i,j,k] p1[i,a] p2[j,b] p3[k,c]
        DenseTensor dcore({e1, e2, e3});
        double* dcored = dcore.values().data();
        std::vector<double> outer_bc(e2 * e3);
        for (std::size_t j = 0; j < n2; ++j)
            for (std::size_t k = 0; k < n3; ++k) {
                const double* p2j = p2 + j * e2;
                const double* p3k = p3 + k * e3;
                for (std::size_t b = 0; b < e2; ++b)
                    for (std::size_t c = 0; c < e3; ++c) outer_bc[b * e3 + c] = p2j[b] * p3k[c];
                for (std::size_t i = 0; i < n1; ++i) {
                    const double w = dw[(i * n2 + j) * n3 + k];
                    if (w == 0.0) continue;
                    const double* p1i = p1 + i * e1;
                    for (std::size_t a = 0; a < e1; ++a) {
                        const double wa = w * p1i[a];
                        double* dst = dcored + a * e2 * e3;
                        for (std::size_t bc = 0; bc < e2 * e3; ++bc) dst[bc] += wa * outer_bc[bc];
                    }
                }
            }

        const std::string rs = "[" + std::to_string(r) + "]";
        accumulate(out, prefix + "attention.core" + rs, dcore);
        accumulate(out, prefix + "attention.w1" + rs, matmul(transpose(tape.v), dp1));
        accumulate(out, prefix + "attention.w2" + rs, matmul(transpose(tape.q), dp2));
        accumulate(out, prefix + "attention.w3" + rs, matmul(transpose(tape.a), dp3));

        dv = add(dv, matmul(dp1, transpose(f.w1[r])));
        dq = add(dq, matmul(dp2, transpose(f.w2[r])));
        da = add(da, matmul(dp3, transpose(f.w3[r])));
    }

    if (dinputs != nullptr) {
        dinputs->dv = std::move(dv);
        dinputs->dq = std::move(dq);
        dinputs->da = std::move(da);
    }
}

BilinearTape bilinear_forward_taped(const BilinearParams& p, const ModalityFeatures& v,
                                    const ModalityFeatures& q) {
    p.validate();
    BilinearTape tape;
    tape.v = v.channels();
    tape.q = q.channels();
    DenseTensor m({v.num_channels(), q.num_channels()});
    for (std::size_t r = 0; r < p.R; ++r) {
        tape.pv.push_back(matmul(tape.v, p.wv[r]));
        tape.pq.push_back(matmul(tape.q, p.wq[r]));
        m = add(m, matmul(matmul(tape.pv[r], p.cores[r]), transpose(tape.pq[r])));
    }
    tape.att = std::move(m);

    tape.jv = matmul(tape.v, p.wzv);
    tape.jq = matmul(tape.q, p.wzq);
    const std::size_t nv = tape.att.extent(0), nq = tape.att.extent(1), dz = p.dz();
    DenseTensor z({dz});
    const double* jv = tape.jv.values().data();
    const double* jq = tape.jq.values().data();
    const double* att = tape.att.values().data();
    double* zd = z.values().data();
    for (std::size_t i = 0; i < nv; ++i)
        for (std::size_t j = 0; j < nq; ++j) {
            const double w = att[i * nq + j];
            const double* jvi = jv + i * dz;
            const double* jqj = jq + j * dz;
            for (std::size_t s = 0; s < dz; ++s) zd[s] += w * jvi[s] * jqj[s];
        }
    tape.z = std::move(z);
    tape.valid = true;
    return tape;
}

void bilinear_backward(const BilinearParams& p, const BilinearTape& tape, const DenseTensor& dz,
                       GradientBundle& out, const std::string& prefix) {
    if (!tape.valid) {
        throw UsageError("bilinear_backward needs a recorded forward tape");
    }
    if (dz.size() != p.dz()) {
        throw DimensionError("upstream gradient length does not match d_z");
    }
    const std::size_t nv = tape.att.extent(0), nq = tape.att.extent(1), dz_n = p.dz();

    DenseTensor djv({nv, dz_n}), djq({nq, dz_n}), datt({nv, nq});
    const double* jv = tape.jv.values().data();
    const double* jq = tape.jq.values().data();
    const double* att = tape.att.values().data();
    const double* g = dz.values().data();
    for (std::size_t i = 0; i < nv; ++i) {
        const double* jvi = jv + i * dz_n;
        double* djvi = djv.values().data() + i * dz_n;
        for (std::size_t j = 0; j < nq; ++j) {
            const double* jqj = jq + j * dz_n;
            double* djqj = djq.values().data() + j * dz_n;
            const double w = att[i * nq + j];
            double dm = 0.0;
            for (std::size_t s = 0; s < dz_n; ++s) {
                dm += g[s] * jvi[s] * jqj[s];
                djvi[s] += g[s] * w * jqj[s];
                djqj[s] += g[s] * w * jvi[s];
            }
            datt[i * nq + j] = dm;
        }
    }
    accumulate(out, prefix + "joint.wzv", matmul(transpose(tape.v), djv));
    accumulate(out, prefix + "joint.wzq", matmul(transpose(tape.q), djq));

    for (std::size_t r = 0; r < p.R; ++r) {
        // att_r = pv C pq^T
        const DenseTensor dpv = matmul(datt, matmul(tape.pq[r], transpose(p.cores[r])));
        const DenseTensor dpq = matmul(transpose(datt), matmul(tape.pv[r], p.cores[r]));
        const DenseTensor dcore = matmul(transpose(tape.pv[r]), matmul(datt, tape.pq[r]));
        const std::string rs = "[" + std::to_string(r) + "]";
        accumulate(out, prefix + "attention.core" + rs, dcore);
        accumulate(out, prefix + "attention.wv" + rs, matmul(transpose(tape.v), dpv));
        accumulate(out, prefix + "attention.wq" + rs, matmul(transpose(tape.q), dpq));
    }
}

double bce_with_logit(double logit, double target, double* dlogit) {
    // max(l,0) - l*y + log(1 + exp(-|l|))
    const double loss =
        std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
    if (dlogit != nullptr) {
        const double sig = 1.0 / (1.0 + std::exp(-logit));
        *dlogit = sig - target;
    }
    return loss;
}

double ce_with_logits(const DenseTensor& logits, std::size_t target, DenseTensor* dlogits) {
    if (logits.order() != 1 || target >= logits.size()) {
        throw DimensionError("class index " + std::to_string(target) +
                             " out of range for logit vector of length " +
                             std::to_string(logits.size()));
    }
    double m = logits[0];
    for (double x : logits.values()) m = std::max(m, x);
    double sum = 0.0;
    for (double x : logits.values()) sum += std::exp(x - m);
    const double log_sum = std::log(sum) + m;
    const double loss = log_sum - logits[target];
    if (dlogits != nullptr) {
        *dlogits = DenseTensor({logits.size()});
        for (std::size_t i = 0; i < logits.size(); ++i) {
            (*dlogits)[i] = std::exp(logits[i] - log_sum);
        }
        (*dlogits)[target] -= 1.0;
    }
    return loss;
}

FdReport finite_difference_check(const ParamRefs& params, const std::function<double()>& loss_fn,
                                 const GradientBundle& analytic, double eps,
                                 std::size_t max_entries_per_param) {
    if (eps <= 0.0) {
        throw UsageError("finite difference step must be positive");
    }
    FdReport report;
    for (const auto& [name, tensor] : params) {
        auto it = analytic.find(name);
        if (it == analytic.end()) {
            throw UsageError("no analytic gradient recorded for " + name);
        }
        const DenseTensor& g = it->second;
        if (!g.same_shape(*tensor)) {
            throw DimensionError("gradient shape mismatch for " + name);
        }
        FdEntry entry{name, 0.0};
        const std::size_t n = std::min(tensor->size(), max_entries_per_param);
        for (std::size_t i = 0; i < n; ++i) {
            double& x = (*tensor)[i];
            const double saved = x;
            x = saved + eps;
            const double up = loss_fn();
            x = saved - eps;
            const double down = loss_fn();
            x = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw DivergenceError("loss became non-finite while perturbing " + name);
            }
            const double numeric = (up - down) / (2.0 * eps);
            const double denom = std::max({std::abs(numeric), std::abs(g[i]), 1e-8});
            entry.max_rel_err = std::max(entry.max_rel_err, std::abs(numeric - g[i]) / denom);
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.per_param.push_back(std::move(entry));
    }
    return report;
}

}  // namespace trifuse::grad
