#include "trifuse/verify.hpp"

#include "trifuse/bilinear.hpp"
#include "trifuse/cti.hpp"
#include "trifuse/oracle.hpp"
#include "trifuse/paralind.hpp"

#include <algorithm>
#include <cmath>

namespace trifuse::verify {

namespace {

ModalityFeatures random_features(std::size_t n, std::size_t d, Rng& rng) {
    return ModalityFeatures(gaussian_tensor({n, d}, 1.0, rng));
}

// Attention map via explicit reconstruction: T x1 M1 x2 M2 x3 M3.
DenseTensor attention_via_reconstruction(const CtiLayerParams& p, const ModalityFeatures& v,
                                         const ModalityFeatures& q, const ModalityFeatures& a,
                                         double perturb) {
    DenseTensor t = reconstruct_attention_tensor(p.attention);
    if (perturb != 0.0) t[0] += perturb;
    return mode_product(mode_product(mode_product(t, v.channels(), 1), q.channels(), 2),
                        a.channels(), 3);
}

struct Case {
    std::array<std::size_t, 3> n;
    std::array<std::size_t, 3> d;
    std::size_t dz;
    std::size_t R;
};

std::vector<Case> builtin_cases(std::uint64_t seed) {
    std::vector<Case> cases = {
        {{2, 3, 2}, {4, 4, 4}, 3, 1},
        {{2, 3, 2}, {4, 4, 4}, 3, 2},
        {{2, 3, 2}, {4, 4, 4}, 3, 4},
        {{1, 1, 1}, {2, 2, 2}, 2, 1},
        {{3, 2, 4}, {6, 4, 2}, 4, 2},
    };
    Rng rng = make_rng(seed, 99);
    std::uniform_int_distribution<std::size_t> pick_n(1, 4), pick_e(1, 3), pick_dz(1, 4),
        pick_r(1, 2);
    for (int i = 0; i < 15; ++i) {
        const std::size_t r = pick_r(rng);
        Case c;
        c.n = {pick_n(rng), pick_n(rng), pick_n(rng)};
        c.d = {r * pick_e(rng), r * pick_e(rng), r * pick_e(rng)};
        c.dz = pick_dz(rng);
        c.R = r;
        cases.push_back(c);
    }
    return cases;
}

}  // namespace

VerifyReport run_verification(std::uint64_t seed, double perturb) {
    VerifyReport report;
    Rng rng = make_rng(seed, 1);

    IdentityResult att{"attention-decomposition", 0.0, 1e-8, false};
    IdentityResult joint{"joint-hadamard", 0.0, 1e-8, false};
    IdentityResult ban{"ban-form", 0.0, 1e-10, false};
    IdentityResult degen{"bilinear-degenerate-trilinear", 0.0, 1e-8, false};
    IdentityResult comp{"oracle-composition", 0.0, 0.0, false};

    for (const Case& c : builtin_cases(seed)) {
        CtiLayerParams params = CtiLayerParams::random(c.d, c.dz, c.R, rng);
        const ModalityFeatures v = random_features(c.n[0], c.d[0], rng);
        const ModalityFeatures q = random_features(c.n[1], c.d[1], rng);
        const ModalityFeatures a = random_features(c.n[2], c.d[2], rng);

        // Decomposed attention vs. explicit tensor reconstruction.
        const AttentionMap m = attention_map(params, v, q, a);
        const DenseTensor m_ref = attention_via_reconstruction(params, v, q, a, perturb);
        att.max_rel_err = std::max(att.max_rel_err, max_rel_error(m.weights(), m_ref));

        // Elementwise joint path vs. expanded sum over the reconstructed
        // order-4 tensor with the superdiagonal core.
        const oracle::TripletInteractionTensor tsc(reconstruct_joint_tensor(params.joint));
        const DenseTensor z_fast = joint_representation(params, m, v, q, a);
        const DenseTensor z_ref = oracle::expanded_interaction(tsc, m, v, q, a);
        joint.max_rel_err = std::max(joint.max_rel_err, max_rel_error(z_fast, z_ref));

        // Oracle composition must be bit-exact.
        std::vector<DenseTensor> zps;
        for (std::size_t i = 0; i < c.n[0]; ++i)
            for (std::size_t j = 0; j < c.n[1]; ++j)
                for (std::size_t k = 0; k < c.n[2]; ++k)
                    zps.push_back(oracle::triplet_interaction(tsc, v.channel(i), q.channel(j),
                                                              a.channel(k)));
        const DenseTensor z_combined = oracle::unitary_attention_combine(zps, m);
        for (std::size_t s = 0; s < z_ref.size(); ++s) {
            if (z_combined[s] != z_ref[s]) comp.max_rel_err = 1.0;
        }

        // Two bilinear joint routes.
        BilinearParams bp = BilinearParams::random({c.d[0], c.d[1]}, c.dz, c.R, rng);
        const DenseTensor batt = bilinear_attention(bp, v, q);
        const DenseTensor z_b = bilinear_joint(bp, batt, v, q);
        const DenseTensor z_ban = bilinear_joint_ban_form(bp, batt, v, q);
        ban.max_rel_err = std::max(ban.max_rel_err, max_rel_error(z_b, z_ban));

        // Bilinear layer as a trilinear layer with a degenerate third
        // modality (one unit channel, unit factors). Needs R = 1 because the
        // third mode dim is 1.
        if (c.R == 1) {
            CtiLayerParams tri;
            tri.attention.R = 1;
            tri.attention.cores.push_back(
                DenseTensor({c.d[0], c.d[1], 1}, bp.cores[0].values()));
            tri.attention.w1.push_back(bp.wv[0]);
            tri.attention.w2.push_back(bp.wq[0]);
            tri.attention.w3.push_back(DenseTensor({1, 1}, {1.0}));
            tri.joint.wz1 = bp.wzv;
            tri.joint.wz2 = bp.wzq;
            tri.joint.wz3 = DenseTensor({1, c.dz}, std::vector<double>(c.dz, 1.0));
            const ModalityFeatures unit(DenseTensor({1, 1}, {1.0}));
            const CtiForward tri_fwd = cti_forward(tri, v, q, unit);
            const DenseTensor tri_att(
                {v.num_channels(), q.num_channels()},
                tri_fwd.attention.weights().values());
            degen.max_rel_err = std::max(degen.max_rel_err, max_rel_error(tri_att, batt));
            degen.max_rel_err = std::max(degen.max_rel_err, max_rel_error(tri_fwd.z, z_b));
        }
    }

    for (IdentityResult* r : {&att, &joint, &ban, &degen, &comp}) {
        r->pass = r->max_rel_err <= r->tolerance;
        report.pass = report.pass && r->pass;
        report.identities.push_back(*r);
    }
    return report;
}

}  // namespace trifuse::verify
