#include "trifuse/paralind.hpp"

#include <limits>
#include <numeric>
#include <string>

namespace trifuse {

std::size_t ParalindFactors::dim(std::size_t t) const {
    const std::vector<DenseTensor>* w[3] = {&w1, &w2, &w3};
    return w[t - 1]->front().extent(0);
}

std::size_t ParalindFactors::slice_dim(std::size_t t) const {
    return cores.front().extent(t - 1);
}

void ParalindFactors::validate() const {
    if (R < 1 || cores.size() != R || w1.size() != R || w2.size() != R || w3.size() != R) {
        throw DimensionError("paralind factors need R >= 1 slices with matching containers");
    }
    for (std::size_t r = 0; r < R; ++r) {
        if (cores[r].order() != 3 || w1[r].order() != 2 || w2[r].order() != 2 ||
            w3[r].order() != 2) {
            throw DimensionError("paralind slice " + std::to_string(r) + " has wrong orders");
        }
        if (!cores[r].same_shape(cores[0]) || !w1[r].same_shape(w1[0]) ||
            !w2[r].same_shape(w2[0]) || !w3[r].same_shape(w3[0])) {
            throw DimensionError("paralind slices must share identical shapes");
        }
    }
    const std::vector<DenseTensor>* w[3] = {&w1, &w2, &w3};
    for (std::size_t t = 0; t < 3; ++t) {
        const std::size_t full = w[t]->front().extent(0);
        const std::size_t slim = w[t]->front().extent(1);
        if (cores.front().extent(t) != slim) {
            throw DimensionError("core mode " + std::to_string(t + 1) +
                                 " does not match factor projection dim");
        }
        if (slim * R != full) {
            throw DimensionError("slicing parameter " + std::to_string(R) +
                                 " must divide mode dim " + std::to_string(full) + " exactly");
        }
    }
}

ParalindFactors ParalindFactors::random(std::array<std::size_t, 3> dims, std::size_t R, Rng& rng) {
    if (R < 1) throw DimensionError("slicing parameter must be >= 1");
    for (std::size_t t = 0; t < 3; ++t) {
        if (dims[t] % R != 0) {
            throw DimensionError("slicing parameter " + std::to_string(R) +
                                 " must divide mode dim " + std::to_string(dims[t]) + " exactly");
        }
    }
    const std::array<std::size_t, 3> e = {dims[0] / R, dims[1] / R, dims[2] / R};
    ParalindFactors f;
    f.R = R;
    const double core_scale = fan_in_scale(R * e[0] * e[1] * e[2]);
    for (std::size_t r = 0; r < R; ++r) {
        f.cores.push_back(gaussian_tensor({e[0], e[1], e[2]}, core_scale, rng));
        f.w1.push_back(gaussian_tensor({dims[0], e[0]}, fan_in_scale(dims[0]), rng));
        f.w2.push_back(gaussian_tensor({dims[1], e[1]}, fan_in_scale(dims[1]), rng));
        f.w3.push_back(gaussian_tensor({dims[2], e[2]}, fan_in_scale(dims[2]), rng));
    }
    return f;
}

void JointEmbeddingFactors::validate() const {
    if (wz1.order() != 2 || wz2.order() != 2 || wz3.order() != 2) {
        throw DimensionError("joint embedding factors must be matrices");
    }
    if (wz1.extent(1) != wz2.extent(1) || wz1.extent(1) != wz3.extent(1) || wz1.extent(1) < 1) {
        throw DimensionError("joint embedding factors must share output dim d_z >= 1");
    }
}

JointEmbeddingFactors JointEmbeddingFactors::random(std::array<std::size_t, 3> dims,
                                                    std::size_t dz, Rng& rng) {
    if (dz < 1) throw DimensionError("joint embedding dim must be >= 1");
    JointEmbeddingFactors f;
    f.wz1 = gaussian_tensor({dims[0], dz}, fan_in_scale(dims[0]), rng);
    f.wz2 = gaussian_tensor({dims[1], dz}, fan_in_scale(dims[1]), rng);
    f.wz3 = gaussian_tensor({dims[2], dz}, fan_in_scale(dims[2]), rng);
    return f;
}

DenseTensor reconstruct_attention_tensor(const ParalindFactors& f, std::size_t size_cap) {
    f.validate();
    const std::size_t d1 = f.dim(1), d2 = f.dim(2), d3 = f.dim(3);
    if (d1 * d2 * d3 > size_cap) {
        throw OracleScaleError("reconstructed attention tensor holds " +
                               std::to_string(d1 * d2 * d3) + " entries, above the cap of " +
                               std::to_string(size_cap));
    }
    DenseTensor out({d1, d2, d3});
    for (std::size_t r = 0; r < f.R; ++r) {
        const DenseTensor slice = mode_product(
            mode_product(mode_product(f.cores[r], f.w1[r], 1), f.w2[r], 2), f.w3[r], 3);
        out = add(out, slice);
    }
    return out;
}

DenseTensor reconstruct_joint_tensor(const JointEmbeddingFactors& f, std::size_t size_cap) {
    f.validate();
    const std::size_t d1 = f.wz1.extent(0), d2 = f.wz2.extent(0), d3 = f.wz3.extent(0);
    const std::size_t dz = f.dz();
    if (d1 * d2 * d3 * dz > size_cap) {
        throw OracleScaleError("reconstructed joint tensor holds " +
                               std::to_string(d1 * d2 * d3 * dz) + " entries, above the cap of " +
                               std::to_string(size_cap));
    }
    const DenseTensor core = superdiagonal_identity(4, dz);
    return mode_product(mode_product(mode_product(core, f.wz1, 1), f.wz2, 2), f.wz3, 3);
}

namespace {

std::uint64_t narrow_count(unsigned __int128 v, const char* what) {
    if (v > std::numeric_limits<std::uint64_t>::max()) {
        throw Error(std::string(what) + " overflows 64-bit arithmetic");
    }
    return static_cast<std::uint64_t>(v);
}

}  // namespace

std::uint64_t count_full_params(std::array<std::size_t, 3> n, std::array<std::size_t, 3> d,
                                std::size_t dz) {
    for (std::size_t t = 0; t < 3; ++t) {
        if (n[t] == 0 || d[t] == 0) throw DimensionError("extents must be positive");
    }
    if (dz == 0) throw DimensionError("d_z must be positive");
    unsigned __int128 total = 1;
    for (std::size_t t = 0; t < 3; ++t) {
        total *= static_cast<unsigned __int128>(n[t]) * d[t];
    }
    total *= dz;
    return narrow_count(total, "full parameter count");
}

std::uint64_t count_decomposed_params(std::array<std::size_t, 3> d, std::size_t dz,
                                      std::size_t R) {
    if (R < 1) throw DimensionError("slicing parameter must be >= 1");
    for (std::size_t t = 0; t < 3; ++t) {
        if (d[t] == 0 || d[t] % R != 0) {
            throw DimensionError("slicing parameter " + std::to_string(R) +
                                 " must divide mode dim " + std::to_string(d[t]) + " exactly");
        }
    }
    const std::array<unsigned __int128, 3> e = {d[0] / R, d[1] / R, d[2] / R};
    unsigned __int128 per_slice = 0;
    for (std::size_t t = 0; t < 3; ++t) {
        per_slice += static_cast<unsigned __int128>(d[t]) * e[t];
    }
    per_slice += e[0] * e[1] * e[2];
    unsigned __int128 joint = (static_cast<unsigned __int128>(d[0]) + d[1] + d[2]) * dz;
    return narrow_count(per_slice * R + joint, "decomposed parameter count");
}

std::size_t max_slicing(std::array<std::size_t, 3> d) {
    for (std::size_t t = 0; t < 3; ++t) {
        if (d[t] == 0) throw DimensionError("extents must be positive");
    }
    return std::gcd(std::gcd(d[0], d[1]), d[2]);
}

}  // namespace trifuse
