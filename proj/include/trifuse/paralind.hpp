#pragma once

#include "trifuse/oracle.hpp"
#include "trifuse/rng.hpp"
#include "trifuse/tensor.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace trifuse {

/// Slice-decomposed parameterization of an order-3 interaction tensor:
/// R slices, each a small Tucker core with one factor matrix per mode.
/// R must divide every mode dim exactly; slices share identical shapes.
struct ParalindFactors {
    std::size_t R = 0;
    std::vector<DenseTensor> cores;  // R tensors, d1r x d2r x d3r
    std::vector<DenseTensor> w1;     // R matrices, d1 x d1r
    std::vector<DenseTensor> w2;     // R matrices, d2 x d2r
    std::vector<DenseTensor> w3;     // R matrices, d3 x d3r

    /// Full mode dim of mode t (1-based t in {1,2,3}).
    std::size_t dim(std::size_t t) const;
    /// Per-slice core dim of mode t.
    std::size_t slice_dim(std::size_t t) const;

    void validate() const;

    /// Randomly initialized factors; scales follow 1/sqrt(fan-in) with the
    /// core's fan-in taken as the number of additive contributions R*e1*e2*e3.
    static ParalindFactors random(std::array<std::size_t, 3> dims, std::size_t R, Rng& rng);
};

/// Factor matrices of the joint-embedding tensor (single slice, projection
/// dim d_z shared by all three modes; the core is the fixed superdiagonal
/// identity and is never learned).
struct JointEmbeddingFactors {
    DenseTensor wz1;  // d1 x dz
    DenseTensor wz2;  // d2 x dz
    DenseTensor wz3;  // d3 x dz

    std::size_t dz() const { return wz1.extent(1); }
    void validate() const;

    static JointEmbeddingFactors random(std::array<std::size_t, 3> dims, std::size_t dz, Rng& rng);
};

/// Explicitly materializes the order-3 attention tensor the factors encode:
/// sum over slices of the core multiplied along each mode by its factor
/// matrix. Verification-only; guarded by the oracle size cap.
DenseTensor reconstruct_attention_tensor(const ParalindFactors& f,
                                         std::size_t size_cap = oracle::kDefaultSizeCap);

/// Explicitly materializes the order-4 joint tensor d1 x d2 x d3 x dz with
/// the superdiagonal identity as core. Verification-only.
DenseTensor reconstruct_joint_tensor(const JointEmbeddingFactors& f,
                                     std::size_t size_cap = oracle::kDefaultSizeCap);

/// Parameters of the fully parameterized interaction tensor:
/// (n1*d1)*(n2*d2)*(n3*d3)*dz. Throws on overflow past 64 bits.
std::uint64_t count_full_params(std::array<std::size_t, 3> n, std::array<std::size_t, 3> d,
                                std::size_t dz);

/// Parameters of the decomposed form: per-slice factor matrices and cores
/// for the attention tensor plus the three joint factor matrices.
/// Classifier heads and biases are counted by the task layer, not here.
std::uint64_t count_decomposed_params(std::array<std::size_t, 3> d, std::size_t dz, std::size_t R);

/// Largest admissible slicing parameter: gcd of the three mode dims.
std::size_t max_slicing(std::array<std::size_t, 3> d);

}  // namespace trifuse
