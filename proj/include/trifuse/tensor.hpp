#pragma once

#include "trifuse/errors.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace trifuse {

/// Dense n-way tensor of doubles in row-major order (last index fastest).
///
/// Library operations treat tensors as values: they never mutate their
/// inputs and return freshly allocated results, so concurrent reads are
/// always safe. Mutable element access exists for construction and for
/// optimizer updates on tensors the caller owns.
class DenseTensor {
public:
    DenseTensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit DenseTensor(std::vector<std::size_t> shape);

    /// Wraps existing row-major values; length must equal the shape product.
    DenseTensor(std::vector<std::size_t> shape, std::vector<double> values);

    std::size_t order() const { return shape_.size(); }
    std::size_t extent(std::size_t mode0) const { return shape_[mode0]; }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return values_.size(); }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    double operator[](std::size_t flat) const { return values_[flat]; }
    double& operator[](std::size_t flat) { return values_[flat]; }

    template <typename... Ix>
    double operator()(Ix... ix) const {
        return values_[flat_index({static_cast<std::size_t>(ix)...})];
    }
    template <typename... Ix>
    double& operator()(Ix... ix) {
        return values_[flat_index({static_cast<std::size_t>(ix)...})];
    }

    std::size_t flat_index(std::initializer_list<std::size_t> ix) const;

    bool all_finite() const;

    bool same_shape(const DenseTensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<std::size_t> shape_{};
    std::vector<double> values_{};
};

/// Contracts mode `mode` (1-based, matching the usual tensor-product
/// convention) of `t` with `u`.
///
/// If `u` is a matrix (order 2, J x L), its column count L must equal the
/// extent of the contracted mode and the result replaces that extent with J.
/// If `u` is a row-vector (order 1, length L), the mode is contracted away
/// and dropped from the result shape.
DenseTensor mode_product(const DenseTensor& t, const DenseTensor& u, std::size_t mode);

/// Elementwise product of two vectors of equal length.
DenseTensor hadamard(const DenseTensor& a, const DenseTensor& b);

/// Tensor of shape dim^order with 1 where all indices coincide, 0 elsewhere.
DenseTensor superdiagonal_identity(std::size_t order, std::size_t dim);

// Dense matrix helpers on order-2 tensors.
DenseTensor matmul(const DenseTensor& a, const DenseTensor& b);
DenseTensor transpose(const DenseTensor& a);

/// Row `i` of an order-2 tensor as an order-1 tensor.
DenseTensor row_of(const DenseTensor& m, std::size_t i);

DenseTensor add(const DenseTensor& a, const DenseTensor& b);
DenseTensor sub(const DenseTensor& a, const DenseTensor& b);
DenseTensor scale(const DenseTensor& a, double c);

double dot(const DenseTensor& a, const DenseTensor& b);

/// Largest |x - y| / max(|x|, |y|, 1) over matching entries.
double max_rel_error(const DenseTensor& a, const DenseTensor& b);

}  // namespace trifuse
