#include "trifuse/tensor.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace trifuse {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& shape) {
    if (shape.empty()) {
        throw DimensionError("tensor shape must have at least one mode");
    }
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) {
            throw DimensionError("tensor extents must be >= 1");
        }
        n *= e;
    }
    return n;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), values_(checked_product(shape_), 0.0) {}

DenseTensor::DenseTensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    const std::size_t want = checked_product(shape_);
    if (values_.size() != want) {
        throw DimensionError("value count " + std::to_string(values_.size()) +
                             " does not match shape product " + std::to_string(want));
    }
}

std::size_t DenseTensor::flat_index(std::initializer_list<std::size_t> ix) const {
    if (ix.size() != shape_.size()) {
        throw DimensionError("index arity " + std::to_string(ix.size()) +
                             " does not match tensor order " + std::to_string(shape_.size()));
    }
    std::size_t flat = 0;
    std::size_t m = 0;
    for (std::size_t i : ix) {
        flat = flat * shape_[m] + i;
        ++m;
    }
    return flat;
}

bool DenseTensor::all_finite() const {
    for (double x : values_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

DenseTensor mode_product(const DenseTensor& t, const DenseTensor& u, std::size_t mode) {
    if (mode < 1 || mode > t.order()) {
        throw DimensionError("mode " + std::to_string(mode) + " out of range for order-" +
                             std::to_string(t.order()) + " tensor");
    }
    const std::size_t m0 = mode - 1;
    const std::size_t len = t.extent(m0);

    std::size_t contract_len = 0;
    std::size_t out_rows = 0;  // 0 means drop the mode (row-vector operand)
    if (u.order() == 1) {
        contract_len = u.extent(0);
    } else if (u.order() == 2) {
        out_rows = u.extent(0);
        contract_len = u.extent(1);
    } else {
        throw DimensionError("mode-product operand must be a matrix or a row-vector");
    }
    if (contract_len != len) {
        throw DimensionError("mode " + std::to_string(mode) + " extent " + std::to_string(len) +
                             " does not match operand contraction length " +
                             std::to_string(contract_len));
    }
    if (u.order() == 1 && t.order() == 1) {
        // Full contraction of a vector leaves a single value.
        double s = 0.0;
        for (std::size_t i = 0; i < len; ++i) s += t[i] * u[i];
        return DenseTensor({1}, {s});
    }

    std::size_t pre = 1, post = 1;
    for (std::size_t m = 0; m < m0; ++m) pre *= t.extent(m);
    for (std::size_t m = m0 + 1; m < t.order(); ++m) post *= t.extent(m);

    std::vector<std::size_t> out_shape;
    out_shape.reserve(t.order());
    for (std::size_t m = 0; m < t.order(); ++m) {
        if (m == m0) {
            if (out_rows > 0) out_shape.push_back(out_rows);
        } else {
            out_shape.push_back(t.extent(m));
        }
    }

    const std::size_t rows = out_rows > 0 ? out_rows : 1;
    DenseTensor out(out_shape);
    const auto& tv = t.values();
    const auto& uv = u.values();
    auto& ov = out.values();
    for (std::size_t p = 0; p < pre; ++p) {
        for (std::size_t j = 0; j < rows; ++j) {
            for (std::size_t s = 0; s < len; ++s) {
                const double w = (out_rows > 0) ? uv[j * len + s] : uv[s];
                const double* src = tv.data() + (p * len + s) * post;
                double* dst = ov.data() + (p * rows + j) * post;
                for (std::size_t q = 0; q < post; ++q) {
                    dst[q] += w * src[q];
                }
            }
        }
    }
    return out;
}

DenseTensor hadamard(const DenseTensor& a, const DenseTensor& b) {
    if (a.order() != 1 || b.order() != 1 || a.size() != b.size()) {
        throw DimensionError("hadamard expects vectors of equal length, got " +
                             std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    DenseTensor out({a.size()});
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

DenseTensor superdiagonal_identity(std::size_t order, std::size_t dim) {
    if (order < 2) {
        throw DimensionError("superdiagonal identity needs order >= 2");
    }
    if (dim == 0) {
        throw DimensionError("superdiagonal identity needs dim >= 1");
    }
    std::vector<std::size_t> shape(order, dim);
    DenseTensor out(shape);
    // Stride of the all-equal-index diagonal: sum of per-mode strides.
    std::size_t step = 0, stride = 1;
    for (std::size_t m = 0; m < order; ++m) {
        step += stride;
        stride *= dim;
    }
    for (std::size_t i = 0; i < dim; ++i) out[i * step] = 1.0;
    return out;
}

DenseTensor matmul(const DenseTensor& a, const DenseTensor& b) {
    if (a.order() != 2 || b.order() != 2 || a.extent(1) != b.extent(0)) {
        throw DimensionError("matmul shape mismatch: " + std::to_string(a.extent(0)) + "x" +
                             std::to_string(a.order() == 2 ? a.extent(1) : 0) + " * " +
                             std::to_string(b.extent(0)) + "x" +
                             std::to_string(b.order() == 2 ? b.extent(1) : 0));
    }
    const std::size_t n = a.extent(0), k = a.extent(1), m = b.extent(1);
    DenseTensor out({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < k; ++s) {
            const double av = a[i * k + s];
            if (av == 0.0) continue;
            const double* brow = b.values().data() + s * m;
            double* orow = out.values().data() + i * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

DenseTensor transpose(const DenseTensor& a) {
    if (a.order() != 2) {
        throw DimensionError("transpose expects an order-2 tensor");
    }
    const std::size_t n = a.extent(0), m = a.extent(1);
    DenseTensor out({m, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a[i * m + j];
    return out;
}

DenseTensor row_of(const DenseTensor& m, std::size_t i) {
    if (m.order() != 2 || i >= m.extent(0)) {
        throw DimensionError("row " + std::to_string(i) + " out of range");
    }
    const std::size_t cols = m.extent(1);
    std::vector<double> v(m.values().begin() + static_cast<std::ptrdiff_t>(i * cols),
                          m.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
    return DenseTensor({cols}, std::move(v));
}

DenseTensor add(const DenseTensor& a, const DenseTensor& b) {
    if (!a.same_shape(b)) throw DimensionError("add: shape mismatch");
    DenseTensor out = a;
    for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
    return out;
}

DenseTensor sub(const DenseTensor& a, const DenseTensor& b) {
    if (!a.same_shape(b)) throw DimensionError("sub: shape mismatch");
    DenseTensor out = a;
    for (std::size_t i = 0; i < b.size(); ++i) out[i] -= b[i];
    return out;
}

DenseTensor scale(const DenseTensor& a, double c) {
    DenseTensor out = a;
    for (double& x : out.values()) x *= c;
    return out;
}

double dot(const DenseTensor& a, const DenseTensor& b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_rel_error(const DenseTensor& a, const DenseTensor& b) {
    if (!a.same_shape(b)) throw DimensionError("max_rel_error: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1.0});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace trifuse
