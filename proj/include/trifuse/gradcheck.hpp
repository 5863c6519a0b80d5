#pragma once

#include "trifuse/grad.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace trifuse::grad {

struct GradcheckEntry {
    std::string module;
    double max_rel_err = 0.0;
    bool pass = false;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    double max_rel_err = 0.0;
    bool pass = true;
};

inline constexpr double kGradcheckTolerance = 1e-4;

/// Central-difference checks over every learnable parameter of the trilinear
/// and bilinear heads and the distillation loss, at tiny dimensions.
GradcheckReport run_gradcheck(std::uint64_t seed = 11);

}  // namespace trifuse::grad
