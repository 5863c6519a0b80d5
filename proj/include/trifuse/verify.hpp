#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace trifuse::verify {

struct IdentityResult {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct VerifyReport {
    std::vector<IdentityResult> identities;
    bool pass = true;
};

/// Runs the algebraic-identity suites at built-in tiny dimensions:
/// the decomposed attention map against its explicit reconstruction, the
/// elementwise joint path against the expanded triple sum, the two bilinear
/// joint routes, the bilinear layer against a degenerate trilinear layer,
/// and the two oracle summation routes (bit-exact).
///
/// `perturb`, when nonzero, is added to one reconstructed tensor entry; it
/// exists so failure detection itself can be exercised.
VerifyReport run_verification(std::uint64_t seed = 7, double perturb = 0.0);

}  // namespace trifuse::verify
