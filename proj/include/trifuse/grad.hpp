#pragma once

#include "trifuse/bilinear.hpp"
#include "trifuse/cti.hpp"

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace trifuse::grad {

/// Gradients keyed by parameter name; shapes mirror the parameters.
using GradientBundle = std::map<std::string, DenseTensor>;

/// Named mutable views of a model's learnable tensors, in a fixed order.
using ParamRefs = std::vector<std::pair<std::string, DenseTensor*>>;

void accumulate(GradientBundle& bundle, const std::string& name, const DenseTensor& g);
void scale_bundle(GradientBundle& bundle, double c);
double bundle_norm(const GradientBundle& bundle);

/// Throws unless the bundle holds exactly one gradient per parameter with a
/// matching shape.
void check_bundle(const ParamRefs& params, const GradientBundle& bundle);

// ---------------------------------------------------------------------------
// Trilinear layer
// ---------------------------------------------------------------------------

/// Recorded intermediates of one trilinear forward pass.
struct CtiTape {
    bool valid = false;
    DenseTensor v, q, a;                  // input channel matrices
    std::vector<DenseTensor> p1, p2, p3;  // per-slice projections
    std::vector<DenseTensor> t1, t2;      // partial core contractions
    DenseTensor raw_att;                  // attention scores before normalization
    DenseTensor att;
    DenseTensor pv, pq, pa;  // joint projections
    DenseTensor z;
};

CtiTape cti_forward_taped(const CtiLayerParams& p, const ModalityFeatures& v,
                          const ModalityFeatures& q, const ModalityFeatures& a);

struct CtiInputGrads {
    DenseTensor dv, dq, da;
};

/// Reverse pass through both stages. Parameter gradients are accumulated
/// into `out` under `prefix` + {attention.core[r], attention.w1[r], ...,
/// joint.wz1, joint.wz2, joint.wz3}.
void cti_backward(const CtiLayerParams& p, const CtiTape& tape, const DenseTensor& dz,
                  GradientBundle& out, const std::string& prefix = "",
                  CtiInputGrads* dinputs = nullptr);

// ---------------------------------------------------------------------------
// Bilinear layer
// ---------------------------------------------------------------------------

struct BilinearTape {
    bool valid = false;
    DenseTensor v, q;
    std::vector<DenseTensor> pv, pq;  // per-slice projections
    DenseTensor att;
    DenseTensor jv, jq;  // joint projections
    DenseTensor z;
};

BilinearTape bilinear_forward_taped(const BilinearParams& p, const ModalityFeatures& v,
                                    const ModalityFeatures& q);

void bilinear_backward(const BilinearParams& p, const BilinearTape& tape, const DenseTensor& dz,
                       GradientBundle& out, const std::string& prefix = "");

// ---------------------------------------------------------------------------
// Scalar losses on logits
// ---------------------------------------------------------------------------

/// Numerically stable binary cross entropy on a raw logit; also returns
/// d loss / d logit.
double bce_with_logit(double logit, double target, double* dlogit = nullptr);

/// Cross entropy of softmax(logits) against a class index; `dlogits`, when
/// given, receives softmax(logits) - onehot(target).
double ce_with_logits(const DenseTensor& logits, std::size_t target,
                      DenseTensor* dlogits = nullptr);

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

struct FdEntry {
    std::string param;
    double max_rel_err = 0.0;
};

struct FdReport {
    std::vector<FdEntry> per_param;
    double max_rel_err = 0.0;
    bool pass(double tol) const { return max_rel_err <= tol; }
};

/// Central-difference check of `analytic` against `loss_fn`, perturbing each
/// parameter entry in place (full scan; `max_entries_per_param` caps the scan
/// for larger tensors). Relative error uses max(|analytic|, |numeric|, 1e-8)
/// as denominator.
FdReport finite_difference_check(const ParamRefs& params, const std::function<double()>& loss_fn,
                                 const GradientBundle& analytic, double eps = 1e-5,
                                 std::size_t max_entries_per_param = SIZE_MAX);

}  // namespace trifuse::grad
