#pragma once

#include "trifuse/grad.hpp"
#include "trifuse/tensor.hpp"

#include <span>

namespace trifuse::tasks {
struct CtiMulticlassModel;
struct BilinearMulticlassModel;
struct SyntheticExample;
}  // namespace trifuse::tasks

namespace trifuse::distill {

/// Mixing weight and softening temperature of the distillation loss.
struct DistillConfig {
    double alpha = 0.5;
    double temperature = 3.0;  // the reference softening temperature

    void validate() const;
};

/// A probability vector on the simplex (entries > 0, summing to 1).
struct SoftOutputs {
    DenseTensor probabilities;

    explicit SoftOutputs(DenseTensor probs);
};

/// Softmax of logits / T, computed with max subtraction.
SoftOutputs softened_softmax(const DenseTensor& logits, double temperature);

/// Cross entropy -sum(target * log(predicted)) of two distributions.
double cross_entropy(const SoftOutputs& predicted, const SoftOutputs& target);

/// Mixed distillation loss: alpha * T^2 * CE(softened student vs softened
/// teacher as target) + (1 - alpha) * CE(student softmax vs hard label).
/// The teacher distribution is a constant target and receives no gradient.
double kd_loss(const DenseTensor& student_logits, const DenseTensor& teacher_logits,
               std::size_t y_true, const DistillConfig& cfg);

/// d kd_loss / d student_logits.
DenseTensor kd_loss_grad(const DenseTensor& student_logits, const DenseTensor& teacher_logits,
                         std::size_t y_true, const DistillConfig& cfg);

struct StepResult {
    double loss = 0.0;  // mean loss over the batch
    grad::GradientBundle student_grads;
};

/// One distillation step over a batch: teacher logits are computed with the
/// true answer as input, student logits from (V, Q) only; returns the mean
/// loss and student gradients. The teacher is never touched.
StepResult teacher_student_step(const tasks::CtiMulticlassModel& teacher,
                                const tasks::BilinearMulticlassModel& student,
                                std::span<const tasks::SyntheticExample> batch,
                                const DistillConfig& cfg);

}  // namespace trifuse::distill
