#include "trifuse/distill.hpp"

#include "trifuse/tasks.hpp"

#include <cmath>
#include <string>

namespace trifuse::distill {

void DistillConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("distillation alpha must lie in [0,1], got " + std::to_string(alpha));
    }
    if (!(temperature > 0.0)) {
        throw ConfigError("distillation temperature must be positive, got " +
                          std::to_string(temperature));
    }
}

SoftOutputs::SoftOutputs(DenseTensor probs) : probabilities(std::move(probs)) {
    if (probabilities.order() != 1 || probabilities.size() == 0) {
        throw DimensionError("soft outputs must be a non-empty vector");
    }
    double sum = 0.0;
    for (double p : probabilities.values()) {
        if (!(p > 0.0)) {
            throw DimensionError("soft outputs must be strictly positive");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw DimensionError("soft outputs must sum to 1 within 1e-12");
    }
}

SoftOutputs softened_softmax(const DenseTensor& logits, double temperature) {
    if (!(temperature > 0.0)) {
        throw ConfigError("softmax temperature must be positive, got " +
                          std::to_string(temperature));
    }
    if (logits.order() != 1 || logits.size() == 0 || !logits.all_finite()) {
        throw DimensionError("softened softmax expects a finite non-empty logit vector");
    }
    DenseTensor scaled = logits;
    for (double& x : scaled.values()) x /= temperature;
    double m = scaled[0];
    for (double x : scaled.values()) m = std::max(m, x);
    double sum = 0.0;
    for (double& x : scaled.values()) {
        x = std::exp(x - m);
        sum += x;
    }
    for (double& x : scaled.values()) x /= sum;
    return SoftOutputs(std::move(scaled));
}

double cross_entropy(const SoftOutputs& predicted, const SoftOutputs& target) {
    if (predicted.probabilities.size() != target.probabilities.size()) {
        throw DimensionError("cross entropy needs equal-length distributions");
    }
    double ce = 0.0;
    for (std::size_t i = 0; i < predicted.probabilities.size(); ++i) {
        ce -= target.probabilities[i] * std::log(predicted.probabilities[i]);
    }
    return ce;
}

double kd_loss(const DenseTensor& student_logits, const DenseTensor& teacher_logits,
               std::size_t y_true, const DistillConfig& cfg) {
    cfg.validate();
    if (student_logits.size() != teacher_logits.size()) {
        throw DimensionError("student and teacher logit lengths differ");
    }
    if (y_true >= student_logits.size()) {
        throw DimensionError("label index " + std::to_string(y_true) +
                             " out of range for " + std::to_string(student_logits.size()) +
                             " classes");
    }
    const double hard = grad::ce_with_logits(student_logits, y_true);
    double soft = 0.0;
    if (cfg.alpha > 0.0) {
        const SoftOutputs qs = softened_softmax(student_logits, cfg.temperature);
        const SoftOutputs qt = softened_softmax(teacher_logits, cfg.temperature);
        soft = cfg.temperature * cfg.temperature * cross_entropy(qs, qt);
    }
    return cfg.alpha * soft + (1.0 - cfg.alpha) * hard;
}

DenseTensor kd_loss_grad(const DenseTensor& student_logits, const DenseTensor& teacher_logits,
                         std::size_t y_true, const DistillConfig& cfg) {
    cfg.validate();
    if (student_logits.size() != teacher_logits.size()) {
        throw DimensionError("student and teacher logit lengths differ");
    }
    DenseTensor hard_grad;
    grad::ce_with_logits(student_logits, y_true, &hard_grad);
    DenseTensor g({student_logits.size()});
    if (cfg.alpha > 0.0) {
        const SoftOutputs qs = softened_softmax(student_logits, cfg.temperature);
        const SoftOutputs qt = softened_softmax(teacher_logits, cfg.temperature);
        // d/dl of T^2 * CE(softmax(l/T), target) = T * (softmax(l/T) - target)
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] = cfg.alpha * cfg.temperature *
                   (qs.probabilities[i] - qt.probabilities[i]);
        }
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += (1.0 - cfg.alpha) * hard_grad[i];
    }
    return g;
}

StepResult teacher_student_step(const tasks::CtiMulticlassModel& teacher,
                                const tasks::BilinearMulticlassModel& student,
                                std::span<const tasks::SyntheticExample> batch,
                                const DistillConfig& cfg) {
    cfg.validate();
    if (batch.empty()) {
        throw UsageError("distillation step needs a non-empty batch");
    }
    StepResult result;
    for (const tasks::SyntheticExample& ex : batch) {
        if (ex.label >= ex.answers.size()) {
            throw DimensionError("example label out of range of its answer list");
        }
        const DenseTensor t_logits = tasks::ffoe_logits(teacher, ex.v, ex.q, ex.answers[ex.label]);
        const grad::BilinearTape tape = grad::bilinear_forward_taped(student.blk, ex.v, ex.q);
        DenseTensor s_logits({student.num_classes()});
        for (std::size_t c = 0; c < s_logits.size(); ++c) {
            double acc = student.head_b[c];
            for (std::size_t s = 0; s < tape.z.size(); ++s) {
                acc += tape.z[s] * student.head_w(s, c);
            }
            s_logits[c] = acc;
        }
        result.loss += kd_loss(s_logits, t_logits, ex.label, cfg);

        const DenseTensor dlogits = kd_loss_grad(s_logits, t_logits, ex.label, cfg);
        DenseTensor dhead_w({student.head_w.extent(0), student.head_w.extent(1)});
        DenseTensor dz({tape.z.size()});
        for (std::size_t s = 0; s < tape.z.size(); ++s) {
            for (std::size_t c = 0; c < dlogits.size(); ++c) {
                dhead_w(s, c) = tape.z[s] * dlogits[c];
                dz[s] += student.head_w(s, c) * dlogits[c];
            }
        }
        grad::accumulate(result.student_grads, "head.w", dhead_w);
        grad::accumulate(result.student_grads, "head.b", dlogits);
        grad::bilinear_backward(student.blk, tape, dz, result.student_grads, "blk.");
    }
    result.loss /= static_cast<double>(batch.size());
    grad::scale_bundle(result.student_grads, 1.0 / static_cast<double>(batch.size()));
    return result;
}

}  // namespace trifuse::distill
