#include "trifuse/gradcheck.hpp"

#include "trifuse/distill.hpp"
#include "trifuse/tasks.hpp"

#include <algorithm>

namespace trifuse::grad {

namespace {

tasks::SyntheticExample tiny_example(std::size_t answers, std::array<std::size_t, 3> n,
                                     std::array<std::size_t, 3> d, Rng& rng) {
    tasks::SyntheticExample ex;
    ex.v = ModalityFeatures(gaussian_tensor({n[0], d[0]}, 1.0, rng), Modality::visual);
    ex.q = ModalityFeatures(gaussian_tensor({n[1], d[1]}, 1.0, rng), Modality::question);
    for (std::size_t i = 0; i < answers; ++i) {
        ex.answers.emplace_back(gaussian_tensor({n[2], d[2]}, 1.0, rng), Modality::answer);
    }
    ex.label = answers / 2;
    ex.qtype = "qt0";
    return ex;
}

GradcheckEntry check_model(const std::string& name, tasks::Model model,
                           const tasks::SyntheticExample& ex) {
    GradientBundle grads;
    tasks::example_loss_grad(model, ex, grads);
    const ParamRefs params = tasks::parameters(model);
    check_bundle(params, grads);
    const auto loss_fn = [&]() {
        GradientBundle scratch;
        return tasks::example_loss_grad(model, ex, scratch).first;
    };
    const FdReport fd = finite_difference_check(params, loss_fn, grads);
    return GradcheckEntry{name, fd.max_rel_err, fd.max_rel_err <= kGradcheckTolerance};
}

GradcheckEntry check_kd(const std::string& name, const tasks::CtiMulticlassModel& teacher,
                        tasks::BilinearMulticlassModel student,
                        const std::vector<tasks::SyntheticExample>& batch,
                        const distill::DistillConfig& cfg) {
    const distill::StepResult step = distill::teacher_student_step(teacher, student, batch, cfg);
    const ParamRefs params = tasks::parameters(student);
    check_bundle(params, step.student_grads);
    const auto loss_fn = [&]() {
        return distill::teacher_student_step(teacher, student, batch, cfg).loss;
    };
    const FdReport fd = finite_difference_check(params, loss_fn, step.student_grads);
    return GradcheckEntry{name, fd.max_rel_err, fd.max_rel_err <= kGradcheckTolerance};
}

}  // namespace

GradcheckReport run_gradcheck(std::uint64_t seed) {
    Rng rng = make_rng(seed, 5);
    const std::array<std::size_t, 3> n = {2, 3, 2};
    const std::array<std::size_t, 3> d = {4, 2, 4};
    const std::size_t dz = 3, classes = 4;

    GradcheckReport report;
    const tasks::SyntheticExample ex = tiny_example(3, n, d, rng);

    report.entries.push_back(
        check_model("cti-binary+bce", tasks::CtiBinaryModel::random(d, dz, 2, rng), ex));
    report.entries.push_back(check_model(
        "cti-multiclass+ce", tasks::CtiMulticlassModel::random(d, dz, 1, ex.answers.size(), rng),
        ex));
    {
        tasks::CtiBinaryModel softmaxed = tasks::CtiBinaryModel::random(d, dz, 2, rng);
        softmaxed.cti.normalize = AttentionNormalize::softmax_over_triplets;
        report.entries.push_back(check_model("cti-binary+softmax-attention", softmaxed, ex));
    }
    report.entries.push_back(check_model(
        "bilinear-student+ce",
        tasks::BilinearMulticlassModel::random({d[0], d[1]}, dz, 2, classes, rng), ex));
    report.entries.push_back(check_model(
        "concat-baseline+bce",
        tasks::ConcatBilinearBinaryModel::random(d[0], d[1], d[2], dz, 1, rng), ex));

    // Distillation loss over every alpha/temperature corner.
    const tasks::CtiMulticlassModel teacher =
        tasks::CtiMulticlassModel::random(d, dz, 1, classes, rng);
    const tasks::BilinearMulticlassModel student =
        tasks::BilinearMulticlassModel::random({d[0], d[1]}, dz, 2, classes, rng);
    std::vector<tasks::SyntheticExample> batch = {tiny_example(classes, n, d, rng),
                                                  tiny_example(classes, n, d, rng)};
    for (double alpha : {0.0, 0.5, 1.0}) {
        for (double temperature : {1.0, 3.0}) {
            const std::string name = "kd-loss(alpha=" + std::to_string(alpha).substr(0, 3) +
                                     ",T=" + std::to_string(temperature).substr(0, 1) + ")";
            report.entries.push_back(
                check_kd(name, teacher, student, batch,
                         distill::DistillConfig{alpha, temperature}));
        }
    }

    for (const GradcheckEntry& e : report.entries) {
        report.max_rel_err = std::max(report.max_rel_err, e.max_rel_err);
        report.pass = report.pass && e.pass;
    }
    return report;
}

}  // namespace trifuse::grad
