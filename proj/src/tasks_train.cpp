#include "trifuse/parallel.hpp"
#include "trifuse/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace trifuse::tasks {

namespace {

constexpr std::uint64_t kInitStream = 42;     // model init, shared by all kinds
constexpr std::uint64_t kShuffleStream = 7;   // epoch shuffling

DenseTensor linear_head(const DenseTensor& z, const DenseTensor& w, const DenseTensor& b) {
    const std::size_t classes = b.size();
    DenseTensor logits({classes});
    const double* wd = w.values().data();
    double* out = logits.values().data();
    for (std::size_t c = 0; c < classes; ++c) out[c] = b[c];
    for (std::size_t s = 0; s < z.size(); ++s) {
        const double zs = z[s];
        const double* ws = wd + s * classes;
        for (std::size_t c = 0; c < classes; ++c) out[c] += zs * ws[c];
    }
    return logits;
}

void add_paralind_params(grad::ParamRefs& refs, const std::string& prefix, ParalindFactors& f) {
    for (std::size_t r = 0; r < f.R; ++r) {
        const std::string rs = "[" + std::to_string(r) + "]";
        refs.emplace_back(prefix + "attention.core" + rs, &f.cores[r]);
        refs.emplace_back(prefix + "attention.w1" + rs, &f.w1[r]);
        refs.emplace_back(prefix + "attention.w2" + rs, &f.w2[r]);
        refs.emplace_back(prefix + "attention.w3" + rs, &f.w3[r]);
    }
}

void add_bilinear_params(grad::ParamRefs& refs, const std::string& prefix, BilinearParams& p) {
    for (std::size_t r = 0; r < p.R; ++r) {
        const std::string rs = "[" + std::to_string(r) + "]";
        refs.emplace_back(prefix + "attention.core" + rs, &p.cores[r]);
        refs.emplace_back(prefix + "attention.wv" + rs, &p.wv[r]);
        refs.emplace_back(prefix + "attention.wq" + rs, &p.wq[r]);
    }
    refs.emplace_back(prefix + "joint.wzv", &p.wzv);
    refs.emplace_back(prefix + "joint.wzq", &p.wzq);
}

}  // namespace

CtiBinaryModel CtiBinaryModel::random(std::array<std::size_t, 3> dims, std::size_t dz,
                                      std::size_t R, Rng& rng) {
    CtiBinaryModel m;
    m.cti = CtiLayerParams::random(dims, dz, R, rng);
    m.head_w = gaussian_tensor({dz}, fan_in_scale(dz), rng);
    m.head_b = DenseTensor({1});
    return m;
}

CtiMulticlassModel CtiMulticlassModel::random(std::array<std::size_t, 3> dims, std::size_t dz,
                                              std::size_t R, std::size_t classes, Rng& rng) {
    CtiMulticlassModel m;
    m.cti = CtiLayerParams::random(dims, dz, R, rng);
    m.head_w = gaussian_tensor({dz, classes}, fan_in_scale(dz), rng);
    m.head_b = DenseTensor({classes});
    return m;
}

BilinearMulticlassModel BilinearMulticlassModel::random(std::array<std::size_t, 2> dims,
                                                        std::size_t dz, std::size_t R,
                                                        std::size_t classes, Rng& rng) {
    BilinearMulticlassModel m;
    m.blk = BilinearParams::random(dims, dz, R, rng);
    m.head_w = gaussian_tensor({dz, classes}, fan_in_scale(dz), rng);
    m.head_b = DenseTensor({classes});
    return m;
}

ConcatBilinearBinaryModel ConcatBilinearBinaryModel::random(std::size_t d_v, std::size_t d_q,
                                                            std::size_t d_a, std::size_t dz,
                                                            std::size_t R, Rng& rng) {
    ConcatBilinearBinaryModel m;
    m.vq = BilinearParams::random({d_v, d_q}, dz, R, rng);
    m.va = BilinearParams::random({d_v, d_a}, dz, R, rng);
    m.head_w = gaussian_tensor({2 * dz}, fan_in_scale(2 * dz), rng);
    m.head_b = DenseTensor({1});
    return m;
}

grad::ParamRefs parameters(CtiBinaryModel& m) {
    grad::ParamRefs refs;
    add_paralind_params(refs, "cti.", m.cti.attention);
    refs.emplace_back("cti.joint.wz1", &m.cti.joint.wz1);
    refs.emplace_back("cti.joint.wz2", &m.cti.joint.wz2);
    refs.emplace_back("cti.joint.wz3", &m.cti.joint.wz3);
    refs.emplace_back("head.w", &m.head_w);
    refs.emplace_back("head.b", &m.head_b);
    return refs;
}

grad::ParamRefs parameters(CtiMulticlassModel& m) {
    grad::ParamRefs refs;
    add_paralind_params(refs, "cti.", m.cti.attention);
    refs.emplace_back("cti.joint.wz1", &m.cti.joint.wz1);
    refs.emplace_back("cti.joint.wz2", &m.cti.joint.wz2);
    refs.emplace_back("cti.joint.wz3", &m.cti.joint.wz3);
    refs.emplace_back("head.w", &m.head_w);
    refs.emplace_back("head.b", &m.head_b);
    return refs;
}

grad::ParamRefs parameters(BilinearMulticlassModel& m) {
    grad::ParamRefs refs;
    add_bilinear_params(refs, "blk.", m.blk);
    refs.emplace_back("head.w", &m.head_w);
    refs.emplace_back("head.b", &m.head_b);
    return refs;
}

grad::ParamRefs parameters(ConcatBilinearBinaryModel& m) {
    grad::ParamRefs refs;
    add_bilinear_params(refs, "vq.", m.vq);
    add_bilinear_params(refs, "va.", m.va);
    refs.emplace_back("head.w", &m.head_w);
    refs.emplace_back("head.b", &m.head_b);
    return refs;
}

grad::ParamRefs parameters(Model& m) {
    return std::visit([](auto& model) { return parameters(model); }, m);
}

double mc_score(const CtiBinaryModel& m, const ModalityFeatures& v, const ModalityFeatures& q,
                const ModalityFeatures& answer) {
    const CtiForward fwd = cti_forward(m.cti, v, q, answer);
    return dot(m.head_w, fwd.z) + m.head_b[0];
}

DenseTensor ffoe_logits(const CtiMulticlassModel& m, const ModalityFeatures& v,
                        const ModalityFeatures& q, const ModalityFeatures& a_true) {
    const CtiForward fwd = cti_forward(m.cti, v, q, a_true);
    return linear_head(fwd.z, m.head_w, m.head_b);
}

DenseTensor student_logits(const BilinearMulticlassModel& m, const ModalityFeatures& v,
                           const ModalityFeatures& q) {
    const BilinearForward fwd = bilinear_forward(m.blk, v, q);
    return linear_head(fwd.z, m.head_w, m.head_b);
}

double concat_score(const ConcatBilinearBinaryModel& m, const ModalityFeatures& v,
                    const ModalityFeatures& q, const ModalityFeatures& answer) {
    const BilinearForward fvq = bilinear_forward(m.vq, v, q);
    const BilinearForward fva = bilinear_forward(m.va, v, answer);
    const std::size_t dz = fvq.z.size();
    double logit = m.head_b[0];
    for (std::size_t s = 0; s < dz; ++s) {
        logit += m.head_w[s] * fvq.z[s] + m.head_w[dz + s] * fva.z[s];
    }
    return logit;
}

std::size_t predict(const Model& m, const SyntheticExample& ex) {
    if (const auto* cb = std::get_if<CtiBinaryModel>(&m)) {
        std::size_t best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < ex.answers.size(); ++i) {
            const double s = mc_score(*cb, ex.v, ex.q, ex.answers[i]);
            if (s > best_score) {
                best_score = s;
                best = i;
            }
        }
        return best;
    }
    if (const auto* cc = std::get_if<ConcatBilinearBinaryModel>(&m)) {
        std::size_t best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < ex.answers.size(); ++i) {
            const double s = concat_score(*cc, ex.v, ex.q, ex.answers[i]);
            if (s > best_score) {
                best_score = s;
                best = i;
            }
        }
        return best;
    }
    if (const auto* cm = std::get_if<CtiMulticlassModel>(&m)) {
        // Needs answer input: scored on training-style triplets only.
        const DenseTensor logits = ffoe_logits(*cm, ex.v, ex.q, ex.answers[ex.label]);
        return static_cast<std::size_t>(
            std::max_element(logits.values().begin(), logits.values().end()) -
            logits.values().begin());
    }
    const auto& bm = std::get<BilinearMulticlassModel>(m);
    const DenseTensor logits = student_logits(bm, ex.v, ex.q);
    return static_cast<std::size_t>(
        std::max_element(logits.values().begin(), logits.values().end()) -
        logits.values().begin());
}

namespace {

std::pair<double, std::size_t> loss_grad_cti_binary(const CtiBinaryModel& m,
                                                    const SyntheticExample& ex,
                                                    grad::GradientBundle& grads) {
    double loss = 0.0;
    for (std::size_t i = 0; i < ex.answers.size(); ++i) {
        const grad::CtiTape tape = grad::cti_forward_taped(m.cti, ex.v, ex.q, ex.answers[i]);
        const double logit = dot(m.head_w, tape.z) + m.head_b[0];
        double dlogit = 0.0;
        loss += grad::bce_with_logit(logit, i == ex.label ? 1.0 : 0.0, &dlogit);

        grad::accumulate(grads, "head.w", scale(tape.z, dlogit));
        grad::accumulate(grads, "head.b", DenseTensor({1}, {dlogit}));
        grad::cti_backward(m.cti, tape, scale(m.head_w, dlogit), grads, "cti.");
    }
    return {loss, ex.answers.size()};
}

std::pair<double, std::size_t> loss_grad_cti_multiclass(const CtiMulticlassModel& m,
                                                        const SyntheticExample& ex,
                                                        grad::GradientBundle& grads) {
    const grad::CtiTape tape =
        grad::cti_forward_taped(m.cti, ex.v, ex.q, ex.answers[ex.label]);
    const DenseTensor logits = linear_head(tape.z, m.head_w, m.head_b);
    DenseTensor dlogits;
    const double loss = grad::ce_with_logits(logits, ex.label, &dlogits);

    const std::size_t dz = tape.z.size(), classes = dlogits.size();
    DenseTensor dhead_w({dz, classes});
    DenseTensor dzv({dz});
    for (std::size_t s = 0; s < dz; ++s) {
        for (std::size_t c = 0; c < classes; ++c) {
            dhead_w(s, c) = tape.z[s] * dlogits[c];
            dzv[s] += m.head_w(s, c) * dlogits[c];
        }
    }
    grad::accumulate(grads, "head.w", dhead_w);
    grad::accumulate(grads, "head.b", dlogits);
    grad::cti_backward(m.cti, tape, dzv, grads, "cti.");
    return {loss, 1};
}

std::pair<double, std::size_t> loss_grad_student(const BilinearMulticlassModel& m,
                                                 const SyntheticExample& ex,
                                                 grad::GradientBundle& grads) {
    const grad::BilinearTape tape = grad::bilinear_forward_taped(m.blk, ex.v, ex.q);
    const DenseTensor logits = linear_head(tape.z, m.head_w, m.head_b);
    DenseTensor dlogits;
    const double loss = grad::ce_with_logits(logits, ex.label, &dlogits);

    const std::size_t dz = tape.z.size(), classes = dlogits.size();
    DenseTensor dhead_w({dz, classes});
    DenseTensor dzv({dz});
    for (std::size_t s = 0; s < dz; ++s) {
        for (std::size_t c = 0; c < classes; ++c) {
            dhead_w(s, c) = tape.z[s] * dlogits[c];
            dzv[s] += m.head_w(s, c) * dlogits[c];
        }
    }
    grad::accumulate(grads, "head.w", dhead_w);
    grad::accumulate(grads, "head.b", dlogits);
    grad::bilinear_backward(m.blk, tape, dzv, grads, "blk.");
    return {loss, 1};
}

std::pair<double, std::size_t> loss_grad_concat(const ConcatBilinearBinaryModel& m,
                                                const SyntheticExample& ex,
                                                grad::GradientBundle& grads) {
    // The (V,Q) block does not depend on the answer: forward it once.
    const grad::BilinearTape vq_tape = grad::bilinear_forward_taped(m.vq, ex.v, ex.q);
    const std::size_t dz = vq_tape.z.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < ex.answers.size(); ++i) {
        const grad::BilinearTape va_tape =
            grad::bilinear_forward_taped(m.va, ex.v, ex.answers[i]);
        double logit = m.head_b[0];
        for (std::size_t s = 0; s < dz; ++s) {
            logit += m.head_w[s] * vq_tape.z[s] + m.head_w[dz + s] * va_tape.z[s];
        }
        double dlogit = 0.0;
        loss += grad::bce_with_logit(logit, i == ex.label ? 1.0 : 0.0, &dlogit);

        DenseTensor dhead_w({2 * dz});
        DenseTensor dz_vq({dz}), dz_va({dz});
        for (std::size_t s = 0; s < dz; ++s) {
            dhead_w[s] = dlogit * vq_tape.z[s];
            dhead_w[dz + s] = dlogit * va_tape.z[s];
            dz_vq[s] = dlogit * m.head_w[s];
            dz_va[s] = dlogit * m.head_w[dz + s];
        }
        grad::accumulate(grads, "head.w", dhead_w);
        grad::accumulate(grads, "head.b", DenseTensor({1}, {dlogit}));
        grad::bilinear_backward(m.vq, vq_tape, dz_vq, grads, "vq.");
        grad::bilinear_backward(m.va, va_tape, dz_va, grads, "va.");
    }
    return {loss, ex.answers.size()};
}

}  // namespace

std::pair<double, std::size_t> example_loss_grad(const Model& m, const SyntheticExample& ex,
                                                 grad::GradientBundle& grads) {
    if (ex.label >= ex.answers.size()) {
        throw DimensionError("example label out of range of its answer list");
    }
    if (const auto* cb = std::get_if<CtiBinaryModel>(&m)) {
        return loss_grad_cti_binary(*cb, ex, grads);
    }
    if (const auto* cm = std::get_if<CtiMulticlassModel>(&m)) {
        return loss_grad_cti_multiclass(*cm, ex, grads);
    }
    if (const auto* bm = std::get_if<BilinearMulticlassModel>(&m)) {
        return loss_grad_student(*bm, ex, grads);
    }
    return loss_grad_concat(std::get<ConcatBilinearBinaryModel>(m), ex, grads);
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "cti-teacher") return ModelKind::cti_teacher;
    if (s == "bilinear-student") return ModelKind::bilinear_student;
    if (s == "distilled-student") return ModelKind::distilled_student;
    throw ConfigError("unknown model kind '" + s + "'");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::cti_teacher: return "cti-teacher";
        case ModelKind::bilinear_student: return "bilinear-student";
        case ModelKind::distilled_student: return "distilled-student";
    }
    return "cti-teacher";
}

Model make_model(ModelKind kind, const DatasetHeader& header, const TrainConfig& cfg) {
    Rng rng = make_rng(cfg.seed, kInitStream);
    const std::array<std::size_t, 3> dims = {header.d_v, header.d_q, header.d_a};
    const bool mc = header.task == "mc";
    switch (kind) {
        case ModelKind::cti_teacher: {
            if (mc) {
                CtiBinaryModel m = CtiBinaryModel::random(dims, cfg.d_z, cfg.R, rng);
                m.cti.normalize = cfg.normalize;
                return m;
            }
            CtiMulticlassModel m =
                CtiMulticlassModel::random(dims, cfg.d_z, cfg.R, header.num_answers, rng);
            m.cti.normalize = cfg.normalize;
            return m;
        }
        case ModelKind::bilinear_student:
        case ModelKind::distilled_student:
            if (mc) {
                if (kind == ModelKind::distilled_student) {
                    throw ConfigError("distillation targets the ffoe task; the mc task has no "
                                      "deployable student");
                }
                return ConcatBilinearBinaryModel::random(header.d_v, header.d_q, header.d_a,
                                                         cfg.d_z, cfg.R, rng);
            }
            return BilinearMulticlassModel::random({header.d_v, header.d_q}, cfg.d_z, cfg.R,
                                                   header.num_answers, rng);
    }
    throw ConfigError("unknown model kind");
}

TrainResult train(ModelKind kind, const TrainConfig& cfg, const Dataset& train_ds,
                  const Dataset& eval_ds, const CtiMulticlassModel* teacher) {
    if (train_ds.examples.empty()) {
        throw ConfigError("training dataset is empty");
    }
    if (cfg.batch < 1) {
        throw ConfigError("batch size must be >= 1");
    }
    const bool distilled = kind == ModelKind::distilled_student;
    if (distilled && teacher == nullptr) {
        throw ConfigError("distilled-student training needs a teacher checkpoint");
    }

    TrainResult result{make_model(kind, train_ds.header, cfg), {}};
    grad::ParamRefs params = parameters(result.model);

    Rng shuffle_rng = make_rng(cfg.seed, kShuffleStream);
    std::vector<std::size_t> order(train_ds.examples.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss_sum = 0.0;
        std::size_t epoch_terms = 0;

        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t stop = std::min(start + cfg.batch, order.size());
            grad::GradientBundle grads;
            double batch_loss_sum = 0.0;
            std::size_t batch_terms = 0;

            if (distilled) {
                std::vector<SyntheticExample> batch;
                batch.reserve(stop - start);
                for (std::size_t b = start; b < stop; ++b) {
                    batch.push_back(train_ds.examples[order[b]]);
                }
                const distill::StepResult step =
                    distill::teacher_student_step(*teacher,
                                                  std::get<BilinearMulticlassModel>(result.model),
                                                  batch, cfg.distill);
                grads = std::move(step.student_grads);
                batch_loss_sum = step.loss * static_cast<double>(batch.size());
                batch_terms = batch.size();
            } else {
                for (std::size_t b = start; b < stop; ++b) {
                    const auto [loss, terms] =
                        example_loss_grad(result.model, train_ds.examples[order[b]], grads);
                    batch_loss_sum += loss;
                    batch_terms += terms;
                }
                grad::scale_bundle(grads, 1.0 / static_cast<double>(batch_terms));
            }

            if (!std::isfinite(batch_loss_sum)) {
                throw DivergenceError("training diverged: non-finite loss in epoch " +
                                      std::to_string(epoch + 1));
            }
            if (cfg.clip_norm > 0.0) {
                const double norm = grad::bundle_norm(grads);
                if (norm > cfg.clip_norm) {
                    grad::scale_bundle(grads, cfg.clip_norm / norm);
                }
            }
            for (auto& [name, tensor] : params) {
                const DenseTensor& g = grads.at(name);
                for (std::size_t i = 0; i < tensor->size(); ++i) {
                    (*tensor)[i] -= cfg.step_size * g[i];
                }
            }
            epoch_loss_sum += batch_loss_sum;
            epoch_terms += batch_terms;
        }

        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.mean_loss = epoch_loss_sum / static_cast<double>(epoch_terms);
        stats.eval = evaluate(result.model, eval_ds);
        result.history.push_back(std::move(stats));
    }
    return result;
}

EvalReport evaluate(const Model& m, const Dataset& ds, std::size_t workers) {
    std::vector<Outcome> outcomes(ds.examples.size());
    parallel_for(ds.examples.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const SyntheticExample& ex = ds.examples[i];
            outcomes[i] = Outcome{ex.qtype, predict(m, ex) == ex.label};
        }
    });
    return metrics_from_outcomes(outcomes, ds.header.types);
}

}  // namespace trifuse::tasks
