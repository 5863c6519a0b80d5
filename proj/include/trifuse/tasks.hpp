#pragma once

#include "trifuse/bilinear.hpp"
#include "trifuse/cti.hpp"
#include "trifuse/distill.hpp"
#include "trifuse/grad.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace trifuse::tasks {

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct SyntheticExample {
    ModalityFeatures v;
    ModalityFeatures q;
    std::vector<ModalityFeatures> answers;
    std::size_t label = 0;
    std::string qtype;
};

struct DatasetHeader {
    std::string task = "mc";  // "mc" | "ffoe"
    std::size_t v_channels = 0, q_channels = 0, a_channels = 0;
    std::size_t d_v = 0, d_q = 0, d_a = 0;
    std::size_t num_answers = 0;  // candidates per example (mc) / classes (ffoe)
    std::vector<std::string> types;
    std::uint64_t seed = 0;
};

struct Dataset {
    DatasetHeader header;
    std::vector<SyntheticExample> examples;
};

/// Generator spec. Labels are planted through a hidden random trilinear core
/// per question type: the correct answer maximizes the core score of the
/// mean-pooled channel features, so the signal is genuinely trilinear.
/// Question types are banded by normalized top-2 score margin, giving types
/// different learned difficulty while the planting oracle stays exact.
struct DatasetSpec {
    std::string task = "mc";
    std::size_t train_examples = 2000;
    std::size_t test_examples = 500;
    std::size_t v_channels = 4, q_channels = 4, a_channels = 4;
    std::size_t d_v = 8, d_q = 8, d_a = 8;
    std::size_t num_answers = 4;
    std::size_t num_types = 2;
    std::vector<double> type_weights;  // uniform when empty
    std::size_t core_rank = 4;
    std::uint64_t seed = 1;

    void validate() const;
};

struct GeneratedData {
    Dataset train;
    Dataset test;
    std::vector<DenseTensor> cores;            // per-type planted cores (not serialized)
    std::vector<ModalityFeatures> dictionary;  // ffoe class answers; empty for mc
};

GeneratedData generate_dataset(const DatasetSpec& spec);

/// Trilinear core score of mean-pooled channels; the generator's labeling rule.
double planted_score(const DenseTensor& core, const ModalityFeatures& v,
                     const ModalityFeatures& q, const ModalityFeatures& a);

/// Accuracy of replaying the planted cores as a classifier on `ds`.
double planted_oracle_accuracy(const GeneratedData& data, const Dataset& ds);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct EvalReport {
    std::map<std::string, double> per_type;
    std::vector<std::string> empty_types;  // declared types with no examples
    double acc = 0.0;
    double ari = 0.0;  // arithmetic mean of per-type accuracies
    double har = 0.0;  // harmonic mean; 0 if any type accuracy is 0
};

struct Outcome {
    std::string qtype;
    bool correct = false;
};

EvalReport metrics_from_outcomes(const std::vector<Outcome>& outcomes,
                                 const std::vector<std::string>& declared_types = {});

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Trilinear scorer with a binary head: one logit per (V, Q, answer) triplet.
struct CtiBinaryModel {
    CtiLayerParams cti;
    DenseTensor head_w;  // dz
    DenseTensor head_b;  // 1

    static CtiBinaryModel random(std::array<std::size_t, 3> dims, std::size_t dz, std::size_t R,
                                 Rng& rng);
};

/// Trilinear encoder with a multiclass head; needs the true answer as input.
struct CtiMulticlassModel {
    CtiLayerParams cti;
    DenseTensor head_w;  // dz x C
    DenseTensor head_b;  // C

    std::size_t num_classes() const { return head_b.size(); }

    static CtiMulticlassModel random(std::array<std::size_t, 3> dims, std::size_t dz,
                                     std::size_t R, std::size_t classes, Rng& rng);
};

/// (V, Q)-only bilinear student with a multiclass head.
struct BilinearMulticlassModel {
    BilinearParams blk;
    DenseTensor head_w;  // dz x C
    DenseTensor head_b;  // C

    std::size_t num_classes() const { return head_b.size(); }

    static BilinearMulticlassModel random(std::array<std::size_t, 2> dims, std::size_t dz,
                                          std::size_t R, std::size_t classes, Rng& rng);
};

/// Two-block bilinear baseline: joint (V,Q) and (V,A) representations are
/// concatenated and scored by a binary head.
struct ConcatBilinearBinaryModel {
    BilinearParams vq;
    BilinearParams va;
    DenseTensor head_w;  // 2*dz
    DenseTensor head_b;  // 1

    static ConcatBilinearBinaryModel random(std::size_t d_v, std::size_t d_q, std::size_t d_a,
                                            std::size_t dz, std::size_t R, Rng& rng);
};

using Model = std::variant<CtiBinaryModel, CtiMulticlassModel, BilinearMulticlassModel,
                           ConcatBilinearBinaryModel>;

grad::ParamRefs parameters(CtiBinaryModel& m);
grad::ParamRefs parameters(CtiMulticlassModel& m);
grad::ParamRefs parameters(BilinearMulticlassModel& m);
grad::ParamRefs parameters(ConcatBilinearBinaryModel& m);
grad::ParamRefs parameters(Model& m);

// Scoring.
double mc_score(const CtiBinaryModel& m, const ModalityFeatures& v, const ModalityFeatures& q,
                const ModalityFeatures& answer);
DenseTensor ffoe_logits(const CtiMulticlassModel& m, const ModalityFeatures& v,
                        const ModalityFeatures& q, const ModalityFeatures& a_true);
DenseTensor student_logits(const BilinearMulticlassModel& m, const ModalityFeatures& v,
                           const ModalityFeatures& q);
double concat_score(const ConcatBilinearBinaryModel& m, const ModalityFeatures& v,
                    const ModalityFeatures& q, const ModalityFeatures& answer);

/// Predicted answer / class index for one example.
std::size_t predict(const Model& m, const SyntheticExample& ex);

/// Loss and parameter gradients of one example; returns (loss_sum, term_count)
/// so batch means can be formed over scored terms (MC counts each candidate
/// answer as one binary term).
std::pair<double, std::size_t> example_loss_grad(const Model& m, const SyntheticExample& ex,
                                                 grad::GradientBundle& grads);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class ModelKind { cti_teacher, bilinear_student, distilled_student };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind kind);

struct TrainConfig {
    double step_size = 1e-3;
    std::size_t batch = 32;
    std::size_t epochs = 10;
    std::uint64_t seed = 1;
    double clip_norm = 10.0;  // <= 0 disables clipping
    std::size_t d_z = 16;
    std::size_t R = 1;
    AttentionNormalize normalize = AttentionNormalize::none;
    distill::DistillConfig distill{0.5, 3.0};
};

struct EpochStats {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    EvalReport eval;
};

struct TrainResult {
    Model model;
    std::vector<EpochStats> history;
};

/// Seeded model construction for a dataset; the parameter-init stream is
/// independent of the shuffle stream so identically seeded students start
/// from identical weights regardless of the training mode.
Model make_model(ModelKind kind, const DatasetHeader& header, const TrainConfig& cfg);

/// Plain mini-batch gradient descent with a fixed step. Deterministic given
/// seed, config and data; a non-finite batch loss aborts with a diagnostic.
TrainResult train(ModelKind kind, const TrainConfig& cfg, const Dataset& train_ds,
                  const Dataset& eval_ds, const CtiMulticlassModel* teacher = nullptr);

/// Accuracy and mean-per-type metrics of a model on a dataset. The
/// multiclass trilinear model is scored on training-style triplets (it needs
/// the true answer); every other model predicts without the label.
EvalReport evaluate(const Model& m, const Dataset& ds, std::size_t workers = 1);

}  // namespace trifuse::tasks
