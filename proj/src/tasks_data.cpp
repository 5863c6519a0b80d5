#include "trifuse/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace trifuse::tasks {

namespace {

constexpr std::size_t kMaxRejectionAttempts = 512;

// Mean over channel rows, as a plain vector.
DenseTensor mean_pool(const ModalityFeatures& m) {
    const std::size_t n = m.num_channels(), d = m.dim();
    DenseTensor out({d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out[j] += m.channels()(i, j);
    for (double& x : out.values()) x /= static_cast<double>(n);
    return out;
}

// Normalized top-2 gap bands per type: type 0 keeps only wide-margin
// examples, the last type only narrow ones. Thresholds decay geometrically.
std::vector<double> margin_thresholds(std::size_t num_types) {
    std::vector<double> t;
    double level = 1.2;
    for (std::size_t k = 0; k + 1 < num_types; ++k) {
        t.push_back(level);
        level *= 0.4;
    }
    return t;  // descending; empty for a single type
}

std::size_t draw_type(const std::vector<double>& cum_weights, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, cum_weights.back());
    const double x = u(rng);
    const auto it = std::upper_bound(cum_weights.begin(), cum_weights.end(), x);
    const std::size_t idx = static_cast<std::size_t>(it - cum_weights.begin());
    return std::min(idx, cum_weights.size() - 1);
}

struct ScoredDraw {
    std::size_t label = 0;
    bool tie = false;
    double normalized_gap = 0.0;
};

ScoredDraw score_candidates(const DenseTensor& core, const ModalityFeatures& v,
                            const ModalityFeatures& q,
                            const std::vector<ModalityFeatures>& answers) {
    std::vector<double> s(answers.size());
    for (std::size_t i = 0; i < answers.size(); ++i) {
        s[i] = planted_score(core, v, q, answers[i]);
    }
    ScoredDraw out;
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i] > s[best]) best = i;
    }
    out.label = best;
    double second = -std::numeric_limits<double>::infinity();
    bool all_equal = true;
    double rms = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        rms += s[i] * s[i];
        if (s[i] != s[best]) all_equal = false;
        if (i != best) second = std::max(second, s[i]);
    }
    rms = std::sqrt(rms / static_cast<double>(s.size()));
    if (all_equal || s[best] == second) {
        out.tie = true;
        return out;
    }
    out.normalized_gap = (s[best] - second) / std::max(rms, 1e-300);
    return out;
}

Dataset generate_split(const DatasetSpec& spec, std::size_t count,
                       const std::vector<DenseTensor>& cores,
                       const std::vector<ModalityFeatures>& dictionary,
                       const std::vector<double>& cum_weights,
                       const std::vector<double>& thresholds, Rng& rng) {
    Dataset ds;
    ds.header.task = spec.task;
    ds.header.v_channels = spec.v_channels;
    ds.header.q_channels = spec.q_channels;
    ds.header.a_channels = spec.a_channels;
    ds.header.d_v = spec.d_v;
    ds.header.d_q = spec.d_q;
    ds.header.d_a = spec.d_a;
    ds.header.num_answers = spec.num_answers;
    ds.header.seed = spec.seed;
    for (std::size_t t = 0; t < spec.num_types; ++t) {
        ds.header.types.push_back("qt" + std::to_string(t));
    }

    const bool ffoe = spec.task == "ffoe";
    for (std::size_t e = 0; e < count; ++e) {
        const std::size_t type = draw_type(cum_weights, rng);
        const double lo = (type + 1 < spec.num_types) ? thresholds[type] : 0.0;
        const double hi =
            (type == 0) ? std::numeric_limits<double>::infinity() : thresholds[type - 1];

        SyntheticExample ex;
        ex.qtype = ds.header.types[type];
        for (std::size_t attempt = 0; attempt < kMaxRejectionAttempts; ++attempt) {
            ex.v = ModalityFeatures(gaussian_tensor({spec.v_channels, spec.d_v}, 1.0, rng),
                                    Modality::visual);
            ex.q = ModalityFeatures(gaussian_tensor({spec.q_channels, spec.d_q}, 1.0, rng),
                                    Modality::question);
            if (ffoe) {
                ex.answers = dictionary;
            } else {
                ex.answers.clear();
                for (std::size_t i = 0; i < spec.num_answers; ++i) {
                    ex.answers.emplace_back(gaussian_tensor({spec.a_channels, spec.d_a}, 1.0, rng),
                                            Modality::answer);
                }
            }
            const ScoredDraw draw = score_candidates(cores[type], ex.v, ex.q, ex.answers);
            if (draw.tie) {
                // Documented tie-break: the label is drawn uniformly at
                // random over the candidate list.
                std::uniform_int_distribution<std::size_t> pick(0, ex.answers.size() - 1);
                ex.label = pick(rng);
                break;
            }
            ex.label = draw.label;
            if ((draw.normalized_gap >= lo && draw.normalized_gap < hi) ||
                attempt + 1 == kMaxRejectionAttempts) {
                break;
            }
        }
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

}  // namespace

void DatasetSpec::validate() const {
    if (task != "mc" && task != "ffoe") {
        throw ConfigError("dataset task must be 'mc' or 'ffoe', got '" + task + "'");
    }
    if (v_channels < 1 || q_channels < 1 || a_channels < 1 || d_v < 1 || d_q < 1 || d_a < 1) {
        throw ConfigError("dataset dims must all be >= 1");
    }
    if (num_answers < 2) {
        throw ConfigError("dataset needs at least 2 candidate answers / classes");
    }
    if (num_types < 1) {
        throw ConfigError("dataset needs at least 1 question type");
    }
    if (core_rank < 1) {
        throw ConfigError("planted core rank must be >= 1");
    }
    if (!type_weights.empty()) {
        if (type_weights.size() != num_types) {
            throw ConfigError("type_weights length must equal num_types");
        }
        for (double w : type_weights) {
            if (!(w > 0.0)) throw ConfigError("type weights must be positive");
        }
    }
}

double planted_score(const DenseTensor& core, const ModalityFeatures& v,
                     const ModalityFeatures& q, const ModalityFeatures& a) {
    if (core.order() != 3 || core.extent(0) != v.dim() || core.extent(1) != q.dim() ||
        core.extent(2) != a.dim()) {
        throw DimensionError("planted core shape does not match feature dims");
    }
    const DenseTensor vm = mean_pool(v), qm = mean_pool(q), am = mean_pool(a);
    double s = 0.0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < vm.size(); ++i)
        for (std::size_t j = 0; j < qm.size(); ++j)
            for (std::size_t k = 0; k < am.size(); ++k, ++idx)
                s += core[idx] * vm[i] * qm[j] * am[k];
    return s;
}

GeneratedData generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    GeneratedData out;

    Rng core_rng = make_rng(spec.seed, 10);
    for (std::size_t t = 0; t < spec.num_types; ++t) {
        DenseTensor core({spec.d_v, spec.d_q, spec.d_a});
        for (std::size_t r = 0; r < spec.core_rank; ++r) {
            const DenseTensor u = gaussian_tensor({spec.d_v}, 1.0, core_rng);
            const DenseTensor w = gaussian_tensor({spec.d_q}, 1.0, core_rng);
            const DenseTensor x = gaussian_tensor({spec.d_a}, 1.0, core_rng);
            std::size_t idx = 0;
            for (std::size_t i = 0; i < spec.d_v; ++i)
                for (std::size_t j = 0; j < spec.d_q; ++j)
                    for (std::size_t k = 0; k < spec.d_a; ++k, ++idx)
                        core[idx] += u[i] * w[j] * x[k];
        }
        out.cores.push_back(std::move(core));
    }

    if (spec.task == "ffoe") {
        Rng dict_rng = make_rng(spec.seed, 11);
        for (std::size_t c = 0; c < spec.num_answers; ++c) {
            out.dictionary.emplace_back(
                gaussian_tensor({spec.a_channels, spec.d_a}, 1.0, dict_rng), Modality::answer);
        }
    }

    std::vector<double> cum;
    double acc = 0.0;
    for (std::size_t t = 0; t < spec.num_types; ++t) {
        acc += spec.type_weights.empty() ? 1.0 : spec.type_weights[t];
        cum.push_back(acc);
    }
    const std::vector<double> thresholds = margin_thresholds(spec.num_types);

    Rng train_rng = make_rng(spec.seed, 12);
    out.train = generate_split(spec, spec.train_examples, out.cores, out.dictionary, cum,
                               thresholds, train_rng);
    Rng test_rng = make_rng(spec.seed, 13);
    out.test = generate_split(spec, spec.test_examples, out.cores, out.dictionary, cum, thresholds,
                              test_rng);
    return out;
}

double planted_oracle_accuracy(const GeneratedData& data, const Dataset& ds) {
    std::size_t correct = 0;
    for (const SyntheticExample& ex : ds.examples) {
        const auto it =
            std::find(ds.header.types.begin(), ds.header.types.end(), ex.qtype);
        if (it == ds.header.types.end()) {
            throw UsageError("example type '" + ex.qtype + "' missing from dataset header");
        }
        const std::size_t type = static_cast<std::size_t>(it - ds.header.types.begin());
        std::size_t best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < ex.answers.size(); ++i) {
            const double s = planted_score(data.cores[type], ex.v, ex.q, ex.answers[i]);
            if (s > best_score) {
                best_score = s;
                best = i;
            }
        }
        if (best == ex.label) ++correct;
    }
    return ds.examples.empty() ? 0.0
                               : static_cast<double>(correct) /
                                     static_cast<double>(ds.examples.size());
}

EvalReport metrics_from_outcomes(const std::vector<Outcome>& outcomes,
                                 const std::vector<std::string>& declared_types) {
    EvalReport report;
    std::map<std::string, std::pair<std::size_t, std::size_t>> buckets;  // correct, total
    std::size_t correct = 0;
    for (const Outcome& o : outcomes) {
        auto& [c, n] = buckets[o.qtype];
        ++n;
        if (o.correct) {
            ++c;
            ++correct;
        }
    }
    for (const std::string& t : declared_types) {
        if (buckets.find(t) == buckets.end()) {
            report.empty_types.push_back(t);
        }
    }
    report.acc = outcomes.empty()
                     ? 0.0
                     : static_cast<double>(correct) / static_cast<double>(outcomes.size());
    double sum = 0.0, inv_sum = 0.0;
    bool has_zero = false;
    for (const auto& [t, bucket] : buckets) {
        const double a = static_cast<double>(bucket.first) / static_cast<double>(bucket.second);
        report.per_type[t] = a;
        sum += a;
        if (a == 0.0) {
            has_zero = true;
        } else {
            inv_sum += 1.0 / a;
        }
    }
    if (!buckets.empty()) {
        const double k = static_cast<double>(buckets.size());
        report.ari = sum / k;
        report.har = has_zero ? 0.0 : k / inv_sum;
    }
    return report;
}

}  // namespace trifuse::tasks
