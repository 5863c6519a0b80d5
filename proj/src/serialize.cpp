#include "trifuse/serialize.hpp"

#include "trifuse/version.hpp"

#include <fstream>
#include <sstream>

namespace trifuse::serialize {

namespace {

json tensor_array_to_json(const std::vector<DenseTensor>& ts) {
    json arr = json::array();
    for (const DenseTensor& t : ts) arr.push_back(tensor_to_json(t));
    return arr;
}

std::vector<DenseTensor> tensor_array_from_json(const json& j) {
    std::vector<DenseTensor> out;
    for (const json& item : j) out.push_back(tensor_from_json(item));
    return out;
}

json features_to_json(const ModalityFeatures& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.num_channels(); ++i) {
        json row = json::array();
        for (std::size_t jx = 0; jx < m.dim(); ++jx) row.push_back(m.channels()(i, jx));
        rows.push_back(std::move(row));
    }
    return rows;
}

ModalityFeatures features_from_json(const json& j, Modality tag) {
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
        throw IoError("malformed channel matrix in dataset record");
    }
    const std::size_t rows = j.size(), cols = j[0].size();
    DenseTensor t({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols) throw IoError("ragged channel matrix in dataset record");
        for (std::size_t c = 0; c < cols; ++c) t(i, c) = j[i][c].get<double>();
    }
    return ModalityFeatures(std::move(t), tag);
}

}  // namespace

json tensor_to_json(const DenseTensor& t) {
    return json{{"shape", t.shape()}, {"data", t.values()}};
}

DenseTensor tensor_from_json(const json& j) {
    if (!j.contains("shape") || !j.contains("data")) {
        throw IoError("tensor JSON needs 'shape' and 'data'");
    }
    return DenseTensor(j["shape"].get<std::vector<std::size_t>>(),
                       j["data"].get<std::vector<double>>());
}

json paralind_to_json(const ParalindFactors& f) {
    return json{{"R", f.R},
                {"dims", {f.dim(1), f.dim(2), f.dim(3)}},
                {"cores", tensor_array_to_json(f.cores)},
                {"w1", tensor_array_to_json(f.w1)},
                {"w2", tensor_array_to_json(f.w2)},
                {"w3", tensor_array_to_json(f.w3)}};
}

ParalindFactors paralind_from_json(const json& j) {
    ParalindFactors f;
    f.R = j.at("R").get<std::size_t>();
    f.cores = tensor_array_from_json(j.at("cores"));
    f.w1 = tensor_array_from_json(j.at("w1"));
    f.w2 = tensor_array_from_json(j.at("w2"));
    f.w3 = tensor_array_from_json(j.at("w3"));
    f.validate();
    return f;
}

json joint_to_json(const JointEmbeddingFactors& f) {
    return json{{"wz1", tensor_to_json(f.wz1)},
                {"wz2", tensor_to_json(f.wz2)},
                {"wz3", tensor_to_json(f.wz3)}};
}

JointEmbeddingFactors joint_from_json(const json& j) {
    JointEmbeddingFactors f;
    f.wz1 = tensor_from_json(j.at("wz1"));
    f.wz2 = tensor_from_json(j.at("wz2"));
    f.wz3 = tensor_from_json(j.at("wz3"));
    f.validate();
    return f;
}

json bilinear_to_json(const BilinearParams& p) {
    return json{{"R", p.R},
                {"cores", tensor_array_to_json(p.cores)},
                {"wv", tensor_array_to_json(p.wv)},
                {"wq", tensor_array_to_json(p.wq)},
                {"wzv", tensor_to_json(p.wzv)},
                {"wzq", tensor_to_json(p.wzq)}};
}

BilinearParams bilinear_from_json(const json& j) {
    BilinearParams p;
    p.R = j.at("R").get<std::size_t>();
    p.cores = tensor_array_from_json(j.at("cores"));
    p.wv = tensor_array_from_json(j.at("wv"));
    p.wq = tensor_array_from_json(j.at("wq"));
    p.wzv = tensor_from_json(j.at("wzv"));
    p.wzq = tensor_from_json(j.at("wzq"));
    p.validate();
    return p;
}

namespace {

json cti_params_to_json(const CtiLayerParams& p) {
    return json{{"attention", paralind_to_json(p.attention)},
                {"joint", joint_to_json(p.joint)},
                {"normalize", p.normalize == AttentionNormalize::none ? "none" : "softmax"}};
}

CtiLayerParams cti_params_from_json(const json& j) {
    CtiLayerParams p;
    p.attention = paralind_from_json(j.at("attention"));
    p.joint = joint_from_json(j.at("joint"));
    const std::string norm = j.value("normalize", "none");
    if (norm == "none") {
        p.normalize = AttentionNormalize::none;
    } else if (norm == "softmax") {
        p.normalize = AttentionNormalize::softmax_over_triplets;
    } else {
        throw IoError("unknown attention normalization '" + norm + "'");
    }
    p.validate();
    return p;
}

}  // namespace

json model_to_json(const tasks::Model& m) {
    json j;
    if (const auto* cb = std::get_if<tasks::CtiBinaryModel>(&m)) {
        j["kind"] = "cti-binary";
        j["cti"] = cti_params_to_json(cb->cti);
        j["head"] = {{"w", tensor_to_json(cb->head_w)}, {"b", tensor_to_json(cb->head_b)}};
    } else if (const auto* cm = std::get_if<tasks::CtiMulticlassModel>(&m)) {
        j["kind"] = "cti-multiclass";
        j["cti"] = cti_params_to_json(cm->cti);
        j["head"] = {{"w", tensor_to_json(cm->head_w)}, {"b", tensor_to_json(cm->head_b)}};
    } else if (const auto* bm = std::get_if<tasks::BilinearMulticlassModel>(&m)) {
        j["kind"] = "bilinear-multiclass";
        j["bilinear"] = bilinear_to_json(bm->blk);
        j["head"] = {{"w", tensor_to_json(bm->head_w)}, {"b", tensor_to_json(bm->head_b)}};
    } else {
        const auto& cc = std::get<tasks::ConcatBilinearBinaryModel>(m);
        j["kind"] = "concat-bilinear-binary";
        j["vq"] = bilinear_to_json(cc.vq);
        j["va"] = bilinear_to_json(cc.va);
        j["head"] = {{"w", tensor_to_json(cc.head_w)}, {"b", tensor_to_json(cc.head_b)}};
    }
    return j;
}

tasks::Model model_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "cti-binary") {
        tasks::CtiBinaryModel m;
        m.cti = cti_params_from_json(j.at("cti"));
        m.head_w = tensor_from_json(j.at("head").at("w"));
        m.head_b = tensor_from_json(j.at("head").at("b"));
        return m;
    }
    if (kind == "cti-multiclass") {
        tasks::CtiMulticlassModel m;
        m.cti = cti_params_from_json(j.at("cti"));
        m.head_w = tensor_from_json(j.at("head").at("w"));
        m.head_b = tensor_from_json(j.at("head").at("b"));
        return m;
    }
    if (kind == "bilinear-multiclass") {
        tasks::BilinearMulticlassModel m;
        m.blk = bilinear_from_json(j.at("bilinear"));
        m.head_w = tensor_from_json(j.at("head").at("w"));
        m.head_b = tensor_from_json(j.at("head").at("b"));
        return m;
    }
    if (kind == "concat-bilinear-binary") {
        tasks::ConcatBilinearBinaryModel m;
        m.vq = bilinear_from_json(j.at("vq"));
        m.va = bilinear_from_json(j.at("va"));
        m.head_w = tensor_from_json(j.at("head").at("w"));
        m.head_b = tensor_from_json(j.at("head").at("b"));
        return m;
    }
    throw IoError("unknown checkpoint kind '" + kind + "'");
}

void save_model(const std::filesystem::path& path, const tasks::Model& m) {
    write_text_file(path, model_to_json(m).dump() + "\n");
}

tasks::Model load_model(const std::filesystem::path& path) {
    try {
        return model_from_json(json::parse(read_text_file(path)));
    } catch (const json::exception& e) {
        throw IoError("failed to parse checkpoint " + path.string() + ": " + e.what());
    }
}

void save_dataset(const std::filesystem::path& path, const tasks::Dataset& ds) {
    std::ostringstream out;
    const auto& h = ds.header;
    json header{{"header", true},
                {"task", h.task},
                {"v_channels", h.v_channels},
                {"q_channels", h.q_channels},
                {"a_channels", h.a_channels},
                {"d_v", h.d_v},
                {"d_q", h.d_q},
                {"d_a", h.d_a},
                {"num_answers", h.num_answers},
                {"types", h.types},
                {"seed", h.seed}};
    out << header.dump() << "\n";
    for (const tasks::SyntheticExample& ex : ds.examples) {
        json answers = json::array();
        for (const ModalityFeatures& a : ex.answers) answers.push_back(features_to_json(a));
        json rec{{"v", features_to_json(ex.v)},
                 {"q", features_to_json(ex.q)},
                 {"answers", std::move(answers)},
                 {"label", ex.label},
                 {"qtype", ex.qtype}};
        out << rec.dump() << "\n";
    }
    write_text_file(path, out.str());
}

tasks::Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open dataset file " + path.string());
    }
    tasks::Dataset ds;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError("bad JSON at " + path.string() + ":" + std::to_string(line_no) + ": " +
                          e.what());
        }
        if (!have_header) {
            if (!j.value("header", false)) {
                throw IoError("dataset " + path.string() + " is missing its header line");
            }
            auto& h = ds.header;
            h.task = j.at("task").get<std::string>();
            h.v_channels = j.at("v_channels").get<std::size_t>();
            h.q_channels = j.at("q_channels").get<std::size_t>();
            h.a_channels = j.at("a_channels").get<std::size_t>();
            h.d_v = j.at("d_v").get<std::size_t>();
            h.d_q = j.at("d_q").get<std::size_t>();
            h.d_a = j.at("d_a").get<std::size_t>();
            h.num_answers = j.at("num_answers").get<std::size_t>();
            h.types = j.at("types").get<std::vector<std::string>>();
            h.seed = j.at("seed").get<std::uint64_t>();
            have_header = true;
            continue;
        }
        tasks::SyntheticExample ex;
        ex.v = features_from_json(j.at("v"), Modality::visual);
        ex.q = features_from_json(j.at("q"), Modality::question);
        for (const json& a : j.at("answers")) {
            ex.answers.push_back(features_from_json(a, Modality::answer));
        }
        ex.label = j.at("label").get<std::size_t>();
        ex.qtype = j.at("qtype").get<std::string>();
        if (ex.label >= ex.answers.size()) {
            throw IoError("label out of range at " + path.string() + ":" +
                          std::to_string(line_no));
        }
        ds.examples.push_back(std::move(ex));
    }
    if (!have_header) {
        throw IoError("dataset " + path.string() + " is empty");
    }
    return ds;
}

json eval_report_to_json(const tasks::EvalReport& report) {
    return json{{"acc", report.acc},
                {"ari", report.ari},
                {"har", report.har},
                {"per_type", report.per_type},
                {"empty_types", report.empty_types}};
}

json run_config_to_json(const RunConfig& cfg) {
    return json{{"dims",
                 {{"v", cfg.v},
                  {"q", cfg.q},
                  {"a", cfg.a},
                  {"d_v", cfg.d_v},
                  {"d_q", cfg.d_q},
                  {"d_a", cfg.d_a},
                  {"d_z", cfg.d_z},
                  {"R", cfg.R}}},
                {"training",
                 {{"step_size", cfg.step_size},
                  {"batch", cfg.batch},
                  {"epochs", cfg.epochs},
                  {"seed", cfg.seed},
                  {"alpha", cfg.alpha},
                  {"temperature", cfg.temperature},
                  {"clip_norm", cfg.clip_norm},
                  {"normalize", cfg.normalize}}},
                {"data",
                 {{"task", cfg.task},
                  {"train_examples", cfg.train_examples},
                  {"test_examples", cfg.test_examples},
                  {"num_answers", cfg.num_answers},
                  {"num_types", cfg.num_types},
                  {"core_rank", cfg.core_rank},
                  {"type_weights", cfg.type_weights}}},
                {"paths",
                 {{"out_dir", cfg.out_dir},
                  {"data_dir", cfg.data_dir},
                  {"teacher_checkpoint", cfg.teacher_checkpoint},
                  {"checkpoint", cfg.checkpoint}}}};
}

void save_metrics_csv(const std::filesystem::path& path,
                      const std::vector<tasks::EpochStats>& history) {
    std::ostringstream out;
    out << "epoch,loss,acc,ari,har\n";
    char buf[160];
    for (const tasks::EpochStats& s : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", s.epoch, s.mean_loss,
                      s.eval.acc, s.eval.ari, s.eval.har);
        out << buf;
    }
    write_text_file(path, out.str());
}

void write_manifest(const std::filesystem::path& path, const std::string& verb,
                    const json& config, std::uint64_t seed) {
    json j{{"verb", verb}, {"seed", seed}, {"build_id", kBuildId}, {"config", config}};
    write_text_file(path, j.dump(2) + "\n");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("failed while writing " + path.string());
    }
}

}  // namespace trifuse::serialize
