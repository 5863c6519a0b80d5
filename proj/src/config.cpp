#include "trifuse/config.hpp"

#include "trifuse/serialize.hpp"

#include <charconv>
#include <sstream>

namespace trifuse {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" +
                          value + "'");
    }
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double out = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
    }
}

std::vector<double> parse_real_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_real(key, item));
    }
    return out;
}

}  // namespace

RunConfig RunConfig::parse_file(const std::filesystem::path& path) {
    return parse_text(serialize::read_text_file(path), path.string());
}

RunConfig RunConfig::parse_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section != "dims" && section != "training" && section != "data" &&
                section != "paths") {
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown section [" +
                                  section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qualified = section.empty() ? key : section + "." + key;

        if (qualified == "dims.v") cfg.v = parse_count(qualified, value);
        else if (qualified == "dims.q") cfg.q = parse_count(qualified, value);
        else if (qualified == "dims.a") cfg.a = parse_count(qualified, value);
        else if (qualified == "dims.d_v") cfg.d_v = parse_count(qualified, value);
        else if (qualified == "dims.d_q") cfg.d_q = parse_count(qualified, value);
        else if (qualified == "dims.d_a") cfg.d_a = parse_count(qualified, value);
        else if (qualified == "dims.d_z") cfg.d_z = parse_count(qualified, value);
        else if (qualified == "dims.R") cfg.R = parse_count(qualified, value);
        else if (qualified == "training.step_size") cfg.step_size = parse_real(qualified, value);
        else if (qualified == "training.batch") cfg.batch = parse_count(qualified, value);
        else if (qualified == "training.epochs") cfg.epochs = parse_count(qualified, value);
        else if (qualified == "training.seed") cfg.seed = parse_count(qualified, value);
        else if (qualified == "training.alpha") cfg.alpha = parse_real(qualified, value);
        else if (qualified == "training.temperature")
            cfg.temperature = parse_real(qualified, value);
        else if (qualified == "training.clip_norm") cfg.clip_norm = parse_real(qualified, value);
        else if (qualified == "training.normalize") cfg.normalize = value;
        else if (qualified == "data.task") cfg.task = value;
        else if (qualified == "data.train_examples")
            cfg.train_examples = parse_count(qualified, value);
        else if (qualified == "data.test_examples")
            cfg.test_examples = parse_count(qualified, value);
        else if (qualified == "data.num_answers") cfg.num_answers = parse_count(qualified, value);
        else if (qualified == "data.num_types") cfg.num_types = parse_count(qualified, value);
        else if (qualified == "data.core_rank") cfg.core_rank = parse_count(qualified, value);
        else if (qualified == "data.type_weights")
            cfg.type_weights = parse_real_list(qualified, value);
        else if (qualified == "paths.out_dir") cfg.out_dir = value;
        else if (qualified == "paths.data_dir") cfg.data_dir = value;
        else if (qualified == "paths.teacher_checkpoint") cfg.teacher_checkpoint = value;
        else if (qualified == "paths.checkpoint") cfg.checkpoint = value;
        else {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" +
                              qualified + "'");
        }
    }
    return cfg;
}

void RunConfig::validate() const {
    if (d_z < 1) throw ConfigError("d_z must be >= 1");
    if (R < 1) throw ConfigError("R must be >= 1");
    for (const auto& [name, dim] : {std::pair<const char*, std::size_t>{"d_v", d_v},
                                    {"d_q", d_q},
                                    {"d_a", d_a}}) {
        if (dim < 1) throw ConfigError(std::string(name) + " must be >= 1");
        if (dim % R != 0) {
            throw ConfigError("R = " + std::to_string(R) + " must divide " + name + " = " +
                              std::to_string(dim) + " exactly");
        }
    }
    if (v < 1 || q < 1 || a < 1) throw ConfigError("channel counts must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (!(step_size > 0.0)) throw ConfigError("step_size must be positive");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (normalize != "none" && normalize != "softmax") {
        throw ConfigError("normalize must be 'none' or 'softmax', got '" + normalize + "'");
    }
}

tasks::DatasetSpec RunConfig::dataset_spec() const {
    tasks::DatasetSpec spec;
    spec.task = task;
    spec.train_examples = train_examples;
    spec.test_examples = test_examples;
    spec.v_channels = v;
    spec.q_channels = q;
    spec.a_channels = a;
    spec.d_v = d_v;
    spec.d_q = d_q;
    spec.d_a = d_a;
    spec.num_answers = num_answers;
    spec.num_types = num_types;
    spec.type_weights = type_weights;
    spec.core_rank = core_rank;
    spec.seed = seed;
    return spec;
}

tasks::TrainConfig RunConfig::train_config() const {
    tasks::TrainConfig tc;
    tc.step_size = step_size;
    tc.batch = batch;
    tc.epochs = epochs;
    tc.seed = seed;
    tc.clip_norm = clip_norm;
    tc.d_z = d_z;
    tc.R = R;
    tc.normalize = normalize == "softmax" ? AttentionNormalize::softmax_over_triplets
                                          : AttentionNormalize::none;
    tc.distill = distill::DistillConfig{alpha, temperature};
    return tc;
}

}  // namespace trifuse
