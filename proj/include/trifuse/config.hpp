#pragma once

#include "trifuse/distill.hpp"
#include "trifuse/tasks.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace trifuse {

/// Run configuration parsed from a sectioned key=value file. Unknown keys are
/// rejected so typos surface as config errors instead of silent defaults.
struct RunConfig {
    // [dims]
    std::size_t v = 4, q = 4, a = 4;
    std::size_t d_v = 8, d_q = 8, d_a = 8;
    std::size_t d_z = 16;
    std::size_t R = 1;

    // [training]
    double step_size = 1e-3;
    std::size_t batch = 32;
    std::size_t epochs = 10;
    std::uint64_t seed = 1;
    double alpha = 0.5;
    double temperature = 3.0;
    double clip_norm = 10.0;
    std::string normalize = "none";  // attention scores: "none" | "softmax"

    // [data]
    std::string task = "mc";
    std::size_t train_examples = 2000;
    std::size_t test_examples = 500;
    std::size_t num_answers = 4;
    std::size_t num_types = 2;
    std::size_t core_rank = 4;
    std::vector<double> type_weights;

    // [paths]
    std::string out_dir = ".";
    std::string data_dir;
    std::string teacher_checkpoint;
    std::string checkpoint;

    static RunConfig parse_file(const std::filesystem::path& path);
    static RunConfig parse_text(const std::string& text, const std::string& origin = "<config>");

    /// Cross-field invariants (R divides each feature dim, bounds on alpha
    /// and temperature, d_z >= 1).
    void validate() const;

    tasks::DatasetSpec dataset_spec() const;
    tasks::TrainConfig train_config() const;
};

}  // namespace trifuse
