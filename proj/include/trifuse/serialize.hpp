#pragma once

#include "trifuse/config.hpp"
#include "trifuse/tasks.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace trifuse::serialize {

using json = nlohmann::json;

// Tensors: {"shape":[...],"data":[...]} with row-major data.
json tensor_to_json(const DenseTensor& t);
DenseTensor tensor_from_json(const json& j);

// Factor containers.
json paralind_to_json(const ParalindFactors& f);
ParalindFactors paralind_from_json(const json& j);
json joint_to_json(const JointEmbeddingFactors& f);
JointEmbeddingFactors joint_from_json(const json& j);
json bilinear_to_json(const BilinearParams& p);
BilinearParams bilinear_from_json(const json& j);

// Model checkpoints, tagged by kind.
json model_to_json(const tasks::Model& m);
tasks::Model model_from_json(const json& j);
void save_model(const std::filesystem::path& path, const tasks::Model& m);
tasks::Model load_model(const std::filesystem::path& path);

// Datasets as JSON lines: one header object, then one object per example.
void save_dataset(const std::filesystem::path& path, const tasks::Dataset& ds);
tasks::Dataset load_dataset(const std::filesystem::path& path);

json eval_report_to_json(const tasks::EvalReport& report);

json run_config_to_json(const RunConfig& cfg);

/// Per-epoch metrics as CSV with columns epoch,loss,acc,ari,har.
void save_metrics_csv(const std::filesystem::path& path,
                      const std::vector<tasks::EpochStats>& history);

/// Reproducibility manifest written next to every artifact: the effective
/// configuration, seed and build id. Deliberately carries no timestamps so
/// identical runs produce identical bytes.
void write_manifest(const std::filesystem::path& path, const std::string& verb,
                    const json& config, std::uint64_t seed);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace trifuse::serialize
