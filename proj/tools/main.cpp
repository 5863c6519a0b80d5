#include "trifuse/config.hpp"
#include "trifuse/gradcheck.hpp"
#include "trifuse/parallel.hpp"
#include "trifuse/serialize.hpp"
#include "trifuse/verify.hpp"
#include "trifuse/version.hpp"

#include <CLI11.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace {

namespace fs = std::filesystem;
using trifuse::RunConfig;
using trifuse::serialize::json;

// Exit codes: 0 ok, 1 verification failure, 2 config error, 3 I/O error,
// 4 numerical divergence.
constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string data_dir;
    std::string teacher;
    bool deterministic = true;
};

RunConfig load_config(const CommonArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) {
        cfg = RunConfig::parse_file(args.config_path);
    }
    if (args.seed.has_value()) cfg.seed = *args.seed;
    if (!args.out.empty()) cfg.out_dir = args.out;
    if (!args.data_dir.empty()) cfg.data_dir = args.data_dir;
    if (!args.teacher.empty()) cfg.teacher_checkpoint = args.teacher;
    cfg.validate();
    return cfg;
}

std::size_t eval_workers(bool deterministic) {
    return deterministic ? 1 : trifuse::env_thread_cap();
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) {
        throw trifuse::ConfigError(what + " path not set; pass it as a flag or in [paths]");
    }
    if (!fs::exists(path)) {
        throw trifuse::IoError(what + " not found: " + path);
    }
}

int cmd_verify(std::uint64_t seed, double perturb, const std::string& json_out) {
    const trifuse::verify::VerifyReport report = trifuse::verify::run_verification(seed, perturb);
    json j;
    j["pass"] = report.pass;
    j["identities"] = json::array();
    for (const auto& id : report.identities) {
        std::printf("%-34s max_rel_err %.3e  tol %.1e  %s\n", id.name.c_str(), id.max_rel_err,
                    id.tolerance, id.pass ? "pass" : "FAIL");
        j["identities"].push_back({{"name", id.name},
                                   {"max_rel_error", id.max_rel_err},
                                   {"tolerance", id.tolerance},
                                   {"pass", id.pass}});
    }
    std::printf("verification: %s\n", report.pass ? "pass" : "FAIL");
    if (!json_out.empty()) {
        trifuse::serialize::write_text_file(json_out, j.dump(2) + "\n");
    }
    return report.pass ? kExitOk : kExitVerifyFail;
}

int cmd_params(const std::array<std::size_t, 3>& n, const std::array<std::size_t, 3>& d,
               std::size_t dz, std::size_t R) {
    const std::uint64_t full = trifuse::count_full_params(n, d, dz);
    const std::uint64_t decomposed = trifuse::count_decomposed_params(d, dz, R);
    const double rate = static_cast<double>(full) / static_cast<double>(decomposed);
    std::printf("channels            (%zu, %zu, %zu)\n", n[0], n[1], n[2]);
    std::printf("feature dims        (%zu, %zu, %zu)\n", d[0], d[1], d[2]);
    std::printf("d_z                 %zu\n", dz);
    std::printf("slices R            %zu (max %zu)\n", R, trifuse::max_slicing(d));
    std::printf("full params         %llu\n", static_cast<unsigned long long>(full));
    std::printf("decomposed params   %llu\n", static_cast<unsigned long long>(decomposed));
    std::printf("decomposition rate  %.2f\n", rate);
    return kExitOk;
}

int cmd_gen_data(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const trifuse::tasks::GeneratedData data =
        trifuse::tasks::generate_dataset(cfg.dataset_spec());
    const fs::path out_dir = cfg.out_dir;
    trifuse::serialize::save_dataset(out_dir / "train.jsonl", data.train);
    trifuse::serialize::save_dataset(out_dir / "test.jsonl", data.test);
    trifuse::serialize::write_manifest(out_dir / "manifest.json", "gen-data",
                                       trifuse::serialize::run_config_to_json(cfg), cfg.seed);
    std::printf("wrote %zu train / %zu test examples to %s\n", data.train.examples.size(),
                data.test.examples.size(), out_dir.string().c_str());
    return kExitOk;
}

void print_report(const char* tag, const trifuse::tasks::EvalReport& report) {
    std::printf("%s acc %.4f  ari %.4f  har %.4f\n", tag, report.acc, report.ari, report.har);
    for (const auto& [type, acc] : report.per_type) {
        std::printf("  %-8s %.4f\n", type.c_str(), acc);
    }
    for (const std::string& t : report.empty_types) {
        std::printf("  warning: type %s has no examples; excluded from means\n", t.c_str());
    }
}

int run_training(const CommonArgs& args, trifuse::tasks::ModelKind kind, const char* verb) {
    const RunConfig cfg = load_config(args);
    if (cfg.data_dir.empty()) {
        throw trifuse::ConfigError("data_dir not set; gen-data output is required for training");
    }
    require_file(cfg.data_dir + "/train.jsonl", "training split");
    require_file(cfg.data_dir + "/test.jsonl", "evaluation split");
    const trifuse::tasks::Dataset train_ds =
        trifuse::serialize::load_dataset(fs::path(cfg.data_dir) / "train.jsonl");
    const trifuse::tasks::Dataset eval_ds =
        trifuse::serialize::load_dataset(fs::path(cfg.data_dir) / "test.jsonl");

    std::optional<trifuse::tasks::CtiMulticlassModel> teacher;
    if (kind == trifuse::tasks::ModelKind::distilled_student) {
        require_file(cfg.teacher_checkpoint, "teacher checkpoint");
        trifuse::tasks::Model loaded = trifuse::serialize::load_model(cfg.teacher_checkpoint);
        auto* cm = std::get_if<trifuse::tasks::CtiMulticlassModel>(&loaded);
        if (cm == nullptr) {
            throw trifuse::ConfigError("teacher checkpoint must be a cti-multiclass model");
        }
        teacher = std::move(*cm);
    }

    const trifuse::tasks::TrainResult result =
        trifuse::tasks::train(kind, cfg.train_config(), train_ds, eval_ds,
                              teacher.has_value() ? &*teacher : nullptr);

    const fs::path out_dir = cfg.out_dir;
    trifuse::serialize::save_model(out_dir / "checkpoint.json", result.model);
    trifuse::serialize::save_metrics_csv(out_dir / "metrics.csv", result.history);
    json manifest_cfg = trifuse::serialize::run_config_to_json(cfg);
    manifest_cfg["model_kind"] = trifuse::tasks::to_string(kind);
    if (kind == trifuse::tasks::ModelKind::distilled_student) {
        manifest_cfg["distill"] = {{"teacher_checkpoint", cfg.teacher_checkpoint},
                                   {"alpha", cfg.alpha},
                                   {"temperature", cfg.temperature},
                                   {"dataset", cfg.data_dir}};
    }
    trifuse::serialize::write_manifest(out_dir / "manifest.json", verb, manifest_cfg, cfg.seed);

    if (!result.history.empty()) {
        print_report("final", result.history.back().eval);
        std::printf("final mean loss %.6f over %zu epochs\n", result.history.back().mean_loss,
                    result.history.size());
    } else {
        std::printf("zero epochs requested; wrote the initial checkpoint\n");
    }
    return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint, const std::string& data) {
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = RunConfig::parse_file(args.config_path);
    const std::string ckpt = checkpoint.empty() ? cfg.checkpoint : checkpoint;
    require_file(ckpt, "checkpoint");
    require_file(data, "dataset");
    const trifuse::tasks::Model model = trifuse::serialize::load_model(ckpt);
    const trifuse::tasks::Dataset ds = trifuse::serialize::load_dataset(data);
    const trifuse::tasks::EvalReport report =
        trifuse::tasks::evaluate(model, ds, eval_workers(args.deterministic));
    print_report("eval", report);
    if (!args.out.empty()) {
        json j = trifuse::serialize::eval_report_to_json(report);
        j["checkpoint"] = ckpt;
        j["dataset"] = data;
        trifuse::serialize::write_text_file(args.out, j.dump(2) + "\n");
        trifuse::serialize::write_manifest(args.out + ".manifest.json", "eval", j,
                                           cfg.seed);
    }
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed) {
    const trifuse::grad::GradcheckReport report = trifuse::grad::run_gradcheck(seed);
    for (const auto& e : report.entries) {
        std::printf("%-32s max_rel_err %.3e  %s\n", e.module.c_str(), e.max_rel_err,
                    e.pass ? "pass" : "FAIL");
    }
    std::printf("gradcheck: %s (tolerance %.0e)\n", report.pass ? "pass" : "FAIL",
                trifuse::grad::kGradcheckTolerance);
    return report.pass ? kExitOk : kExitVerifyFail;
}

int cmd_export_attention(const CommonArgs& args, const std::string& checkpoint,
                         const std::string& data, std::size_t example_index) {
    require_file(checkpoint, "checkpoint");
    require_file(data, "dataset");
    if (args.out.empty()) {
        throw trifuse::ConfigError("export-attention needs --out for the map file");
    }
    const trifuse::tasks::Model model = trifuse::serialize::load_model(checkpoint);
    const trifuse::tasks::Dataset ds = trifuse::serialize::load_dataset(data);
    if (example_index >= ds.examples.size()) {
        throw trifuse::ConfigError("example index " + std::to_string(example_index) +
                                   " out of range; dataset has " +
                                   std::to_string(ds.examples.size()) + " examples");
    }
    const trifuse::tasks::SyntheticExample& ex = ds.examples[example_index];

    trifuse::DenseTensor map;
    if (const auto* cb = std::get_if<trifuse::tasks::CtiBinaryModel>(&model)) {
        map = attention_map(cb->cti, ex.v, ex.q, ex.answers[ex.label]).weights();
    } else if (const auto* cm = std::get_if<trifuse::tasks::CtiMulticlassModel>(&model)) {
        map = attention_map(cm->cti, ex.v, ex.q, ex.answers[ex.label]).weights();
    } else if (const auto* bm = std::get_if<trifuse::tasks::BilinearMulticlassModel>(&model)) {
        map = bilinear_attention(bm->blk, ex.v, ex.q);
    } else {
        const auto& cc = std::get<trifuse::tasks::ConcatBilinearBinaryModel>(model);
        map = bilinear_attention(cc.vq, ex.v, ex.q);
    }
    json j = trifuse::serialize::tensor_to_json(map);
    j["example"] = example_index;
    j["qtype"] = ex.qtype;
    trifuse::serialize::write_text_file(args.out, j.dump(2) + "\n");
    trifuse::serialize::write_manifest(
        args.out + ".manifest.json", "export-attention",
        json{{"checkpoint", checkpoint}, {"dataset", data}, {"example", example_index}}, 0);
    std::printf("wrote attention map for example %zu to %s\n", example_index, args.out.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trifuse: compact trilinear interaction toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(trifuse::kBuildId));

    CommonArgs common;
    std::uint64_t verify_seed = 7;
    double perturb = 0.0;
    std::string verify_json;
    std::array<std::size_t, 3> pn = {1, 1, 1};
    std::array<std::size_t, 3> pd = {8, 8, 8};
    std::size_t pdz = 16, pR = 1;
    std::string checkpoint, data, out_json;
    std::size_t example_index = 0;
    std::uint64_t gradcheck_seed = 11;

    auto add_common = [&](CLI::App* sub, bool with_config = true) {
        if (with_config) sub->add_option("--config", common.config_path, "run config file");
        sub->add_option("--seed", common.seed, "override the config seed");
        sub->add_option("--out", common.out, "output directory or file");
        sub->add_flag("--deterministic,!--no-deterministic", common.deterministic,
                      "single-threaded deterministic reductions (default on)");
    };

    CLI::App* verify = app.add_subcommand("verify", "run the algebraic identity suites");
    verify->add_option("--seed", verify_seed, "seed for the random identity instances");
    verify->add_option("--json", verify_json, "write a JSON report here");
    verify->add_option("--perturb", perturb,
                       "test hook: offset one reconstructed entry to force a failure")
        ->group("");

    CLI::App* params = app.add_subcommand("params", "parameter accounting table");
    params->add_option("--channels", pn, "channel counts n1 n2 n3");
    params->add_option("--dims", pd, "feature dims d1 d2 d3");
    params->add_option("--d-z", pdz, "joint embedding dim");
    params->add_option("--slices", pR, "slicing parameter R");

    CLI::App* gen = app.add_subcommand("gen-data", "generate a planted synthetic dataset");
    add_common(gen);

    CLI::App* teach = app.add_subcommand("train-teacher", "train the trilinear model");
    CLI::App* student = app.add_subcommand("train-student", "train the bilinear baseline");
    CLI::App* dist = app.add_subcommand("distill", "train the distilled student");
    CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    CLI::App* gradc = app.add_subcommand("gradcheck", "finite-difference gradient report");
    CLI::App* exporta = app.add_subcommand("export-attention", "dump one attention map as JSON");

    add_common(teach);
    add_common(student);
    add_common(dist);
    add_common(evalc);
    for (CLI::App* sub : {teach, student, dist}) {
        sub->add_option("--data", common.data_dir, "dataset directory from gen-data");
    }
    dist->add_option("--teacher", common.teacher, "teacher checkpoint path");
    evalc->add_option("--checkpoint", checkpoint, "model checkpoint");
    evalc->add_option("--data", data, "dataset (.jsonl)");
    gradc->add_option("--seed", gradcheck_seed, "seed for the check instances");
    add_common(exporta, false);
    exporta->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    exporta->add_option("--data", data, "dataset (.jsonl)")->required();
    exporta->add_option("--example", example_index, "example index");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (verify->parsed()) return cmd_verify(verify_seed, perturb, verify_json);
        if (params->parsed()) return cmd_params(pn, pd, pdz, pR);
        if (gen->parsed()) return cmd_gen_data(common);
        if (teach->parsed())
            return run_training(common, trifuse::tasks::ModelKind::cti_teacher, "train-teacher");
        if (student->parsed())
            return run_training(common, trifuse::tasks::ModelKind::bilinear_student,
                                "train-student");
        if (dist->parsed())
            return run_training(common, trifuse::tasks::ModelKind::distilled_student, "distill");
        if (evalc->parsed()) return cmd_eval(common, checkpoint, data);
        if (gradc->parsed()) return cmd_gradcheck(gradcheck_seed);
        if (exporta->parsed())
            return cmd_export_attention(common, checkpoint, data, example_index);
    } catch (const trifuse::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const trifuse::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const trifuse::DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const trifuse::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const trifuse::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
