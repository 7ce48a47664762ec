#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "stt/errors.hpp"
#include "stt/evaluation.hpp"
#include "stt/gradcheck.hpp"
#include "stt/io.hpp"
#include "stt/synthcohort.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<unsigned long long> seed) {
    stt::RunConfig cfg;
    if (!config_path.empty()) cfg = stt::load_run_config(config_path);
    if (seed) cfg.synth.seed = *seed;
    cfg.synth.validate();

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) {
        std::cerr << "error: cannot create output directory " << out_dir << "\n";
        return kExitData;
    }

    const stt::SynthDataset ds = stt::generate_cohort(cfg.synth);
    std::vector<stt::ManifestEntry> manifest;
    for (const auto& scan : ds.scans) {
        const std::string file = scan.scan_id + ".csv";
        stt::write_scan_csv(fs::path(out_dir) / file, scan);
        manifest.push_back({scan.subject_id, scan.scan_id,
                            scan.label, file});
    }
    stt::write_manifest(fs::path(out_dir) / "manifest.csv", manifest);
    std::cout << "wrote " << ds.scans.size() << " scans ("
              << 2 * cfg.synth.n_subjects_per_group << " subjects, N=" << cfg.synth.n_rois
              << ", L_total=" << cfg.synth.time_points << ") to " << out_dir << "\n";
    return kExitOk;
}

void print_metrics_row(const std::string& name, const stt::Metrics& m) {
    std::printf("%-8s  ACC %.3f  SEN %.3f  SPE %.3f  AUC %.3f  F1 %.3f\n", name.c_str(), m.acc,
                m.sen, m.spe, m.auc, m.f1);
}

int cmd_cv(const std::string& manifest_path, const std::string& config_path,
           const std::string& out_path, std::optional<unsigned long long> seed,
           std::optional<std::size_t> folds, bool ablate, const std::string& variant,
           std::optional<std::size_t> window_length, std::optional<std::size_t> stride) {
    stt::RunConfig cfg;
    if (!config_path.empty()) cfg = stt::load_run_config(config_path);
    if (folds) cfg.folds = *folds;
    if (seed) cfg.train.seed = *seed;
    if (window_length) cfg.window.length = *window_length;
    if (stride) cfg.window.stride = *stride;
    if (!variant.empty()) cfg.model.variant = stt::parse_variant(variant);

    const auto scans = stt::load_scans(manifest_path);
    const auto data = stt::extract_features(scans, cfg.window);

    std::vector<std::pair<stt::Variant, stt::CvResult>> table;
    if (ablate) {
        table = stt::run_ablation(data, cfg.model, cfg.train, cfg.folds, cfg.train.seed,
                                  {stt::Variant::OsFc, stt::Variant::SOnly, stt::Variant::TOnly,
                                   stt::Variant::Full});
    } else {
        table.emplace_back(cfg.model.variant,
                           stt::run_cv(data, cfg.model, cfg.train, cfg.folds, cfg.train.seed));
    }
    stt::write_results(out_path, cfg, cfg.train.seed, table);
    for (const auto& [v, result] : table) print_metrics_row(stt::variant_name(v), result.mean);
    std::cout << "results written to " << out_path << "\n";
    return kExitOk;
}

int cmd_gradcheck(unsigned long long seed) {
    const stt::GradCheckReport report = stt::run_gradcheck(seed);
    for (const auto& group : report.groups)
        std::printf("%-22s  worst rel err %.3e  %s\n", group.name.c_str(), group.worst_rel_err,
                    group.pass ? "ok" : "FAIL");
    if (!report.all_pass()) {
        std::cerr << "gradient check failed\n";
        return kExitNumerical;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatio-temporal transformer over dynamic functional connectivity"};
    app.require_subcommand(1);

    std::string config_path, out_path, manifest_path, variant;
    std::optional<unsigned long long> seed;
    std::optional<std::size_t> window_length, stride, folds;
    bool ablate = false;
    unsigned long long gradcheck_seed = 0;

    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic cohort");
    synth->add_option("--config", config_path, "run config file (JSON)");
    synth->add_option("--out", out_path, "output directory")->required();
    synth->add_option("--seed", seed, "cohort seed override");

    auto* cv = app.add_subcommand("cv", "subject-level cross-validated training");
    cv->add_option("manifest", manifest_path, "scan manifest")->required();
    cv->add_option("--config", config_path, "run config file (JSON)");
    cv->add_option("--out", out_path, "results file")->required();
    cv->add_option("--seed", seed, "training/fold seed override");
    cv->add_option("--folds", folds, "number of folds (default 5)");
    cv->add_flag("--ablate", ablate, "run all four variants on paired folds");
    cv->add_option("--variant", variant, "model variant: full, s-only, t-only, os-fc");
    cv->add_option("--window-length", window_length, "sliding window length (default 70)");
    cv->add_option("--stride", stride, "sliding window step (default 2)");

    auto* gradcheck = app.add_subcommand("gradcheck", "verify analytic gradients");
    gradcheck->add_option("--seed", gradcheck_seed, "instance seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(config_path, out_path, seed);
        if (cv->parsed())
            return cmd_cv(manifest_path, config_path, out_path, seed, folds, ablate, variant,
                          window_length, stride);
        return cmd_gradcheck(gradcheck_seed);
    } catch (const stt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const stt::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const stt::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
