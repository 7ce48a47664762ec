#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stt/dfc.hpp"
#include "stt/evaluation.hpp"
#include "stt/model.hpp"
#include "stt/synthcohort.hpp"
#include "stt/training.hpp"

namespace stt {

// Scan file: comma-separated, header row of ROI names, one row per time
// point. Manifest: CSV of subject_id,scan_id,label,path with label in
// {NC, MCI}; paths are relative to the manifest's directory.

void write_scan_csv(const std::filesystem::path& path, const BoldSeries& series);
BoldSeries read_scan_csv(const std::filesystem::path& path);

struct ManifestEntry {
    std::string subject_id;
    std::string scan_id;
    Label label = Label::NC;
    std::string path;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
std::vector<BoldSeries> load_scans(const std::filesystem::path& manifest_path);

// Everything a run needs; JSON document with sections, unknown keys rejected.
struct RunConfig {
    SynthConfig synth;
    WindowSpec window;
    ModelConfig model;
    TrainConfig train;
    std::size_t folds = 5;
};

RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_json(const RunConfig& cfg);  // echo used in results files

// Results file for a CV or ablation run; deterministic byte-for-byte given
// identical inputs and seeds.
void write_results(const std::filesystem::path& path, const RunConfig& cfg,
                   unsigned long long seed,
                   const std::vector<std::pair<Variant, CvResult>>& table);

// Model file: text header (config + input dims) and every named parameter
// with full-precision values; round-trip is exact.
void save_model(const std::filesystem::path& path, const ModelParams& params,
                std::size_t n_rois, std::size_t n_windows);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace stt
