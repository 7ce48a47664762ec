#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "stt/dfc.hpp"
#include "stt/model.hpp"
#include "stt/training.hpp"

namespace stt {

struct SubjectInfo {
    std::string id;
    Label label = Label::NC;
};

struct FoldSplit {
    std::size_t k = 0;
    std::map<std::string, std::size_t> fold_of_subject;
};

// Stratified subject-level folds: per-class sizes differ by at most one,
// deterministic in the seed.
FoldSplit kfold_split(const std::vector<SubjectInfo>& subjects, std::size_t k,
                      unsigned long long seed);

struct Metrics {
    double acc = 0.0, sen = 0.0, spe = 0.0, auc = 0.0, f1 = 0.0;
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
};

// sen/spe/f1 with an empty denominator come back as NaN, never silent 0/0.
Metrics confusion_metrics(const std::vector<int>& predictions, const std::vector<int>& labels);

// Probability a random positive outscores a random negative, ties at 1/2
// (rank-sum formulation). Errors unless both classes are present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Per-scan features plus the static FC, ready for any variant.
struct PreparedScan {
    std::string subject_id;
    std::string scan_id;
    Label label = Label::NC;
    FeatureMatrices features;
    Tensor fc;
};

struct PreparedDataset {
    std::vector<PreparedScan> scans;
    std::size_t n_rois = 0;
    std::size_t n_windows = 0;

    std::vector<SubjectInfo> subjects() const;
};

PreparedDataset extract_features(const std::vector<BoldSeries>& scans, const WindowSpec& spec);

struct CvResult {
    std::vector<Metrics> folds;
    Metrics mean;
    Metrics stddev;
    std::vector<TrainHistory> histories;
};

CvResult run_cv(const PreparedDataset& data, const ModelConfig& model_cfg,
                const TrainConfig& train_cfg, std::size_t k, unsigned long long seed);

// Same folds and seeds as run_cv, with the split fixed up front.
CvResult run_cv_with_split(const PreparedDataset& data, const FoldSplit& split,
                           const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                           unsigned long long seed);

// Paired comparison: every variant sees identical folds and fit seeds.
std::vector<std::pair<Variant, CvResult>> run_ablation(const PreparedDataset& data,
                                                       const ModelConfig& model_cfg,
                                                       const TrainConfig& train_cfg,
                                                       std::size_t k, unsigned long long seed,
                                                       const std::vector<Variant>& variants);

}  // namespace stt
