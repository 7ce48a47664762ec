#include "stt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "stt/errors.hpp"

namespace stt {

namespace {
constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();
}

FoldSplit kfold_split(const std::vector<SubjectInfo>& subjects, std::size_t k,
                      unsigned long long seed) {
    if (k < 2) throw ConfigError("kfold_split: k must be >= 2");
    std::set<std::string> ids;
    for (const auto& s : subjects)
        if (!ids.insert(s.id).second)
            throw ContractError("kfold_split: duplicate subject id " + s.id);
    std::vector<std::string> by_class[2];
    for (const auto& s : subjects) by_class[static_cast<int>(s.label)].push_back(s.id);
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].size() < k)
            throw ConfigError("kfold_split: class " + std::to_string(c) + " has " +
                              std::to_string(by_class[c].size()) + " subjects, fewer than k=" +
                              std::to_string(k));
        std::sort(by_class[c].begin(), by_class[c].end());
    }
    std::mt19937_64 rng(seed);
    FoldSplit split;
    split.k = k;
    for (int c = 0; c < 2; ++c) {
        std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
        for (std::size_t i = 0; i < by_class[c].size(); ++i)
            split.fold_of_subject[by_class[c][i]] = i % k;
    }
    return split;
}

Metrics confusion_metrics(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        throw ContractError("confusion_metrics: bad input sizes");
    Metrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1)
            (predictions[i] == 1 ? m.tp : m.fn)++;
        else
            (predictions[i] == 0 ? m.tn : m.fp)++;
    }
    const double total = static_cast<double>(m.tp + m.tn + m.fp + m.fn);
    m.acc = static_cast<double>(m.tp + m.tn) / total;
    m.sen = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn)
                              : kUndefined;
    m.spe = (m.tn + m.fp) > 0 ? static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp)
                              : kUndefined;
    m.f1 = (2 * m.tp + m.fp + m.fn) > 0
               ? 2.0 * static_cast<double>(m.tp) / static_cast<double>(2 * m.tp + m.fp + m.fn)
               : kUndefined;
    return m;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw ContractError("auc: bad input sizes");
    std::size_t pos = 0, neg = 0;
    for (int l : labels) (l == 1 ? pos : neg)++;
    if (pos == 0 || neg == 0) throw ContractError("auc: both classes must be present");

    // average ranks with tie groups, then the rank-sum U statistic
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t u = i; u < j; ++u)
            if (labels[order[u]] == 1) rank_sum_pos += avg_rank;
        i = j;
    }
    const double u_stat =
        rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
    return u_stat / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<SubjectInfo> PreparedDataset::subjects() const {
    std::vector<SubjectInfo> out;
    for (const auto& s : scans) {
        bool seen = false;
        for (const auto& u : out)
            if (u.id == s.subject_id) {
                seen = true;
                break;
            }
        if (!seen) out.push_back({s.subject_id, s.label});
    }
    return out;
}

PreparedDataset extract_features(const std::vector<BoldSeries>& scans, const WindowSpec& spec) {
    if (scans.empty()) throw DataError("extract_features: no scans");
    PreparedDataset ds;
    for (const auto& series : scans) {
        PreparedScan p;
        p.subject_id = series.subject_id;
        p.scan_id = series.scan_id;
        p.label = series.label;
        p.features = build_features(build_dfc(series, spec));
        p.fc = static_fc(series);
        if (!ds.scans.empty() &&
            (p.features.temporal.rows() != ds.scans[0].features.temporal.rows() ||
             p.features.temporal.cols() != ds.scans[0].features.temporal.cols()))
            throw DataError("extract_features: scan " + series.scan_id +
                            " has a different shape than the first scan");
        ds.scans.push_back(std::move(p));
    }
    ds.n_rois = ds.scans[0].features.temporal.cols();
    ds.n_windows = ds.scans[0].features.temporal.rows();
    return ds;
}

namespace {

ModelInput input_for(const PreparedScan& scan, Variant variant) {
    if (variant == Variant::OsFc) return ModelInput::static_fc(scan.fc);
    return ModelInput::features(scan.features);
}

Metrics metric_mean(const std::vector<Metrics>& folds) {
    Metrics m;
    const double n = static_cast<double>(folds.size());
    for (const auto& f : folds) {
        m.acc += f.acc / n;
        m.sen += f.sen / n;
        m.spe += f.spe / n;
        m.auc += f.auc / n;
        m.f1 += f.f1 / n;
        m.tp += f.tp;
        m.tn += f.tn;
        m.fp += f.fp;
        m.fn += f.fn;
    }
    return m;
}

Metrics metric_std(const std::vector<Metrics>& folds, const Metrics& mean) {
    Metrics m;
    const double n = static_cast<double>(folds.size());
    for (const auto& f : folds) {
        m.acc += (f.acc - mean.acc) * (f.acc - mean.acc) / n;
        m.sen += (f.sen - mean.sen) * (f.sen - mean.sen) / n;
        m.spe += (f.spe - mean.spe) * (f.spe - mean.spe) / n;
        m.auc += (f.auc - mean.auc) * (f.auc - mean.auc) / n;
        m.f1 += (f.f1 - mean.f1) * (f.f1 - mean.f1) / n;
    }
    m.acc = std::sqrt(m.acc);
    m.sen = std::sqrt(m.sen);
    m.spe = std::sqrt(m.spe);
    m.auc = std::sqrt(m.auc);
    m.f1 = std::sqrt(m.f1);
    return m;
}

}  // namespace

CvResult run_cv_with_split(const PreparedDataset& data, const FoldSplit& split,
                           const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                           unsigned long long seed) {
    CvResult result;
    for (std::size_t fold = 0; fold < split.k; ++fold) {
        try {
            std::vector<TrainExample> train_set;
            std::vector<const PreparedScan*> test_set;
            for (const auto& scan : data.scans) {
                if (split.fold_of_subject.at(scan.subject_id) == fold) {
                    test_set.push_back(&scan);
                } else {
                    train_set.push_back({input_for(scan, model_cfg.variant),
                                         static_cast<int>(scan.label), scan.subject_id,
                                         scan.scan_id});
                }
            }
            TrainConfig fold_cfg = train_cfg;
            fold_cfg.seed = seed + fold;
            FitResult fitted =
                fit(train_set, fold_cfg, model_cfg, data.n_rois, data.n_windows);
            result.histories.push_back(std::move(fitted.history));

            std::vector<double> scores;
            std::vector<int> preds, labels;
            for (const PreparedScan* scan : test_set) {
                Graph g;
                ModelOutput out = model_forward(g, input_for(*scan, model_cfg.variant),
                                                fitted.params);
                const double logit = out.logit.item();
                scores.push_back(logit);
                preds.push_back(logit > 0.0 ? 1 : 0);
                labels.push_back(static_cast<int>(scan->label));
            }
            Metrics m = confusion_metrics(preds, labels);
            m.auc = auc(scores, labels);
            result.folds.push_back(m);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("fold " + std::to_string(fold) + ": " + e.what());
        }
    }
    result.mean = metric_mean(result.folds);
    result.stddev = metric_std(result.folds, result.mean);
    return result;
}

CvResult run_cv(const PreparedDataset& data, const ModelConfig& model_cfg,
                const TrainConfig& train_cfg, std::size_t k, unsigned long long seed) {
    const FoldSplit split = kfold_split(data.subjects(), k, seed);
    return run_cv_with_split(data, split, model_cfg, train_cfg, seed);
}

std::vector<std::pair<Variant, CvResult>> run_ablation(const PreparedDataset& data,
                                                       const ModelConfig& model_cfg,
                                                       const TrainConfig& train_cfg,
                                                       std::size_t k, unsigned long long seed,
                                                       const std::vector<Variant>& variants) {
    const FoldSplit split = kfold_split(data.subjects(), k, seed);
    std::vector<std::pair<Variant, CvResult>> table;
    for (Variant v : variants) {
        ModelConfig cfg = model_cfg;
        cfg.variant = v;
        table.emplace_back(v, run_cv_with_split(data, split, cfg, train_cfg, seed));
    }
    return table;
}

}  // namespace stt
