#include "stt/dfc.hpp"

#include <cmath>

#include "stt/errors.hpp"

namespace stt {

void WindowSpec::validate(std::size_t total) const {
    if (stride < 1 || stride > length)
        throw ConfigError("window spec: need 1 <= stride <= length, got S=" +
                          std::to_string(stride) + ", L=" + std::to_string(length));
    if (total < length)
        throw DataError("series has " + std::to_string(total) +
                        " time points, shorter than window length " + std::to_string(length));
}

std::size_t window_count(std::size_t total, const WindowSpec& spec) {
    spec.validate(total);
    return (total - spec.length) / spec.stride + 1;
}

Tensor pearson_matrix(const Tensor& window) {
    const std::size_t len = window.rows(), n = window.cols();
    if (len < 2) throw DataError("pearson_matrix: window length must be >= 2");
    std::vector<double> mean(n, 0.0);
    for (std::size_t t = 0; t < len; ++t)
        for (std::size_t j = 0; j < n; ++j) mean[j] += window.at(t, j);
    for (std::size_t j = 0; j < n; ++j) mean[j] /= static_cast<double>(len);

    // centered columns and their norms
    std::vector<double> centered(len * n);
    std::vector<double> norm(n, 0.0);
    for (std::size_t t = 0; t < len; ++t)
        for (std::size_t j = 0; j < n; ++j) {
            const double d = window.at(t, j) - mean[j];
            centered[t * n + j] = d;
            norm[j] += d * d;
        }
    for (std::size_t j = 0; j < n; ++j) {
        if (norm[j] == 0.0)
            throw DataError("pearson_matrix: zero-variance column (ROI " + std::to_string(j) +
                            ")");
        norm[j] = std::sqrt(norm[j]);
    }

    Tensor fc = Tensor::identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t t = 0; t < len; ++t) dot += centered[t * n + i] * centered[t * n + j];
            double r = dot / (norm[i] * norm[j]);
            r = std::min(1.0, std::max(-1.0, r));
            fc.set(i, j, r);
            fc.set(j, i, r);
        }
    return fc;
}

DfcSequence build_dfc(const BoldSeries& series, const WindowSpec& spec) {
    const std::size_t total = series.time_points(), n = series.rois();
    const std::size_t t_count = window_count(total, spec);
    DfcSequence seq;
    seq.matrices.reserve(t_count);
    seq.window_starts.reserve(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
        const std::size_t start = t * spec.stride;
        Tensor window = Tensor::zeros(spec.length, n);
        for (std::size_t u = 0; u < spec.length; ++u)
            for (std::size_t j = 0; j < n; ++j) window.set(u, j, series.samples.at(start + u, j));
        seq.matrices.push_back(pearson_matrix(window));
        seq.window_starts.push_back(start);
    }
    return seq;
}

std::vector<double> node_strength(const Tensor& fc) {
    const std::size_t n = fc.rows();
    std::vector<double> strength(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) s += std::abs(fc.at(i, j));
        strength[i] = s / static_cast<double>(n - 1);
    }
    return strength;
}

FeatureMatrices build_features(const DfcSequence& dfc) {
    if (dfc.count() == 0) throw ContractError("build_features: empty dFC sequence");
    const std::size_t t_count = dfc.count();
    const std::size_t n = dfc.matrices[0].rows();
    FeatureMatrices feat;
    feat.temporal = Tensor::zeros(t_count, n);
    feat.spatial = Tensor::zeros(n, t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
        const auto strength = node_strength(dfc.matrices[t]);
        for (std::size_t i = 0; i < n; ++i) {
            feat.temporal.set(t, i, strength[i]);
            feat.spatial.set(i, t, strength[i]);
        }
    }
    return feat;
}

Tensor static_fc(const BoldSeries& series) { return pearson_matrix(series.samples); }

}  // namespace stt
