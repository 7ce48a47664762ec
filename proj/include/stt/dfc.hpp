#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "stt/tensor.hpp"

namespace stt {

enum class Label : int { NC = 0, MCI = 1 };

// One scan's ROI-averaged BOLD time series, L_total x N.
struct BoldSeries {
    std::string subject_id;
    std::string scan_id;
    Label label = Label::NC;
    Tensor samples;  // L_total x N

    std::size_t time_points() const { return samples.rows(); }
    std::size_t rois() const { return samples.cols(); }
};

struct WindowSpec {
    std::size_t length = 70;  // L
    std::size_t stride = 2;   // S

    void validate(std::size_t total) const;
};

// T symmetric NxN correlation matrices from overlapped windows.
struct DfcSequence {
    std::vector<Tensor> matrices;
    std::vector<std::size_t> window_starts;

    std::size_t count() const { return matrices.size(); }
};

// Paired transformer inputs. spatial is exactly the transpose of temporal.
struct FeatureMatrices {
    Tensor temporal;  // T x N, tokens = windows
    Tensor spatial;   // N x T, tokens = ROIs
};

std::size_t window_count(std::size_t total, const WindowSpec& spec);

// Sample Pearson correlation of every column pair; symmetric, unit diagonal.
// A zero-variance column raises DataError naming the ROI index.
Tensor pearson_matrix(const Tensor& window);

DfcSequence build_dfc(const BoldSeries& series, const WindowSpec& spec);

// Mean absolute off-diagonal correlation per row.
std::vector<double> node_strength(const Tensor& fc);

FeatureMatrices build_features(const DfcSequence& dfc);

// Correlation over the whole series (single window of length L_total).
Tensor static_fc(const BoldSeries& series);

}  // namespace stt
