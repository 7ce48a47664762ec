#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <vector>

#include "stt/dfc.hpp"
#include "stt/tensor.hpp"

namespace stt {

// Two shared latent connectivity states; the groups differ only in how
// fast they switch between them, so static FC is weakly informative while
// the windowed dynamics separate the classes.
struct SynthConfig {
    std::size_t n_subjects_per_group = 30;
    std::size_t scans_per_subject = 1;
    std::size_t n_rois = 12;
    std::size_t time_points = 200;
    double intra_corr = 0.6;  // within-community correlation of the state templates
    double noise_std = 0.1;
    // mean dwell time (time points), indexed [group][state]; NC barely
    // switches within a scan, MCI switches at window scale
    std::array<std::array<double, 2>, 2> dwell_mean = {{{5000.0, 5000.0}, {30.0, 30.0}}};
    unsigned long long seed = 0;

    void validate() const;
    // The two state templates: same communities, opposite strong/weak roles.
    std::vector<Tensor> state_templates() const;
};

struct ScanLog {
    std::vector<int> states;  // latent state per time point
};

struct SynthDataset {
    std::vector<BoldSeries> scans;
    std::vector<ScanLog> logs;  // parallel to scans
};

// Block-structured correlation template: ROIs split into two communities
// with correlation rho inside each. `flavor` selects which partition.
Tensor make_state_template(std::size_t n, double rho, int flavor);

// L i.i.d. rows with population correlation equal to the template
// (lower-triangular factor applied to unit normals).
Tensor correlated_noise(const Tensor& correlation_template, std::size_t length,
                        std::mt19937_64& rng);

BoldSeries generate_scan(Label group, const SynthConfig& cfg, std::mt19937_64& rng,
                         ScanLog* log);

SynthDataset generate_cohort(const SynthConfig& cfg);

// Lower-triangular Cholesky factor; NumericalError if not positive definite.
Tensor cholesky(const Tensor& spd);

}  // namespace stt
