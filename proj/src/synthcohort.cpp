#include "stt/synthcohort.hpp"

#include <cmath>
#include <string>

#include "stt/errors.hpp"

namespace stt {

void SynthConfig::validate() const {
    if (n_subjects_per_group == 0) throw ConfigError("synth config: need subjects in each group");
    if (scans_per_subject == 0) throw ConfigError("synth config: scans_per_subject must be >= 1");
    if (n_rois < 2) throw ConfigError("synth config: need >= 2 ROIs");
    if (time_points < 2) throw ConfigError("synth config: need >= 2 time points");
    if (noise_std <= 0.0) throw ConfigError("synth config: noise_std must be positive");
    if (intra_corr <= 0.0 || intra_corr >= 1.0)
        throw ConfigError("synth config: intra_corr must be in (0,1)");
    for (const auto& group : dwell_mean)
        for (double d : group)
            if (d < 2.0) throw ConfigError("synth config: dwell means must be >= 2");
}

Tensor make_state_template(std::size_t n, double rho, int flavor) {
    // Shared half-split communities; `flavor` picks which one is strongly
    // coupled (rho) while the other stays weak (rho/4). Node strengths then
    // swing between the states, which is where the windowed signal lives.
    Tensor tmpl = Tensor::identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const int ci = i < n / 2 ? 0 : 1, cj = j < n / 2 ? 0 : 1;
            if (ci != cj) continue;
            tmpl.set(i, j, ci == flavor ? rho : rho * 0.25);
        }
    return tmpl;
}

std::vector<Tensor> SynthConfig::state_templates() const {
    return {make_state_template(n_rois, intra_corr, 0), make_state_template(n_rois, intra_corr, 1)};
}

Tensor cholesky(const Tensor& spd) {
    const std::size_t n = spd.rows();
    if (spd.cols() != n) throw ShapeError("cholesky: matrix must be square");
    Tensor l = Tensor::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = spd.at(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (s <= 0.0)
                    throw NumericalError("cholesky: matrix not positive definite at row " +
                                         std::to_string(i));
                l.set(i, i, std::sqrt(s));
            } else {
                l.set(i, j, s / l.at(j, j));
            }
        }
    }
    return l;
}

Tensor correlated_noise(const Tensor& correlation_template, std::size_t length,
                        std::mt19937_64& rng) {
    const std::size_t n = correlation_template.rows();
    const Tensor l = cholesky(correlation_template);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor out = Tensor::zeros(length, n);
    std::vector<double> z(n);
    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t j = 0; j < n; ++j) z[j] = normal(rng);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k <= i; ++k) s += l.at(i, k) * z[k];
            out.set(t, i, s);
        }
    }
    return out;
}

namespace {

// dwell = 1 + Geometric(p) with p = 1/mean, so E[dwell] = mean
std::size_t sample_dwell(double mean, std::mt19937_64& rng) {
    std::geometric_distribution<std::size_t> geo(1.0 / mean);
    return 1 + geo(rng);
}

// weakest zero-variance screen: a column constant over a whole window
// would need a run of >= `window` equal consecutive values
void assert_no_constant_runs(const Tensor& samples, std::size_t window) {
    const std::size_t total = samples.rows(), n = samples.cols();
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t run = 1;
        for (std::size_t t = 1; t < total; ++t) {
            run = samples.at(t, j) == samples.at(t - 1, j) ? run + 1 : 1;
            if (run >= window)
                throw NumericalError("generated scan has a zero-variance window in ROI " +
                                     std::to_string(j));
        }
    }
}

}  // namespace

BoldSeries generate_scan(Label group, const SynthConfig& cfg, std::mt19937_64& rng,
                         ScanLog* log) {
    const auto templates = cfg.state_templates();
    const std::size_t g = static_cast<std::size_t>(group);
    std::normal_distribution<double> obs_noise(0.0, cfg.noise_std);

    BoldSeries series;
    series.label = group;
    series.samples = Tensor::zeros(cfg.time_points, cfg.n_rois);
    std::vector<int> states;
    states.reserve(cfg.time_points);

    std::size_t t = 0;
    int state = static_cast<int>(rng() % 2);  // unbiased starting state
    while (t < cfg.time_points) {
        const std::size_t dwell = sample_dwell(cfg.dwell_mean[g][static_cast<std::size_t>(state)], rng);
        const std::size_t seg = std::min(dwell, cfg.time_points - t);
        Tensor segment = correlated_noise(templates[static_cast<std::size_t>(state)], seg, rng);
        for (std::size_t u = 0; u < seg; ++u) {
            for (std::size_t j = 0; j < cfg.n_rois; ++j)
                series.samples.set(t + u, j, segment.at(u, j) + obs_noise(rng));
            states.push_back(state);
        }
        t += seg;
        state = 1 - state;
    }
    assert_no_constant_runs(series.samples, 2);
    if (log) log->states = std::move(states);
    return series;
}

SynthDataset generate_cohort(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    SynthDataset ds;
    const Label groups[2] = {Label::NC, Label::MCI};
    const char* prefix[2] = {"nc", "mci"};
    for (int gi = 0; gi < 2; ++gi) {
        for (std::size_t s = 0; s < cfg.n_subjects_per_group; ++s) {
            const std::string subject = std::string(prefix[gi]) + "_" + std::to_string(s + 1);
            for (std::size_t scan = 0; scan < cfg.scans_per_subject; ++scan) {
                ScanLog log;
                BoldSeries series = generate_scan(groups[gi], cfg, rng, &log);
                series.subject_id = subject;
                series.scan_id = subject + "_s" + std::to_string(scan + 1);
                ds.scans.push_back(std::move(series));
                ds.logs.push_back(std::move(log));
            }
        }
    }
    return ds;
}

}  // namespace stt
