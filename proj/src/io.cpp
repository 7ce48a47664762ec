#include "stt/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "stt/errors.hpp"

namespace stt {

namespace {

using json = nlohmann::ordered_json;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    return in;
}

Label parse_label(const std::string& s) {
    if (s == "NC") return Label::NC;
    if (s == "MCI") return Label::MCI;
    throw DataError("unknown label '" + s + "' (expected NC or MCI)");
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError("unknown config key '" + section + key + "'");
    }
}

}  // namespace

void write_scan_csv(const std::filesystem::path& path, const BoldSeries& series) {
    auto out = open_out(path);
    for (std::size_t j = 0; j < series.rois(); ++j) out << (j ? "," : "") << "roi_" << (j + 1);
    out << "\n";
    for (std::size_t t = 0; t < series.time_points(); ++t) {
        for (std::size_t j = 0; j < series.rois(); ++j)
            out << (j ? "," : "") << fmt17(series.samples.at(t, j));
        out << "\n";
    }
}

BoldSeries read_scan_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty scan file " + path.string());
    const std::size_t n = split_csv(line).size();
    if (n < 2) throw DataError("scan file " + path.string() + " has fewer than 2 ROI columns");
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != n)
            throw DataError("scan file " + path.string() + " row " + std::to_string(rows + 2) +
                            " has " + std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(n));
        for (const auto& f : fields) {
            try {
                values.push_back(std::stod(f));
            } catch (const std::exception&) {
                throw DataError("scan file " + path.string() + ": bad number '" + f + "'");
            }
        }
        ++rows;
    }
    BoldSeries series;
    series.samples = Tensor::from_values(rows, n, std::move(values));
    series.samples.check_finite("scan file " + path.string());
    return series;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries) {
    auto out = open_out(path);
    out << "subject_id,scan_id,label,path\n";
    for (const auto& e : entries)
        out << e.subject_id << "," << e.scan_id << ","
            << (e.label == Label::MCI ? "MCI" : "NC") << "," << e.path << "\n";
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line != "subject_id,scan_id,label,path")
        throw DataError("manifest " + path.string() + ": bad header");
    std::vector<ManifestEntry> entries;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 4)
            throw DataError("manifest " + path.string() + ": malformed line '" + line + "'");
        entries.push_back({fields[0], fields[1], parse_label(fields[2]), fields[3]});
    }
    if (entries.empty()) throw DataError("manifest " + path.string() + " lists no scans");
    return entries;
}

std::vector<BoldSeries> load_scans(const std::filesystem::path& manifest_path) {
    const auto entries = read_manifest(manifest_path);
    const auto base = manifest_path.parent_path();
    std::vector<BoldSeries> scans;
    for (const auto& e : entries) {
        const auto scan_path = base / e.path;
        if (!std::filesystem::exists(scan_path))
            throw DataError("manifest references missing file " + scan_path.string());
        BoldSeries series = read_scan_csv(scan_path);
        series.subject_id = e.subject_id;
        series.scan_id = e.scan_id;
        series.label = e.label;
        scans.push_back(std::move(series));
    }
    return scans;
}

namespace {

json config_to_json(const RunConfig& cfg) {
    json j;
    j["folds"] = cfg.folds;
    j["synth"] = {{"n_subjects_per_group", cfg.synth.n_subjects_per_group},
                  {"scans_per_subject", cfg.synth.scans_per_subject},
                  {"n_rois", cfg.synth.n_rois},
                  {"time_points", cfg.synth.time_points},
                  {"intra_corr", cfg.synth.intra_corr},
                  {"noise_std", cfg.synth.noise_std},
                  {"dwell_mean_nc", {cfg.synth.dwell_mean[0][0], cfg.synth.dwell_mean[0][1]}},
                  {"dwell_mean_mci", {cfg.synth.dwell_mean[1][0], cfg.synth.dwell_mean[1][1]}},
                  {"seed", cfg.synth.seed}};
    j["window"] = {{"length", cfg.window.length}, {"stride", cfg.window.stride}};
    j["model"] = {{"d_model", cfg.model.d_model},
                  {"heads", cfg.model.heads},
                  {"ffn_hidden", cfg.model.ffn_hidden},
                  {"conv_kernel", cfg.model.conv_kernel},
                  {"conv_stride", cfg.model.conv_stride},
                  {"conv_channels", cfg.model.conv_channels},
                  {"embed_dim", cfg.model.embed_dim},
                  {"variant", variant_name(cfg.model.variant)}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"lr", cfg.train.lr},
                  {"weight_decay", cfg.train.weight_decay},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"adam_eps", cfg.train.adam_eps},
                  {"seed", cfg.train.seed},
                  {"alpha", cfg.train.loss.alpha},
                  {"beta", cfg.train.loss.beta},
                  {"learnable_weights", cfg.train.loss.learnable},
                  {"tau", cfg.train.loss.tau}};
    return j;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
    auto in = open_in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    RunConfig cfg;
    check_keys(j, "", {"folds", "synth", "window", "model", "train"});
    if (j.contains("folds")) cfg.folds = j["folds"].get<std::size_t>();
    if (j.contains("synth")) {
        const auto& s = j["synth"];
        check_keys(s, "synth.",
                   {"n_subjects_per_group", "scans_per_subject", "n_rois", "time_points",
                    "intra_corr", "noise_std", "dwell_mean_nc", "dwell_mean_mci", "seed"});
        if (s.contains("n_subjects_per_group"))
            cfg.synth.n_subjects_per_group = s["n_subjects_per_group"].get<std::size_t>();
        if (s.contains("scans_per_subject"))
            cfg.synth.scans_per_subject = s["scans_per_subject"].get<std::size_t>();
        if (s.contains("n_rois")) cfg.synth.n_rois = s["n_rois"].get<std::size_t>();
        if (s.contains("time_points")) cfg.synth.time_points = s["time_points"].get<std::size_t>();
        if (s.contains("intra_corr")) cfg.synth.intra_corr = s["intra_corr"].get<double>();
        if (s.contains("noise_std")) cfg.synth.noise_std = s["noise_std"].get<double>();
        if (s.contains("dwell_mean_nc")) {
            cfg.synth.dwell_mean[0][0] = s["dwell_mean_nc"][0].get<double>();
            cfg.synth.dwell_mean[0][1] = s["dwell_mean_nc"][1].get<double>();
        }
        if (s.contains("dwell_mean_mci")) {
            cfg.synth.dwell_mean[1][0] = s["dwell_mean_mci"][0].get<double>();
            cfg.synth.dwell_mean[1][1] = s["dwell_mean_mci"][1].get<double>();
        }
        if (s.contains("seed")) cfg.synth.seed = s["seed"].get<unsigned long long>();
    }
    if (j.contains("window")) {
        const auto& w = j["window"];
        check_keys(w, "window.", {"length", "stride"});
        if (w.contains("length")) cfg.window.length = w["length"].get<std::size_t>();
        if (w.contains("stride")) cfg.window.stride = w["stride"].get<std::size_t>();
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        check_keys(m, "model.",
                   {"d_model", "heads", "ffn_hidden", "conv_kernel", "conv_stride",
                    "conv_channels", "embed_dim", "variant"});
        if (m.contains("d_model")) cfg.model.d_model = m["d_model"].get<std::size_t>();
        if (m.contains("heads")) cfg.model.heads = m["heads"].get<std::size_t>();
        if (m.contains("ffn_hidden")) cfg.model.ffn_hidden = m["ffn_hidden"].get<std::size_t>();
        if (m.contains("conv_kernel")) cfg.model.conv_kernel = m["conv_kernel"].get<std::size_t>();
        if (m.contains("conv_stride")) cfg.model.conv_stride = m["conv_stride"].get<std::size_t>();
        if (m.contains("conv_channels"))
            cfg.model.conv_channels = m["conv_channels"].get<std::size_t>();
        if (m.contains("embed_dim")) cfg.model.embed_dim = m["embed_dim"].get<std::size_t>();
        if (m.contains("variant")) cfg.model.variant = parse_variant(m["variant"].get<std::string>());
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        check_keys(t, "train.",
                   {"epochs", "batch_size", "lr", "weight_decay", "beta1", "beta2", "adam_eps",
                    "seed", "alpha", "beta", "learnable_weights", "tau"});
        if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<std::size_t>();
        if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<std::size_t>();
        if (t.contains("lr")) cfg.train.lr = t["lr"].get<double>();
        if (t.contains("weight_decay")) cfg.train.weight_decay = t["weight_decay"].get<double>();
        if (t.contains("beta1")) cfg.train.beta1 = t["beta1"].get<double>();
        if (t.contains("beta2")) cfg.train.beta2 = t["beta2"].get<double>();
        if (t.contains("adam_eps")) cfg.train.adam_eps = t["adam_eps"].get<double>();
        if (t.contains("seed")) cfg.train.seed = t["seed"].get<unsigned long long>();
        if (t.contains("alpha")) cfg.train.loss.alpha = t["alpha"].get<double>();
        if (t.contains("beta")) cfg.train.loss.beta = t["beta"].get<double>();
        if (t.contains("learnable_weights"))
            cfg.train.loss.learnable = t["learnable_weights"].get<bool>();
        if (t.contains("tau")) cfg.train.loss.tau = t["tau"].get<double>();
    }
    cfg.synth.validate();
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

std::string run_config_json(const RunConfig& cfg) { return config_to_json(cfg).dump(2); }

namespace {

json metrics_to_json(const Metrics& m, bool with_counts) {
    json j = {{"acc", m.acc}, {"sen", m.sen}, {"spe", m.spe}, {"auc", m.auc}, {"f1", m.f1}};
    if (with_counts) {
        j["tp"] = m.tp;
        j["tn"] = m.tn;
        j["fp"] = m.fp;
        j["fn"] = m.fn;
    }
    return j;
}

}  // namespace

void write_results(const std::filesystem::path& path, const RunConfig& cfg,
                   unsigned long long seed,
                   const std::vector<std::pair<Variant, CvResult>>& table) {
    json j;
    j["seed"] = seed;
    j["config"] = config_to_json(cfg);
    j["variants"] = json::array();
    for (const auto& [variant, result] : table) {
        json v;
        v["variant"] = variant_name(variant);
        v["folds"] = json::array();
        for (std::size_t f = 0; f < result.folds.size(); ++f) {
            json fj = metrics_to_json(result.folds[f], true);
            fj["fold"] = f;
            fj["final_train_loss"] = result.histories[f].back().total_loss;
            fj["final_train_acc"] = result.histories[f].back().train_acc;
            v["folds"].push_back(fj);
        }
        v["mean"] = metrics_to_json(result.mean, false);
        v["std"] = metrics_to_json(result.stddev, false);
        j["variants"].push_back(v);
    }
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

void save_model(const std::filesystem::path& path, const ModelParams& params,
                std::size_t n_rois, std::size_t n_windows) {
    auto out = open_out(path);
    const ModelConfig& c = params.config;
    out << "stt-model v1\n";
    out << "variant " << variant_name(c.variant) << "\n";
    out << "d_model " << c.d_model << "\nheads " << c.heads << "\nffn_hidden " << c.ffn_hidden
        << "\nconv_kernel " << c.conv_kernel << "\nconv_stride " << c.conv_stride
        << "\nconv_channels " << c.conv_channels << "\nembed_dim " << c.embed_dim << "\n";
    out << "n_rois " << n_rois << "\nn_windows " << n_windows << "\n";
    const auto named = params.named();
    out << "params " << named.size() << "\n";
    for (const auto& [name, tensor] : named) {
        out << "param " << name << " " << tensor.rows() << " " << tensor.cols() << "\n";
        for (std::size_t r = 0; r < tensor.rows(); ++r) {
            for (std::size_t col = 0; col < tensor.cols(); ++col)
                out << (col ? " " : "") << fmt17(tensor.at(r, col));
            out << "\n";
        }
    }
}

ModelParams load_model(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string word;
    auto expect = [&](const std::string& key) {
        in >> word;
        if (word != key) throw DataError("model file " + path.string() + ": expected '" + key +
                                         "', got '" + word + "'");
    };
    expect("stt-model");
    expect("v1");
    ModelConfig cfg;
    expect("variant");
    in >> word;
    cfg.variant = parse_variant(word);
    auto read_size = [&](const std::string& key, std::size_t& value) {
        expect(key);
        in >> value;
    };
    std::size_t n_rois = 0, n_windows = 0, n_params = 0;
    read_size("d_model", cfg.d_model);
    read_size("heads", cfg.heads);
    read_size("ffn_hidden", cfg.ffn_hidden);
    read_size("conv_kernel", cfg.conv_kernel);
    read_size("conv_stride", cfg.conv_stride);
    read_size("conv_channels", cfg.conv_channels);
    read_size("embed_dim", cfg.embed_dim);
    read_size("n_rois", n_rois);
    read_size("n_windows", n_windows);
    read_size("params", n_params);

    ModelParams params = init_params(0, cfg, n_rois, n_windows);
    auto named = params.named();
    if (named.size() != n_params)
        throw DataError("model file " + path.string() + ": expected " +
                        std::to_string(named.size()) + " params, file has " +
                        std::to_string(n_params));
    for (auto& [name, tensor] : named) {
        expect("param");
        in >> word;
        if (word != name)
            throw DataError("model file " + path.string() + ": expected param '" + name +
                            "', got '" + word + "'");
        std::size_t r = 0, c = 0;
        in >> r >> c;
        if (r != tensor.rows() || c != tensor.cols())
            throw DataError("model file " + path.string() + ": shape mismatch for " + name);
        for (auto& v : tensor.mutable_values())
            if (!(in >> v)) throw DataError("model file " + path.string() + ": truncated values");
    }
    return params;
}

}  // namespace stt
