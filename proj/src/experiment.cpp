#include "slab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "slab/csv.hpp"
#include "slab/error.hpp"
#include "slab/serialize.hpp"

namespace slab {

namespace {

using nlohmann::json;

// Fixed salts for deriving per-stage RNG streams from the master seed.
enum Salt : std::uint64_t {
    kSaltPretrain = 0xA1,
    kSaltDsigmInit = 0xA2,
    kSaltDsigmTune = 0xA3,
    kSaltHeadInit = 0xA4,
    kSaltDbnsTune = 0xA5,
    kSaltBarsTrain = 0xB1,
    kSaltBarsTest = 0xB2,
    kSaltCsvSplit = 0xB3,
};

// ---------------------------------------------------------------------
// Config parsing. Every getter records violations instead of throwing so
// one pass reports everything at once; unknown keys are rejected.

class ObjectReader {
public:
    ObjectReader(const json& node, std::string path, std::vector<std::string>& errors)
        : node_(node), path_(std::move(path)), errors_(errors) {
        if (!node_.is_object()) errors_.push_back(path_ + ": expected an object");
    }

    bool has(const char* key) const { return node_.is_object() && node_.contains(key); }

    template <class T>
    void get(const char* key, T& out, const char* type_name) {
        mark(key);
        if (!has(key)) return;
        try {
            out = node_.at(key).get<T>();
        } catch (const json::exception&) {
            errors_.push_back(path_ + "." + key + ": expected " + type_name);
        }
    }

    void get_uint(const char* key, std::size_t& out) { get(key, out, "a non-negative integer"); }
    void get_u64(const char* key, std::uint64_t& out) { get(key, out, "a non-negative integer"); }
    void get_double(const char* key, double& out) { get(key, out, "a number"); }
    void get_string(const char* key, std::string& out) { get(key, out, "a string"); }

    json child(const char* key) {
        mark(key);
        return has(key) ? node_.at(key) : json::object();
    }

    void require(const char* key, const char* what) {
        if (!has(key)) errors_.push_back(path_ + "." + key + ": missing (" + what + ")");
    }

    void error(const std::string& msg) { errors_.push_back(path_ + ": " + msg); }
    void error_at(const char* key, const std::string& msg) {
        errors_.push_back(path_ + "." + key + ": " + msg);
    }

    // Call last: flags any key this reader never looked at.
    void finish() {
        if (!node_.is_object()) return;
        for (const auto& [key, value] : node_.items())
            if (!seen_.count(key)) errors_.push_back(path_ + "." + key + ": unknown key");
    }

private:
    void mark(const char* key) { seen_.insert(key); }

    const json& node_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

void parse_dataset(const json& node, DatasetSpec& spec,
                   std::vector<std::string>& errors) {
    ObjectReader r(node, "dataset", errors);
    std::string kind = "synthetic-bars";
    r.get_string("kind", kind);

    if (kind == "synthetic-bars") {
        spec.kind = DatasetSpec::Kind::synthetic_bars;
        r.get_uint("classes", spec.classes);
        r.get_uint("per_class", spec.per_class);
        r.get_uint("test_per_class", spec.test_per_class);
        r.get_double("noise", spec.noise);
        if (spec.classes < 2 || spec.classes > 16)
            r.error_at("classes", "must be in [2,16]");
        if (spec.per_class == 0) r.error_at("per_class", "must be >= 1");
        if (spec.test_per_class == 0) r.error_at("test_per_class", "must be >= 1");
        if (!(spec.noise >= 0.0 && spec.noise <= 1.0))
            r.error_at("noise", "must be in [0,1]");
    } else if (kind == "mnist") {
        spec.kind = DatasetSpec::Kind::mnist;
        r.require("train_images", "path to the IDX training image file");
        r.require("train_labels", "path to the IDX training label file");
        r.require("test_images", "path to the IDX test image file");
        r.require("test_labels", "path to the IDX test label file");
        r.get_string("train_images", spec.train_images);
        r.get_string("train_labels", spec.train_labels);
        r.get_string("test_images", spec.test_images);
        r.get_string("test_labels", spec.test_labels);
        r.get_uint("train_limit", spec.train_limit);
        r.get_uint("test_limit", spec.test_limit);
    } else if (kind == "csv") {
        spec.kind = DatasetSpec::Kind::csv;
        r.require("path", "path to the CSV file");
        r.get_string("path", spec.path);
        r.get_uint("features", spec.features);
        r.get_double("train_fraction", spec.train_fraction);
        if (spec.features == 0) r.error_at("features", "must be >= 1");
        if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
            r.error_at("train_fraction", "must be in (0,1)");
    } else {
        r.error_at("kind", "unknown dataset kind '" + kind +
                           "' (synthetic-bars, mnist, csv)");
    }
    r.finish();
}

void parse_rbm(const json& node, RbmTrainConfig& cfg,
               std::vector<std::string>& errors) {
    ObjectReader r(node, "rbm", errors);
    r.get_double("learning_rate", cfg.learning_rate);
    r.get_double("momentum_initial", cfg.momentum_initial);
    r.get_double("momentum_final", cfg.momentum_final);
    r.get_double("l2", cfg.l2);
    r.get_uint("batch_size", cfg.batch_size);
    r.get_uint("epochs", cfg.epochs);
    if (!(cfg.learning_rate > 0.0)) r.error_at("learning_rate", "must be > 0");
    if (cfg.batch_size == 0) r.error_at("batch_size", "must be >= 1");
    if (cfg.l2 < 0.0) r.error_at("l2", "must be >= 0");
    r.finish();
}

void parse_fine_tune(const json& node, FineTuneConfig& cfg, std::size_t& dsigm_epochs,
                     std::vector<std::string>& errors) {
    ObjectReader r(node, "fine_tune", errors);
    r.get_double("learning_rate", cfg.learning_rate);
    r.get_double("momentum_initial", cfg.momentum_initial);
    r.get_double("momentum_final", cfg.momentum_final);
    r.get_double("l2", cfg.l2);
    r.get_uint("batch_size", cfg.batch_size);
    r.get_uint("epochs", cfg.epochs);
    r.get_uint("dsigm_epochs", dsigm_epochs);
    std::string loss = "nll";
    r.get_string("loss", loss);
    if (loss == "nll")
        cfg.loss = Loss::nll;
    else if (loss == "squared")
        cfg.loss = Loss::squared;
    else
        r.error_at("loss", "must be 'nll' or 'squared'");
    if (!(cfg.learning_rate > 0.0)) r.error_at("learning_rate", "must be > 0");
    if (cfg.batch_size == 0) r.error_at("batch_size", "must be >= 1");
    if (cfg.l2 < 0.0) r.error_at("l2", "must be >= 0");
    r.finish();
}

void parse_metrics(const json& node, MetricsOptions& m,
                   std::vector<std::string>& errors) {
    ObjectReader r(node, "metrics", errors);
    r.get_uint("k_min", m.k_min);
    r.get_uint("k_max", m.k_max);
    r.get_double("budget", m.budget);
    if (m.k_min < 2) r.error_at("k_min", "k below 2");
    if (m.k_max != 0 && m.k_max < m.k_min) r.error_at("k_max", "must be >= k_min");
    if (!(m.budget > 0.0)) r.error_at("budget", "must be > 0");
    r.finish();
}

void parse_sweep(const json& node, SweepOptions& s,
                 std::vector<std::string>& errors) {
    ObjectReader r(node, "sweep", errors);
    std::string mode = "hidden_sizes";
    r.get_string("mode", mode);
    if (mode == "hidden_sizes")
        s.mode = SweepOptions::Mode::hidden_sizes;
    else if (mode == "depths")
        s.mode = SweepOptions::Mode::depths;
    else
        r.error_at("mode", "must be 'hidden_sizes' or 'depths'");
    r.require("values", "list of hidden sizes or depths");
    r.get("values", s.values, "an array of positive integers");
    r.get_uint("width", s.width);
    r.get_uint("record_every", s.record_every);
    if (s.values.empty()) r.error_at("values", "must be nonempty");
    for (std::size_t v : s.values)
        if (v == 0) {
            r.error_at("values", "entries must be >= 1");
            break;
        }
    if (s.mode == SweepOptions::Mode::depths && s.width == 0)
        r.error_at("width", "required for depths mode");
    if (s.record_every == 0) r.error_at("record_every", "must be >= 1");
    r.finish();
}

const std::vector<std::string> kVariantOrder = {"dbns", "dprbms", "dsigm"};

} // namespace

ConfigParse validate_config(const std::filesystem::path& path) {
    ConfigParse result;
    std::ifstream in(path);
    if (!in) {
        result.errors.push_back("cannot open " + path.string());
        return result;
    }
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        result.errors.push_back(path.string() + ": " + e.what());
        return result;
    }

    ExperimentConfig cfg;
    auto& errors = result.errors;
    ObjectReader r(root, "config", errors);

    r.get_u64("seed", cfg.seed);
    r.get_string("out", cfg.out);
    r.get("layers", cfg.layers, "an array of positive integers");
    for (std::size_t v : cfg.layers)
        if (v == 0) {
            r.error_at("layers", "entries must be >= 1");
            break;
        }

    std::vector<std::string> variants = {"dbns", "dprbms", "dsigm"};
    r.get("variants", variants, "an array of variant names");
    std::vector<std::string> ordered;
    for (const std::string& name : kVariantOrder)
        if (std::find(variants.begin(), variants.end(), name) != variants.end())
            ordered.push_back(name);
    for (const std::string& name : variants)
        if (std::find(kVariantOrder.begin(), kVariantOrder.end(), name) ==
            kVariantOrder.end())
            r.error_at("variants", "unknown variant '" + name +
                                   "' (dbns, dprbms, dsigm)");
    if (ordered.empty()) r.error_at("variants", "at least one variant is required");
    cfg.variants = std::move(ordered);

    if (r.has("dataset")) parse_dataset(r.child("dataset"), cfg.dataset, errors);
    else r.child("dataset");
    if (r.has("rbm")) parse_rbm(r.child("rbm"), cfg.rbm, errors);
    else r.child("rbm");
    if (r.has("fine_tune"))
        parse_fine_tune(r.child("fine_tune"), cfg.fine_tune, cfg.dsigm_epochs, errors);
    else r.child("fine_tune");
    if (r.has("metrics")) parse_metrics(r.child("metrics"), cfg.metrics, errors);
    else r.child("metrics");
    if (r.has("sweep")) {
        SweepOptions sweep;
        parse_sweep(r.child("sweep"), sweep, errors);
        cfg.sweep = std::move(sweep);
    } else {
        r.child("sweep");
    }
    r.finish();

    if (errors.empty()) result.config = std::move(cfg);
    return result;
}

ExperimentConfig require_config(const std::filesystem::path& path) {
    ConfigParse parsed = validate_config(path);
    if (!parsed.config) {
        std::string all;
        for (const auto& e : parsed.errors) {
            if (!all.empty()) all += '\n';
            all += e;
        }
        throw ConfigError(all);
    }
    return std::move(*parsed.config);
}

namespace {

Dataset head_of(const Dataset& ds, std::size_t limit) {
    if (limit == 0 || limit >= ds.size()) return ds;
    Matrix f(limit, ds.features.cols);
    std::copy(ds.features.data.begin(),
              ds.features.data.begin() + static_cast<std::ptrdiff_t>(limit * ds.features.cols),
              f.data.begin());
    std::vector<int> y(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(limit));
    return make_dataset(std::move(f), std::move(y), ds.n_classes);
}

} // namespace

TrainTestData load_dataset(const DatasetSpec& spec, std::uint64_t seed,
                           const std::filesystem::path* out_dir) {
    switch (spec.kind) {
    case DatasetSpec::Kind::synthetic_bars:
        return {synth_bars(spec.per_class, spec.classes, spec.noise,
                           derive_seed(seed, kSaltBarsTrain)),
                synth_bars(spec.test_per_class, spec.classes, spec.noise,
                           derive_seed(seed, kSaltBarsTest))};
    case DatasetSpec::Kind::mnist: {
        Matrix train_x = load_idx_images(spec.train_images);
        std::vector<int> train_y = load_idx_labels(spec.train_labels);
        Matrix test_x = load_idx_images(spec.test_images);
        std::vector<int> test_y = load_idx_labels(spec.test_labels);
        TrainTestData d{make_dataset(std::move(train_x), std::move(train_y), 10),
                        make_dataset(std::move(test_x), std::move(test_y), 10)};
        d.train = head_of(d.train, spec.train_limit);
        d.test = head_of(d.test, spec.test_limit);
        return d;
    }
    case DatasetSpec::Kind::csv: {
        const Dataset full = load_csv_features(spec.path, spec.features);
        SplitResult split =
            split_dataset(full, spec.train_fraction, derive_seed(seed, kSaltCsvSplit));
        if (out_dir) write_split_manifest(*out_dir / "split_manifest.csv", split);
        return {std::move(split.train), std::move(split.test)};
    }
    }
    throw ConfigError("dataset: unknown kind");
}

namespace {

std::size_t resolve_k_max(const MetricsOptions& m, std::size_t n_classes) {
    return m.k_max != 0 ? m.k_max : std::min<std::size_t>(10, n_classes);
}

// Per-layer HSPM, calibrated threshold and AOD curve from the hidden
// activations of the evaluation set.
void layer_metrics(VariantReport& report, const std::vector<Matrix>& activations,
                   const std::vector<const Layer*>& layers,
                   const std::vector<const std::vector<double>*>& decoder_c,
                   const std::vector<int>& labels, const MetricsOptions& options,
                   std::size_t n_classes) {
    const std::size_t k_max = resolve_k_max(options, n_classes);
    for (std::size_t l = 0; l < activations.size(); ++l) {
        LayerActivations acts;
        acts.layer_index = static_cast<int>(l + 1);
        acts.activations = activations[l];
        acts.labels = labels;
        acts.decoder_w = layers[l]->W;
        acts.decoder_c = *decoder_c[l];
        report.layer_hspm.push_back(mean_hspm(acts.activations));
        const ThresholdResult t = calibrate_threshold(acts, options.budget);
        if (!t.satisfied)
            std::cerr << "warning: " << report.name << " layer " << (l + 1)
                      << ": no threshold met the calibration budget, using 0\n";
        report.layer_aod.push_back(aod_curve(acts, options.k_min, k_max, t.tau));
    }
}

void network_metrics(VariantReport& report, const Network& net, const Dataset& eval,
                     const MetricsOptions& options) {
    const ForwardPass fp = forward(net, eval.features);
    std::vector<const Layer*> layers;
    std::vector<const std::vector<double>*> decoder_c;
    for (std::size_t l = 0; l < net.hidden.size(); ++l) {
        layers.push_back(&net.hidden[l]);
        decoder_c.push_back(&net.decoder_c[l]);
    }
    layer_metrics(report, fp.activations, layers, decoder_c, eval.labels, options,
                  eval.n_classes);
}

void write_reports(const std::filesystem::path& out, const ExperimentResult& result,
                   std::size_t dataset_epoch_hint) {
    CsvWriter hspm_csv(out / "hspm.csv", "variant,layer,epoch,hspm");
    hspm_csv.field(std::string("dataset"))
        .field(std::size_t{0})
        .field(dataset_epoch_hint)
        .field(result.dataset_hspm);
    hspm_csv.end_row();
    for (const VariantReport& v : result.variants)
        for (std::size_t l = 0; l < v.layer_hspm.size(); ++l) {
            hspm_csv.field(v.name).field(l + 1).field(v.epochs_trained).field(v.layer_hspm[l]);
            hspm_csv.end_row();
        }

    CsvWriter aod_csv(out / "aod.csv", "variant,layer,k,average_aod,tau");
    for (const VariantReport& v : result.variants)
        for (std::size_t l = 0; l < v.layer_aod.size(); ++l) {
            const AodCurve& curve = v.layer_aod[l];
            for (std::size_t i = 0; i < curve.k.size(); ++i) {
                aod_csv.field(v.name)
                    .field(l + 1)
                    .field(curve.k[i])
                    .field(curve.value[i])
                    .field(curve.tau);
                aod_csv.end_row();
            }
        }

    CsvWriter err_csv(out / "errors.csv", "variant,epoch,train_loss,test_error");
    for (const VariantReport& v : result.variants)
        for (const EpochReport& e : v.epoch_log) {
            err_csv.field(v.name).field(e.epoch + 1).field(e.train_loss).field(e.test_error);
            err_csv.end_row();
        }
}

void print_summary(const ExperimentResult& result) {
    std::size_t max_layers = 0;
    for (const auto& v : result.variants)
        max_layers = std::max(max_layers, v.layer_hspm.size());

    std::cout << std::left << std::setw(10) << "variant" << std::setw(10) << "dataset";
    for (std::size_t l = 1; l <= max_layers; ++l)
        std::cout << std::setw(10) << ("layer" + std::to_string(l));
    std::cout << "error\n";
    for (const auto& v : result.variants) {
        std::cout << std::setw(10) << v.name << std::setw(10) << std::setprecision(4)
                  << result.dataset_hspm;
        for (std::size_t l = 0; l < max_layers; ++l) {
            if (l < v.layer_hspm.size())
                std::cout << std::setw(10) << std::setprecision(4) << v.layer_hspm[l];
            else
                std::cout << std::setw(10) << "-";
        }
        if (v.epoch_log.empty() && v.name == "dprbms")
            std::cout << "-";
        else
            std::cout << std::setprecision(4) << v.error * 100.0 << "%";
        std::cout << "\n";
    }
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    if (config.layers.empty())
        throw ConfigError("config.layers: must list at least one hidden layer");

    const std::filesystem::path out(config.out);
    std::filesystem::create_directories(out);
    const TrainTestData data = load_dataset(config.dataset, config.seed, &out);

    const bool want_pretrained =
        std::find(config.variants.begin(), config.variants.end(), "dbns") !=
            config.variants.end() ||
        std::find(config.variants.begin(), config.variants.end(), "dprbms") !=
            config.variants.end();

    std::vector<RbmParams> stack;
    if (want_pretrained) {
        RbmTrainConfig pre = config.rbm;
        pre.seed = derive_seed(config.seed, kSaltPretrain);
        std::cout << "pretraining " << config.layers.size() << "-layer RBM stack ("
                  << pre.epochs << " epochs per layer)\n";
        stack = pretrain_stack(data.train.features, config.layers, pre);
        save_stack(out / "rbm_stack.slab", stack);
    }

    ExperimentResult result;
    result.dataset_hspm = mean_hspm(data.test.features);

    for (const std::string& name : config.variants) {
        VariantReport report;
        report.name = name;
        Network net;
        if (name == "dsigm") {
            net = init_random(config.layers, data.train.features.cols,
                              data.train.n_classes, derive_seed(config.seed, kSaltDsigmInit));
            FineTuneConfig ft = config.fine_tune;
            ft.epochs = config.dsigm_epochs != 0 ? config.dsigm_epochs : ft.epochs;
            ft.seed = derive_seed(config.seed, kSaltDsigmTune);
            std::cout << "training dsigm (" << ft.epochs << " epochs)\n";
            report.epoch_log = fine_tune(net, data.train.features, data.train.labels,
                                         data.test.features, data.test.labels, ft);
            report.epochs_trained = ft.epochs;
        } else if (name == "dprbms") {
            net = init_from_stack(stack, data.train.n_classes,
                                  derive_seed(config.seed, kSaltHeadInit));
            report.epochs_trained = 0;
        } else { // dbns
            net = init_from_stack(stack, data.train.n_classes,
                                  derive_seed(config.seed, kSaltHeadInit));
            FineTuneConfig ft = config.fine_tune;
            ft.seed = derive_seed(config.seed, kSaltDbnsTune);
            std::cout << "fine-tuning dbns (" << ft.epochs << " epochs)\n";
            report.epoch_log = fine_tune(net, data.train.features, data.train.labels,
                                         data.test.features, data.test.labels, ft);
            report.epochs_trained = ft.epochs;
        }
        report.error = evaluate(net, data.test.features, data.test.labels);
        network_metrics(report, net, data.test, config.metrics);
        save_network(out / (name + ".slab"), net);
        result.variants.push_back(std::move(report));
    }

    write_reports(out, result, 0);
    print_summary(result);
    return result;
}

std::vector<SweepRow> run_hspm_sweep(const ExperimentConfig& config) {
    if (!config.sweep)
        throw ConfigError("config.sweep: required for the sweep subcommand");
    const SweepOptions& sweep = *config.sweep;
    const std::filesystem::path out(config.out);
    std::filesystem::create_directories(out);
    const TrainTestData data = load_dataset(config.dataset, config.seed, &out);

    // HSPM checkpoints are evaluated on a fixed-size prefix of the
    // layer's training input to keep sweeps affordable.
    static constexpr std::size_t kEvalCap = 2000;
    std::vector<SweepRow> rows;

    auto record = [&](const std::string& mode, std::size_t setting, std::size_t layer,
                      std::size_t total_epochs, const Matrix& input) {
        return [&rows, &sweep, mode, setting, layer, total_epochs, &input](
                   std::size_t epoch, const RbmParams& params) {
            const std::size_t done = epoch + 1;
            if (done % sweep.record_every != 0 && done != total_epochs) return;
            Matrix probe(std::min(kEvalCap, input.rows), input.cols);
            std::copy(input.data.begin(),
                      input.data.begin() +
                          static_cast<std::ptrdiff_t>(probe.size()),
                      probe.data.begin());
            rows.push_back({mode, setting, layer, done, mean_hspm(prop_up(params, probe))});
        };
    };

    for (std::size_t value : sweep.values) {
        const std::uint64_t setting_seed = derive_seed(config.seed, value);
        if (sweep.mode == SweepOptions::Mode::hidden_sizes) {
            RbmTrainConfig cfg = config.rbm;
            cfg.seed = setting_seed;
            std::cout << "sweep: hidden size " << value << "\n";
            train_rbm(data.train.features, value, cfg,
                      record("hidden_sizes", value, 1, cfg.epochs, data.train.features));
        } else {
            std::cout << "sweep: depth " << value << "\n";
            Matrix input = data.train.features;
            for (std::size_t l = 0; l < value; ++l) {
                RbmTrainConfig cfg = config.rbm;
                cfg.seed = l == 0 ? setting_seed : derive_seed(setting_seed, l);
                RbmTrainResult r =
                    train_rbm(input, sweep.width, cfg,
                              record("depths", value, l + 1, cfg.epochs, input));
                input = prop_up(r.params, input);
            }
        }
    }

    CsvWriter csv(out / "sweep.csv", "mode,setting,layer,epoch,hspm");
    for (const SweepRow& row : rows) {
        csv.field(row.mode).field(row.setting).field(row.layer).field(row.epoch).field(
            row.hspm_value);
        csv.end_row();
    }
    return rows;
}

ExperimentResult run_metrics(const std::filesystem::path& model_path,
                             const DatasetSpec& spec, std::uint64_t seed,
                             const MetricsOptions& options,
                             const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const TrainTestData data = load_dataset(spec, seed, &out_dir);
    const Model model = load_model(model_path);

    ExperimentResult result;
    result.dataset_hspm = mean_hspm(data.test.features);

    VariantReport report;
    if (std::holds_alternative<Network>(model)) {
        const Network& net = std::get<Network>(model);
        report.name = net.provenance == Provenance::pretrained ? "pretrained" : "random";
        network_metrics(report, net, data.test, options);
    } else {
        const auto& stack = std::get<std::vector<RbmParams>>(model);
        report.name = "stack";
        std::vector<Matrix> activations;
        std::vector<const Layer*> layers;
        std::vector<const std::vector<double>*> decoder_c;
        std::vector<Layer> storage;
        storage.reserve(stack.size());
        Matrix a = data.test.features;
        for (const RbmParams& p : stack) {
            a = prop_up(p, a);
            activations.push_back(a);
            storage.push_back({p.W, p.b});
        }
        for (std::size_t l = 0; l < stack.size(); ++l) {
            layers.push_back(&storage[l]);
            decoder_c.push_back(&stack[l].c);
        }
        layer_metrics(report, activations, layers, decoder_c, data.test.labels, options,
                      data.test.n_classes);
    }
    result.variants.push_back(std::move(report));

    write_reports(out_dir, result, 0);
    print_summary(result);
    return result;
}

} // namespace slab
