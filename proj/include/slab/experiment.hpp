#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "slab/data.hpp"
#include "slab/metrics.hpp"
#include "slab/network.hpp"
#include "slab/rbm.hpp"

namespace slab {

struct DatasetSpec {
    enum class Kind { synthetic_bars, mnist, csv };
    Kind kind = Kind::synthetic_bars;

    // synthetic-bars
    std::size_t classes = 4;
    std::size_t per_class = 200;
    std::size_t test_per_class = 50;
    double noise = 0.05;

    // mnist
    std::string train_images, train_labels, test_images, test_labels;
    std::size_t train_limit = 0; // 0 = all samples
    std::size_t test_limit = 0;

    // csv
    std::string path;
    std::size_t features = 16;
    double train_fraction = 0.8;
};

struct MetricsOptions {
    std::size_t k_min = 2;
    std::size_t k_max = 0; // 0 = min(10, n_classes), resolved at run time
    double budget = 0.05;
};

struct SweepOptions {
    enum class Mode { hidden_sizes, depths };
    Mode mode = Mode::hidden_sizes;
    std::vector<std::size_t> values;
    std::size_t width = 0; // hidden width per layer, depths mode only
    std::size_t record_every = 1;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string out = "out";
    std::vector<std::size_t> layers;
    std::vector<std::string> variants; // subset of {"dbns","dprbms","dsigm"}
    DatasetSpec dataset;
    RbmTrainConfig rbm;
    FineTuneConfig fine_tune;
    std::size_t dsigm_epochs = 0; // 0 = fine_tune.epochs
    MetricsOptions metrics;
    std::optional<SweepOptions> sweep;
};

/// Parses and validates a JSON config. All violations are collected, not
/// just the first; unknown keys are rejected. On success `config` is set
/// and `errors` empty.
struct ConfigParse {
    std::optional<ExperimentConfig> config;
    std::vector<std::string> errors;
};

ConfigParse validate_config(const std::filesystem::path& path);

/// validate_config that throws ConfigError with one line per violation.
ExperimentConfig require_config(const std::filesystem::path& path);

struct TrainTestData {
    Dataset train;
    Dataset test;
};

/// Materializes the configured dataset (generating, loading and/or
/// splitting as needed). A csv source also writes split_manifest.csv
/// under out_dir when provided.
TrainTestData load_dataset(const DatasetSpec& spec, std::uint64_t seed,
                           const std::filesystem::path* out_dir = nullptr);

struct VariantReport {
    std::string name;
    double error = 0.0;                  // final test error
    std::size_t epochs_trained = 0;
    std::vector<double> layer_hspm;      // per hidden layer
    std::vector<AodCurve> layer_aod;     // per hidden layer
    std::vector<EpochReport> epoch_log;  // empty for untrained variants
};

struct ExperimentResult {
    double dataset_hspm = 0.0;
    std::vector<VariantReport> variants;
};

/// Runs the configured variants end to end: pretraining where needed,
/// supervised training for dsigm/dbns, per-layer sparsity and overlap
/// metrics on the evaluation split. Writes hspm.csv, aod.csv,
/// errors.csv and the serialized models under config.out, and prints a
/// summary table.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct SweepRow {
    std::string mode;
    std::size_t setting = 0;
    std::size_t layer = 0; // 1-based
    std::size_t epoch = 0; // completed epochs, 1-based
    double hspm_value = 0.0;
};

/// HSPM-versus-epochs sweeps over hidden sizes or stack depths; rows are
/// also written to sweep.csv under config.out.
std::vector<SweepRow> run_hspm_sweep(const ExperimentConfig& config);

/// Per-layer metrics of a serialized model over a dataset: the shared
/// engine behind the `metrics` CLI subcommand. Writes hspm.csv/aod.csv
/// under out_dir.
ExperimentResult run_metrics(const std::filesystem::path& model_path,
                             const DatasetSpec& spec, std::uint64_t seed,
                             const MetricsOptions& options,
                             const std::filesystem::path& out_dir);

} // namespace slab
