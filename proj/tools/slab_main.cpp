// Experiment driver: trains the configured network variants, measures
// activation sparsity and overlap, and emits CSV reports. See README.md
// for the config schema and output formats.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "slab/error.hpp"
#include "slab/experiment.hpp"
#include "slab/matrix.hpp"
#include "slab/serialize.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonFlags {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    unsigned threads = 1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--seed", flags.seed, "Override the config's master seed");
    cmd->add_option("--out", flags.out, "Override the config's output directory");
    cmd->add_option("--threads", flags.threads, "Worker threads for matrix kernels")
        ->default_val(1);
}

slab::ExperimentConfig load_config(const std::string& path, const CommonFlags& flags) {
    slab::ExperimentConfig cfg = slab::require_config(path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.out = *flags.out;
    slab::set_threads(flags.threads);
    return cfg;
}

void describe_tensor(const char* name, const slab::Matrix& m) {
    std::cout << "  " << name << ": " << m.rows << "x" << m.cols
              << "  |.|_F=" << slab::frobenius_norm(m) << "\n";
}

int run_inspect(const std::string& model_path) {
    const slab::Model model = slab::load_model(model_path);
    if (std::holds_alternative<slab::Network>(model)) {
        const auto& net = std::get<slab::Network>(model);
        std::cout << "network ("
                  << (net.provenance == slab::Provenance::pretrained ? "pretrained"
                                                                     : "random")
                  << "), " << net.hidden.size() << " hidden layer(s)\n";
        for (std::size_t l = 0; l < net.hidden.size(); ++l)
            describe_tensor(("layer " + std::to_string(l + 1) + " W").c_str(),
                            net.hidden[l].W);
        describe_tensor("head W", net.head.W);
    } else {
        const auto& stack = std::get<std::vector<slab::RbmParams>>(model);
        std::cout << "rbm stack, " << stack.size() << " layer(s)\n";
        for (std::size_t l = 0; l < stack.size(); ++l)
            describe_tensor(("rbm " + std::to_string(l + 1) + " W").c_str(), stack[l].W);
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"RBM pretraining and activation-sparsity analysis"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string config_path;
    std::string model_path;
    std::string data_path;

    CLI::App* experiment =
        app.add_subcommand("experiment", "Train the configured variants and report metrics");
    experiment->add_option("config", config_path, "JSON experiment config")->required();
    add_common(experiment, flags);

    CLI::App* sweep = app.add_subcommand("sweep", "HSPM sweeps over sizes or depths");
    sweep->add_option("config", config_path, "JSON experiment config with a sweep block")
        ->required();
    add_common(sweep, flags);

    CLI::App* metrics =
        app.add_subcommand("metrics", "Sparsity metrics of a saved model on a dataset");
    metrics->add_option("model", model_path, "Model file (.slab)")->required();
    metrics->add_option("data", data_path, "JSON config whose dataset block to use")
        ->required();
    add_common(metrics, flags);

    CLI::App* inspect = app.add_subcommand("inspect", "Describe a saved model file");
    inspect->add_option("model", model_path, "Model file (.slab)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (experiment->parsed()) {
            slab::run_experiment(load_config(config_path, flags));
        } else if (sweep->parsed()) {
            slab::run_hspm_sweep(load_config(config_path, flags));
        } else if (metrics->parsed()) {
            const slab::ExperimentConfig cfg = load_config(data_path, flags);
            slab::run_metrics(model_path, cfg.dataset, cfg.seed, cfg.metrics,
                              cfg.out);
        } else if (inspect->parsed()) {
            return run_inspect(model_path);
        }
    } catch (const slab::ConfigError& e) {
        std::cerr << "config error:\n" << e.what() << "\n";
        return kExitConfig;
    } catch (const slab::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const slab::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const slab::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}
