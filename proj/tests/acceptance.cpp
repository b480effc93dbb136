// Acceptance suite: prints one PASS/FAIL/SKIP line per criterion and
// exits nonzero if any runnable criterion fails. MNIST-based criteria
// look for the IDX files under $MNIST_DIR, then ./data/mnist, then
// ../data/mnist, and are skipped with a notice when absent.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <unistd.h>

#include "slab/data.hpp"
#include "slab/error.hpp"
#include "slab/experiment.hpp"
#include "slab/metrics.hpp"
#include "slab/network.hpp"
#include "slab/rbm.hpp"

#include "metric_oracles.hpp"
#include "oracles.hpp"

using namespace slab;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
public:
    Criterion(int number, std::string title, double limit_seconds, bool hard_limit = true)
        : number_(number), title_(std::move(title)), limit_(limit_seconds),
          hard_limit_(hard_limit), start_(std::chrono::steady_clock::now()) {}

    void pass(const std::string& detail = "") { finish(true, false, detail); }
    void fail(const std::string& detail = "") { finish(false, false, detail); }
    void skip(const std::string& reason) { finish(false, true, reason); }

private:
    void finish(bool ok, bool skipped, const std::string& detail) {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
                .count();
        if (ok && hard_limit_ && elapsed > limit_) {
            ok = false;
            std::ostringstream msg;
            msg << "exceeded the " << limit_ << " s limit";
            print(false, false, msg.str(), elapsed);
            ++g_failures;
            return;
        }
        print(ok, skipped, detail, elapsed);
        if (!ok && !skipped) ++g_failures;
    }

    void print(bool ok, bool skipped, const std::string& detail, double elapsed) {
        const char* verdict = skipped ? "SKIP" : ok ? "PASS" : "FAIL";
        std::cout << verdict << " criterion " << number_ << ": " << title_;
        if (!detail.empty()) std::cout << " -- " << detail;
        std::cout << " [" << std::fixed << std::setprecision(1) << elapsed << " s]"
                  << std::defaultfloat << "\n";
        std::cout.flush();
    }

    int number_;
    std::string title_;
    double limit_;
    bool hard_limit_;
    std::chrono::steady_clock::time_point start_;
};

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("slab_accept_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Matrix four_patterns() {
    Matrix d(4, 6);
    d.data = {1, 1, 1, 0, 0, 0, //
              1, 0, 1, 0, 0, 0, //
              0, 0, 0, 1, 1, 1, //
              0, 0, 1, 1, 0, 1};
    return d;
}

std::optional<fs::path> find_mnist() {
    if (const char* dir = std::getenv("MNIST_DIR")) {
        const fs::path p(dir);
        if (fs::exists(p / "train-images-idx3-ubyte")) return p;
    }
    for (const char* candidate : {"data/mnist", "../data/mnist"}) {
        const fs::path p(candidate);
        if (fs::exists(p / "train-images-idx3-ubyte")) return p;
    }
    return std::nullopt;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ------------------------------------------------------------------ 1

void criterion_gradients() {
    Criterion c(1, "backprop matches central finite differences", 10.0);
    Rng shapes(0xC1);
    for (int net_index = 0; net_index < 20; ++net_index) {
        const std::size_t depth = 1 + shapes.below(4);
        std::vector<std::size_t> widths(depth);
        for (auto& w : widths) w = 2 + shapes.below(7);
        const std::size_t inputs = 2 + shapes.below(7);
        const std::size_t classes = 2 + shapes.below(7);
        const Loss loss = net_index % 2 == 0 ? Loss::nll : Loss::squared;

        const Network net =
            init_random(widths, inputs, classes, 1000 + static_cast<std::uint64_t>(net_index));
        Rng data_rng(2000 + static_cast<std::uint64_t>(net_index));
        const std::size_t batch = 3 + data_rng.below(4);
        Matrix x(batch, inputs);
        for (auto& v : x.data) v = data_rng.uniform();
        std::vector<int> labels(batch);
        for (auto& y : labels) y = static_cast<int>(data_rng.below(classes));

        const NetGrads got = backprop_grads(net, x, labels, loss);
        const oracle::FdGrads want = oracle::finite_difference_grads(net, x, labels, loss);

        auto close = [&](double g, double f) {
            return std::fabs(g - f) <=
                   std::max(1e-8, 1e-5 * std::max(std::fabs(g), std::fabs(f)));
        };
        for (std::size_t l = 0; l < got.hidden.size(); ++l) {
            for (std::size_t i = 0; i < got.hidden[l].W.size(); ++i)
                if (!close(got.hidden[l].W.data[i], want.hidden[l].W.data[i]))
                    return c.fail("hidden W mismatch on network " + std::to_string(net_index));
            for (std::size_t i = 0; i < got.hidden[l].b.size(); ++i)
                if (!close(got.hidden[l].b[i], want.hidden[l].b[i]))
                    return c.fail("hidden b mismatch on network " + std::to_string(net_index));
        }
        for (std::size_t i = 0; i < got.head.W.size(); ++i)
            if (!close(got.head.W.data[i], want.head.W.data[i]))
                return c.fail("head W mismatch on network " + std::to_string(net_index));
        for (std::size_t i = 0; i < got.head.b.size(); ++i)
            if (!close(got.head.b[i], want.head.b[i]))
                return c.fail("head b mismatch on network " + std::to_string(net_index));
    }
    c.pass("20 networks, every coordinate within 1e-5 rel / 1e-8 abs");
}

// ------------------------------------------------------------------ 2

void criterion_cd1_bitwise() {
    Criterion c(2, "cd1_update bit-identical to the scalar reference for 100 steps", 1.0);
    Rng init(0xC2);
    RbmParams p;
    p.W = gaussian_matrix(init, 3, 6, 0.0, 0.01);
    p.b.assign(3, 0.0);
    p.c.assign(6, 0.0);
    auto ref = oracle::ScalarRbm::from(p);

    const Matrix data = four_patterns();
    RbmTrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.l2 = 1e-4;
    Cd1Buffers buf(p);
    oracle::ScalarCd1State st;
    Rng lib_rng(0xFEED);
    oracle::ScalarRng ref_rng(0xFEED);

    for (int step = 0; step < 100; ++step) {
        const double momentum = momentum_at(static_cast<std::size_t>(step), 100);
        const Cd1Stats stats = cd1_update(p, data, cfg, momentum, lib_rng, buf);
        const double ref_err = oracle::scalar_cd1_step(ref, data.data, data.rows,
                                                       cfg.learning_rate, cfg.l2,
                                                       momentum, ref_rng, st);
        if (!ref.matches_bitwise(p))
            return c.fail("parameters diverged at step " + std::to_string(step));
        if (stats.recon_error != ref_err)
            return c.fail("reconstruction error diverged at step " + std::to_string(step));
    }
    c.pass("100 steps bit-for-bit");
}

// ------------------------------------------------------------------ 3

void criterion_likelihood_improves() {
    Criterion c(3, "CD-1 training increases the exact mean log-likelihood", 30.0);
    const Matrix data = four_patterns();
    int improved = 0;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RbmTrainConfig cfg;
        cfg.learning_rate = 0.1;
        cfg.epochs = 500;
        cfg.batch_size = 4;
        cfg.seed = seed;
        RbmTrainConfig init_cfg = cfg;
        init_cfg.epochs = 0;
        const double before =
            exact_log_likelihood(train_rbm(data, 3, init_cfg).params, data);
        const double after = exact_log_likelihood(train_rbm(data, 3, cfg).params, data);
        if (after > before) ++improved;
        detail << (seed > 1 ? ", " : "") << "seed " << seed << ": " << std::setprecision(4)
               << before << " -> " << after;
    }
    if (improved >= 4)
        c.pass(std::to_string(improved) + "/5 seeds improved (" + detail.str() + ")");
    else
        c.fail("only " + std::to_string(improved) + "/5 seeds improved (" + detail.str() + ")");
}

// ------------------------------------------------------------------ 4

void criterion_mnist_hspm(const std::optional<fs::path>& mnist) {
    Criterion c(4, "mean HSPM of the MNIST test images is 0.63 +/- 0.02", 60.0);
    if (!mnist) return c.skip("MNIST files not found; set MNIST_DIR or use data/mnist");
    const Matrix images = load_idx_images(*mnist / "t10k-images-idx3-ubyte");
    const double value = mean_hspm(images);
    std::ostringstream detail;
    detail << "measured " << std::setprecision(4) << value;
    if (std::fabs(value - 0.63) <= 0.02)
        c.pass(detail.str());
    else
        c.fail(detail.str());
}

// --------------------------------------------------------------- 5 + 6

struct DeskRun {
    ExperimentResult result;
};

void criteria_desk_scale(const std::optional<fs::path>& mnist, const TempDir& tmp) {
    Criterion c5(5, "desk-scale MNIST: pretraining lifts HSPM and DBN error <= Dsigm",
                 1800.0, /*hard_limit=*/false);
    if (!mnist) {
        c5.skip("MNIST files not found; set MNIST_DIR or use data/mnist");
        Criterion c6(6, "desk-scale MNIST: AOD falls with depth; Dsigm AOD stays > 0.9",
                     1.0, false);
        c6.skip("MNIST files not found; set MNIST_DIR or use data/mnist");
        return;
    }

    ExperimentConfig cfg;
    cfg.layers = {100, 100};
    cfg.variants = {"dbns", "dprbms", "dsigm"};
    cfg.dataset.kind = DatasetSpec::Kind::mnist;
    cfg.dataset.train_images = (*mnist / "train-images-idx3-ubyte").string();
    cfg.dataset.train_labels = (*mnist / "train-labels-idx1-ubyte").string();
    cfg.dataset.test_images = (*mnist / "t10k-images-idx3-ubyte").string();
    cfg.dataset.test_labels = (*mnist / "t10k-labels-idx1-ubyte").string();
    cfg.dataset.train_limit = 10000;
    cfg.rbm.epochs = 20;
    cfg.fine_tune.epochs = 20;
    cfg.dsigm_epochs = 40;
    cfg.metrics.k_min = 2;
    cfg.metrics.k_max = 10;

    int hspm_ok = 0;
    int error_ok = 0;
    int aod_depth_ok = 0;
    int aod_dsigm_ok = 0;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        cfg.seed = seed;
        cfg.out = (tmp.path / ("desk_seed" + std::to_string(seed))).string();
        const ExperimentResult r = run_experiment(cfg);

        std::map<std::string, const VariantReport*> by_name;
        for (const auto& v : r.variants) by_name[v.name] = &v;
        const VariantReport& dbns = *by_name.at("dbns");
        const VariantReport& dprbms = *by_name.at("dprbms");
        const VariantReport& dsigm = *by_name.at("dsigm");

        bool hspm_lift = true;
        for (std::size_t l = 0; l < dprbms.layer_hspm.size(); ++l)
            if (dprbms.layer_hspm[l] < dsigm.layer_hspm[l] + 0.1) hspm_lift = false;
        if (hspm_lift) ++hspm_ok;
        if (dbns.error <= dsigm.error) ++error_ok;

        bool depth_falls = true;
        const AodCurve& first = dprbms.layer_aod.front();
        const AodCurve& last = dprbms.layer_aod.back();
        for (std::size_t i = 0; i < first.k.size(); ++i)
            if (!(last.value[i] < first.value[i])) depth_falls = false;
        if (depth_falls) ++aod_depth_ok;

        bool dsigm_high = true;
        for (const AodCurve& curve : dsigm.layer_aod)
            for (double v : curve.value)
                if (!(v > 0.9)) dsigm_high = false;
        if (dsigm_high) ++aod_dsigm_ok;

        detail << "seed " << seed << ": dprbms hspm ["
               << std::setprecision(3) << dprbms.layer_hspm[0] << ","
               << dprbms.layer_hspm[1] << "] dsigm [" << dsigm.layer_hspm[0] << ","
               << dsigm.layer_hspm[1] << "] err dbns " << std::setprecision(3)
               << dbns.error * 100 << "% dsigm " << dsigm.error * 100 << "%; ";
    }

    if (hspm_ok >= 2 && error_ok >= 2)
        c5.pass("hspm lift " + std::to_string(hspm_ok) + "/3, error " +
                std::to_string(error_ok) + "/3 (" + detail.str() + ")");
    else
        c5.fail("hspm lift " + std::to_string(hspm_ok) + "/3, error " +
                std::to_string(error_ok) + "/3 (" + detail.str() + ")");

    Criterion c6(6, "desk-scale MNIST: AOD falls with depth; Dsigm AOD stays > 0.9",
                 1.0, false);
    if (aod_depth_ok >= 2 && aod_dsigm_ok >= 2)
        c6.pass("depth drop " + std::to_string(aod_depth_ok) + "/3, dsigm-high " +
                std::to_string(aod_dsigm_ok) + "/3");
    else
        c6.fail("depth drop " + std::to_string(aod_depth_ok) + "/3, dsigm-high " +
                std::to_string(aod_dsigm_ok) + "/3");
}

// ------------------------------------------------------------------ 7

void criterion_hspm_grows_with_epochs() {
    Criterion c(7, "RBM HSPM at epoch 50 exceeds epoch 2 on synthetic bars", 300.0);
    int grew = 0;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Dataset bars = synth_bars(50, 4, 0.05, derive_seed(seed, 0x7));
        RbmTrainConfig cfg;
        cfg.learning_rate = 0.1;
        cfg.epochs = 50;
        cfg.batch_size = 50;
        cfg.seed = seed;

        double at2 = 0.0;
        double at50 = 0.0;
        train_rbm(bars.features, 24, cfg,
                  [&](std::size_t epoch, const RbmParams& params) {
                      if (epoch + 1 == 2) at2 = mean_hspm(prop_up(params, bars.features));
                      if (epoch + 1 == 50) at50 = mean_hspm(prop_up(params, bars.features));
                  });
        if (at50 > at2) ++grew;
        detail << (seed > 1 ? ", " : "") << std::setprecision(3) << at2 << "->" << at50;
    }
    if (grew >= 4)
        c.pass(std::to_string(grew) + "/5 seeds grew (" + detail.str() + ")");
    else
        c.fail("only " + std::to_string(grew) + "/5 seeds grew (" + detail.str() + ")");
}

// ------------------------------------------------------------------ 8

void criterion_metric_oracles() {
    Criterion c(8, "metric implementations match exhaustive/scalar oracles", 120.0);
    Rng rng(0xC8);

    // hspm + aod + average_aod + calibrate_threshold on randomized
    // small instances
    for (int round = 0; round < 100; ++round) {
        const std::size_t n = 2 + rng.below(10);
        std::vector<double> h(n);
        for (auto& v : h) v = rng.uniform() * 2.0 - 1.0;
        if (std::fabs(hspm(h) - oracle::scalar_hspm(h)) > 1e-10)
            return c.fail("hspm mismatch on round " + std::to_string(round));

        const std::size_t classes = 2 + rng.below(4);
        const std::size_t samples = classes * (2 + rng.below(4));
        const std::size_t units = 3 + rng.below(6);
        const std::size_t d_in = 2 + rng.below(5);
        LayerActivations acts;
        acts.layer_index = 1;
        acts.activations = Matrix(samples, units);
        for (auto& v : acts.activations.data) v = rng.uniform();
        acts.labels.resize(samples);
        for (std::size_t s = 0; s < samples; ++s)
            acts.labels[s] = static_cast<int>(s % classes);
        acts.decoder_w = Matrix(units, d_in);
        for (auto& v : acts.decoder_w.data) v = rng.uniform() * 2.0 - 1.0;
        acts.decoder_c.resize(d_in);
        for (auto& v : acts.decoder_c) v = (rng.uniform() - 0.5);

        const double tau = rng.uniform();
        std::vector<BinaryActivationVector> vecs;
        std::vector<std::vector<std::uint8_t>> ref_vecs;
        for (std::size_t cls = 0; cls < classes; ++cls) {
            vecs.push_back(class_vector(acts, static_cast<int>(cls), tau));
            ref_vecs.push_back(oracle::scalar_class_vector(acts.activations, acts.labels,
                                                           static_cast<int>(cls), tau));
            if (vecs.back().bits != ref_vecs.back())
                return c.fail("class_vector mismatch on round " + std::to_string(round));
        }
        if (std::fabs(aod(vecs) - oracle::scalar_aod(ref_vecs)) > 1e-10)
            return c.fail("aod mismatch on round " + std::to_string(round));

        const std::size_t k = 2 + rng.below(classes - 1);
        const double got_avg = average_aod(acts, k, tau);
        const double want_avg = oracle::enumerated_average_aod(
            acts.activations, acts.labels, classes, k, tau);
        if (std::fabs(got_avg - want_avg) > 1e-10)
            return c.fail("average_aod mismatch on round " + std::to_string(round));

        const double budget = 0.001 * std::pow(10.0, rng.uniform() * 2.5);
        const ThresholdResult got_cal = calibrate_threshold(acts, budget);
        const auto want_cal = oracle::exhaustive_calibrate(acts, budget);
        if (got_cal.satisfied != want_cal.satisfied ||
            std::fabs(got_cal.tau - want_cal.tau) > 1e-10)
            return c.fail("calibrate_threshold mismatch on round " + std::to_string(round));
    }

    // invariance properties, 1000 random vectors
    for (int round = 0; round < 1000; ++round) {
        const std::size_t n = 2 + rng.below(16);
        std::vector<double> h(n);
        for (auto& v : h) v = rng.uniform() * 4.0 - 2.0;
        const double base = hspm(h);

        double alpha = 0.0;
        while (alpha == 0.0) alpha = rng.uniform() * 6.0 - 3.0;
        std::vector<double> scaled = h;
        for (auto& v : scaled) v *= alpha;
        if (std::fabs(hspm(scaled) - base) > 1e-12)
            return c.fail("scale invariance failed on round " + std::to_string(round));

        std::vector<double> shuffled = h;
        for (std::size_t i = n; i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
        if (std::fabs(hspm(shuffled) - base) > 1e-12)
            return c.fail("permutation invariance failed on round " + std::to_string(round));
    }
    c.pass("100 oracle instances to 1e-10, 1000 invariance vectors");
}

// ------------------------------------------------------------------ 9

void criterion_parsers(const TempDir& tmp) {
    Criterion c(9, "IDX round trip, corrupted-input errors, CSV idempotence", 30.0);
    const fs::path dir = tmp.path / "parsers";
    fs::create_directories(dir);

    std::vector<std::uint8_t> fixture = {0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0x00, 0x02,
                                         0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02,
                                         0,    255,  128,  7,    255,  0,    64,  200};
    const fs::path imgs = dir / "imgs.idx";
    {
        std::ofstream out(imgs, std::ios::binary);
        out.write(reinterpret_cast<const char*>(fixture.data()),
                  static_cast<std::streamsize>(fixture.size()));
    }
    const Matrix parsed = load_idx_images(imgs);
    const fs::path round = dir / "round.idx";
    write_idx_images(round, parsed, 2, 2);
    if (read_file(round) != std::string(fixture.begin(), fixture.end()))
        return c.fail("IDX round trip not byte-exact");

    auto corrupt = fixture;
    corrupt[3] = 0x01;
    const fs::path bad = dir / "bad.idx";
    {
        std::ofstream out(bad, std::ios::binary);
        out.write(reinterpret_cast<const char*>(corrupt.data()),
                  static_cast<std::streamsize>(corrupt.size()));
    }
    bool threw = false;
    try {
        load_idx_images(bad);
    } catch (const ParseError&) {
        threw = true;
    }
    if (!threw) return c.fail("corrupted magic was accepted");

    const fs::path trunc = dir / "trunc.idx";
    {
        std::ofstream out(trunc, std::ios::binary);
        out.write(reinterpret_cast<const char*>(fixture.data()), 13);
    }
    threw = false;
    try {
        load_idx_images(trunc);
    } catch (const ParseError&) {
        threw = true;
    }
    if (!threw) return c.fail("truncated file was accepted");

    Matrix csv_data(4, 3);
    csv_data.data = {0.0, 5.0, -2.0, 1.0, 5.0, 3.0, 0.5, 5.0, 0.0, 0.25, 5.0, 9.0};
    normalize_columns(csv_data);
    Matrix twice = csv_data;
    normalize_columns(twice);
    if (!(twice == csv_data)) return c.fail("normalization is not idempotent");

    c.pass();
}

// ----------------------------------------------------------------- 10

void criterion_determinism(const TempDir& tmp) {
    Criterion c(10, "two sequential experiment runs emit byte-identical CSVs", 120.0);
    ExperimentConfig cfg;
    cfg.seed = 77;
    cfg.layers = {12, 8};
    cfg.variants = {"dbns", "dprbms", "dsigm"};
    cfg.dataset.kind = DatasetSpec::Kind::synthetic_bars;
    cfg.dataset.classes = 4;
    cfg.dataset.per_class = 50;
    cfg.dataset.test_per_class = 25;
    cfg.dataset.noise = 0.05;
    cfg.rbm.epochs = 5;
    cfg.rbm.batch_size = 50;
    cfg.fine_tune.epochs = 5;
    cfg.fine_tune.batch_size = 50;

    cfg.out = (tmp.path / "det1").string();
    run_experiment(cfg);
    cfg.out = (tmp.path / "det2").string();
    run_experiment(cfg);

    for (const char* file : {"hspm.csv", "aod.csv", "errors.csv"}) {
        const std::string a = read_file(tmp.path / "det1" / file);
        const std::string b = read_file(tmp.path / "det2" / file);
        if (a.empty() || a != b) return c.fail(std::string(file) + " differs between runs");
    }
    c.pass();
}

} // namespace

int main() {
    std::cout << "acceptance suite\n================\n";
    const TempDir tmp;
    const std::optional<fs::path> mnist = find_mnist();

    criterion_gradients();
    criterion_cd1_bitwise();
    criterion_likelihood_improves();
    criterion_mnist_hspm(mnist);
    criteria_desk_scale(mnist, tmp);
    criterion_hspm_grows_with_epochs();
    criterion_metric_oracles();
    criterion_parsers(tmp);
    criterion_determinism(tmp);

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all runnable criteria passed\n";
    return 0;
}
