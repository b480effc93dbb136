#include "slab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "slab/error.hpp"

namespace slab {

namespace {

void check_decoder(const LayerActivations& acts) {
    if (!acts.has_decoder())
        throw DomainError("calibrate_threshold: layer " +
                          std::to_string(acts.layer_index) + " has no decoder context");
    if (acts.decoder_w.rows != acts.activations.cols)
        throw ShapeError("calibrate_threshold: decoder has " +
                         std::to_string(acts.decoder_w.rows) + " units, activations have " +
                         std::to_string(acts.activations.cols));
    if (!acts.decoder_c.empty() && acts.decoder_c.size() != acts.decoder_w.cols)
        throw ShapeError("calibrate_threshold: decoder bias length " +
                         std::to_string(acts.decoder_c.size()) + " vs " +
                         std::to_string(acts.decoder_w.cols) + " inputs");
}

// C(n, k) in doubles via Pascal's rule; exact while values stay below 2^53.
std::vector<std::vector<double>> binomial_table(std::size_t n) {
    std::vector<std::vector<double>> c(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        c[i].assign(i + 1, 1.0);
        for (std::size_t j = 1; j < i; ++j) c[i][j] = c[i - 1][j - 1] + c[i - 1][j];
    }
    return c;
}

} // namespace

double hspm(std::span<const double> h) {
    const std::size_t n = h.size();
    if (n < 2) throw DomainError("hspm: need at least 2 entries, got " + std::to_string(n));
    double l1 = 0.0;
    double sq = 0.0;
    for (double v : h) {
        l1 += std::abs(v);
        sq += v * v;
    }
    if (sq == 0.0) return 1.0; // all-zero: maximally sparse by convention
    const double root_n = std::sqrt(static_cast<double>(n));
    const double value = (root_n - l1 / std::sqrt(sq)) / (root_n - 1.0);
    return std::clamp(value, 0.0, 1.0);
}

double mean_hspm(const Matrix& activations) {
    if (activations.rows == 0) throw DomainError("mean_hspm: no samples");
    double total = 0.0;
    for (std::size_t i = 0; i < activations.rows; ++i) total += hspm(activations.row(i));
    return total / static_cast<double>(activations.rows);
}

BinaryActivationVector binarize(std::span<const double> h, double tau) {
    if (tau < 0.0) throw DomainError("binarize: negative threshold");
    BinaryActivationVector z;
    z.tau = tau;
    z.bits.resize(h.size());
    for (std::size_t i = 0; i < h.size(); ++i)
        z.bits[i] = std::abs(h[i]) >= tau ? 1 : 0;
    return z;
}

ThresholdResult calibrate_threshold(const LayerActivations& acts, double budget) {
    check_decoder(acts);
    const Matrix& h_all = acts.activations;
    if (h_all.rows == 0) throw DomainError("calibrate_threshold: no samples");

    const std::size_t cal_n = std::min<std::size_t>(1000, h_all.rows);
    const std::size_t units = h_all.cols;
    const std::size_t d_in = acts.decoder_w.cols;

    // Candidate grid: 1000 order-statistic quantiles of pooled |h|.
    std::vector<double> pooled;
    pooled.reserve(cal_n * units);
    for (std::size_t s = 0; s < cal_n; ++s)
        for (double v : h_all.row(s)) pooled.push_back(std::abs(v));
    std::sort(pooled.begin(), pooled.end());
    constexpr std::size_t kGrid = 1000;
    std::vector<double> candidates; // ascending, unique
    candidates.reserve(kGrid);
    for (std::size_t i = 0; i < kGrid; ++i) {
        const std::size_t idx =
            pooled.size() == 1 ? 0 : i * (pooled.size() - 1) / (kGrid - 1);
        const double tau = pooled[idx];
        if (candidates.empty() || tau != candidates.back()) candidates.push_back(tau);
    }

    // Mean reconstruction deviation per candidate, accumulated per sample
    // while sweeping tau downward: each unit switches on exactly once, so
    // the decoder input changes at most `units` times per sample and the
    // deviation is recomputed only on change.
    std::vector<double> deviation(candidates.size(), 0.0);
    std::vector<double> a(d_in);      // WT s + c for the current s
    std::vector<double> f_full(d_in); // f(WT h + c)
    std::vector<std::size_t> order(units);
    for (std::size_t s = 0; s < cal_n; ++s) {
        const auto h = h_all.row(s);

        if (acts.decoder_c.empty())
            std::fill(a.begin(), a.end(), 0.0);
        else
            std::copy(acts.decoder_c.begin(), acts.decoder_c.end(), a.begin());
        for (std::size_t i = 0; i < d_in; ++i) f_full[i] = a[i];
        for (std::size_t j = 0; j < units; ++j) {
            const double hj = h[j];
            const double* wj = acts.decoder_w.data.data() + j * d_in;
            for (std::size_t i = 0; i < d_in; ++i) f_full[i] += hj * wj[i];
        }
        for (double& v : f_full) v = sigmoid(v);

        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            const double ax = std::abs(h[x]);
            const double ay = std::abs(h[y]);
            return ax != ay ? ax > ay : x < y;
        });

        std::size_t next = 0;
        double dev = 0.0;
        bool dirty = true;
        for (std::size_t ci = candidates.size(); ci-- > 0;) { // tau descending
            const double tau = candidates[ci];
            while (next < units && std::abs(h[order[next]]) >= tau) {
                const std::size_t j = order[next];
                const double hj = h[j];
                const double* wj = acts.decoder_w.data.data() + j * d_in;
                for (std::size_t i = 0; i < d_in; ++i) a[i] += hj * wj[i];
                ++next;
                dirty = true;
            }
            if (dirty) {
                dev = 0.0;
                for (std::size_t i = 0; i < d_in; ++i) {
                    const double d = sigmoid(a[i]) - f_full[i];
                    dev += d * d;
                }
                dirty = false;
            }
            deviation[ci] += dev;
        }
    }
    for (double& d : deviation) d /= static_cast<double>(cal_n);

    for (std::size_t ci = candidates.size(); ci-- > 0;)
        if (deviation[ci] < budget) return {candidates[ci], true, deviation[ci]};
    return {0.0, false, 0.0};
}

BinaryActivationVector class_vector(const LayerActivations& acts, int cls,
                                    double tau) {
    const Matrix& h = acts.activations;
    if (acts.labels.size() != h.rows)
        throw ShapeError("class_vector: " + std::to_string(acts.labels.size()) +
                         " labels for " + std::to_string(h.rows) + " rows");
    std::vector<double> mean(h.cols, 0.0);
    std::size_t count = 0;
    for (std::size_t s = 0; s < h.rows; ++s) {
        if (acts.labels[s] != cls) continue;
        const auto row = h.row(s);
        for (std::size_t j = 0; j < h.cols; ++j) mean[j] += row[j];
        ++count;
    }
    if (count == 0)
        throw DomainError("class_vector: class " + std::to_string(cls) + " has no samples");
    for (double& v : mean) v /= static_cast<double>(count);
    return binarize(mean, tau);
}

double aod(const std::vector<BinaryActivationVector>& vectors) {
    if (vectors.empty()) throw DomainError("aod: empty vector set");
    const std::size_t n = vectors.front().bits.size();
    if (n == 0) throw DomainError("aod: zero-length vectors");
    for (const auto& v : vectors)
        if (v.bits.size() != n)
            throw ShapeError("aod: vector length " + std::to_string(v.bits.size()) +
                             " vs " + std::to_string(n));
    std::size_t overlap = 0;
    for (std::size_t j = 0; j < n; ++j) {
        bool all = true;
        for (const auto& v : vectors)
            if (!v.bits[j]) {
                all = false;
                break;
            }
        if (all) ++overlap;
    }
    return static_cast<double>(overlap) / static_cast<double>(n);
}

double average_aod(const LayerActivations& acts, std::size_t k, double tau) {
    if (acts.labels.empty()) throw DomainError("average_aod: no labels");
    const int max_label = *std::max_element(acts.labels.begin(), acts.labels.end());
    const std::size_t m = static_cast<std::size_t>(max_label) + 1;
    if (k < 2 || k > m)
        throw DomainError("average_aod: k = " + std::to_string(k) +
                          " outside [2, " + std::to_string(m) + "]");

    std::vector<BinaryActivationVector> cls;
    cls.reserve(m);
    for (std::size_t c = 0; c < m; ++c)
        cls.push_back(class_vector(acts, static_cast<int>(c), tau));
    const std::size_t n = cls.front().bits.size();

    // Unit j is in the conjunction of a k-subset iff all k classes
    // activate it, which happens for C(r_j, k) of the C(m, k) subsets
    // (r_j = number of classes activating unit j). Summing over units
    // gives the mean over all subsets without enumerating them.
    std::vector<std::size_t> active_count(n, 0);
    for (const auto& v : cls)
        for (std::size_t j = 0; j < n; ++j) active_count[j] += v.bits[j];

    const auto binom = binomial_table(m);
    double subsets_hit = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        if (active_count[j] >= k) subsets_hit += binom[active_count[j]][k];
    return subsets_hit / (binom[m][k] * static_cast<double>(n));
}

AodCurve aod_curve(const LayerActivations& acts, std::size_t k_min,
                   std::size_t k_max, double tau) {
    AodCurve curve;
    curve.tau = tau;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        curve.k.push_back(k);
        curve.value.push_back(average_aod(acts, k, tau));
    }
    return curve;
}

} // namespace slab
