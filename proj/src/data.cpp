#include "slab/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "slab/error.hpp"
#include "slab/rng.hpp"

namespace slab {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
    if (offset + 4 > bytes.size())
        throw ParseError(path.string() + ": truncated at byte " +
                         std::to_string(bytes.size()) + ", expected 32-bit field at offset " +
                         std::to_string(offset));
    return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
           (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                       static_cast<char>(v >> 8), static_cast<char>(v)};
    out.write(b, 4);
}

bool parse_double(std::string_view cell, double& out) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    // Tolerate surrounding spaces; from_chars itself is strict.
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r'))
        --last;
    if (first == last) return false;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_fields(std::string_view line,
                                           std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

} // namespace

Dataset make_dataset(Matrix features, std::vector<int> labels,
                     std::size_t n_classes) {
    if (labels.size() != features.rows)
        throw DomainError("make_dataset: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(features.rows) + " rows");
    if (n_classes == 0) throw DomainError("make_dataset: zero classes");
    for (double v : features.data)
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("make_dataset: feature " + std::to_string(v) +
                              " outside [0,1]");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
            throw DomainError("make_dataset: label " + std::to_string(y) +
                              " outside [0," + std::to_string(n_classes) + ")");
    return {std::move(features), std::move(labels), n_classes};
}

BatchPlan make_batch_plan(std::size_t n_samples, std::size_t batch_size,
                          std::uint64_t seed, std::uint64_t epoch) {
    if (batch_size == 0) throw DomainError("make_batch_plan: batch_size must be >= 1");
    Rng rng(derive_seed(seed, epoch));
    return {seed, batch_size, permutation(rng, n_samples)};
}

std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size,
                                std::uint64_t seed, std::uint64_t epoch) {
    const BatchPlan plan = make_batch_plan(ds.size(), batch_size, seed, epoch);
    std::vector<Batch> batches;
    for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
        const std::size_t end = std::min(ds.size(), begin + batch_size);
        Batch b{Matrix(end - begin, ds.features.cols), std::vector<int>(end - begin)};
        for (std::size_t r = begin; r < end; ++r) {
            const auto src = ds.features.row(plan.order[r]);
            std::copy(src.begin(), src.end(), b.features.row(r - begin).begin());
            b.labels[r - begin] = ds.labels[plan.order[r]];
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

Matrix load_idx_images(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    const std::uint32_t magic = read_be32(bytes, 0, path);
    if (magic != kImageMagic) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08x", magic);
        throw ParseError(path.string() + ": bad image magic " + buf +
                         " at byte 0 (want 0x00000803)");
    }
    const std::uint32_t n = read_be32(bytes, 4, path);
    const std::uint32_t rows = read_be32(bytes, 8, path);
    const std::uint32_t cols = read_be32(bytes, 12, path);
    const std::size_t expected = 16 + std::size_t(n) * rows * cols;
    if (bytes.size() != expected)
        throw ParseError(path.string() + ": payload is " +
                         std::to_string(bytes.size() - 16) + " bytes at byte 16, header " +
                         "promises " + std::to_string(std::size_t(n) * rows * cols));
    Matrix m(n, std::size_t(rows) * cols);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data[i] = static_cast<double>(bytes[16 + i]) / 255.0;
    return m;
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    const std::uint32_t magic = read_be32(bytes, 0, path);
    if (magic != kLabelMagic) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08x", magic);
        throw ParseError(path.string() + ": bad label magic " + buf +
                         " at byte 0 (want 0x00000801)");
    }
    const std::uint32_t n = read_be32(bytes, 4, path);
    if (bytes.size() != 8 + std::size_t(n))
        throw ParseError(path.string() + ": payload is " + std::to_string(bytes.size() - 8) +
                         " bytes at byte 8, header promises " + std::to_string(n));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = bytes[8 + i];
    return labels;
}

void write_idx_images(const std::filesystem::path& path, const Matrix& images,
                      std::uint32_t img_rows, std::uint32_t img_cols) {
    if (std::size_t(img_rows) * img_cols != images.cols)
        throw ShapeError("write_idx_images: " + std::to_string(img_rows) + "x" +
                         std::to_string(img_cols) + " does not match " +
                         std::to_string(images.cols) + " columns");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    write_be32(out, kImageMagic);
    write_be32(out, static_cast<std::uint32_t>(images.rows));
    write_be32(out, img_rows);
    write_be32(out, img_cols);
    for (double v : images.data) {
        const auto byte = static_cast<std::uint8_t>(std::lround(v * 255.0));
        out.put(static_cast<char>(byte));
    }
}

void write_idx_labels(const std::filesystem::path& path,
                      const std::vector<int>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    write_be32(out, kLabelMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    for (int v : labels) out.put(static_cast<char>(static_cast<std::uint8_t>(v)));
}

void normalize_columns(Matrix& m) {
    for (std::size_t j = 0; j < m.cols; ++j) {
        double lo = m(0, j);
        double hi = m(0, j);
        for (std::size_t i = 1; i < m.rows; ++i) {
            lo = std::min(lo, m(i, j));
            hi = std::max(hi, m(i, j));
        }
        if (lo == hi) {
            for (std::size_t i = 0; i < m.rows; ++i) m(i, j) = 0.0;
        } else {
            const double span = hi - lo;
            for (std::size_t i = 0; i < m.rows; ++i) m(i, j) = (m(i, j) - lo) / span;
        }
    }
}

Dataset load_csv_features(const std::filesystem::path& path, std::size_t n_features) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());

    std::vector<double> values;
    std::vector<int> labels;
    std::vector<std::string_view> fields;
    std::string line;
    std::size_t line_no = 0;
    bool first_data_row = true;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        split_fields(line, fields);

        if (first_data_row) {
            // Header auto-detection: a first row with any non-numeric cell.
            double probe;
            bool numeric = true;
            for (const auto f : fields)
                if (!parse_double(f, probe)) {
                    numeric = false;
                    break;
                }
            first_data_row = false;
            if (!numeric) continue;
        }

        if (fields.size() != n_features + 1)
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": expected " + std::to_string(n_features + 1) +
                             " fields, got " + std::to_string(fields.size()));
        for (std::size_t j = 0; j < n_features; ++j) {
            double v;
            if (!parse_double(fields[j], v))
                throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                                 ": field " + std::to_string(j + 1) + " is not numeric");
            values.push_back(v);
        }
        double label_value;
        if (!parse_double(fields[n_features], label_value) ||
            label_value != std::floor(label_value) || label_value < 0.0)
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": label is not a non-negative integer");
        labels.push_back(static_cast<int>(label_value));
    }
    if (labels.empty()) throw ParseError(path.string() + ": no data rows");

    Matrix features(labels.size(), n_features);
    features.data = std::move(values);
    normalize_columns(features);
    const int m = *std::max_element(labels.begin(), labels.end()) + 1;
    return make_dataset(std::move(features), std::move(labels),
                        static_cast<std::size_t>(m));
}

SplitResult split_dataset(const Dataset& ds, double train_fraction,
                          std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw DomainError("split_dataset: train_fraction must be in (0,1)");
    Rng rng(seed);
    const std::vector<std::size_t> order = permutation(rng, ds.size());
    const auto n_train = static_cast<std::size_t>(
        std::lround(train_fraction * static_cast<double>(ds.size())));
    if (n_train == 0 || n_train == ds.size())
        throw DomainError("split_dataset: split leaves an empty side with " +
                          std::to_string(ds.size()) + " samples");

    SplitResult out;
    out.train_indices.assign(order.begin(), order.begin() + n_train);
    out.test_indices.assign(order.begin() + n_train, order.end());

    auto gather = [&](const std::vector<std::size_t>& idx) {
        Matrix f(idx.size(), ds.features.cols);
        std::vector<int> y(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const auto src = ds.features.row(idx[r]);
            std::copy(src.begin(), src.end(), f.row(r).begin());
            y[r] = ds.labels[idx[r]];
        }
        return make_dataset(std::move(f), std::move(y), ds.n_classes);
    };
    out.train = gather(out.train_indices);
    out.test = gather(out.test_indices);
    return out;
}

void write_split_manifest(const std::filesystem::path& path,
                          const SplitResult& split) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    out << "index,split\n";
    for (std::size_t i : split.train_indices) out << i << ",train\n";
    for (std::size_t i : split.test_indices) out << i << ",test\n";
}

Dataset synth_bars(std::size_t n_per_class, std::size_t classes, double noise,
                   std::uint64_t seed) {
    if (classes < 2 || classes > 16)
        throw DomainError("synth_bars: classes must be in [2,16], got " +
                          std::to_string(classes));
    if (n_per_class == 0) throw DomainError("synth_bars: n_per_class must be >= 1");
    if (!(noise >= 0.0 && noise <= 1.0))
        throw DomainError("synth_bars: noise must be in [0,1]");

    constexpr std::size_t kGrid = 8;
    constexpr std::size_t kDims = kGrid * kGrid;
    Rng rng(seed);
    Matrix features(n_per_class * classes, kDims);
    std::vector<int> labels(features.rows);

    std::vector<double> base(kDims);
    std::size_t row = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        std::fill(base.begin(), base.end(), 0.0);
        for (std::size_t bar = c; bar < c + 3; ++bar) {
            const std::size_t b = bar % 16;
            if (b < kGrid) { // horizontal bar: grid row b
                for (std::size_t j = 0; j < kGrid; ++j) base[b * kGrid + j] = 1.0;
            } else { // vertical bar: grid column b-8
                for (std::size_t i = 0; i < kGrid; ++i) base[i * kGrid + (b - kGrid)] = 1.0;
            }
        }
        for (std::size_t s = 0; s < n_per_class; ++s, ++row) {
            auto dst = features.row(row);
            for (std::size_t i = 0; i < kDims; ++i) {
                const bool flip = noise > 0.0 && rng.uniform() < noise;
                dst[i] = flip ? 1.0 - base[i] : base[i];
            }
            labels[row] = static_cast<int>(c);
        }
    }
    return make_dataset(std::move(features), std::move(labels), classes);
}

} // namespace slab
