#include "slab/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "slab/error.hpp"

namespace slab {

namespace {

constexpr char kMagic[4] = {'S', 'L', 'A', 'B'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kPretrainedFlag = 1;

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw ParseError("cannot open " + path.string() + " for writing");
    }

    void u32(std::uint32_t v) {
        const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                           static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
        out_.write(b, 4);
    }

    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(bits >> (8 * i));
        out_.write(b, 8);
    }

    void raw(const char* data, std::size_t n) { out_.write(data, n); }

    void tensor2(const Matrix& m) {
        u32(2);
        u32(static_cast<std::uint32_t>(m.rows));
        u32(static_cast<std::uint32_t>(m.cols));
        for (double v : m.data) f64(v);
    }

    void tensor1(const std::vector<double>& v) {
        u32(1);
        u32(static_cast<std::uint32_t>(v.size()));
        for (double x : v) f64(x);
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path)
        : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw ParseError("cannot open " + path.string());
    }

    std::uint32_t u32() {
        std::uint8_t b[4];
        read(b, 4);
        return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
               (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
    }

    double f64() {
        std::uint8_t b[8];
        read(b, 8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
        return std::bit_cast<double>(bits);
    }

    Matrix tensor2() {
        expect_rank(2);
        const std::uint32_t rows = u32();
        const std::uint32_t cols = u32();
        Matrix m(rows, cols);
        for (auto& v : m.data) v = f64();
        return m;
    }

    std::vector<double> tensor1() {
        expect_rank(1);
        std::vector<double> v(u32());
        for (auto& x : v) x = f64();
        return v;
    }

    void check_header(PayloadKind want, std::uint32_t& flags, std::uint32_t& count) {
        char magic[4];
        read(reinterpret_cast<std::uint8_t*>(magic), 4);
        if (std::memcmp(magic, kMagic, 4) != 0)
            throw ParseError(path_.string() + ": bad magic at byte 0");
        const std::uint32_t version = u32();
        if (version != kVersion)
            throw ParseError(path_.string() + ": unsupported format version " +
                             std::to_string(version));
        const std::uint32_t kind = u32();
        if (kind != static_cast<std::uint32_t>(want))
            throw ParseError(path_.string() + ": payload kind " + std::to_string(kind) +
                             ", expected " +
                             std::to_string(static_cast<std::uint32_t>(want)));
        flags = u32();
        count = u32();
    }

    PayloadKind peek_kind() {
        char magic[4];
        read(reinterpret_cast<std::uint8_t*>(magic), 4);
        if (std::memcmp(magic, kMagic, 4) != 0)
            throw ParseError(path_.string() + ": bad magic at byte 0");
        u32(); // version
        const std::uint32_t kind = u32();
        if (kind != 1 && kind != 2)
            throw ParseError(path_.string() + ": unknown payload kind " +
                             std::to_string(kind));
        return static_cast<PayloadKind>(kind);
    }

private:
    void read(std::uint8_t* dst, std::size_t n) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n))
            throw ParseError(path_.string() + ": truncated at byte " +
                             std::to_string(offset_ + static_cast<std::size_t>(in_.gcount())));
        offset_ += n;
    }

    void expect_rank(std::uint32_t want) {
        const std::uint32_t rank = u32();
        if (rank != want)
            throw ParseError(path_.string() + ": tensor rank " + std::to_string(rank) +
                             ", expected " + std::to_string(want));
    }

    std::filesystem::path path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

} // namespace

void save_stack(const std::filesystem::path& path,
                const std::vector<RbmParams>& stack) {
    Writer w(path);
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(PayloadKind::rbm_stack));
    w.u32(0);
    w.u32(static_cast<std::uint32_t>(3 * stack.size()));
    for (const RbmParams& p : stack) {
        w.tensor2(p.W);
        w.tensor1(p.b);
        w.tensor1(p.c);
    }
}

std::vector<RbmParams> load_stack(const std::filesystem::path& path) {
    Reader r(path);
    std::uint32_t flags = 0;
    std::uint32_t count = 0;
    r.check_header(PayloadKind::rbm_stack, flags, count);
    if (count % 3 != 0)
        throw ParseError(path.string() + ": stack tensor count " + std::to_string(count) +
                         " is not a multiple of 3");
    std::vector<RbmParams> stack(count / 3);
    for (RbmParams& p : stack) {
        p.W = r.tensor2();
        p.b = r.tensor1();
        p.c = r.tensor1();
    }
    return stack;
}

void save_network(const std::filesystem::path& path, const Network& net) {
    Writer w(path);
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(PayloadKind::network));
    w.u32(net.provenance == Provenance::pretrained ? kPretrainedFlag : 0);
    w.u32(static_cast<std::uint32_t>(3 * net.hidden.size() + 2));
    for (std::size_t l = 0; l < net.hidden.size(); ++l) {
        w.tensor2(net.hidden[l].W);
        w.tensor1(net.hidden[l].b);
        w.tensor1(net.decoder_c[l]);
    }
    w.tensor2(net.head.W);
    w.tensor1(net.head.b);
}

Network load_network(const std::filesystem::path& path) {
    Reader r(path);
    std::uint32_t flags = 0;
    std::uint32_t count = 0;
    r.check_header(PayloadKind::network, flags, count);
    if (count < 2 || (count - 2) % 3 != 0)
        throw ParseError(path.string() + ": network tensor count " +
                         std::to_string(count) + " does not fit 3*layers + 2");
    Network net;
    net.provenance =
        (flags & kPretrainedFlag) ? Provenance::pretrained : Provenance::random;
    const std::size_t layers = (count - 2) / 3;
    for (std::size_t l = 0; l < layers; ++l) {
        Layer layer;
        layer.W = r.tensor2();
        layer.b = r.tensor1();
        net.decoder_c.push_back(r.tensor1());
        net.hidden.push_back(std::move(layer));
    }
    net.head.W = r.tensor2();
    net.head.b = r.tensor1();
    return net;
}

Model load_model(const std::filesystem::path& path) {
    const PayloadKind kind = Reader(path).peek_kind();
    if (kind == PayloadKind::rbm_stack) return load_stack(path);
    return load_network(path);
}

} // namespace slab
