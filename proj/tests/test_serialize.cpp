#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "slab/error.hpp"
#include "slab/network.hpp"
#include "slab/serialize.hpp"

using namespace slab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("slab_ser_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

RbmParams random_rbm(std::uint64_t seed, std::size_t dh, std::size_t dx) {
    Rng rng(seed);
    RbmParams p;
    p.W = gaussian_matrix(rng, dh, dx, 0.0, 1.0);
    p.b.resize(dh);
    for (auto& v : p.b) v = rng.normal(0.0, 1.0);
    p.c.resize(dx);
    for (auto& v : p.c) v = rng.normal(0.0, 1.0);
    return p;
}

} // namespace

TEST_CASE("stack round trip is bit-exact") {
    TempDir tmp;
    const std::vector<RbmParams> stack = {random_rbm(1, 4, 6), random_rbm(2, 3, 4)};
    const fs::path p = tmp.path / "stack.slab";
    save_stack(p, stack);

    const auto loaded = load_stack(p);
    REQUIRE(loaded.size() == 2);
    for (std::size_t l = 0; l < 2; ++l) {
        CHECK(loaded[l].W == stack[l].W);
        CHECK(loaded[l].b == stack[l].b);
        CHECK(loaded[l].c == stack[l].c);
    }

    // saving the loaded copy reproduces the file byte for byte
    const fs::path q = tmp.path / "stack2.slab";
    save_stack(q, loaded);
    std::ifstream a(p, std::ios::binary), b(q, std::ios::binary);
    const std::vector<char> ba{std::istreambuf_iterator<char>(a), {}};
    const std::vector<char> bb{std::istreambuf_iterator<char>(b), {}};
    CHECK(ba == bb);
}

TEST_CASE("network round trip preserves provenance and decoder context") {
    TempDir tmp;
    const std::vector<RbmParams> stack = {random_rbm(3, 5, 8)};
    const Network net = init_from_stack(stack, 4, 7);
    const fs::path p = tmp.path / "net.slab";
    save_network(p, net);

    const Network loaded = load_network(p);
    CHECK(loaded.provenance == Provenance::pretrained);
    REQUIRE(loaded.hidden.size() == 1);
    CHECK(loaded.hidden[0].W == net.hidden[0].W);
    CHECK(loaded.hidden[0].b == net.hidden[0].b);
    CHECK(loaded.decoder_c[0] == net.decoder_c[0]);
    CHECK(loaded.head.W == net.head.W);
    CHECK(loaded.head.b == net.head.b);

    const Network rnd = init_random({3}, 4, 2, 11);
    const fs::path q = tmp.path / "rnd.slab";
    save_network(q, rnd);
    CHECK(load_network(q).provenance == Provenance::random);
}

TEST_CASE("kind mismatch, bad magic and truncation raise parse errors") {
    TempDir tmp;
    const fs::path p = tmp.path / "stack.slab";
    save_stack(p, {random_rbm(5, 2, 3)});
    CHECK_THROWS_AS(load_network(p), ParseError);

    const fs::path junk = tmp.path / "junk.slab";
    {
        std::ofstream out(junk, std::ios::binary);
        out << "JUNKJUNKJUNKJUNK";
    }
    CHECK_THROWS_AS(load_stack(junk), ParseError);
    CHECK_THROWS_AS(load_model(junk), ParseError);

    // truncate a valid file mid-tensor
    std::vector<char> bytes;
    {
        std::ifstream in(p, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    const fs::path trunc = tmp.path / "trunc.slab";
    {
        std::ofstream out(trunc, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_stack(trunc), ParseError);
}

TEST_CASE("load_model dispatches on the payload kind") {
    TempDir tmp;
    const fs::path p = tmp.path / "stack.slab";
    save_stack(p, {random_rbm(6, 2, 3)});
    CHECK(std::holds_alternative<std::vector<RbmParams>>(load_model(p)));

    const fs::path q = tmp.path / "net.slab";
    save_network(q, init_random({2}, 3, 2, 1));
    CHECK(std::holds_alternative<Network>(load_model(q)));
}
