#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "slab/error.hpp"

namespace slab {

/// Minimal CSV emitter. Doubles are written with std::to_chars shortest
/// round-trip formatting, so identical values always produce identical
/// bytes and reruns of a deterministic pipeline yield byte-identical
/// files.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& header)
        : out_(path) {
        if (!out_) throw ParseError("cannot open " + path.string() + " for writing");
        out_ << header << '\n';
    }

    CsvWriter& field(const std::string& s) {
        sep();
        out_ << s;
        return *this;
    }

    CsvWriter& field(double v) {
        sep();
        char buf[32];
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out_.write(buf, ptr - buf);
        return *this;
    }

    CsvWriter& field(std::size_t v) {
        sep();
        out_ << v;
        return *this;
    }

    void end_row() {
        out_ << '\n';
        first_ = true;
    }

private:
    void sep() {
        if (!first_) out_ << ',';
        first_ = false;
    }

    std::ofstream out_;
    bool first_ = true;
};

} // namespace slab
