#pragma once

#include <filesystem>
#include <variant>
#include <vector>

#include "slab/network.hpp"
#include "slab/rbm.hpp"

namespace slab {

// Model container, shared by RBM stacks and networks. Layout:
//
//   bytes 0-3   magic "SLAB"
//   u32 LE      format version (currently 1)
//   u32 LE      payload kind: 1 = rbm stack, 2 = network
//   u32 LE      flags (networks: bit 0 set when pretrained)
//   u32 LE      tensor count
//   per tensor: u32 LE rank, rank x u32 LE dims, prod(dims) x f64 LE
//
// A stack stores W, b, c per RBM; a network stores W, b, decoder_c per
// hidden layer followed by the head's W and b. Round trips are bit-exact.

enum class PayloadKind : std::uint32_t { rbm_stack = 1, network = 2 };

void save_stack(const std::filesystem::path& path,
                const std::vector<RbmParams>& stack);
std::vector<RbmParams> load_stack(const std::filesystem::path& path);

void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(const std::filesystem::path& path);

using Model = std::variant<std::vector<RbmParams>, Network>;
Model load_model(const std::filesystem::path& path);

} // namespace slab
