#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "beesense/nn/graph.hpp"

namespace beesense::nn {

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Layout (little-endian): "BSMODEL\0", u32 version, u64 length + topology
/// text, u64 record count, then per parameter: u32 name length, name,
/// u32 rank, u64 dims[rank], f64 values.
std::vector<std::uint8_t> encode_model(NetworkGraph& graph);
NetworkGraph decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(NetworkGraph& graph, const std::filesystem::path& path);
NetworkGraph load_model(const std::filesystem::path& path);

}  // namespace beesense::nn
