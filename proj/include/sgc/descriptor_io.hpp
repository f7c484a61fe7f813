#pragma once

#include "sgc/descriptor.hpp"

#include <filesystem>

namespace sgc {

/// Descriptor container, binary little-endian, magic "SGC1".
///
///   magic "SGC1" | u64 count | u16 scan-id length | scan-id bytes
///   per descriptor (length-prefixed with u64 record bytes):
///     u32 K | u32 Q | f64 R | f64 r | f64 epsilon
///     i64 feature index | 3 x f64 feature-point position | 9 x f64 LRF axes
///     K^3 records of (u32 code, u32 count)
///
/// Centroids are quantized to Q cells per axis on write and reconstructed at
/// cell centers on read (error at most voxel_edge / Q per component).
void save_descriptors(std::span<const SgcDescriptor> descriptors,
                      const std::filesystem::path& path, std::uint32_t q = 256);

std::vector<SgcDescriptor> load_descriptors(const std::filesystem::path& path);

}  // namespace sgc
