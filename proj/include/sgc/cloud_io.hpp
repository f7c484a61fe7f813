#pragma once

#include "sgc/point_cloud.hpp"

#include <filesystem>

namespace sgc {

enum class CloudFormat {
  PlyAscii,
  PlyBinaryLE,
  Xyz,
};

/// Picks a format from the file extension: .ply -> binary PLY, .xyz -> XYZ.
CloudFormat format_from_path(const std::filesystem::path& path, bool ascii_ply = false);

/// Reads a cloud. PLY files self-describe their encoding, so `format` only
/// distinguishes PLY from XYZ there. Normals load when nx/ny/nz are present.
/// Errors on I/O failure, malformed headers, and zero-vertex files.
PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);  // format from extension

/// Writes a cloud. Binary PLY stores double precision, so a load after save
/// reproduces positions bit-exactly; ASCII keeps 9 significant digits.
/// The write is atomic (temp file + rename).
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);

}  // namespace sgc
