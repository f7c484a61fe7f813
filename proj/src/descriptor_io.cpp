#include "sgc/descriptor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "descriptor files assume a little-endian host");

namespace sgc {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'S', 'G', 'C', '1'};

template <typename T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) fail(path.string() + ": truncated descriptor file");
  return value;
}

}  // namespace

void save_descriptors(std::span<const SgcDescriptor> descriptors, const fs::path& path,
                      std::uint32_t q) {
  require(!descriptors.empty(), "save_descriptors: nothing to write");
  const std::string& scan_id = descriptors.front().scan_id;
  for (const auto& d : descriptors)
    require(d.scan_id == scan_id, "save_descriptors: descriptors from multiple scans");
  require(scan_id.size() <= 0xffff, "save_descriptors: scan id too long");

  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(path.string() + ": cannot open for writing");
    out.write(kMagic, 4);
    put<std::uint64_t>(out, descriptors.size());
    put<std::uint16_t>(out, std::uint16_t(scan_id.size()));
    out.write(scan_id.data(), std::streamsize(scan_id.size()));

    for (const SgcDescriptor& d : descriptors) {
      const auto packed = compress(d, q);
      const std::uint64_t record_bytes =
          4 + 4 + 3 * 8 + 8 + 3 * 8 + 9 * 8 + packed.size() * 8;
      put<std::uint64_t>(out, record_bytes);
      put<std::uint32_t>(out, std::uint32_t(d.params.grid_resolution));
      put<std::uint32_t>(out, q);
      put<double>(out, d.params.descriptor_radius);
      put<double>(out, d.params.lrf_radius);
      put<double>(out, d.params.epsilon);
      put<std::int64_t>(out, d.feature_index);
      for (int c = 0; c < 3; ++c) put<double>(out, d.lrf.origin[c]);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) put<double>(out, d.lrf.axes(r, c));
      for (const CompressedVoxel& v : packed) {
        put<std::uint32_t>(out, v.code);
        put<std::uint32_t>(out, v.count);
      }
    }
    if (!out) fail(path.string() + ": write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(path.string() + ": rename failed: " + ec.message());
  }
}

std::vector<SgcDescriptor> load_descriptors(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path.string() + ": cannot open for reading");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    fail(path.string() + ": not a descriptor file (bad magic)");
  const auto count = get<std::uint64_t>(in, path);
  const auto id_len = get<std::uint16_t>(in, path);
  std::string scan_id(id_len, '\0');
  in.read(scan_id.data(), id_len);
  if (!in) fail(path.string() + ": truncated descriptor file");

  std::vector<SgcDescriptor> out;
  out.reserve(count);
  for (std::uint64_t rec = 0; rec < count; ++rec) {
    (void)get<std::uint64_t>(in, path);  // record length; layout is fixed per K
    SgcDescriptor d;
    d.scan_id = scan_id;
    d.params.grid_resolution = int(get<std::uint32_t>(in, path));
    const auto q = get<std::uint32_t>(in, path);
    d.params.descriptor_radius = get<double>(in, path);
    d.params.lrf_radius = get<double>(in, path);
    d.params.epsilon = get<double>(in, path);
    d.feature_index = get<std::int64_t>(in, path);
    for (int c = 0; c < 3; ++c) d.lrf.origin[c] = get<double>(in, path);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) d.lrf.axes(r, c) = get<double>(in, path);
    d.params.validate();
    require(q >= 2, path.string() + ": bad quantization level");

    std::vector<CompressedVoxel> packed(std::size_t(d.params.voxel_count()));
    for (CompressedVoxel& v : packed) {
      v.code = get<std::uint32_t>(in, path);
      v.count = get<std::uint32_t>(in, path);
    }
    d.voxels = decompress(packed, d.params, q);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace sgc
