#include "prosospeak/tensor_archive.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace prosospeak {
namespace {

constexpr char kMagic[8] = {'P', 'S', 'A', 'R', 'C', 'H', '1', '\n'};

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    return ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
  return v;
}

}  // namespace

void TensorArchive::add(const std::string& name, std::vector<std::int64_t> shape,
                        std::vector<float> values) {
  require(!has(name), "duplicate tensor name: " + name);
  TensorEntry e;
  e.name = name;
  e.shape = std::move(shape);
  e.offset = blob_.size();
  require(e.size() == values.size(),
          "tensor '" + name + "' shape does not match value count");
  entries_.push_back(e);
  blob_.insert(blob_.end(), values.begin(), values.end());
}

bool TensorArchive::has(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

const TensorEntry& TensorArchive::entry(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  fail("archive has no tensor named '" + name + "'");
}

const float* TensorArchive::data(const std::string& name) const {
  return blob_.data() + entry(name).offset;
}

std::vector<float> TensorArchive::tensor(const std::string& name) const {
  const TensorEntry& e = entry(name);
  return {blob_.begin() + static_cast<std::ptrdiff_t>(e.offset),
          blob_.begin() + static_cast<std::ptrdiff_t>(e.offset + e.size())};
}

MatF TensorArchive::matrix(const std::string& name) const {
  const TensorEntry& e = entry(name);
  require(e.shape.size() == 2, "tensor '" + name + "' is not 2-D");
  return MatF(static_cast<std::size_t>(e.shape[0]), static_cast<std::size_t>(e.shape[1]),
              tensor(name));
}

void TensorArchive::check_finite() const {
  for (const auto& e : entries_) {
    const float* p = blob_.data() + e.offset;
    for (std::size_t i = 0; i < e.size(); ++i)
      if (!std::isfinite(p[i]))
        fail("tensor '" + e.name + "' contains a non-finite value");
  }
}

void TensorArchive::expect(const std::string& name,
                           const std::vector<std::int64_t>& shape) const {
  auto shape_str = [](const std::vector<std::int64_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i)
      out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
  };
  if (!has(name)) fail("missing tensor '" + name + "' (expected shape " + shape_str(shape) + ")");
  const TensorEntry& e = entry(name);
  if (e.shape != shape)
    fail("tensor '" + name + "' has shape " + shape_str(e.shape) + ", expected " +
         shape_str(shape));
}

void save_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  nlohmann::json header;
  header["format_version"] = TensorArchive::kFormatVersion;
  header["metadata"] = archive.metadata;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& e : archive.entries())
    tensors.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}});
  header["tensors"] = tensors;
  std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write archive: " + path.string());
  out.write(kMagic, 8);
  std::uint64_t hlen = header_text.size();
  unsigned char lenb[8];
  for (int i = 0; i < 8; ++i) lenb[i] = static_cast<unsigned char>((hlen >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(lenb), 8);
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (float v : archive.blob()) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    u = to_le(u);
    out.write(reinterpret_cast<const char*>(&u), 4);
  }
  if (!out) fail("short write to " + path.string());
}

TensorArchive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open archive: " + path.string());

  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    fail("not a tensor archive: " + path.string());

  unsigned char lenb[8];
  in.read(reinterpret_cast<char*>(lenb), 8);
  if (!in) fail("truncated archive header: " + path.string());
  std::uint64_t hlen = 0;
  for (int i = 0; i < 8; ++i) hlen |= static_cast<std::uint64_t>(lenb[i]) << (8 * i);

  std::string header_text(hlen, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(hlen));
  if (!in) fail("truncated archive header: " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    fail("malformed archive header in " + path.string() + ": " + e.what());
  }
  int version = header.value("format_version", -1);
  if (version != TensorArchive::kFormatVersion)
    fail("unsupported archive format version " + std::to_string(version) + " in " +
         path.string());

  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  require(raw.size() % 4 == 0, "archive blob length is not a multiple of 4");
  std::vector<float> blob(raw.size() / 4);
  for (std::size_t i = 0; i < blob.size(); ++i) {
    std::uint32_t u;
    std::memcpy(&u, raw.data() + 4 * i, 4);
    u = to_le(u);
    std::memcpy(&blob[i], &u, 4);
  }

  TensorArchive archive;
  archive.metadata = header.value("metadata", nlohmann::json::object());
  std::size_t expected_offset = 0;
  for (const auto& t : header.at("tensors")) {
    std::string name = t.at("name").get<std::string>();
    auto shape = t.at("shape").get<std::vector<std::int64_t>>();
    auto offset = t.at("offset").get<std::size_t>();
    require(offset == expected_offset,
            "tensor '" + name + "' has a non-sequential blob offset");
    std::size_t n = 1;
    for (auto d : shape) {
      require(d > 0, "tensor '" + name + "' has a non-positive dimension");
      n *= static_cast<std::size_t>(d);
    }
    require(offset + n <= blob.size(), "tensor '" + name + "' overruns the archive blob");
    archive.add(name, shape,
                {blob.begin() + static_cast<std::ptrdiff_t>(offset),
                 blob.begin() + static_cast<std::ptrdiff_t>(offset + n)});
    expected_offset = offset + n;
  }
  require(expected_offset == blob.size(), "archive blob has trailing bytes");
  archive.check_finite();
  return archive;
}

}  // namespace prosospeak
