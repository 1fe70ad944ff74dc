#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "prosospeak/common.hpp"
#include "prosospeak/mat.hpp"

namespace prosospeak {

/// One named tensor inside an archive. Offset and size are in float units
/// into the archive blob; values are row-major.
struct TensorEntry {
  std::string name;
  std::vector<std::int64_t> shape;
  std::size_t offset = 0;

  std::size_t size() const {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }
};

/// Container for named float32 tensors plus free-form JSON metadata. Used for
/// encoder weights, persisted feature vectors and the classifier model file.
/// On disk: magic, a little-endian header length, a JSON header and a
/// little-endian float32 blob.
class TensorArchive {
 public:
  static constexpr int kFormatVersion = 1;

  nlohmann::json metadata;

  void add(const std::string& name, std::vector<std::int64_t> shape,
           std::vector<float> values);
  bool has(const std::string& name) const;
  const TensorEntry& entry(const std::string& name) const;
  const std::vector<TensorEntry>& entries() const { return entries_; }

  /// Pointer into the blob for a named tensor.
  const float* data(const std::string& name) const;
  std::vector<float> tensor(const std::string& name) const;
  /// 2-D tensor as a matrix (errors unless the shape has exactly two dims).
  MatF matrix(const std::string& name) const;

  const std::vector<float>& blob() const { return blob_; }

  /// Errors when any stored value is NaN/Inf, naming the tensor.
  void check_finite() const;
  /// Errors unless `name` exists with exactly `shape`.
  void expect(const std::string& name, const std::vector<std::int64_t>& shape) const;

 private:
  std::vector<TensorEntry> entries_;
  std::vector<float> blob_;
};

TensorArchive load_archive(const std::filesystem::path& path);
void save_archive(const std::filesystem::path& path, const TensorArchive& archive);

}  // namespace prosospeak
