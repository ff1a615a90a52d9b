#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cossif/manifest.hpp"

namespace cossif {

/// Holds one PixelVector per image id, rows in ascending id order, values
/// contiguous. This is the similarity kernel's input: float storage, with
/// all score arithmetic done in double downstream.
class VectorStore {
 public:
  VectorStore() = default;

  /// Decodes, rescales and vectorizes every image of `manifest` at `side`.
  /// Work is split across `threads`; rows land in preallocated slots so the
  /// result is independent of worker count.
  static VectorStore build(const DatasetManifest& manifest, int side,
                           int threads = 1);

  /// Assembles a store from ids and row data (3*side^2 floats per id), e.g.
  /// for synthetic corpora in tests. ids need not be sorted; rows follow ids.
  static VectorStore from_vectors(int side, std::vector<std::string> ids,
                                  std::vector<float> data);

  int side() const { return side_; }
  std::size_t dim() const { return static_cast<std::size_t>(3) * side_ * side_; }
  std::size_t count() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  /// Row for `id`; throws DataError when the id is unknown.
  std::span<const float> row(const std::string& id) const;
  std::span<const float> row_at(std::size_t i) const;

  /// Merges another store (same side) into this one; a duplicate id is a
  /// DataError naming the id.
  void merge(const VectorStore& other);

  /// Binary cache, bit-exact: 16-byte header (magic "CSIF", u32 version=1,
  /// u32 side, u32 count, all little-endian) followed by count * 3*side^2
  /// IEEE-754 binary32 values, little-endian, rows in ascending id order.
  /// Ids are not stored; load() pairs rows with the manifest's ascending id
  /// order, which is also the order build() produces.
  void save(const std::filesystem::path& path) const;
  static VectorStore load(const std::filesystem::path& path,
                          const DatasetManifest& manifest);

 private:
  int side_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;

  void rebuild_index();
};

}  // namespace cossif
