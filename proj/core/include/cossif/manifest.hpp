#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cossif {

enum class Origin { real, transformed, synthetic };

std::string to_string(Origin origin);
Origin parse_origin(const std::string& text);

struct ImageRef {
  std::string id;          // unique within a manifest; the filename stem
  std::string class_name;
  std::filesystem::path path;
  Origin origin = Origin::real;
  std::optional<std::string> group_key;

  bool operator==(const ImageRef&) const = default;
};

struct DatasetManifest {
  std::string dataset_name;
  int side = 64;
  std::string created_from;
  std::map<std::string, std::vector<ImageRef>> classes;  // lists sorted by id

  bool operator==(const DatasetManifest&) const = default;

  std::size_t total_count() const;
  /// Every ref across all classes, sorted ascending by id.
  std::vector<ImageRef> all_refs_sorted() const;
  /// Sorts each class list by id; throws DataError on a duplicate id.
  void normalize();
};

enum class Layout { class_subdirs, csv_index };

struct LoadFailure {
  std::filesystem::path path;
  std::string reason;
};

/// load_dataset never skips a file silently: undecodable files come back in
/// `failures` while the manifest holds everything that decoded.
struct LoadReport {
  DatasetManifest manifest;
  std::vector<LoadFailure> failures;
};

/// Enumerates a dataset on disk. class_subdirs expects root/<class>/<file>;
/// csv_index expects a CSV with header image_id,class,path[,group_key]
/// (given either as the file itself or as root/index.csv, with relative
/// paths resolved against the CSV location). Image ids are filename stems,
/// sorted lexicographically. Every candidate file is decoded once to prove
/// it is readable. Throws DataError for a missing root, an empty class, or
/// a duplicate id.
LoadReport load_dataset(const std::filesystem::path& root, Layout layout,
                        const std::string& dataset_name = "",
                        Origin default_origin = Origin::real, int side = 64,
                        int threads = 1);

/// JSON with sorted keys, two-space indent, trailing newline: two writes of
/// the same manifest are byte-identical. Paths are stored relative to the
/// manifest file so an output tree can be relocated (and compared) as a
/// unit. Throws DataError when a referenced path does not exist.
void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path);

/// Inverse of write_manifest: paths come back absolute (resolved against
/// the manifest location), and read(write(m)) == m. Throws DataError on
/// malformed JSON or a duplicate id (named in the message).
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace cossif
