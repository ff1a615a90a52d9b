#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cossif/manifest.hpp"

namespace cossif {

struct SplitSpec {
  double test_fraction = 0.2;  // in (0, 1)
  std::uint64_t seed = 0;
  /// When set, images are grouped by their group_key and any group with
  /// more than one member goes wholly to train, keeping near-duplicates
  /// out of the test set. The only grouping field a manifest carries is
  /// "group_key".
  std::optional<std::string> group_field;
};

struct SplitResult {
  std::vector<std::string> train_ids;  // sorted ascending
  std::vector<std::string> test_ids;   // sorted ascending
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> per_class_counts;
  std::vector<std::string> warnings;
};

/// Deterministic, group-aware, stratified split.
///
///   1. The test target is llround(test_fraction * total_images), allocated
///      per class proportionally with largest-remainder rounding
///      (remainder ties broken by class name).
///   2. Test candidates are the images in singleton groups only. Per class,
///      candidates are sorted by id, Fisher-Yates-shuffled by
///      SplitMix64(mix_seed(seed, class_name)), and the first
///      min(quota, candidates) become test images. A capped class adds a
///      warning stating the achievable maximum; no cross-class
///      redistribution happens.
///
/// Identical (manifest, spec) give identical results; a different seed
/// changes membership but never the counts. Throws DataError when
/// group_field is set but an image lacks a group key, when the field name
/// is unknown, or when test_fraction is out of range.
SplitResult split(const DatasetManifest& manifest, const SplitSpec& spec);

/// Two id-list text files (one id per line) plus a CSV of per-class counts
/// `class,train,test`.
void write_split_files(const SplitResult& result, const std::filesystem::path& train_path,
                       const std::filesystem::path& test_path,
                       const std::filesystem::path& counts_csv_path);

}  // namespace cossif
