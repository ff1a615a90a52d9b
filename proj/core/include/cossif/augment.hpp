#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cossif/filtering.hpp"
#include "cossif/manifest.hpp"

namespace cossif {

/// Per-class accounting: real + transformed + synthetic_needed == target_total.
struct AugmentationPlan {
  std::string class_name;
  std::int64_t target_total = 0;
  std::int64_t real_count = 0;
  std::int64_t transformed_count = 0;
  std::int64_t synthetic_needed = 0;

  bool operator==(const AugmentationPlan&) const = default;
};

/// s = N - (r + t). Throws DataError when the class is already over-full.
AugmentationPlan plan_class(const std::string& class_name, std::int64_t target_total,
                            std::int64_t real_count, std::int64_t transformed_count);

/// Geometric oversampling parameters. Rotation in degrees, shift as a
/// fraction of the side per axis, zoom as a scale factor (crop-and-resize).
/// Exposed regions are filled by edge replication.
struct TransformSpec {
  double rotation_min = -25.0;
  double rotation_max = 25.0;
  double shift_min = -0.10;
  double shift_max = 0.10;
  double zoom_min = 0.9;
  double zoom_max = 1.1;
  bool allow_hflip = true;
  bool allow_vflip = true;
  int side = 256;  // output resolution
  std::uint64_t seed = 0;
};

/// Emits exactly `count` transformed PNGs under out_dir, cycling the sorted
/// sources round-robin. Output k uses source sorted_sources[k % n] on cycle
/// k / n and is named <source_id>_t<cycle>. Parameters are drawn from
/// SplitMix64 seeded with mix_seed(mix_seed(spec.seed, source_id), cycle)
/// in the fixed order rotation, shift_x, shift_y, zoom, hflip, vflip, so a
/// rerun reproduces every file byte for byte regardless of thread count.
/// Throws DataError when sources is empty and count > 0.
std::vector<ImageRef> oversample_transform(const std::vector<ImageRef>& sources,
                                           std::int64_t count, const TransformSpec& spec,
                                           const std::filesystem::path& out_dir,
                                           int threads = 1);

/// Merges the real, transformed and synthetic manifests into the final
/// dataset. Every planned class must land exactly on its (r, t, s) histogram
/// and N total; violations and id collisions are DataErrors naming the
/// class or id.
DatasetManifest compose_final(const DatasetManifest& real,
                              const DatasetManifest& transformed,
                              const DatasetManifest& synthetic,
                              const std::vector<AugmentationPlan>& plans,
                              const std::string& dataset_name = "composed");

/// CSV `class,real,transformed,synthetic,total`, classes sorted.
void write_composition_csv(const DatasetManifest& manifest,
                           const std::filesystem::path& path);

/// A plan entry as stored in plan.json: the quota plus, when synthetic
/// images are needed, the suggested generator pool size f/alpha.
struct ClassPlan {
  AugmentationPlan quota;
  std::optional<Alpha> pool_alpha;
  std::optional<RoundingMode> pool_rounding;
  std::optional<std::int64_t> pool_size;
};

void write_plans_json(const std::vector<ClassPlan>& plans,
                      const std::filesystem::path& path);
std::vector<ClassPlan> read_plans_json(const std::filesystem::path& path);

}  // namespace cossif
