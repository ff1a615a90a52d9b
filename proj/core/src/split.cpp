#include "cossif/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "cossif/errors.hpp"
#include "cossif/rng.hpp"

namespace cossif {

SplitResult split(const DatasetManifest& manifest, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0) || !(spec.test_fraction < 1.0)) {
    throw DataError("test fraction out of range (0, 1)");
  }
  if (spec.group_field && *spec.group_field != "group_key") {
    throw DataError("unknown group field: " + *spec.group_field +
                    " (manifests carry \"group_key\")");
  }

  // Group sizes across the whole manifest. Without a group field every
  // image is its own singleton group.
  std::unordered_map<std::string, std::int64_t> group_size;
  if (spec.group_field) {
    for (const auto& [class_name, refs] : manifest.classes) {
      for (const auto& ref : refs) {
        if (!ref.group_key) {
          throw DataError("image " + ref.id + " has no group key but group_field is set");
        }
        ++group_size[*ref.group_key];
      }
    }
  }

  const std::int64_t total = static_cast<std::int64_t>(manifest.total_count());
  if (total == 0) throw DataError("cannot split an empty manifest");
  const std::int64_t test_target =
      std::llround(spec.test_fraction * static_cast<double>(total));

  // Largest-remainder allocation of the test target across classes.
  struct ClassAlloc {
    std::string name;
    std::int64_t size = 0;
    std::int64_t quota = 0;
    std::int64_t remainder = 0;
  };
  std::vector<ClassAlloc> allocs;
  std::int64_t assigned = 0;
  for (const auto& [class_name, refs] : manifest.classes) {
    ClassAlloc a;
    a.name = class_name;
    a.size = static_cast<std::int64_t>(refs.size());
    a.quota = test_target * a.size / total;
    a.remainder = test_target * a.size % total;
    assigned += a.quota;
    allocs.push_back(std::move(a));
  }
  std::vector<ClassAlloc*> by_remainder;
  for (auto& a : allocs) by_remainder.push_back(&a);
  std::sort(by_remainder.begin(), by_remainder.end(), [](const ClassAlloc* a, const ClassAlloc* b) {
    if (a->remainder != b->remainder) return a->remainder > b->remainder;
    return a->name < b->name;
  });
  std::int64_t leftover = test_target - assigned;
  for (std::size_t i = 0; leftover > 0 && i < by_remainder.size(); ++i, --leftover) {
    ++by_remainder[i]->quota;
  }

  SplitResult result;
  for (const auto& alloc : allocs) {
    const auto& refs = manifest.classes.at(alloc.name);
    // Only singleton groups may reach the test set; a group with several
    // near-duplicate augmentations goes wholly to train.
    std::vector<std::string> candidates;
    for (const auto& ref : refs) {
      const bool singleton =
          !spec.group_field || group_size.at(*ref.group_key) == 1;
      if (singleton) candidates.push_back(ref.id);
    }
    std::sort(candidates.begin(), candidates.end());

    SplitMix64 rng(mix_seed(spec.seed, alloc.name));
    rng.shuffle(candidates);

    const std::int64_t take =
        std::min<std::int64_t>(alloc.quota, static_cast<std::int64_t>(candidates.size()));
    if (take < alloc.quota) {
      result.warnings.push_back("class " + alloc.name + ": wanted " +
                                std::to_string(alloc.quota) + " test images but only " +
                                std::to_string(candidates.size()) +
                                " singleton candidates are available");
    }
    const std::set<std::string> test_ids(candidates.begin(), candidates.begin() + take);

    std::int64_t train_count = 0;
    for (const auto& ref : refs) {
      if (test_ids.count(ref.id)) {
        result.test_ids.push_back(ref.id);
      } else {
        result.train_ids.push_back(ref.id);
        ++train_count;
      }
    }
    result.per_class_counts[alloc.name] = {train_count, take};
  }

  std::sort(result.train_ids.begin(), result.train_ids.end());
  std::sort(result.test_ids.begin(), result.test_ids.end());
  return result;
}

void write_split_files(const SplitResult& result, const std::filesystem::path& train_path,
                       const std::filesystem::path& test_path,
                       const std::filesystem::path& counts_csv_path) {
  const auto write_ids = [](const std::vector<std::string>& ids,
                            const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write id list: " + path.string());
    for (const auto& id : ids) out << id << "\n";
  };
  write_ids(result.train_ids, train_path);
  write_ids(result.test_ids, test_path);

  std::ofstream out(counts_csv_path, std::ios::binary);
  if (!out) throw DataError("cannot write counts csv: " + counts_csv_path.string());
  out << "class,train,test\n";
  for (const auto& [name, counts] : result.per_class_counts) {
    out << name << ',' << counts.first << ',' << counts.second << "\n";
  }
}

}  // namespace cossif
