#include <doctest.h>

#include <set>

#include "cossif/errors.hpp"
#include "cossif/rng.hpp"
#include "cossif/split.hpp"
#include "testutil.hpp"

using namespace cossif;

namespace {

// In-memory manifest; split never touches the filesystem.
DatasetManifest grouped_manifest(
    const std::vector<std::tuple<std::string, std::string, std::string>>& rows) {
  DatasetManifest manifest;
  manifest.dataset_name = "m";
  manifest.created_from = "test";
  for (const auto& [id, class_name, group] : rows) {
    ImageRef ref;
    ref.id = id;
    ref.class_name = class_name;
    ref.path = "unused";
    if (!group.empty()) ref.group_key = group;
    manifest.classes[class_name].push_back(ref);
  }
  manifest.normalize();
  return manifest;
}

DatasetManifest singleton_manifest(int per_class, const std::vector<std::string>& classes) {
  std::vector<std::tuple<std::string, std::string, std::string>> rows;
  for (const auto& c : classes) {
    for (int i = 0; i < per_class; ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "%s%04d", c.c_str(), i);
      rows.push_back({id, c, std::string("g-") + id});
    }
  }
  return grouped_manifest(rows);
}

}  // namespace

TEST_CASE("split of singleton groups hits the rounded fraction") {
  const DatasetManifest manifest = singleton_manifest(10, {"a"});
  SplitSpec spec;
  spec.test_fraction = 0.2;
  spec.seed = 42;
  spec.group_field = "group_key";
  const SplitResult result = split(manifest, spec);
  CHECK(result.test_ids.size() == 2);
  CHECK(result.train_ids.size() == 8);
  CHECK(result.warnings.empty());
  CHECK(result.per_class_counts.at("a") == std::pair<std::int64_t, std::int64_t>{8, 2});

  const SplitResult again = split(manifest, spec);
  CHECK(again.train_ids == result.train_ids);
  CHECK(again.test_ids == result.test_ids);
}

TEST_CASE("multi-image groups never reach the test set") {
  // 6 images in 2 groups of 3: no singleton candidates at all.
  const DatasetManifest manifest = grouped_manifest({
      {"i1", "a", "g1"},
      {"i2", "a", "g1"},
      {"i3", "a", "g1"},
      {"i4", "a", "g2"},
      {"i5", "a", "g2"},
      {"i6", "a", "g2"},
  });
  SplitSpec spec;
  spec.test_fraction = 0.5;
  spec.seed = 1;
  spec.group_field = "group_key";
  const SplitResult result = split(manifest, spec);
  CHECK(result.test_ids.empty());
  CHECK(result.train_ids.size() == 6);
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].find("0 singleton candidates") != std::string::npos);
}

TEST_CASE("groups never straddle the boundary in mixed manifests") {
  SplitMix64 rng(99);
  std::vector<std::tuple<std::string, std::string, std::string>> rows;
  for (int c = 0; c < 3; ++c) {
    const std::string class_name = "c" + std::to_string(c);
    int id_counter = 0;
    for (int g = 0; g < 25; ++g) {
      const int group_size = 1 + static_cast<int>(rng.bounded(3));
      const std::string group = class_name + "-g" + std::to_string(g);
      for (int k = 0; k < group_size; ++k) {
        char id[32];
        std::snprintf(id, sizeof(id), "%s-i%04d", class_name.c_str(), id_counter++);
        rows.push_back({id, class_name, group});
      }
    }
  }
  const DatasetManifest manifest = grouped_manifest(rows);
  SplitSpec spec;
  spec.test_fraction = 0.25;
  spec.seed = 7;
  spec.group_field = "group_key";
  const SplitResult result = split(manifest, spec);

  CHECK(result.train_ids.size() + result.test_ids.size() == manifest.total_count());

  std::map<std::string, std::string> group_of;
  std::map<std::string, int> group_size;
  for (const auto& [id, class_name, group] : rows) {
    group_of[id] = group;
    ++group_size[group];
  }
  std::set<std::string> test_groups;
  for (const auto& id : result.test_ids) {
    CHECK(group_size.at(group_of.at(id)) == 1);
    test_groups.insert(group_of.at(id));
  }
  for (const auto& id : result.train_ids) {
    CHECK(!test_groups.count(group_of.at(id)));
  }
}

TEST_CASE("seed changes membership but not counts") {
  const DatasetManifest manifest = singleton_manifest(60, {"a", "b"});
  SplitSpec spec;
  spec.test_fraction = 0.25;
  spec.group_field = "group_key";
  spec.seed = 1;
  const SplitResult r1 = split(manifest, spec);
  spec.seed = 2;
  const SplitResult r2 = split(manifest, spec);
  CHECK(r1.test_ids.size() == r2.test_ids.size());
  CHECK(r1.per_class_counts == r2.per_class_counts);
  CHECK(r1.test_ids != r2.test_ids);
}

TEST_CASE("split without a group field treats every image as singleton") {
  const DatasetManifest manifest = grouped_manifest({
      {"i1", "a", ""},
      {"i2", "a", ""},
      {"i3", "a", ""},
      {"i4", "a", ""},
  });
  SplitSpec spec;
  spec.test_fraction = 0.5;
  spec.seed = 3;
  const SplitResult result = split(manifest, spec);
  CHECK(result.test_ids.size() == 2);
}

TEST_CASE("split validation errors") {
  const DatasetManifest manifest = grouped_manifest({{"i1", "a", ""}, {"i2", "a", "g"}});
  SplitSpec spec;
  spec.test_fraction = 0.5;
  spec.seed = 3;
  spec.group_field = "group_key";
  // i1 lacks a group key.
  CHECK_THROWS_WITH_AS(split(manifest, spec), doctest::Contains("i1"), DataError);

  spec.group_field = "lesion";
  CHECK_THROWS_AS(split(manifest, spec), DataError);

  spec.group_field.reset();
  spec.test_fraction = 0.0;
  CHECK_THROWS_AS(split(manifest, spec), DataError);
  spec.test_fraction = 1.0;
  CHECK_THROWS_AS(split(manifest, spec), DataError);
}

TEST_CASE("stratification allocates by largest remainder") {
  // 30 in a, 10 in b, target = round(0.25 * 40) = 10: quotas 7.5 and 2.5
  // floor to 7 and 2, the leftover goes to the larger remainder first (tie
  // here, class name ascending -> a).
  const DatasetManifest manifest = [] {
    std::vector<std::tuple<std::string, std::string, std::string>> rows;
    for (int i = 0; i < 30; ++i) rows.push_back({"a" + std::to_string(100 + i), "a", ""});
    for (int i = 0; i < 10; ++i) rows.push_back({"b" + std::to_string(100 + i), "b", ""});
    return grouped_manifest(rows);
  }();
  SplitSpec spec;
  spec.test_fraction = 0.25;
  spec.seed = 11;
  const SplitResult result = split(manifest, spec);
  CHECK(result.test_ids.size() == 10);
  CHECK(result.per_class_counts.at("a").second == 8);
  CHECK(result.per_class_counts.at("b").second == 2);
}

TEST_CASE("split files are written sorted") {
  testutil::TempDir tmp("split");
  const DatasetManifest manifest = singleton_manifest(8, {"a"});
  SplitSpec spec;
  spec.test_fraction = 0.25;
  spec.seed = 5;
  const SplitResult result = split(manifest, spec);
  write_split_files(result, tmp.path() / "train.txt", tmp.path() / "test.txt",
                    tmp.path() / "counts.csv");
  const std::string train = testutil::read_file(tmp.path() / "train.txt");
  const std::string counts = testutil::read_file(tmp.path() / "counts.csv");
  CHECK(counts == "class,train,test\na,6,2\n");
  CHECK(train.find("a0") != std::string::npos);
}
