#include <doctest.h>

#include <fstream>

#include "cossif/errors.hpp"
#include "cossif/manifest.hpp"
#include "cossif/vector_store.hpp"
#include "testutil.hpp"

using namespace cossif;
using testutil::TempDir;

TEST_CASE("build vectorizes every manifest image in ascending id order") {
  TempDir tmp("store");
  testutil::write_corpus(tmp.path() / "data", {"a", "b"}, {3, 2}, 8);
  const DatasetManifest manifest =
      load_dataset(tmp.path() / "data", Layout::class_subdirs).manifest;

  const VectorStore store = VectorStore::build(manifest, 8);
  CHECK(store.count() == 5);
  CHECK(store.dim() == 3u * 8 * 8);
  CHECK(std::is_sorted(store.ids().begin(), store.ids().end()));
  for (float x : store.row("a000")) {
    CHECK(x >= 0.0f);
    CHECK(x <= 1.0f);
  }
  CHECK_THROWS_AS(store.row("nope"), DataError);
}

TEST_CASE("build is independent of thread count") {
  TempDir tmp("storethreads");
  testutil::write_corpus(tmp.path() / "data", {"a"}, {9}, 8);
  const DatasetManifest manifest =
      load_dataset(tmp.path() / "data", Layout::class_subdirs).manifest;
  const VectorStore one = VectorStore::build(manifest, 8, 1);
  const VectorStore many = VectorStore::build(manifest, 8, 4);
  REQUIRE(one.count() == many.count());
  for (std::size_t i = 0; i < one.count(); ++i) {
    const auto a = one.row_at(i);
    const auto b = many.row_at(i);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST_CASE("csif cache round trip is bit-exact with the specified header") {
  TempDir tmp("csif");
  testutil::write_corpus(tmp.path() / "data", {"a"}, {4}, 8);
  const DatasetManifest manifest =
      load_dataset(tmp.path() / "data", Layout::class_subdirs).manifest;
  const VectorStore store = VectorStore::build(manifest, 8);
  const auto cache = tmp.path() / "vectors.bin";
  store.save(cache);

  const std::string bytes = testutil::read_file(cache);
  REQUIRE(bytes.size() == 16 + store.count() * store.dim() * 4);
  CHECK(bytes.substr(0, 4) == "CSIF");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);  // version u32 LE
  CHECK(static_cast<unsigned char>(bytes[8]) == 8);  // side u32 LE
  CHECK(static_cast<unsigned char>(bytes[12]) == 4); // count u32 LE

  const VectorStore loaded = VectorStore::load(cache, manifest);
  REQUIRE(loaded.count() == store.count());
  CHECK(loaded.ids() == store.ids());
  for (std::size_t i = 0; i < store.count(); ++i) {
    const auto a = store.row_at(i);
    const auto b = loaded.row_at(i);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }

  // Two saves are byte-identical.
  store.save(tmp.path() / "vectors2.bin");
  CHECK(testutil::read_file(tmp.path() / "vectors2.bin") == bytes);
}

TEST_CASE("csif load validates magic, count and truncation") {
  TempDir tmp("csifbad");
  testutil::write_corpus(tmp.path() / "data", {"a"}, {2}, 4);
  const DatasetManifest manifest =
      load_dataset(tmp.path() / "data", Layout::class_subdirs).manifest;
  const VectorStore store = VectorStore::build(manifest, 4);
  const auto cache = tmp.path() / "vectors.bin";
  store.save(cache);

  std::ofstream(tmp.path() / "junk.bin", std::ios::binary) << "JUNKxxxxxxxxxxxx";
  CHECK_THROWS_AS(VectorStore::load(tmp.path() / "junk.bin", manifest), DataError);

  // Drop one image from the manifest: count mismatch.
  DatasetManifest short_manifest = manifest;
  short_manifest.classes.at("a").pop_back();
  CHECK_THROWS_AS(VectorStore::load(cache, short_manifest), DataError);

  const std::string bytes = testutil::read_file(cache);
  std::ofstream(tmp.path() / "trunc.bin", std::ios::binary)
      << bytes.substr(0, bytes.size() - 5);
  CHECK_THROWS_AS(VectorStore::load(tmp.path() / "trunc.bin", manifest), DataError);
}

TEST_CASE("merge combines stores and rejects duplicate ids") {
  const VectorStore a = VectorStore::from_vectors(1, {"x"}, {1.0f, 0.0f, 0.0f});
  const VectorStore b = VectorStore::from_vectors(1, {"y"}, {0.0f, 1.0f, 0.0f});
  VectorStore merged = a;
  merged.merge(b);
  CHECK(merged.count() == 2);
  CHECK(merged.contains("x"));
  CHECK(merged.contains("y"));

  VectorStore dup = a;
  CHECK_THROWS_AS(dup.merge(a), DataError);

  const VectorStore other_side = VectorStore::from_vectors(2, {"z"},
                                                           std::vector<float>(12, 0.5f));
  VectorStore bad = a;
  CHECK_THROWS_AS(bad.merge(other_side), DataError);
}

TEST_CASE("from_vectors sorts rows by id") {
  const VectorStore store = VectorStore::from_vectors(
      1, {"b", "a"}, {0.0f, 1.0f, 0.0f, 1.0f, 0.0f, 0.0f});
  CHECK(store.ids() == std::vector<std::string>{"a", "b"});
  CHECK(store.row("a")[0] == 1.0f);
  CHECK(store.row("b")[1] == 1.0f);
}
