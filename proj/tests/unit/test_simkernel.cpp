#include <doctest.h>

#include <cmath>

#include "cossif/errors.hpp"
#include "cossif/image.hpp"
#include "cossif/simkernel.hpp"
#include "testutil.hpp"

using namespace cossif;

namespace {

std::span<const float> span_of(const std::vector<float>& v) {
  return {v.data(), v.size()};
}
std::span<const double> span_of(const std::vector<double>& v) {
  return {v.data(), v.size()};
}

VectorStore store_from_rows(int side, const std::vector<std::string>& ids,
                            const std::vector<std::vector<float>>& rows) {
  std::vector<float> flat;
  for (const auto& row : rows) flat.insert(flat.end(), row.begin(), row.end());
  return VectorStore::from_vectors(side, ids, std::move(flat));
}

}  // namespace

TEST_CASE("cosine similarity hand values") {
  const std::vector<float> u{1.0f, 1.0f};
  const std::vector<float> v{1.0f, 0.0f};
  // 1/sqrt(2)
  CHECK(cosine_similarity(span_of(u), span_of(v)) ==
        doctest::Approx(0.7071067811865475).epsilon(1e-15));
  CHECK(cosine_distance(span_of(u), span_of(v)) ==
        doctest::Approx(0.2928932188134525).epsilon(1e-15));

  const std::vector<float> e1{1.0f, 0.0f, 0.0f};
  const std::vector<float> e2{0.0f, 1.0f, 0.0f};
  CHECK(cosine_similarity(span_of(e1), span_of(e2)) == 0.0);
  CHECK(cosine_distance(span_of(e1), span_of(e1)) == 0.0);
}

TEST_CASE("self-similarity is exactly 1.0") {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto dim = 1 + rng.bounded(3000);
    const auto u = testutil::random_nonneg_vector(dim, rng);
    CHECK(cosine_similarity(span_of(u), span_of(u)) == 1.0);
    const std::vector<float> copy = u;
    CHECK(cosine_similarity(span_of(u), span_of(copy)) == 1.0);
  }
}

TEST_CASE("similarity errors: mismatch and zero norm") {
  const std::vector<float> u{1.0f, 2.0f};
  const std::vector<float> w{1.0f, 2.0f, 3.0f};
  const std::vector<float> z{0.0f, 0.0f};
  CHECK_THROWS_AS(cosine_similarity(span_of(u), span_of(w)), DataError);
  CHECK_THROWS_AS(cosine_similarity(span_of(u), span_of(z)), DataError);
  CHECK_THROWS_AS(cosine_similarity(std::span<const float>{}, std::span<const float>{}),
                  DataError);
}

TEST_CASE("similarity is exactly symmetric") {
  SplitMix64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const auto dim = 2 + rng.bounded(500);
    const auto u = testutil::random_nonneg_vector(dim, rng);
    const auto v = testutil::random_nonneg_vector(dim, rng);
    CHECK(cosine_similarity(span_of(u), span_of(v)) ==
          cosine_similarity(span_of(v), span_of(u)));
  }
}

TEST_CASE("positive scale invariance within 1e-9 on double vectors") {
  SplitMix64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto dim = 2 + rng.bounded(800);
    std::vector<double> u(dim), v(dim);
    for (auto& x : u) x = rng.next_double();
    for (auto& x : v) x = rng.next_double();
    const double c = std::pow(10.0, rng.uniform(-3.0, 3.0));
    std::vector<double> cu(dim);
    for (std::size_t i = 0; i < dim; ++i) cu[i] = c * u[i];
    const double base = cosine_similarity(span_of(u), span_of(v));
    const double scaled = cosine_similarity(span_of(cu), span_of(v));
    CHECK(std::abs(scaled - base) <= 1e-9);
  }
}

TEST_CASE("scores of non-negative vectors stay in [0, 1]") {
  SplitMix64 rng(24);
  for (int trial = 0; trial < 200; ++trial) {
    const auto dim = 2 + rng.bounded(64);
    const auto u = testutil::random_nonneg_vector(dim, rng);
    const auto v = testutil::random_nonneg_vector(dim, rng);
    const double s = similarity_score(span_of(u), span_of(v));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("pairwise_scores trivial shapes") {
  const std::vector<float> one{0.5f, 0.25f, 0.125f};
  std::vector<float> both;
  both.insert(both.end(), one.begin(), one.end());
  const auto m = pairwise_scores(span_of(both), 1, span_of(both), 1, 3);
  REQUIRE(m.size() == 1);
  CHECK(m[0] == 1.0);

  const std::vector<float> basis{1.0f, 0.0f, 0.0f, 1.0f};  // e1, e2 rows
  const auto eye = pairwise_scores(span_of(basis), 2, span_of(basis), 2, 2);
  CHECK(eye[0] == 1.0);
  CHECK(eye[1] == 0.0);
  CHECK(eye[2] == 0.0);
  CHECK(eye[3] == 1.0);
}

TEST_CASE("pairwise_scores matches the naive per-pair formula within 1e-9") {
  SplitMix64 rng(25);
  const std::size_t n = 20, m = 30, dim = 48;
  std::vector<std::vector<float>> targets, secondaries;
  std::vector<float> tflat, sflat;
  for (std::size_t i = 0; i < n; ++i) {
    targets.push_back(testutil::random_nonneg_vector(dim, rng));
    tflat.insert(tflat.end(), targets.back().begin(), targets.back().end());
  }
  for (std::size_t j = 0; j < m; ++j) {
    secondaries.push_back(testutil::random_nonneg_vector(dim, rng));
    sflat.insert(sflat.end(), secondaries.back().begin(), secondaries.back().end());
  }
  const auto scores = pairwise_scores(span_of(tflat), n, span_of(sflat), m, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      CHECK(std::abs(scores[i * m + j] - testutil::naive_cosine(targets[i], secondaries[j])) <=
            1e-9);
    }
  }
}

TEST_CASE("pairwise_scores is bitwise independent of thread count") {
  SplitMix64 rng(26);
  const std::size_t n = 13, m = 29, dim = 257;
  std::vector<float> tflat, sflat;
  for (std::size_t i = 0; i < n * dim; ++i) tflat.push_back(static_cast<float>(rng.next_double()));
  for (std::size_t j = 0; j < m * dim; ++j) sflat.push_back(static_cast<float>(rng.next_double()));
  const auto a = pairwise_scores(span_of(tflat), n, span_of(sflat), m, dim, 1);
  const auto b = pairwise_scores(span_of(tflat), n, span_of(sflat), m, dim, 3);
  const auto c = pairwise_scores(span_of(tflat), n, span_of(sflat), m, dim, 8);
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("pairwise_scores rejects zero-norm rows") {
  std::vector<float> t{1.0f, 0.0f};
  std::vector<float> s{0.0f, 0.0f};
  CHECK_THROWS_AS(pairwise_scores(span_of(t), 1, span_of(s), 1, 2), DataError);
}

TEST_CASE("compute_records single identical pair") {
  const VectorStore store = store_from_rows(
      1, {"a", "b"}, {{0.5f, 0.5f, 0.5f}, {0.5f, 0.5f, 0.5f}});
  ClassSet set;
  set.target = {"t", {"a"}};
  set.secondaries = {{"s", {"b"}}};
  const RecordSet records = compute_records(set, store, 1);
  REQUIRE(records.records.size() == 1);
  CHECK(records.records[0].target_id == "a");
  CHECK(records.records[0].i_max == 1.0);
  CHECK(records.records[0].entries[0].secondary_id == "b");
}

TEST_CASE("compute_records equals brute force with k = full") {
  SplitMix64 rng(27);
  std::vector<std::string> ids;
  std::vector<float> data;
  const int side = 2;  // dim 12
  for (int i = 0; i < 8; ++i) {
    ids.push_back("img" + std::to_string(i));
    const auto row = testutil::random_nonneg_vector(12, rng);
    data.insert(data.end(), row.begin(), row.end());
  }
  const VectorStore store = VectorStore::from_vectors(side, ids, data);
  ClassSet set;
  set.target = {"t", {"img0", "img1", "img2"}};
  set.secondaries = {{"s", {"img3", "img4", "img5", "img6", "img7"}}};

  const RecordSet actual = compute_records(set, store, 5);
  const RecordSet expected = testutil::brute_force_records(set, store, 5);
  CHECK(actual == expected);
  for (const auto& record : actual.records) {
    CHECK(record.entries.size() == 5);
    for (std::size_t i = 1; i < record.entries.size(); ++i) {
      CHECK(record.entries[i - 1].score >= record.entries[i].score);
    }
  }
}

TEST_CASE("compute_records matches the oracle across random class sets") {
  SplitMix64 rng(28);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t targets = 1 + rng.bounded(30);
    const std::size_t classes = 1 + rng.bounded(3);
    std::vector<std::string> ids;
    std::vector<float> data;
    ClassSet set;
    set.target.name = "t";
    for (std::size_t i = 0; i < targets; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "t%03zu", i);
      ids.push_back(buf);
      set.target.ids.push_back(buf);
      const auto row = testutil::random_nonneg_vector(12, rng);
      data.insert(data.end(), row.begin(), row.end());
    }
    for (std::size_t c = 0; c < classes; ++c) {
      ClassSet::Class cls;
      cls.name = "s" + std::to_string(c);
      const std::size_t count = 1 + rng.bounded(40);
      for (std::size_t i = 0; i < count; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "s%zu_%03zu", c, i);
        ids.push_back(buf);
        cls.ids.push_back(buf);
        const auto row = testutil::random_nonneg_vector(12, rng);
        data.insert(data.end(), row.begin(), row.end());
      }
      set.secondaries.push_back(std::move(cls));
    }
    const VectorStore store = VectorStore::from_vectors(2, ids, data);
    for (int k : {1, 3, static_cast<int>(set.secondary_total())}) {
      const RecordSet actual = compute_records(set, store, k);
      const RecordSet expected = testutil::brute_force_records(
          set, store, static_cast<std::size_t>(k));
      CHECK(actual == expected);
      CHECK(actual.records.size() == targets);
    }
  }
}

TEST_CASE("ties break by class then id, records by i_max then target id") {
  // b1 (class sB) and a1 (class sA) are identical vectors: both score 1.0
  // against t1, and the class-ascending tie-break must put sA first.
  const std::vector<float> v1{0.5f, 0.5f, 0.5f};
  const VectorStore store = store_from_rows(
      1, {"t1", "t2", "a1", "b1"}, {v1, v1, v1, v1});
  ClassSet set;
  set.target = {"t", {"t1", "t2"}};
  set.secondaries = {{"sB", {"b1"}}, {"sA", {"a1"}}};
  const RecordSet records = compute_records(set, store, 2);
  REQUIRE(records.records.size() == 2);
  // Both targets tie at i_max == 1.0; target_id ascending breaks it.
  CHECK(records.records[0].target_id == "t1");
  CHECK(records.records[1].target_id == "t2");
  CHECK(records.records[0].entries[0].secondary_class == "sA");
  CHECK(records.records[0].entries[1].secondary_class == "sB");
}

TEST_CASE("compute_records is independent of thread count") {
  SplitMix64 rng(29);
  std::vector<std::string> ids;
  std::vector<float> data;
  for (int i = 0; i < 40; ++i) {
    ids.push_back("v" + std::to_string(100 + i));
    const auto row = testutil::random_nonneg_vector(27, rng);
    data.insert(data.end(), row.begin(), row.end());
  }
  const VectorStore store = VectorStore::from_vectors(3, ids, data);
  ClassSet set;
  set.target.name = "t";
  for (int i = 0; i < 15; ++i) set.target.ids.push_back(ids[i]);
  ClassSet::Class cls;
  cls.name = "s";
  for (int i = 15; i < 40; ++i) cls.ids.push_back(ids[i]);
  set.secondaries.push_back(cls);

  const RecordSet one = compute_records(set, store, 3, 1);
  const RecordSet many = compute_records(set, store, 3, 7);
  CHECK(one == many);
}

TEST_CASE("compute_records input validation") {
  const VectorStore store = store_from_rows(1, {"a", "b"}, {{1, 0, 0}, {0, 1, 0}});
  ClassSet empty_target;
  empty_target.target = {"t", {}};
  empty_target.secondaries = {{"s", {"b"}}};
  CHECK_THROWS_AS(compute_records(empty_target, store, 1), DataError);

  ClassSet no_secondary;
  no_secondary.target = {"t", {"a"}};
  CHECK_THROWS_AS(compute_records(no_secondary, store, 1), DataError);

  ClassSet ok;
  ok.target = {"t", {"a"}};
  ok.secondaries = {{"s", {"b"}}};
  CHECK_THROWS_AS(compute_records(ok, store, 0), DataError);
}

TEST_CASE("zero-norm images are rejected with their ids listed") {
  const VectorStore store = store_from_rows(
      1, {"good", "dark1", "dark2"},
      {{0.5f, 0.5f, 0.5f}, {0.0f, 0.0f, 0.0f}, {0.0f, 0.0f, 0.0f}});
  ClassSet set;
  set.target = {"t", {"good", "dark1"}};
  set.secondaries = {{"s", {"dark2"}}};
  CHECK_THROWS_WITH_AS(compute_records(set, store, 1),
                       doctest::Contains("dark1"), DataError);
}

TEST_CASE("records csv and json exports") {
  testutil::TempDir tmp("records");
  const VectorStore store = store_from_rows(
      1, {"t1", "s1", "s2"},
      {{0.5f, 0.5f, 0.5f}, {0.5f, 0.5f, 0.5f}, {0.9f, 0.1f, 0.3f}});
  ClassSet set;
  set.target = {"t", {"t1"}};
  set.secondaries = {{"s", {"s1", "s2"}}};
  const RecordSet records = compute_records(set, store, 2);

  write_records_csv(records, tmp.path() / "r.csv");
  const std::string csv = testutil::read_file(tmp.path() / "r.csv");
  CHECK(csv.rfind("target_id,target_class,rank,secondary_id,secondary_class,score\n", 0) == 0);
  CHECK(csv.find("t1,t,1,s1,s,1\n") != std::string::npos);
  // 17 significant digits for the non-trivial score.
  const double s2 = records.records[0].entries[1].score;
  char expected[64];
  std::snprintf(expected, sizeof(expected), "%.17g", s2);
  CHECK(csv.find(expected) != std::string::npos);

  write_records_json(records, tmp.path() / "r.json");
  const RecordSet back = read_records_json(tmp.path() / "r.json");
  CHECK(back == records);
}

TEST_CASE("copies score 1.0, flips of asymmetric patterns score below 1.0") {
  testutil::TempDir tmp("flip");
  // An asymmetric gradient: pixel value depends on x, so mirroring changes it.
  Image img;
  img.width = img.height = 16;
  img.pixels.resize(16 * 16 * 3);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      img.at(x, y, 0) = static_cast<std::uint8_t>(x * 16);
      img.at(x, y, 1) = static_cast<std::uint8_t>(y * 16);
      img.at(x, y, 2) = static_cast<std::uint8_t>(x + y);
    }
  }
  Image flipped = img;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      for (int c = 0; c < 3; ++c) flipped.at(x, y, c) = img.at(15 - x, y, c);
    }
  }

  // The same bytes at two different paths decode to identical vectors.
  write_png(img, tmp.path() / "one.png");
  write_png(img, tmp.path() / "two.png");
  const PixelVector a = vectorize(decode_image(tmp.path() / "one.png"), "one");
  const PixelVector b = vectorize(decode_image(tmp.path() / "two.png"), "two");
  CHECK(similarity_score({a.values.data(), a.values.size()},
                         {b.values.data(), b.values.size()}) == 1.0);

  const PixelVector f = vectorize(flipped, "flip");
  CHECK(similarity_score({a.values.data(), a.values.size()},
                         {f.values.data(), f.values.size()}) < 1.0);
}

TEST_CASE("make_class_set defaults secondaries to all other classes") {
  DatasetManifest manifest;
  manifest.dataset_name = "d";
  for (const std::string name : {"a", "b", "c"}) {
    for (int i = 0; i < 2; ++i) {
      ImageRef ref;
      ref.id = name + std::to_string(i);
      ref.class_name = name;
      ref.path = "unused";
      manifest.classes[name].push_back(ref);
    }
  }
  const ClassSet set = make_class_set(manifest, "b");
  CHECK(set.target.name == "b");
  REQUIRE(set.secondaries.size() == 2);
  CHECK(set.secondaries[0].name == "a");
  CHECK(set.secondaries[1].name == "c");
  CHECK(set.secondary_total() == 4);

  CHECK_THROWS_AS(make_class_set(manifest, "zzz"), DataError);
  CHECK_THROWS_AS(make_class_set(manifest, "a", {"a"}), DataError);
}
