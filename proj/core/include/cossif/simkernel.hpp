#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cossif/vector_store.hpp"

namespace cossif {

/// Cosine similarity (u . v) / (|u| |v|), computed as
/// dot(u,v) / sqrt(dot(u,u) * dot(v,v)) with every dot product accumulated
/// in double, strictly sequentially over the vector index, then clamped to
/// [-1, 1]. The fixed reduction order makes scores machine-reproducible;
/// the sqrt(x*x) == |x| identity makes self-similarity exactly 1.0.
/// Throws DataError on a dimension mismatch or a zero-norm vector.
double cosine_similarity(std::span<const float> u, std::span<const float> v);
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// 1 - cosine_similarity. In [0, 2] generally, [0, 1] for non-negative input.
double cosine_distance(std::span<const float> u, std::span<const float> v);
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// The similarity score I attached to record entries. Larger means more
/// similar; equal images score exactly 1.0.
inline double similarity_score(std::span<const float> u, std::span<const float> v) {
  return cosine_similarity(u, v);
}

/// Dense score matrix: out[i * secondary_count + j] is the similarity of
/// target row i and secondary row j. Rows are partitioned across threads;
/// every entry equals cosine_similarity on the same rows bit for bit.
/// Throws DataError when any input row has zero norm.
std::vector<double> pairwise_scores(std::span<const float> targets,
                                    std::size_t target_count,
                                    std::span<const float> secondaries,
                                    std::size_t secondary_count,
                                    std::size_t dim, int threads = 1);

/// Target class plus the secondary classes it is scored against.
struct ClassSet {
  struct Class {
    std::string name;
    std::vector<std::string> ids;  // ordered
  };
  Class target;
  std::vector<Class> secondaries;

  std::size_t secondary_total() const;
};

/// Builds a ClassSet from a manifest: `target_class` against
/// `secondary_classes` (all other classes when empty).
ClassSet make_class_set(const DatasetManifest& manifest,
                        const std::string& target_class,
                        std::vector<std::string> secondary_classes = {});

struct SimilarityEntry {
  std::string secondary_id;
  std::string secondary_class;
  double score = 0.0;

  bool operator==(const SimilarityEntry&) const = default;
};

/// Per-target-image record: the k_limit best-scoring secondary images,
/// sorted by (score desc, class asc, id asc). i_max is the top score.
struct Record {
  std::string target_id;
  std::vector<SimilarityEntry> entries;
  double i_max = 0.0;

  bool operator==(const Record&) const = default;
};

/// All records for a target class, sorted by (i_max asc, target_id asc).
/// records.size() always equals the number of target images.
struct RecordSet {
  std::string target_class;
  std::vector<std::string> secondary_classes;
  std::vector<Record> records;

  bool operator==(const RecordSet&) const = default;
};

/// Scores every target image against every secondary image and keeps the
/// k_limit best per target (scores are computed for all pairs; only the top
/// k are recorded). Target and secondary id sets must be disjoint; class
/// names may coincide (a synthetic pool against its real class). Throws
/// DataError for an empty target or secondary side, an id on both sides, a
/// zero-norm vector (offending ids listed), or k_limit < 1.
RecordSet compute_records(const ClassSet& class_set, const VectorStore& vectors,
                          int k_limit = 1, int threads = 1);

/// CSV export: header target_id,target_class,rank,secondary_id,
/// secondary_class,score with rank 1-based and scores at 17 significant
/// digits.
void write_records_csv(const RecordSet& records, const std::filesystem::path& path);

/// JSON export mirroring the RecordSet structure; read_records_json is its
/// exact inverse.
void write_records_json(const RecordSet& records, const std::filesystem::path& path);
RecordSet read_records_json(const std::filesystem::path& path);

}  // namespace cossif
