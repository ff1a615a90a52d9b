#include "cossif/simkernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "cossif/errors.hpp"
#include "cossif/parallel.hpp"

namespace cossif {

namespace {

// One strictly sequential pass over the vector index. Accumulating in
// double keeps ~15 significant digits across 12k-term sums; a float
// accumulator would shed about three.
template <class T>
double dot_sequential(const T* a, const T* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

template <class T>
double cosine_similarity_impl(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw DataError("cosine similarity: dimension mismatch (" +
                    std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
  }
  if (u.empty()) throw DataError("cosine similarity: empty vectors");
  const double uu = dot_sequential(u.data(), u.data(), u.size());
  const double vv = dot_sequential(v.data(), v.data(), v.size());
  if (uu == 0.0 || vv == 0.0) {
    throw DataError("cosine similarity: zero-norm vector");
  }
  const double s = dot_sequential(u.data(), v.data(), u.size()) / std::sqrt(uu * vv);
  return std::clamp(s, -1.0, 1.0);
}

// Scores one target row against `count` secondary rows, eight interleaved
// accumulator chains at a time. Each pair's reduction is still strictly
// sequential over the vector index, so every entry is bit-identical to the
// scalar cosine_similarity on the same rows.
void score_row_block(const float* target, double target_norm_sq,
                     const float* const* secondary_rows, const double* secondary_norms_sq,
                     std::size_t count, std::size_t dim, double* out) {
  constexpr std::size_t kLanes = 8;
  std::size_t j = 0;
  for (; j + kLanes <= count; j += kLanes) {
    double acc[kLanes] = {0, 0, 0, 0, 0, 0, 0, 0};
    const float* rows[kLanes];
    for (std::size_t l = 0; l < kLanes; ++l) rows[l] = secondary_rows[j + l];
    for (std::size_t i = 0; i < dim; ++i) {
      const double t = static_cast<double>(target[i]);
      for (std::size_t l = 0; l < kLanes; ++l) {
        acc[l] += t * static_cast<double>(rows[l][i]);
      }
    }
    for (std::size_t l = 0; l < kLanes; ++l) {
      out[j + l] = std::clamp(
          acc[l] / std::sqrt(target_norm_sq * secondary_norms_sq[j + l]), -1.0, 1.0);
    }
  }
  for (; j < count; ++j) {
    const double acc = dot_sequential(target, secondary_rows[j], dim);
    out[j] = std::clamp(acc / std::sqrt(target_norm_sq * secondary_norms_sq[j]), -1.0, 1.0);
  }
}

}  // namespace

double cosine_similarity(std::span<const float> u, std::span<const float> v) {
  return cosine_similarity_impl(u, v);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  return cosine_similarity_impl(u, v);
}

double cosine_distance(std::span<const float> u, std::span<const float> v) {
  return 1.0 - cosine_similarity(u, v);
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  return 1.0 - cosine_similarity(u, v);
}

std::vector<double> pairwise_scores(std::span<const float> targets,
                                    std::size_t target_count,
                                    std::span<const float> secondaries,
                                    std::size_t secondary_count, std::size_t dim,
                                    int threads) {
  if (dim == 0) throw DataError("pairwise scores: dim must be > 0");
  if (targets.size() != target_count * dim || secondaries.size() != secondary_count * dim) {
    throw DataError("pairwise scores: buffer size does not match count * dim");
  }

  std::vector<double> target_norms(target_count);
  std::vector<double> secondary_norms(secondary_count);
  std::vector<const float*> secondary_rows(secondary_count);
  for (std::size_t i = 0; i < target_count; ++i) {
    const float* row = targets.data() + i * dim;
    target_norms[i] = dot_sequential(row, row, dim);
    if (target_norms[i] == 0.0) {
      throw DataError("pairwise scores: zero-norm target row " + std::to_string(i));
    }
  }
  for (std::size_t j = 0; j < secondary_count; ++j) {
    const float* row = secondaries.data() + j * dim;
    secondary_rows[j] = row;
    secondary_norms[j] = dot_sequential(row, row, dim);
    if (secondary_norms[j] == 0.0) {
      throw DataError("pairwise scores: zero-norm secondary row " + std::to_string(j));
    }
  }

  std::vector<double> scores(target_count * secondary_count);
  parallel_for(target_count, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      score_row_block(targets.data() + i * dim, target_norms[i], secondary_rows.data(),
                      secondary_norms.data(), secondary_count, dim,
                      scores.data() + i * secondary_count);
    }
  });
  return scores;
}

std::size_t ClassSet::secondary_total() const {
  std::size_t n = 0;
  for (const auto& c : secondaries) n += c.ids.size();
  return n;
}

ClassSet make_class_set(const DatasetManifest& manifest, const std::string& target_class,
                        std::vector<std::string> secondary_classes) {
  const auto it = manifest.classes.find(target_class);
  if (it == manifest.classes.end()) {
    throw DataError("target class not in manifest: " + target_class);
  }
  ClassSet set;
  set.target.name = target_class;
  for (const auto& ref : it->second) set.target.ids.push_back(ref.id);

  if (secondary_classes.empty()) {
    for (const auto& [name, refs] : manifest.classes) {
      if (name != target_class) secondary_classes.push_back(name);
    }
  }
  for (const auto& name : secondary_classes) {
    if (name == target_class) {
      throw DataError("target class cannot be its own secondary: " + name);
    }
    const auto sit = manifest.classes.find(name);
    if (sit == manifest.classes.end()) {
      throw DataError("secondary class not in manifest: " + name);
    }
    ClassSet::Class c;
    c.name = name;
    for (const auto& ref : sit->second) c.ids.push_back(ref.id);
    set.secondaries.push_back(std::move(c));
  }
  return set;
}

RecordSet compute_records(const ClassSet& class_set, const VectorStore& vectors,
                          int k_limit, int threads) {
  if (k_limit < 1) throw DataError("compute records: k_limit must be >= 1");
  if (class_set.target.ids.empty()) throw DataError("compute records: empty target class");
  if (class_set.secondaries.empty() || class_set.secondary_total() == 0) {
    throw DataError("compute records: empty secondary set");
  }
  // Target and secondary image sets must be disjoint. Names may coincide
  // (a synthetic pool scored against the real class it was generated from);
  // ids may not, or images would be scored against themselves.
  {
    std::set<std::string> target_ids(class_set.target.ids.begin(),
                                     class_set.target.ids.end());
    for (const auto& c : class_set.secondaries) {
      if (c.ids.empty()) {
        throw DataError("compute records: empty secondary class " + c.name);
      }
      for (const auto& id : c.ids) {
        if (target_ids.count(id)) {
          throw DataError("compute records: image " + id +
                          " is both target and secondary");
        }
      }
    }
  }

  const std::size_t dim = vectors.dim();
  const std::size_t p = class_set.target.ids.size();
  const std::size_t q = class_set.secondary_total();

  // Gather rows up front; ids with no vector or with zero norm surface here,
  // all offenders named at once.
  std::vector<const float*> target_rows(p);
  std::vector<double> target_norms(p);
  std::vector<const float*> secondary_rows;
  std::vector<double> secondary_norms;
  std::vector<const std::string*> secondary_ids;
  std::vector<const std::string*> secondary_class_of;
  secondary_rows.reserve(q);
  secondary_norms.reserve(q);
  secondary_ids.reserve(q);
  secondary_class_of.reserve(q);

  std::vector<std::string> zero_norm_ids;
  for (std::size_t i = 0; i < p; ++i) {
    const auto row = vectors.row(class_set.target.ids[i]);
    target_rows[i] = row.data();
    target_norms[i] = dot_sequential(row.data(), row.data(), dim);
    if (target_norms[i] == 0.0) zero_norm_ids.push_back(class_set.target.ids[i]);
  }
  for (const auto& c : class_set.secondaries) {
    for (const auto& id : c.ids) {
      const auto row = vectors.row(id);
      secondary_rows.push_back(row.data());
      secondary_norms.push_back(dot_sequential(row.data(), row.data(), dim));
      if (secondary_norms.back() == 0.0) zero_norm_ids.push_back(id);
      secondary_ids.push_back(&id);
      secondary_class_of.push_back(&c.name);
    }
  }
  if (!zero_norm_ids.empty()) {
    std::string msg = "zero-norm (all-black) images cannot be scored:";
    for (const auto& id : zero_norm_ids) msg += " " + id;
    throw DataError(msg);
  }

  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_limit), q);

  RecordSet result;
  result.target_class = class_set.target.name;
  for (const auto& c : class_set.secondaries) result.secondary_classes.push_back(c.name);
  result.records.resize(p);

  parallel_for(p, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores(q);
    std::vector<std::size_t> order(q);
    for (std::size_t i = begin; i < end; ++i) {
      score_row_block(target_rows[i], target_norms[i], secondary_rows.data(),
                      secondary_norms.data(), q, dim, scores.data());
      for (std::size_t j = 0; j < q; ++j) order[j] = j;
      const auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        if (*secondary_class_of[a] != *secondary_class_of[b]) {
          return *secondary_class_of[a] < *secondary_class_of[b];
        }
        return *secondary_ids[a] < *secondary_ids[b];
      };
      std::partial_sort(order.begin(), order.begin() + k, order.end(), better);

      Record& record = result.records[i];
      record.target_id = class_set.target.ids[i];
      record.entries.reserve(k);
      for (std::size_t r = 0; r < k; ++r) {
        record.entries.push_back(
            {*secondary_ids[order[r]], *secondary_class_of[order[r]], scores[order[r]]});
      }
      record.i_max = record.entries.front().score;
    }
  });

  std::sort(result.records.begin(), result.records.end(),
            [](const Record& a, const Record& b) {
              if (a.i_max != b.i_max) return a.i_max < b.i_max;
              return a.target_id < b.target_id;
            });
  return result;
}

void write_records_csv(const RecordSet& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write records csv: " + path.string());
  out << "target_id,target_class,rank,secondary_id,secondary_class,score\n";
  char buf[64];
  for (const auto& record : records.records) {
    int rank = 1;
    for (const auto& entry : record.entries) {
      std::snprintf(buf, sizeof(buf), "%.17g", entry.score);
      out << record.target_id << ',' << records.target_class << ',' << rank << ','
          << entry.secondary_id << ',' << entry.secondary_class << ',' << buf << '\n';
      ++rank;
    }
  }
}

void write_records_json(const RecordSet& records, const std::filesystem::path& path) {
  nlohmann::json j;
  j["target_class"] = records.target_class;
  j["secondary_classes"] = records.secondary_classes;
  j["records"] = nlohmann::json::array();
  for (const auto& record : records.records) {
    nlohmann::json r;
    r["target_id"] = record.target_id;
    r["i_max"] = record.i_max;
    r["entries"] = nlohmann::json::array();
    for (const auto& entry : record.entries) {
      r["entries"].push_back({{"secondary_id", entry.secondary_id},
                              {"secondary_class", entry.secondary_class},
                              {"score", entry.score}});
    }
    j["records"].push_back(std::move(r));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write records json: " + path.string());
  out << j.dump(2) << "\n";
}

RecordSet read_records_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read records json: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed records file " + path.string() + ": " + e.what());
  }
  RecordSet records;
  try {
    records.target_class = j.at("target_class").get<std::string>();
    records.secondary_classes = j.at("secondary_classes").get<std::vector<std::string>>();
    for (const auto& r : j.at("records")) {
      Record record;
      record.target_id = r.at("target_id").get<std::string>();
      record.i_max = r.at("i_max").get<double>();
      for (const auto& e : r.at("entries")) {
        record.entries.push_back({e.at("secondary_id").get<std::string>(),
                                  e.at("secondary_class").get<std::string>(),
                                  e.at("score").get<double>()});
      }
      records.records.push_back(std::move(record));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed records file " + path.string() + ": " + e.what());
  }
  return records;
}

}  // namespace cossif
