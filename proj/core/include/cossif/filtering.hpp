#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cossif/simkernel.hpp"

namespace cossif {

/// Retention ratio in (0, 1), held as an exact rational num/den with den a
/// divisor of 10^9. Keeping alpha exact makes the ceil/floor count formulas
/// integer arithmetic, so table values never wobble on a rounding boundary
/// (e.g. p * 0.25 computed in binary floating point can land just above an
/// integer).
class Alpha {
 public:
  /// Parses a decimal like "0.80" (at most 9 fractional digits) exactly.
  static Alpha parse(const std::string& text);
  /// Quantizes a double to the nearest 1e-9 decimal. Exact for any alpha
  /// given with <= 9 decimal digits.
  static Alpha from_value(double value);

  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  /// Canonical decimal string, trailing zeros trimmed ("0.8").
  std::string str() const;

  bool operator==(const Alpha&) const = default;

 private:
  Alpha(std::int64_t num, std::int64_t den) : num_(num), den_(den) {}
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// alpha = (100 - pct_removed) / 100 for pct in (0, 100).
Alpha alpha_from_percent(double pct_removed);

/// Retained-image count f = ceil(p * alpha); always in [1, p].
std::int64_t fbgt_count(std::int64_t p, Alpha alpha);

enum class RoundingMode { ceiling, floor };

std::string to_string(RoundingMode mode);
RoundingMode parse_rounding_mode(const std::string& text);

/// Pool size p = f / alpha, rounded per `mode`. Ceiling never under-fills
/// the pool (ceil(p * alpha) >= f); floor reproduces published count tables
/// whose non-integral quotients were rounded down.
std::int64_t fagt_pool_size(std::int64_t f, Alpha alpha, RoundingMode mode);

/// Which end of the ascending-by-i_max record list is removed.
enum class FilterMode { remove_most_similar, remove_most_dissimilar };

std::string to_string(FilterMode mode);
FilterMode parse_filter_mode(const std::string& text);

enum class FilterMethod { fbgt, fagt };

std::string to_string(FilterMethod method);
FilterMethod parse_filter_method(const std::string& text);

struct FilterOutcome {
  std::vector<std::string> kept_ids;     // in RecordSet order
  std::vector<std::string> removed_ids;  // in RecordSet order
  std::int64_t f = 0;                    // == kept_ids.size()
  FilterMethod method = FilterMethod::fbgt;
  FilterMode mode = FilterMode::remove_most_similar;
  std::optional<Alpha> alpha;
  std::string target_class;
};

/// Splits an ascending RecordSet at keep_count. remove_most_similar keeps
/// the keep_count records with the LOWEST i_max (the ascending prefix);
/// remove_most_dissimilar keeps the HIGHEST (the suffix). Throws DataError
/// when keep_count is outside [1, records.size()].
FilterOutcome filter_by_records(const RecordSet& records, std::int64_t keep_count,
                                FilterMode mode);

/// FBGT: target is the real minority class, secondaries the other class(es).
/// Computes records, derives f = ceil(p * alpha), removes the f..p most
/// similar targets. The kept ids form the filtered class for GAN training.
FilterOutcome run_fbgt(const ClassSet& class_set, const VectorStore& vectors,
                       Alpha alpha, int k_limit = 1, int threads = 1);

/// FAGT: target is the synthetic pool, the single secondary is the real
/// class the generator was trained on. Keeps the f synthetics most similar
/// to the real class. Throws DataError when the pool is smaller than f or
/// more than one secondary class is given.
FilterOutcome run_fagt(const ClassSet& class_set, const VectorStore& vectors,
                       std::int64_t f, int k_limit = 1, int threads = 1);

enum class Task { binary, multiclass };
enum class PolicyResult { ok, warning };

/// Removing dissimilar images sharpens a binary boundary but discards
/// distinctive images in the multiclass case, so that combination warns.
PolicyResult policy_check(Task task, FilterMode mode, std::string* message = nullptr);

/// JSON export (kept/removed arrays plus parameters) and the plain-text
/// removed list, one id per line, for piping into file moves.
void write_outcome_json(const FilterOutcome& outcome, const std::filesystem::path& path);
void write_removed_list(const FilterOutcome& outcome, const std::filesystem::path& path);
FilterOutcome read_outcome_json(const std::filesystem::path& path);

}  // namespace cossif
