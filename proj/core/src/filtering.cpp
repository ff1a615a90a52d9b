#include "cossif/filtering.hpp"

#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cossif/errors.hpp"

namespace cossif {

namespace {

constexpr std::int64_t kScale = 1'000'000'000;  // alpha resolution 1e-9

std::int64_t gcd64(std::int64_t a, std::int64_t b) { return std::gcd(a, b); }

}  // namespace

Alpha Alpha::parse(const std::string& text) {
  std::size_t pos = 0;
  std::int64_t whole = 0;
  bool any_digit = false;
  while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
    whole = whole * 10 + (text[pos] - '0');
    if (whole > 1) throw DataError("alpha out of range (0, 1): " + text);
    any_digit = true;
    ++pos;
  }
  std::int64_t frac = 0;
  std::int64_t frac_scale = 1;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (frac_scale == kScale) {
        throw DataError("alpha has more than 9 fractional digits: " + text);
      }
      frac = frac * 10 + (text[pos] - '0');
      frac_scale *= 10;
      any_digit = true;
      ++pos;
    }
  }
  if (!any_digit || pos != text.size()) {
    throw DataError("cannot parse alpha: " + text);
  }
  const std::int64_t num = whole * kScale + frac * (kScale / frac_scale);
  if (num <= 0 || num >= kScale) {
    throw DataError("alpha out of range (0, 1): " + text);
  }
  const std::int64_t g = gcd64(num, kScale);
  return Alpha(num / g, kScale / g);
}

Alpha Alpha::from_value(double value) {
  if (!(value > 0.0) || !(value < 1.0)) {
    throw DataError("alpha out of range (0, 1): " + std::to_string(value));
  }
  const std::int64_t num = std::llround(value * static_cast<double>(kScale));
  if (num <= 0 || num >= kScale) {
    throw DataError("alpha out of range (0, 1): " + std::to_string(value));
  }
  const std::int64_t g = gcd64(num, kScale);
  return Alpha(num / g, kScale / g);
}

std::string Alpha::str() const {
  // den divides 10^9 by construction, so the decimal expansion terminates.
  const std::int64_t scaled = num_ * (kScale / den_);
  std::string digits = std::to_string(scaled);
  digits.insert(0, static_cast<std::size_t>(9) - digits.size() + 1, '0');
  std::string out = digits.substr(0, digits.size() - 9) + "." + digits.substr(digits.size() - 9);
  while (out.back() == '0') out.pop_back();
  if (out.back() == '.') out.push_back('0');
  return out;
}

Alpha alpha_from_percent(double pct_removed) {
  if (!(pct_removed > 0.0) || !(pct_removed < 100.0)) {
    throw DataError("percent removed out of range (0, 100): " + std::to_string(pct_removed));
  }
  return Alpha::from_value((100.0 - pct_removed) / 100.0);
}

std::int64_t fbgt_count(std::int64_t p, Alpha alpha) {
  if (p < 1) throw DataError("fbgt count: p must be >= 1");
  // ceil(p * num / den) in exact integer arithmetic.
  const unsigned __int128 numerator =
      static_cast<unsigned __int128>(p) * static_cast<unsigned __int128>(alpha.num());
  const unsigned __int128 den = static_cast<unsigned __int128>(alpha.den());
  return static_cast<std::int64_t>((numerator + den - 1) / den);
}

std::string to_string(RoundingMode mode) {
  return mode == RoundingMode::ceiling ? "ceiling" : "floor";
}

RoundingMode parse_rounding_mode(const std::string& text) {
  if (text == "ceiling") return RoundingMode::ceiling;
  if (text == "floor") return RoundingMode::floor;
  throw DataError("unknown rounding mode: " + text);
}

std::int64_t fagt_pool_size(std::int64_t f, Alpha alpha, RoundingMode mode) {
  if (f < 1) throw DataError("fagt pool size: f must be >= 1");
  const unsigned __int128 numerator =
      static_cast<unsigned __int128>(f) * static_cast<unsigned __int128>(alpha.den());
  const unsigned __int128 num = static_cast<unsigned __int128>(alpha.num());
  if (mode == RoundingMode::ceiling) {
    return static_cast<std::int64_t>((numerator + num - 1) / num);
  }
  return static_cast<std::int64_t>(numerator / num);
}

std::string to_string(FilterMode mode) {
  return mode == FilterMode::remove_most_similar ? "remove_most_similar"
                                                 : "remove_most_dissimilar";
}

FilterMode parse_filter_mode(const std::string& text) {
  if (text == "remove_most_similar") return FilterMode::remove_most_similar;
  if (text == "remove_most_dissimilar") return FilterMode::remove_most_dissimilar;
  throw DataError("unknown filter mode: " + text);
}

std::string to_string(FilterMethod method) {
  return method == FilterMethod::fbgt ? "fbgt" : "fagt";
}

FilterMethod parse_filter_method(const std::string& text) {
  if (text == "fbgt") return FilterMethod::fbgt;
  if (text == "fagt") return FilterMethod::fagt;
  throw DataError("unknown filter method: " + text);
}

FilterOutcome filter_by_records(const RecordSet& records, std::int64_t keep_count,
                                FilterMode mode) {
  const std::int64_t z = static_cast<std::int64_t>(records.records.size());
  if (keep_count < 1 || keep_count > z) {
    throw DataError("keep count " + std::to_string(keep_count) + " outside [1, " +
                    std::to_string(z) + "]");
  }
  FilterOutcome outcome;
  outcome.f = keep_count;
  outcome.mode = mode;
  outcome.target_class = records.target_class;
  // records are ascending by i_max: the prefix is the least similar, the
  // suffix the most similar.
  if (mode == FilterMode::remove_most_similar) {
    for (std::int64_t i = 0; i < z; ++i) {
      auto& bucket = (i < keep_count) ? outcome.kept_ids : outcome.removed_ids;
      bucket.push_back(records.records[static_cast<std::size_t>(i)].target_id);
    }
  } else {
    for (std::int64_t i = 0; i < z; ++i) {
      auto& bucket = (i < z - keep_count) ? outcome.removed_ids : outcome.kept_ids;
      bucket.push_back(records.records[static_cast<std::size_t>(i)].target_id);
    }
  }
  return outcome;
}

FilterOutcome run_fbgt(const ClassSet& class_set, const VectorStore& vectors, Alpha alpha,
                       int k_limit, int threads) {
  const RecordSet records = compute_records(class_set, vectors, k_limit, threads);
  const std::int64_t p = static_cast<std::int64_t>(records.records.size());
  const std::int64_t f = fbgt_count(p, alpha);
  FilterOutcome outcome = filter_by_records(records, f, FilterMode::remove_most_similar);
  outcome.method = FilterMethod::fbgt;
  outcome.alpha = alpha;
  return outcome;
}

FilterOutcome run_fagt(const ClassSet& class_set, const VectorStore& vectors,
                       std::int64_t f, int k_limit, int threads) {
  if (class_set.secondaries.size() != 1) {
    throw DataError("fagt takes exactly one secondary (real) class");
  }
  const std::int64_t pool = static_cast<std::int64_t>(class_set.target.ids.size());
  if (pool < f) {
    throw DataError("fagt: synthetic pool of " + std::to_string(pool) +
                    " is smaller than f = " + std::to_string(f));
  }
  const RecordSet records = compute_records(class_set, vectors, k_limit, threads);
  FilterOutcome outcome = filter_by_records(records, f, FilterMode::remove_most_dissimilar);
  outcome.method = FilterMethod::fagt;
  return outcome;
}

PolicyResult policy_check(Task task, FilterMode mode, std::string* message) {
  if (task == Task::multiclass && mode == FilterMode::remove_most_dissimilar) {
    if (message) {
      *message =
          "removing dissimilar images in a multiclass task discards images "
          "with distinctive features; removing similar images is recommended";
    }
    return PolicyResult::warning;
  }
  if (message) message->clear();
  return PolicyResult::ok;
}

void write_outcome_json(const FilterOutcome& outcome, const std::filesystem::path& path) {
  nlohmann::json j;
  j["kept_ids"] = outcome.kept_ids;
  j["removed_ids"] = outcome.removed_ids;
  j["f"] = outcome.f;
  j["method"] = to_string(outcome.method);
  j["mode"] = to_string(outcome.mode);
  j["target_class"] = outcome.target_class;
  if (outcome.alpha) {
    j["alpha"] = outcome.alpha->str();
  } else {
    j["alpha"] = nullptr;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write outcome json: " + path.string());
  out << j.dump(2) << "\n";
}

void write_removed_list(const FilterOutcome& outcome, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write removed list: " + path.string());
  for (const auto& id : outcome.removed_ids) out << id << "\n";
}

FilterOutcome read_outcome_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read outcome json: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed outcome file " + path.string() + ": " + e.what());
  }
  FilterOutcome outcome;
  try {
    outcome.kept_ids = j.at("kept_ids").get<std::vector<std::string>>();
    outcome.removed_ids = j.at("removed_ids").get<std::vector<std::string>>();
    outcome.f = j.at("f").get<std::int64_t>();
    outcome.method = parse_filter_method(j.at("method").get<std::string>());
    outcome.mode = parse_filter_mode(j.at("mode").get<std::string>());
    outcome.target_class = j.at("target_class").get<std::string>();
    if (!j.at("alpha").is_null()) {
      outcome.alpha = Alpha::parse(j.at("alpha").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed outcome file " + path.string() + ": " + e.what());
  }
  return outcome;
}

}  // namespace cossif
