#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cossif/augment.hpp"
#include "cossif/errors.hpp"
#include "cossif/filtering.hpp"
#include "cossif/image.hpp"
#include "cossif/manifest.hpp"
#include "cossif/metrics.hpp"
#include "cossif/parallel.hpp"
#include "cossif/rng.hpp"
#include "cossif/simkernel.hpp"
#include "cossif/split.hpp"
#include "cossif/vector_store.hpp"

namespace fs = std::filesystem;
using namespace cossif;

namespace {

/// A flag/argument problem CLI11 cannot catch itself (e.g. a flag whose
/// requiredness depends on the config file). Maps to exit code 1.
struct UsageError {
  std::string message;
};

// ---------------------------------------------------------------------------
// configuration file + run log plumbing

struct Config {
  nlohmann::json data = nlohmann::json::object();

  bool has(const std::string& key) const { return data.contains(key); }

  template <class T>
  T get_or(const std::string& key, T fallback) const {
    if (!data.contains(key)) return fallback;
    try {
      return data.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("config key " + key + ": " + e.what());
    }
  }
};

Config load_config(const std::string& path) {
  Config config;
  if (path.empty()) return config;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read config: " + path);
  try {
    in >> config.data;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed config " + path + ": " + e.what());
  }
  if (!config.data.is_object()) throw DataError("config must be a JSON object");
  return config;
}

std::string digest_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::uint64_t h = 0xCBF29CE484222325ull;
  char buffer[1 << 16];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buffer[i]);
      h *= 0x100000001B3ull;
    }
  }
  char hex[20];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

// One line per stage, appended to run.log next to the artifact. Only content
// digests and value parameters are recorded (no paths, no timings), so
// reruns into fresh output directories stay byte-identical; the duration is
// echoed to stderr instead.
class RunLog {
 public:
  RunLog(std::string stage, const fs::path& artifact_dir)
      : stage_(std::move(stage)),
        log_path_(artifact_dir / "run.log"),
        started_(std::chrono::steady_clock::now()) {}

  void input(const fs::path& path) { inputs_.push_back(digest_file(path)); }
  void param(const std::string& key, const std::string& value) {
    params_.emplace_back(key, value);
  }
  void param(const std::string& key, std::int64_t value) {
    params_.emplace_back(key, std::to_string(value));
  }

  void commit() {
    std::string line = "stage=" + stage_;
    if (!inputs_.empty()) {
      line += " inputs=";
      for (std::size_t i = 0; i < inputs_.size(); ++i) {
        if (i) line += ",";
        line += inputs_[i];
      }
    }
    for (const auto& [k, v] : params_) line += " " + k + "=" + v;
    fs::create_directories(log_path_.parent_path());
    std::ofstream out(log_path_, std::ios::binary | std::ios::app);
    out << line << "\n";

    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started_)
                             .count();
    std::cerr << line << " duration_ms=" << elapsed << "\n";
  }

 private:
  std::string stage_;
  fs::path log_path_;
  std::chrono::steady_clock::time_point started_;
  std::vector<std::string> inputs_;
  std::vector<std::pair<std::string, std::string>> params_;
};

void require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw DataError("missing artifact: " + path.string() + " (produce it with `cossif " +
                    producer + "`)");
  }
}

std::vector<Alpha> parse_alphas(const std::vector<std::string>& flags, const Config& config) {
  std::vector<Alpha> alphas;
  for (const auto& text : flags) alphas.push_back(Alpha::parse(text));
  if (!alphas.empty()) return alphas;
  if (config.has("alpha")) {
    const auto& j = config.data.at("alpha");
    const auto one = [](const nlohmann::json& v) {
      return v.is_string() ? Alpha::parse(v.get<std::string>())
                           : Alpha::from_value(v.get<double>());
    };
    if (j.is_array()) {
      for (const auto& v : j) alphas.push_back(one(v));
    } else {
      alphas.push_back(one(j));
    }
  }
  return alphas;
}

DatasetManifest read_manifest_artifact(const std::string& path, const std::string& producer) {
  require_artifact(path, producer);
  return read_manifest(path);
}

DatasetManifest merge_manifests(const std::vector<DatasetManifest>& manifests) {
  DatasetManifest merged;
  if (manifests.empty()) return merged;
  merged = manifests.front();
  for (std::size_t i = 1; i < manifests.size(); ++i) {
    if (manifests[i].side != merged.side) {
      throw DataError("manifest side mismatch: " + std::to_string(manifests[i].side) +
                      " vs " + std::to_string(merged.side));
    }
    for (const auto& [name, refs] : manifests[i].classes) {
      auto& bucket = merged.classes[name];
      bucket.insert(bucket.end(), refs.begin(), refs.end());
    }
    merged.dataset_name += "+" + manifests[i].dataset_name;
  }
  merged.normalize();
  return merged;
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& flag, const Config& config,
                           const std::string& stage) {
  if (flag) return *flag;
  if (config.has("seed")) return config.get_or<std::uint64_t>("seed", 0);
  throw UsageError{"--seed is required for " + stage};
}

// ---------------------------------------------------------------------------
// subcommands

struct GlobalOpts {
  std::string config_path;
  int threads = 1;
  Config config;

  int effective_threads() const {
    return threads != 1 ? threads : config.get_or<int>("threads", 1);
  }
};

int cmd_ingest(const GlobalOpts& global, const std::string& root,
               const std::string& layout_name, std::string name,
               const std::string& origin_name, int side_flag, const std::string& out) {
  const Layout layout =
      layout_name == "csv-index" ? Layout::csv_index : Layout::class_subdirs;
  const int side = side_flag > 0 ? side_flag : global.config.get_or<int>("side", 64);
  const Origin origin = parse_origin(origin_name);

  RunLog log("ingest", fs::path(out).parent_path());
  const LoadReport report =
      load_dataset(root, layout, name, origin, side, global.effective_threads());
  write_manifest(report.manifest, out);

  for (const auto& failure : report.failures) {
    std::cerr << "failed: " << failure.path.string() << ": " << failure.reason << "\n";
  }
  std::cout << "manifest: " << out << " (" << report.manifest.classes.size()
            << " classes, " << report.manifest.total_count() << " images, "
            << report.failures.size() << " failures)\n";

  log.param("layout", layout_name);
  log.param("origin", origin_name);
  log.param("side", side);
  log.param("classes", static_cast<std::int64_t>(report.manifest.classes.size()));
  log.param("images", static_cast<std::int64_t>(report.manifest.total_count()));
  log.param("failures", static_cast<std::int64_t>(report.failures.size()));
  log.commit();
  return 0;
}

int cmd_vectorize(const GlobalOpts& global, const std::string& manifest_path,
                  int side_flag, const std::string& out) {
  const DatasetManifest manifest = read_manifest_artifact(manifest_path, "ingest");
  const int side = side_flag > 0 ? side_flag : manifest.side;

  RunLog log("vectorize", fs::path(out).parent_path());
  log.input(manifest_path);
  const VectorStore store = VectorStore::build(manifest, side, global.effective_threads());
  store.save(out);
  std::cout << "vectors: " << out << " (" << store.count() << " x " << store.dim()
            << ")\n";
  log.param("side", side);
  log.param("count", static_cast<std::int64_t>(store.count()));
  log.commit();
  return 0;
}

int cmd_records(const GlobalOpts& global, const std::vector<std::string>& manifest_paths,
                const std::string& target_manifest_path,
                const std::string& secondary_manifest_path,
                const std::vector<std::string>& vector_paths, const std::string& target,
                const std::vector<std::string>& secondaries, int k_flag,
                const std::string& out, const std::string& csv_out) {
  const int k_limit = k_flag > 0 ? k_flag : global.config.get_or<int>("k_limit", 1);
  const bool paired = !target_manifest_path.empty();
  if (paired && secondary_manifest_path.empty()) {
    throw DataError("--target-manifest requires --secondary-manifest");
  }
  if (paired && !manifest_paths.empty()) {
    throw DataError("use either --manifest or the --target-manifest pair, not both");
  }

  std::vector<std::string> effective_paths = manifest_paths;
  if (paired) effective_paths = {target_manifest_path, secondary_manifest_path};
  if (effective_paths.empty()) {
    throw DataError("records needs --manifest or --target-manifest/--secondary-manifest");
  }
  if (effective_paths.size() != vector_paths.size()) {
    throw DataError("need one --vectors per manifest, in the same order");
  }

  std::vector<DatasetManifest> manifests;
  VectorStore store;
  RunLog log("records", fs::path(out).parent_path());
  for (std::size_t i = 0; i < effective_paths.size(); ++i) {
    manifests.push_back(read_manifest_artifact(effective_paths[i], "ingest"));
    require_artifact(vector_paths[i], "vectorize");
    store.merge(VectorStore::load(vector_paths[i], manifests.back()));
    log.input(effective_paths[i]);
    log.input(vector_paths[i]);
  }

  ClassSet set;
  if (paired) {
    // Target ids from the first manifest, secondary ids from the second;
    // the class names may coincide (synthetic pool vs the real class).
    const auto t_it = manifests[0].classes.find(target);
    if (t_it == manifests[0].classes.end()) {
      throw DataError("target class not in target manifest: " + target);
    }
    set.target.name = target;
    for (const auto& ref : t_it->second) set.target.ids.push_back(ref.id);
    std::vector<std::string> secondary_names = secondaries;
    if (secondary_names.empty()) {
      for (const auto& [name, refs] : manifests[1].classes) {
        secondary_names.push_back(name);
      }
    }
    for (const auto& name : secondary_names) {
      const auto s_it = manifests[1].classes.find(name);
      if (s_it == manifests[1].classes.end()) {
        throw DataError("secondary class not in secondary manifest: " + name);
      }
      ClassSet::Class c;
      c.name = name;
      for (const auto& ref : s_it->second) c.ids.push_back(ref.id);
      set.secondaries.push_back(std::move(c));
    }
  } else {
    const DatasetManifest merged = merge_manifests(manifests);
    set = make_class_set(merged, target, secondaries);
  }

  const RecordSet records = compute_records(set, store, k_limit, global.effective_threads());
  write_records_json(records, out);
  if (!csv_out.empty()) write_records_csv(records, csv_out);
  std::cout << "records: " << out << " (" << records.records.size() << " targets x "
            << set.secondary_total() << " secondaries, k=" << k_limit << ")\n";

  log.param("target", target);
  std::string secondary_names;
  for (const auto& c : set.secondaries) {
    if (!secondary_names.empty()) secondary_names += "+";
    secondary_names += c.name;
  }
  log.param("secondaries", secondary_names);
  log.param("k_limit", k_limit);
  log.commit();
  return 0;
}

std::string alpha_suffix(const Alpha& alpha) { return "_a" + alpha.str(); }

DatasetManifest filtered_manifest(const DatasetManifest& source,
                                  const FilterOutcome& outcome) {
  const auto it = source.classes.find(outcome.target_class);
  if (it == source.classes.end()) {
    throw DataError("class " + outcome.target_class + " not in --apply manifest");
  }
  DatasetManifest filtered;
  filtered.dataset_name = source.dataset_name + "-filtered";
  filtered.side = source.side;
  filtered.created_from = "filter";
  const std::set<std::string> kept(outcome.kept_ids.begin(), outcome.kept_ids.end());
  for (const auto& ref : it->second) {
    if (kept.count(ref.id)) filtered.classes[outcome.target_class].push_back(ref);
  }
  if (filtered.classes[outcome.target_class].size() != kept.size()) {
    throw DataError("--apply manifest does not cover every kept id of class " +
                    outcome.target_class);
  }
  return filtered;
}

int cmd_filter(const GlobalOpts& global, const std::string& records_path,
               std::string method_name, const std::vector<std::string>& alpha_flags,
               std::int64_t keep, std::string mode_name, std::string task_name,
               const std::string& out_dir, const std::string& apply_manifest) {
  require_artifact(records_path, "records");
  const RecordSet records = read_records_json(records_path);
  const std::int64_t pool = static_cast<std::int64_t>(records.records.size());

  if (method_name.empty()) method_name = global.config.get_or<std::string>("method", "fbgt");
  const FilterMethod method = parse_filter_method(method_name);

  FilterMode mode = method == FilterMethod::fbgt ? FilterMode::remove_most_similar
                                                 : FilterMode::remove_most_dissimilar;
  if (mode_name.empty()) mode_name = global.config.get_or<std::string>("mode", "");
  if (!mode_name.empty()) mode = parse_filter_mode(mode_name);

  if (task_name.empty()) {
    task_name = global.config.get_or<std::string>(
        "task", records.secondary_classes.size() > 1 ? "multiclass" : "binary");
  }
  const Task task = task_name == "multiclass" ? Task::multiclass : Task::binary;
  std::string warning;
  if (policy_check(task, mode, &warning) == PolicyResult::warning) {
    std::cerr << "warning: " << warning << "\n";
  }

  fs::create_directories(out_dir);
  RunLog log("filter", out_dir);
  log.input(records_path);
  log.param("method", to_string(method));
  log.param("mode", to_string(mode));
  log.param("task", task_name);

  std::optional<DatasetManifest> apply;
  if (!apply_manifest.empty()) apply = read_manifest_artifact(apply_manifest, "ingest");

  std::vector<FilterOutcome> outcomes;
  if (method == FilterMethod::fbgt) {
    const std::vector<Alpha> alphas = parse_alphas(alpha_flags, global.config);
    if (alphas.empty()) throw DataError("fbgt needs at least one --alpha");
    for (const Alpha& alpha : alphas) {
      FilterOutcome outcome =
          filter_by_records(records, fbgt_count(pool, alpha), mode);
      outcome.method = FilterMethod::fbgt;
      outcome.alpha = alpha;
      outcomes.push_back(std::move(outcome));
      log.param("alpha", alpha.str());
    }
  } else {
    if (keep <= 0) keep = global.config.get_or<std::int64_t>("keep", 0);
    if (keep <= 0) throw DataError("fagt needs --keep (the number of images to retain)");
    if (keep > pool) {
      throw DataError("fagt: pool of " + std::to_string(pool) +
                      " is smaller than keep = " + std::to_string(keep));
    }
    FilterOutcome outcome = filter_by_records(records, keep, mode);
    outcome.method = FilterMethod::fagt;
    outcomes.push_back(std::move(outcome));
    log.param("keep", keep);
  }

  for (const FilterOutcome& outcome : outcomes) {
    const std::string suffix =
        to_string(outcome.method) + (outcome.alpha ? alpha_suffix(*outcome.alpha) : "");
    write_outcome_json(outcome, fs::path(out_dir) / ("outcome_" + suffix + ".json"));
    write_removed_list(outcome, fs::path(out_dir) / ("removed_" + suffix + ".txt"));
    if (apply) {
      write_manifest(filtered_manifest(*apply, outcome),
                     fs::path(out_dir) /
                         ("filtered_" + outcome.target_class + "_" + suffix + ".json"));
    }
    std::cout << "filter " << suffix << ": kept " << outcome.kept_ids.size()
              << ", removed " << outcome.removed_ids.size() << "\n";
  }
  log.commit();
  return 0;
}

int cmd_plan(const GlobalOpts& global, const std::string& manifest_path,
             std::int64_t target_total, const std::vector<std::string>& transformed_flags,
             const std::vector<std::string>& class_filter,
             const std::vector<std::string>& alpha_flags, std::string rounding_name,
             const std::string& out) {
  const DatasetManifest manifest = read_manifest_artifact(manifest_path, "ingest");
  if (target_total <= 0) target_total = global.config.get_or<std::int64_t>("target_total", 0);
  if (target_total <= 0) throw DataError("--target-total is required");

  std::map<std::string, std::int64_t> transformed;
  for (const auto& entry : transformed_flags) {
    const auto eq = entry.find('=');
    try {
      if (eq == std::string::npos) throw std::invalid_argument(entry);
      transformed[entry.substr(0, eq)] = std::stoll(entry.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError{"--transformed expects class=count, got " + entry};
    }
  }
  if (transformed.empty() && global.config.has("transformed")) {
    for (const auto& [name, count] :
         global.config.data.at("transformed").items()) {
      transformed[name] = count.get<std::int64_t>();
    }
  }

  const std::vector<Alpha> alphas = parse_alphas(alpha_flags, global.config);
  if (alphas.size() > 1) throw DataError("plan takes at most one --alpha");
  if (rounding_name.empty()) {
    rounding_name = global.config.get_or<std::string>("rounding", "ceiling");
  }
  const RoundingMode rounding = parse_rounding_mode(rounding_name);

  const std::set<std::string> only(class_filter.begin(), class_filter.end());

  RunLog log("plan", fs::path(out).parent_path());
  log.input(manifest_path);
  log.param("target_total", target_total);
  log.param("rounding", rounding_name);
  if (!alphas.empty()) log.param("alpha", alphas[0].str());

  std::vector<ClassPlan> plans;
  for (const auto& [name, refs] : manifest.classes) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t_it = transformed.find(name);
    const std::int64_t t = t_it == transformed.end() ? 0 : t_it->second;
    ClassPlan plan;
    plan.quota = plan_class(name, target_total, static_cast<std::int64_t>(refs.size()), t);
    if (plan.quota.synthetic_needed > 0 && !alphas.empty()) {
      plan.pool_alpha = alphas[0];
      plan.pool_rounding = rounding;
      plan.pool_size = fagt_pool_size(plan.quota.synthetic_needed, alphas[0], rounding);
    }
    std::cout << "plan " << name << ": total " << plan.quota.target_total << " = "
              << plan.quota.real_count << " real + " << plan.quota.transformed_count
              << " transformed + " << plan.quota.synthetic_needed << " synthetic";
    if (plan.pool_size) {
      std::cout << " (pool " << *plan.pool_size << " at alpha " << plan.pool_alpha->str()
                << ", " << rounding_name << ")";
    }
    std::cout << "\n";
    plans.push_back(std::move(plan));
  }
  write_plans_json(plans, out);
  log.param("classes", static_cast<std::int64_t>(plans.size()));
  log.commit();
  return 0;
}

TransformSpec transform_spec_from(const GlobalOpts& global,
                                  const std::vector<double>& rotation,
                                  const std::vector<double>& shift,
                                  const std::vector<double>& zoom, bool no_hflip,
                                  bool no_vflip, int side_flag, std::uint64_t seed) {
  TransformSpec spec;
  const auto& config = global.config;
  if (config.has("transform")) {
    const auto& t = config.data.at("transform");
    const auto range = [&](const char* key, double& lo, double& hi) {
      if (t.contains(key)) {
        lo = t.at(key).at(0).get<double>();
        hi = t.at(key).at(1).get<double>();
      }
    };
    range("rotation", spec.rotation_min, spec.rotation_max);
    range("shift", spec.shift_min, spec.shift_max);
    range("zoom", spec.zoom_min, spec.zoom_max);
    if (t.contains("hflip")) spec.allow_hflip = t.at("hflip").get<bool>();
    if (t.contains("vflip")) spec.allow_vflip = t.at("vflip").get<bool>();
    if (t.contains("side")) spec.side = t.at("side").get<int>();
  }
  if (rotation.size() == 2) {
    spec.rotation_min = rotation[0];
    spec.rotation_max = rotation[1];
  }
  if (shift.size() == 2) {
    spec.shift_min = shift[0];
    spec.shift_max = shift[1];
  }
  if (zoom.size() == 2) {
    spec.zoom_min = zoom[0];
    spec.zoom_max = zoom[1];
  }
  if (no_hflip) spec.allow_hflip = false;
  if (no_vflip) spec.allow_vflip = false;
  if (side_flag > 0) spec.side = side_flag;
  spec.seed = seed;
  return spec;
}

int cmd_transform(const GlobalOpts& global, const std::string& manifest_path,
                  const std::string& plan_path, const std::string& class_name,
                  std::int64_t count, const std::optional<std::uint64_t>& seed_flag,
                  const std::vector<double>& rotation, const std::vector<double>& shift,
                  const std::vector<double>& zoom, bool no_hflip, bool no_vflip,
                  int side_flag, const std::string& out_dir) {
  const DatasetManifest manifest = read_manifest_artifact(manifest_path, "ingest");
  const std::uint64_t seed = require_seed(seed_flag, global.config, "transform");
  const TransformSpec spec = transform_spec_from(global, rotation, shift, zoom, no_hflip,
                                                 no_vflip, side_flag, seed);

  std::map<std::string, std::int64_t> counts;
  if (!class_name.empty()) {
    if (count < 0) throw DataError("--count is required with --class");
    counts[class_name] = count;
  } else {
    require_artifact(plan_path, "plan");
    for (const ClassPlan& plan : read_plans_json(plan_path)) {
      if (plan.quota.transformed_count > 0) {
        counts[plan.quota.class_name] = plan.quota.transformed_count;
      }
    }
  }

  fs::create_directories(out_dir);
  RunLog log("transform", out_dir);
  log.input(manifest_path);
  if (class_name.empty()) log.input(plan_path);
  log.param("seed", static_cast<std::int64_t>(seed));
  log.param("side", spec.side);
  char ranges[160];
  std::snprintf(ranges, sizeof(ranges), "rot[%g,%g]_shift[%g,%g]_zoom[%g,%g]_h%d_v%d",
                spec.rotation_min, spec.rotation_max, spec.shift_min, spec.shift_max,
                spec.zoom_min, spec.zoom_max, spec.allow_hflip ? 1 : 0,
                spec.allow_vflip ? 1 : 0);
  log.param("spec", ranges);

  DatasetManifest transformed;
  transformed.dataset_name = manifest.dataset_name + "-transformed";
  transformed.side = manifest.side;
  transformed.created_from = "transform";
  std::int64_t total = 0;
  for (const auto& [name, n] : counts) {
    const auto it = manifest.classes.find(name);
    if (it == manifest.classes.end()) {
      throw DataError("class " + name + " not in manifest");
    }
    const auto refs = oversample_transform(it->second, n, spec, fs::path(out_dir) / name,
                                           global.effective_threads());
    for (const auto& ref : refs) transformed.classes[name].push_back(ref);
    total += n;
  }
  transformed.normalize();
  write_manifest(transformed, fs::path(out_dir) / "transformed_manifest.json");
  std::cout << "transformed " << total << " images into " << out_dir << "\n";
  log.param("images", total);
  log.commit();
  return 0;
}

int cmd_compose(const GlobalOpts& global, const std::string& real_path,
                const std::string& transformed_path,
                const std::vector<std::string>& synthetic_paths,
                const std::string& plan_path, const std::string& name,
                const std::string& out, const std::string& report_csv) {
  (void)global;
  const DatasetManifest real = read_manifest_artifact(real_path, "ingest");
  DatasetManifest transformed;
  if (!transformed_path.empty()) {
    transformed = read_manifest_artifact(transformed_path, "transform");
  }
  DatasetManifest synthetic;
  if (!synthetic_paths.empty()) {
    std::vector<DatasetManifest> parts;
    for (const auto& path : synthetic_paths) {
      parts.push_back(read_manifest_artifact(path, "filter"));
    }
    synthetic = merge_manifests(parts);
  }
  require_artifact(plan_path, "plan");
  std::vector<AugmentationPlan> plans;
  for (const ClassPlan& plan : read_plans_json(plan_path)) plans.push_back(plan.quota);

  RunLog log("compose", fs::path(out).parent_path());
  log.input(real_path);
  if (!transformed_path.empty()) log.input(transformed_path);
  for (const auto& path : synthetic_paths) log.input(path);
  log.input(plan_path);

  const DatasetManifest composed =
      compose_final(real, transformed, synthetic, plans, name);
  write_manifest(composed, out);
  if (!report_csv.empty()) write_composition_csv(composed, report_csv);
  std::cout << "composed: " << out << " (" << composed.total_count() << " images in "
            << composed.classes.size() << " classes)\n";
  log.param("classes", static_cast<std::int64_t>(composed.classes.size()));
  log.param("images", static_cast<std::int64_t>(composed.total_count()));
  log.commit();
  return 0;
}

int cmd_split(const GlobalOpts& global, const std::string& manifest_path,
              double fraction_flag, const std::optional<std::uint64_t>& seed_flag,
              const std::string& group_field, const std::string& out_dir) {
  const DatasetManifest manifest = read_manifest_artifact(manifest_path, "ingest");
  SplitSpec spec;
  spec.test_fraction = fraction_flag > 0.0
                           ? fraction_flag
                           : global.config.get_or<double>("test_fraction", 0.2);
  spec.seed = require_seed(seed_flag, global.config, "split");
  std::string group = group_field;
  if (group.empty()) group = global.config.get_or<std::string>("group_field", "");
  if (!group.empty()) spec.group_field = group;

  fs::create_directories(out_dir);
  RunLog log("split", out_dir);
  log.input(manifest_path);
  log.param("test_fraction", std::to_string(spec.test_fraction));
  log.param("seed", static_cast<std::int64_t>(spec.seed));
  log.param("group_field", group.empty() ? "-" : group);

  const SplitResult result = split(manifest, spec);
  for (const auto& warning : result.warnings) std::cerr << "warning: " << warning << "\n";
  write_split_files(result, fs::path(out_dir) / "train_ids.txt",
                    fs::path(out_dir) / "test_ids.txt",
                    fs::path(out_dir) / "split_counts.csv");
  std::cout << "split: " << result.train_ids.size() << " train / "
            << result.test_ids.size() << " test\n";
  log.param("train", static_cast<std::int64_t>(result.train_ids.size()));
  log.param("test", static_cast<std::int64_t>(result.test_ids.size()));
  log.commit();
  return 0;
}

int cmd_eval(const GlobalOpts& global, const std::string& predictions_path,
             const std::string& out, bool allow_zero_support) {
  (void)global;
  require_artifact(predictions_path, "eval (needs a prediction csv)");
  RunLog log("eval", fs::path(out).parent_path());
  log.input(predictions_path);

  const auto rows = read_predictions_csv(predictions_path);
  const MetricReport report = evaluate(rows, allow_zero_support);
  write_report_json(report, out);
  std::cout << format_report_table(report);
  log.param("rows", static_cast<std::int64_t>(rows.size()));
  log.commit();
  return 0;
}

int cmd_report(const GlobalOpts& global, const std::vector<std::string>& records_paths,
               const std::string& composed_path, const std::string& out_dir) {
  (void)global;
  fs::create_directories(out_dir);
  RunLog log("report", out_dir);

  for (const auto& path : records_paths) {
    require_artifact(path, "records");
    log.input(path);
    const RecordSet records = read_records_json(path);
    // 100 equal-width bins over [0, 1]; i_max == 1.0 lands in the last bin.
    std::vector<std::int64_t> bins(100, 0);
    for (const auto& record : records.records) {
      int bin = static_cast<int>(record.i_max * 100.0);
      bin = std::min(std::max(bin, 0), 99);
      ++bins[static_cast<std::size_t>(bin)];
    }
    const fs::path csv_path =
        fs::path(out_dir) / ("hist_" + records.target_class + ".csv");
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + csv_path.string());
    out << "class,bin,bin_low,bin_high,count\n";
    for (int i = 0; i < 100; ++i) {
      char lo[16], hi[16];
      std::snprintf(lo, sizeof(lo), "%.2f", i / 100.0);
      std::snprintf(hi, sizeof(hi), "%.2f", (i + 1) / 100.0);
      out << records.target_class << ',' << i << ',' << lo << ',' << hi << ','
          << bins[static_cast<std::size_t>(i)] << "\n";
    }
    std::cout << "histogram: " << csv_path.string() << "\n";
  }

  if (!composed_path.empty()) {
    require_artifact(composed_path, "compose");
    log.input(composed_path);
    const DatasetManifest composed = read_manifest(composed_path);
    write_composition_csv(composed, fs::path(out_dir) / "composition.csv");
    std::cout << "composition: " << (fs::path(out_dir) / "composition.csv").string()
              << "\n";
  }
  log.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cossif: cosine-similarity record building and dataset filtering"};
  app.require_subcommand(1);

  GlobalOpts global;
  app.add_option("--config", global.config_path, "JSON configuration file");
  app.add_option("--threads", global.threads, "worker threads (0 = all hardware threads)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "enumerate a dataset into a manifest");
  std::string in_root, in_layout = "class-subdirs", in_name, in_origin = "real", in_out;
  int in_side = 0;
  ingest->add_option("--root", in_root, "dataset root")->required();
  ingest->add_option("--layout", in_layout)
      ->check(CLI::IsMember({"class-subdirs", "csv-index"}));
  ingest->add_option("--name", in_name, "dataset name (default: root directory name)");
  ingest->add_option("--origin", in_origin)
      ->check(CLI::IsMember({"real", "transformed", "synthetic"}));
  ingest->add_option("--side", in_side, "vector side recorded in the manifest");
  ingest->add_option("--out", in_out, "output manifest path")->required();

  // vectorize
  auto* vectorize_cmd = app.add_subcommand("vectorize", "decode, rescale and flatten images");
  std::string vec_manifest, vec_out;
  int vec_side = 0;
  vectorize_cmd->add_option("--manifest", vec_manifest)->required();
  vectorize_cmd->add_option("--side", vec_side, "override the manifest side");
  vectorize_cmd->add_option("--out", vec_out, "output vector cache (CSIF)")->required();

  // records
  auto* records_cmd = app.add_subcommand("records", "build sorted similarity records");
  std::vector<std::string> rec_manifests, rec_vectors, rec_secondaries;
  std::string rec_target_manifest, rec_secondary_manifest;
  std::string rec_target, rec_out, rec_csv;
  int rec_k = 0;
  records_cmd->add_option("--manifest", rec_manifests,
                          "manifest(s); target and secondaries share them");
  records_cmd->add_option("--target-manifest", rec_target_manifest,
                          "manifest holding the target pool (e.g. synthetics)");
  records_cmd->add_option("--secondary-manifest", rec_secondary_manifest,
                          "manifest holding the secondary class(es)");
  records_cmd->add_option("--vectors", rec_vectors, "one CSIF cache per manifest")
      ->required();
  records_cmd->add_option("--target", rec_target, "target class")->required();
  records_cmd->add_option("--secondary", rec_secondaries,
                          "secondary classes (default: all other classes)");
  records_cmd->add_option("--k-limit", rec_k, "entries kept per record (default 1)");
  records_cmd->add_option("--out", rec_out)->required();
  records_cmd->add_option("--csv", rec_csv, "also export csv");

  // filter
  auto* filter_cmd = app.add_subcommand("filter", "apply fbgt/fagt to a record set");
  std::string fil_records, fil_method, fil_mode, fil_task, fil_out_dir, fil_apply;
  std::vector<std::string> fil_alphas;
  std::int64_t fil_keep = 0;
  filter_cmd->add_option("--records", fil_records)->required();
  filter_cmd->add_option("--method", fil_method)->check(CLI::IsMember({"fbgt", "fagt"}));
  filter_cmd->add_option("--alpha", fil_alphas, "retention ratio(s) in (0,1)");
  filter_cmd->add_option("--keep", fil_keep, "images to keep (fagt)");
  filter_cmd->add_option("--mode", fil_mode)
      ->check(CLI::IsMember({"remove_most_similar", "remove_most_dissimilar"}));
  filter_cmd->add_option("--task", fil_task)->check(CLI::IsMember({"binary", "multiclass"}));
  filter_cmd->add_option("--out-dir", fil_out_dir)->required();
  filter_cmd->add_option("--apply", fil_apply,
                         "manifest to filter; writes filtered_<class>_... manifests");

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "per-class augmentation quotas");
  std::string plan_manifest, plan_rounding, plan_out;
  std::int64_t plan_total = 0;
  std::vector<std::string> plan_transformed, plan_classes, plan_alphas;
  plan_cmd->add_option("--manifest", plan_manifest)->required();
  plan_cmd->add_option("--target-total", plan_total, "per-class final size N");
  plan_cmd->add_option("--transformed", plan_transformed, "class=count pairs");
  plan_cmd->add_option("--class", plan_classes, "restrict planning to these classes");
  plan_cmd->add_option("--alpha", plan_alphas, "retention ratio for the pool size");
  plan_cmd->add_option("--rounding", plan_rounding)
      ->check(CLI::IsMember({"ceiling", "floor"}));
  plan_cmd->add_option("--out", plan_out)->required();

  // transform
  auto* transform_cmd = app.add_subcommand("transform", "deterministic oversampling");
  std::string tr_manifest, tr_plan, tr_class, tr_out_dir;
  std::int64_t tr_count = -1;
  std::optional<std::uint64_t> tr_seed;
  std::vector<double> tr_rotation, tr_shift, tr_zoom;
  bool tr_no_hflip = false, tr_no_vflip = false;
  int tr_side = 0;
  transform_cmd->add_option("--manifest", tr_manifest)->required();
  transform_cmd->add_option("--plan", tr_plan, "plan.json driving per-class counts");
  transform_cmd->add_option("--class", tr_class, "single class to oversample");
  transform_cmd->add_option("--count", tr_count, "outputs for --class");
  transform_cmd->add_option("--seed", tr_seed, "64-bit seed (required)");
  transform_cmd->add_option("--rotation", tr_rotation, "degrees: lo hi")->expected(2);
  transform_cmd->add_option("--shift", tr_shift, "fraction per axis: lo hi")->expected(2);
  transform_cmd->add_option("--zoom", tr_zoom, "scale: lo hi")->expected(2);
  transform_cmd->add_flag("--no-hflip", tr_no_hflip);
  transform_cmd->add_flag("--no-vflip", tr_no_vflip);
  transform_cmd->add_option("--transform-side", tr_side, "output resolution (default 256)");
  transform_cmd->add_option("--out-dir", tr_out_dir)->required();

  // compose
  auto* compose_cmd = app.add_subcommand("compose", "merge real + transformed + synthetic");
  std::string co_real, co_transformed, co_plan, co_name = "composed", co_out, co_report;
  std::vector<std::string> co_synthetic;
  compose_cmd->add_option("--real", co_real)->required();
  compose_cmd->add_option("--transformed", co_transformed);
  compose_cmd->add_option("--synthetic", co_synthetic, "synthetic manifest(s)");
  compose_cmd->add_option("--plan", co_plan)->required();
  compose_cmd->add_option("--name", co_name, "dataset name of the result");
  compose_cmd->add_option("--out", co_out)->required();
  compose_cmd->add_option("--report", co_report, "composition csv path");

  // split
  auto* split_cmd = app.add_subcommand("split", "group-aware train/test split");
  std::string sp_manifest, sp_group, sp_out_dir;
  double sp_fraction = 0.0;
  std::optional<std::uint64_t> sp_seed;
  split_cmd->add_option("--manifest", sp_manifest)->required();
  split_cmd->add_option("--test-fraction", sp_fraction, "fraction in (0,1)");
  split_cmd->add_option("--seed", sp_seed, "64-bit seed (required)");
  split_cmd->add_option("--group-field", sp_group, "group by this manifest field");
  split_cmd->add_option("--out-dir", sp_out_dir)->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a classifier prediction csv");
  std::string ev_predictions, ev_out;
  bool ev_allow_zero = false;
  eval_cmd->add_option("--predictions", ev_predictions)->required();
  eval_cmd->add_option("--out", ev_out, "report json path")->required();
  eval_cmd->add_flag("--allow-zero-support", ev_allow_zero);

  // report
  auto* report_cmd = app.add_subcommand("report", "similarity histograms + composition");
  std::vector<std::string> rp_records;
  std::string rp_composed, rp_out_dir;
  report_cmd->add_option("--records", rp_records);
  report_cmd->add_option("--composed", rp_composed, "composed manifest");
  report_cmd->add_option("--out-dir", rp_out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    global.config = load_config(global.config_path);

    if (*ingest) {
      return cmd_ingest(global, in_root, in_layout, in_name, in_origin, in_side, in_out);
    }
    if (*vectorize_cmd) return cmd_vectorize(global, vec_manifest, vec_side, vec_out);
    if (*records_cmd) {
      return cmd_records(global, rec_manifests, rec_target_manifest,
                         rec_secondary_manifest, rec_vectors, rec_target, rec_secondaries,
                         rec_k, rec_out, rec_csv);
    }
    if (*filter_cmd) {
      return cmd_filter(global, fil_records, fil_method, fil_alphas, fil_keep, fil_mode,
                        fil_task, fil_out_dir, fil_apply);
    }
    if (*plan_cmd) {
      return cmd_plan(global, plan_manifest, plan_total, plan_transformed, plan_classes,
                      plan_alphas, plan_rounding, plan_out);
    }
    if (*transform_cmd) {
      return cmd_transform(global, tr_manifest, tr_plan, tr_class, tr_count, tr_seed,
                           tr_rotation, tr_shift, tr_zoom, tr_no_hflip, tr_no_vflip,
                           tr_side, tr_out_dir);
    }
    if (*compose_cmd) {
      return cmd_compose(global, co_real, co_transformed, co_synthetic, co_plan, co_name,
                         co_out, co_report);
    }
    if (*split_cmd) {
      return cmd_split(global, sp_manifest, sp_fraction, sp_seed, sp_group, sp_out_dir);
    }
    if (*eval_cmd) return cmd_eval(global, ev_predictions, ev_out, ev_allow_zero);
    if (*report_cmd) return cmd_report(global, rp_records, rp_composed, rp_out_dir);
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.message << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
