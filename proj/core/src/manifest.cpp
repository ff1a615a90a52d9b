#include "cossif/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cossif/errors.hpp"
#include "cossif/image.hpp"
#include "cossif/parallel.hpp"

namespace fs = std::filesystem;

namespace cossif {

std::string to_string(Origin origin) {
  switch (origin) {
    case Origin::real: return "real";
    case Origin::transformed: return "transformed";
    case Origin::synthetic: return "synthetic";
  }
  return "real";
}

Origin parse_origin(const std::string& text) {
  if (text == "real") return Origin::real;
  if (text == "transformed") return Origin::transformed;
  if (text == "synthetic") return Origin::synthetic;
  throw DataError("unknown origin: " + text);
}

std::size_t DatasetManifest::total_count() const {
  std::size_t n = 0;
  for (const auto& [name, refs] : classes) n += refs.size();
  return n;
}

std::vector<ImageRef> DatasetManifest::all_refs_sorted() const {
  std::vector<ImageRef> all;
  all.reserve(total_count());
  for (const auto& [name, refs] : classes) {
    all.insert(all.end(), refs.begin(), refs.end());
  }
  std::sort(all.begin(), all.end(),
            [](const ImageRef& a, const ImageRef& b) { return a.id < b.id; });
  return all;
}

void DatasetManifest::normalize() {
  std::set<std::string> seen;
  for (auto& [name, refs] : classes) {
    std::sort(refs.begin(), refs.end(),
              [](const ImageRef& a, const ImageRef& b) { return a.id < b.id; });
  }
  for (const auto& [name, refs] : classes) {
    for (const auto& ref : refs) {
      if (!seen.insert(ref.id).second) {
        throw DataError("duplicate image id: " + ref.id);
      }
    }
  }
}

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

fs::path normal_absolute(const fs::path& p) {
  return fs::absolute(p).lexically_normal();
}

struct Candidate {
  ImageRef ref;
};

// Decode-validates candidates in parallel; results land in slot `i` so the
// report is independent of worker count.
void validate_candidates(std::vector<Candidate>& candidates, int threads,
                         std::vector<std::string>& failure_reasons) {
  failure_reasons.assign(candidates.size(), "");
  parallel_for(candidates.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        decode_image(candidates[i].ref.path);
      } catch (const std::exception& e) {
        failure_reasons[i] = e.what();
        if (failure_reasons[i].empty()) failure_reasons[i] = "decode failed";
      }
    }
  });
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

LoadReport load_dataset(const fs::path& root, Layout layout,
                        const std::string& dataset_name, Origin default_origin,
                        int side, int threads) {
  if (!fs::exists(root)) {
    throw DataError("dataset root not found: " + root.string());
  }

  std::vector<Candidate> candidates;

  if (layout == Layout::class_subdirs) {
    if (!fs::is_directory(root)) {
      throw DataError("dataset root is not a directory: " + root.string());
    }
    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory()) class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) {
      throw DataError("no class subdirectories under " + root.string());
    }
    for (const auto& dir : class_dirs) {
      const std::string class_name = dir.filename().string();
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || !has_image_extension(entry.path())) continue;
        ImageRef ref;
        ref.id = entry.path().stem().string();
        ref.class_name = class_name;
        ref.path = normal_absolute(entry.path());
        ref.origin = default_origin;
        candidates.push_back({std::move(ref)});
      }
    }
  } else {
    fs::path csv = root;
    if (fs::is_directory(root)) csv = root / "index.csv";
    if (!fs::exists(csv)) {
      throw DataError("csv index not found: " + csv.string());
    }
    std::ifstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty csv index: " + csv.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line);
    if (header.size() < 3 || header[0] != "image_id" || header[1] != "class" ||
        header[2] != "path" || (header.size() == 4 && header[3] != "group_key") ||
        header.size() > 4) {
      throw DataError("csv index header must be image_id,class,path[,group_key]");
    }
    const fs::path base = csv.parent_path();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto fields = split_line(line);
      if (fields.size() < 3) {
        throw DataError("csv index line " + std::to_string(line_no) + ": expected 3+ fields");
      }
      ImageRef ref;
      ref.id = fields[0];
      ref.class_name = fields[1];
      fs::path p(fields[2]);
      ref.path = p.is_absolute() ? normal_absolute(p) : normal_absolute(base / p);
      ref.origin = default_origin;
      if (fields.size() >= 4 && !fields[3].empty()) ref.group_key = fields[3];
      candidates.push_back({std::move(ref)});
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.ref.id < b.ref.id;
  });

  std::vector<std::string> failure_reasons;
  validate_candidates(candidates, threads, failure_reasons);

  LoadReport report;
  report.manifest.dataset_name =
      dataset_name.empty() ? root.filename().string() : dataset_name;
  report.manifest.side = side;
  report.manifest.created_from = root.filename().string();

  std::set<std::string> seen;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!failure_reasons[i].empty()) {
      report.failures.push_back({candidates[i].ref.path, failure_reasons[i]});
      continue;
    }
    ImageRef& ref = candidates[i].ref;
    if (!seen.insert(ref.id).second) {
      throw DataError("duplicate image id: " + ref.id);
    }
    report.manifest.classes[ref.class_name].push_back(std::move(ref));
  }

  if (layout == Layout::class_subdirs) {
    // A class directory whose files all failed to decode (or that held no
    // images at all) is a data error, not an empty manifest entry.
    for (const auto& entry : fs::directory_iterator(root)) {
      if (!entry.is_directory()) continue;
      const std::string class_name = entry.path().filename().string();
      if (report.manifest.classes.find(class_name) == report.manifest.classes.end()) {
        throw DataError("class has no decodable images: " + class_name);
      }
    }
  } else {
    if (report.manifest.classes.empty()) {
      throw DataError("csv index yielded no decodable images");
    }
  }
  return report;
}

namespace {

nlohmann::json ref_to_json(const ImageRef& ref, const fs::path& base_dir) {
  nlohmann::json j;
  j["id"] = ref.id;
  const fs::path abs = normal_absolute(ref.path);
  const fs::path rel = abs.lexically_relative(base_dir);
  j["path"] = rel.empty() ? abs.generic_string() : rel.generic_string();
  j["origin"] = to_string(ref.origin);
  if (ref.group_key) j["group_key"] = *ref.group_key;
  return j;
}

ImageRef ref_from_json(const nlohmann::json& j, const std::string& class_name,
                       const fs::path& base_dir) {
  ImageRef ref;
  ref.id = j.at("id").get<std::string>();
  ref.class_name = class_name;
  fs::path p(j.at("path").get<std::string>());
  ref.path = p.is_absolute() ? p.lexically_normal() : (base_dir / p).lexically_normal();
  ref.origin = parse_origin(j.at("origin").get<std::string>());
  if (j.contains("group_key")) ref.group_key = j.at("group_key").get<std::string>();
  return ref;
}

}  // namespace

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path base_dir = normal_absolute(path).parent_path();
  nlohmann::json j;
  j["dataset_name"] = manifest.dataset_name;
  j["side"] = manifest.side;
  j["created_from"] = manifest.created_from;
  j["classes"] = nlohmann::json::object();
  std::set<std::string> seen;
  for (const auto& [class_name, refs] : manifest.classes) {
    nlohmann::json list = nlohmann::json::array();
    const ImageRef* prev = nullptr;
    for (const auto& ref : refs) {
      if (prev && !(prev->id < ref.id)) {
        throw DataError("manifest class " + class_name + " is not sorted by id");
      }
      if (!seen.insert(ref.id).second) {
        throw DataError("duplicate image id: " + ref.id);
      }
      if (!fs::exists(ref.path)) {
        throw DataError("manifest references missing file: " + ref.path.string());
      }
      list.push_back(ref_to_json(ref, base_dir));
      prev = &ref;
    }
    j["classes"][class_name] = std::move(list);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read manifest: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  const fs::path base_dir = normal_absolute(path).parent_path();
  DatasetManifest manifest;
  try {
    manifest.dataset_name = j.at("dataset_name").get<std::string>();
    manifest.side = j.at("side").get<int>();
    manifest.created_from = j.at("created_from").get<std::string>();
    std::set<std::string> seen;
    for (const auto& [class_name, list] : j.at("classes").items()) {
      std::vector<ImageRef>& refs = manifest.classes[class_name];
      for (const auto& item : list) {
        refs.push_back(ref_from_json(item, class_name, base_dir));
        if (!seen.insert(refs.back().id).second) {
          throw DataError("duplicate image id: " + refs.back().id);
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  return manifest;
}

}  // namespace cossif
