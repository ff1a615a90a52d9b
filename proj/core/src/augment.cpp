#include "cossif/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "cossif/errors.hpp"
#include "cossif/image.hpp"
#include "cossif/parallel.hpp"
#include "cossif/rng.hpp"

namespace fs = std::filesystem;

namespace cossif {

AugmentationPlan plan_class(const std::string& class_name, std::int64_t target_total,
                            std::int64_t real_count, std::int64_t transformed_count) {
  if (real_count < 0 || transformed_count < 0 || target_total < 0) {
    throw DataError("plan: counts must be non-negative");
  }
  if (target_total < real_count + transformed_count) {
    throw DataError("plan: class " + class_name + " is over-full (" +
                    std::to_string(real_count) + " real + " +
                    std::to_string(transformed_count) + " transformed > " +
                    std::to_string(target_total) + ")");
  }
  AugmentationPlan plan;
  plan.class_name = class_name;
  plan.target_total = target_total;
  plan.real_count = real_count;
  plan.transformed_count = transformed_count;
  plan.synthetic_needed = target_total - real_count - transformed_count;
  return plan;
}

namespace {

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Samples source pixel (sx, sy) bilinearly with clamp-to-edge fill.
double sample_bilinear(const Image& src, double sx, double sy, int channel) {
  sx = clampd(sx, 0.0, src.width - 1.0);
  sy = clampd(sy, 0.0, src.height - 1.0);
  const int x0 = static_cast<int>(sx);
  const int y0 = static_cast<int>(sy);
  const int x1 = std::min(x0 + 1, src.width - 1);
  const int y1 = std::min(y0 + 1, src.height - 1);
  const double fx = sx - x0;
  const double fy = sy - y0;
  const double top = src.at(x0, y0, channel) * (1.0 - fx) + src.at(x1, y0, channel) * fx;
  const double bottom = src.at(x0, y1, channel) * (1.0 - fx) + src.at(x1, y1, channel) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

struct TransformParams {
  double rotation_deg = 0.0;
  double shift_x = 0.0;
  double shift_y = 0.0;
  double zoom = 1.0;
  bool hflip = false;
  bool vflip = false;
};

// Draw order is part of the reproducibility contract: rotation, shift_x,
// shift_y, zoom, hflip, vflip. Flips are always drawn and applied only when
// allowed, so toggling a flip never perturbs the other parameters.
TransformParams draw_params(const TransformSpec& spec, const std::string& source_id,
                            std::int64_t cycle) {
  SplitMix64 rng(mix_seed(mix_seed(spec.seed, source_id),
                          static_cast<std::uint64_t>(cycle)));
  TransformParams params;
  params.rotation_deg = rng.uniform(spec.rotation_min, spec.rotation_max);
  params.shift_x = rng.uniform(spec.shift_min, spec.shift_max);
  params.shift_y = rng.uniform(spec.shift_min, spec.shift_max);
  params.zoom = rng.uniform(spec.zoom_min, spec.zoom_max);
  params.hflip = rng.next_bool() && spec.allow_hflip;
  params.vflip = rng.next_bool() && spec.allow_vflip;
  return params;
}

// Forward model about the image center c:
//   out = zoom * R(theta) * F * (src - c) + c + shift_px
// Rendering inverts it: for each output pixel, src = F * R(-theta) *
// (out - c - shift_px) / zoom + c, sampled bilinearly with edge replication.
Image apply_transform(const Image& src, const TransformParams& params) {
  Image out;
  out.width = src.width;
  out.height = src.height;
  out.pixels.resize(src.pixels.size());

  const double cx = (src.width - 1) / 2.0;
  const double cy = (src.height - 1) / 2.0;
  const double shift_px_x = params.shift_x * src.width;
  const double shift_px_y = params.shift_y * src.height;
  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(-theta);
  const double sin_t = std::sin(-theta);
  const double inv_zoom = 1.0 / params.zoom;

  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double dx = (x - cx - shift_px_x) * inv_zoom;
      const double dy = (y - cy - shift_px_y) * inv_zoom;
      double sx = cos_t * dx - sin_t * dy;
      double sy = sin_t * dx + cos_t * dy;
      if (params.hflip) sx = -sx;
      if (params.vflip) sy = -sy;
      sx += cx;
      sy += cy;
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) =
            static_cast<std::uint8_t>(std::lround(sample_bilinear(src, sx, sy, c)));
      }
    }
  }
  return out;
}

}  // namespace

std::vector<ImageRef> oversample_transform(const std::vector<ImageRef>& sources,
                                           std::int64_t count, const TransformSpec& spec,
                                           const fs::path& out_dir, int threads) {
  if (count < 0) throw DataError("oversample: count must be >= 0");
  if (count == 0) return {};
  if (sources.empty()) throw DataError("oversample: no source images");
  if (spec.rotation_min > spec.rotation_max || spec.shift_min > spec.shift_max ||
      spec.zoom_min > spec.zoom_max || spec.zoom_min <= 0.0) {
    throw DataError("oversample: malformed transform ranges");
  }

  std::vector<const ImageRef*> sorted;
  sorted.reserve(sources.size());
  for (const auto& ref : sources) sorted.push_back(&ref);
  std::sort(sorted.begin(), sorted.end(),
            [](const ImageRef* a, const ImageRef* b) { return a->id < b->id; });

  fs::create_directories(out_dir);

  const std::size_t n = sorted.size();
  std::vector<ImageRef> refs(static_cast<std::size_t>(count));
  parallel_for(static_cast<std::size_t>(count), threads,
               [&](std::size_t begin, std::size_t end) {
                 for (std::size_t k = begin; k < end; ++k) {
                   const ImageRef& source = *sorted[k % n];
                   const std::int64_t cycle = static_cast<std::int64_t>(k / n);
                   const TransformParams params = draw_params(spec, source.id, cycle);

                   Image raster = decode_image(source.path);
                   if (raster.width != spec.side || raster.height != spec.side) {
                     raster = rescale(raster, spec.side);
                   }
                   const Image transformed = apply_transform(raster, params);

                   ImageRef ref;
                   ref.id = source.id + "_t" + std::to_string(cycle);
                   ref.class_name = source.class_name;
                   ref.path = fs::absolute(out_dir / (ref.id + ".png")).lexically_normal();
                   ref.origin = Origin::transformed;
                   ref.group_key = source.group_key;
                   write_png(transformed, ref.path);
                   refs[k] = std::move(ref);
                 }
               });
  return refs;
}

DatasetManifest compose_final(const DatasetManifest& real,
                              const DatasetManifest& transformed,
                              const DatasetManifest& synthetic,
                              const std::vector<AugmentationPlan>& plans,
                              const std::string& dataset_name) {
  const auto check_origin = [](const DatasetManifest& m, Origin expected,
                               const char* which) {
    for (const auto& [name, refs] : m.classes) {
      for (const auto& ref : refs) {
        if (ref.origin != expected) {
          throw DataError(std::string("compose: ") + which + " manifest contains a " +
                          to_string(ref.origin) + " image: " + ref.id);
        }
      }
    }
  };
  check_origin(real, Origin::real, "real");
  check_origin(transformed, Origin::transformed, "transformed");
  check_origin(synthetic, Origin::synthetic, "synthetic");

  std::set<std::string> planned;
  for (const auto& plan : plans) planned.insert(plan.class_name);
  const auto check_planned = [&](const DatasetManifest& m, const char* which) {
    for (const auto& [name, refs] : m.classes) {
      if (planned.find(name) == planned.end()) {
        throw DataError(std::string("compose: class ") + name + " in " + which +
                        " manifest has no plan");
      }
    }
  };
  check_planned(real, "real");
  check_planned(transformed, "transformed");
  check_planned(synthetic, "synthetic");

  DatasetManifest out;
  out.dataset_name = dataset_name;
  out.side = real.side;
  out.created_from = "compose";

  std::set<std::string> seen;
  for (const auto& plan : plans) {
    const auto count_of = [&](const DatasetManifest& m) -> std::int64_t {
      const auto it = m.classes.find(plan.class_name);
      return it == m.classes.end() ? 0 : static_cast<std::int64_t>(it->second.size());
    };
    const std::int64_t r = count_of(real);
    const std::int64_t t = count_of(transformed);
    const std::int64_t s = count_of(synthetic);
    if (r != plan.real_count || t != plan.transformed_count ||
        s != plan.synthetic_needed) {
      throw DataError("compose: class " + plan.class_name + " has (" + std::to_string(r) +
                      " real, " + std::to_string(t) + " transformed, " + std::to_string(s) +
                      " synthetic) but the plan requires (" +
                      std::to_string(plan.real_count) + ", " +
                      std::to_string(plan.transformed_count) + ", " +
                      std::to_string(plan.synthetic_needed) + ")");
    }
    std::vector<ImageRef>& merged = out.classes[plan.class_name];
    for (const DatasetManifest* m : {&real, &transformed, &synthetic}) {
      const auto it = m->classes.find(plan.class_name);
      if (it == m->classes.end()) continue;
      for (const auto& ref : it->second) {
        if (!seen.insert(ref.id).second) {
          throw DataError("compose: duplicate image id: " + ref.id);
        }
        merged.push_back(ref);
      }
    }
    std::sort(merged.begin(), merged.end(),
              [](const ImageRef& a, const ImageRef& b) { return a.id < b.id; });
  }
  return out;
}

void write_composition_csv(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write composition csv: " + path.string());
  out << "class,real,transformed,synthetic,total\n";
  for (const auto& [name, refs] : manifest.classes) {
    std::int64_t counts[3] = {0, 0, 0};
    for (const auto& ref : refs) ++counts[static_cast<int>(ref.origin)];
    out << name << ',' << counts[0] << ',' << counts[1] << ',' << counts[2] << ','
        << refs.size() << "\n";
  }
}

void write_plans_json(const std::vector<ClassPlan>& plans, const fs::path& path) {
  nlohmann::json j;
  j["plans"] = nlohmann::json::array();
  for (const auto& plan : plans) {
    nlohmann::json p;
    p["class_name"] = plan.quota.class_name;
    p["target_total"] = plan.quota.target_total;
    p["real"] = plan.quota.real_count;
    p["transformed"] = plan.quota.transformed_count;
    p["synthetic_needed"] = plan.quota.synthetic_needed;
    if (plan.pool_size) {
      nlohmann::json pool;
      pool["alpha"] = plan.pool_alpha->str();
      pool["rounding"] = to_string(*plan.pool_rounding);
      pool["size"] = *plan.pool_size;
      p["fagt_pool"] = std::move(pool);
    }
    j["plans"].push_back(std::move(p));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write plan json: " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<ClassPlan> read_plans_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read plan json: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed plan file " + path.string() + ": " + e.what());
  }
  std::vector<ClassPlan> plans;
  try {
    for (const auto& p : j.at("plans")) {
      ClassPlan plan;
      plan.quota = plan_class(p.at("class_name").get<std::string>(),
                              p.at("target_total").get<std::int64_t>(),
                              p.at("real").get<std::int64_t>(),
                              p.at("transformed").get<std::int64_t>());
      if (p.contains("fagt_pool")) {
        const auto& pool = p.at("fagt_pool");
        plan.pool_alpha = Alpha::parse(pool.at("alpha").get<std::string>());
        plan.pool_rounding = parse_rounding_mode(pool.at("rounding").get<std::string>());
        plan.pool_size = pool.at("size").get<std::int64_t>();
      }
      plans.push_back(std::move(plan));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed plan file " + path.string() + ": " + e.what());
  }
  return plans;
}

}  // namespace cossif
