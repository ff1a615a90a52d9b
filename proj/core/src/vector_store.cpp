#include "cossif/vector_store.hpp"

#include <cstring>
#include <fstream>

#include "cossif/errors.hpp"
#include "cossif/image.hpp"
#include "cossif/parallel.hpp"

namespace fs = std::filesystem;

namespace cossif {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'I', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32_le(std::ofstream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {
      static_cast<unsigned char>(v & 0xFF),
      static_cast<unsigned char>((v >> 8) & 0xFF),
      static_cast<unsigned char>((v >> 16) & 0xFF),
      static_cast<unsigned char>((v >> 24) & 0xFF),
  };
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32_le(std::ifstream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  return static_cast<std::uint32_t>(bytes[0]) |
         (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace

VectorStore VectorStore::build(const DatasetManifest& manifest, int side, int threads) {
  if (side < 1) throw DataError("vector store: side must be >= 1");
  VectorStore store;
  store.side_ = side;
  const auto refs = manifest.all_refs_sorted();
  store.ids_.reserve(refs.size());
  for (const auto& ref : refs) store.ids_.push_back(ref.id);
  store.data_.assign(refs.size() * store.dim(), 0.0f);

  parallel_for(refs.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Image raster = rescale(decode_image(refs[i].path), side);
      const PixelVector v = vectorize(raster, refs[i].id);
      std::memcpy(store.data_.data() + i * store.dim(), v.values.data(),
                  store.dim() * sizeof(float));
    }
  });

  store.rebuild_index();
  return store;
}

VectorStore VectorStore::from_vectors(int side, std::vector<std::string> ids,
                                      std::vector<float> data) {
  VectorStore store;
  store.side_ = side;
  if (ids.size() * store.dim() != data.size()) {
    throw DataError("vector store: data size does not match id count * dim");
  }
  // Keep rows paired with their ids while restoring ascending id order.
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  store.ids_.reserve(ids.size());
  store.data_.resize(data.size());
  const std::size_t dim = store.dim();
  for (std::size_t i = 0; i < order.size(); ++i) {
    store.ids_.push_back(std::move(ids[order[i]]));
    std::memcpy(store.data_.data() + i * dim, data.data() + order[i] * dim,
                dim * sizeof(float));
  }
  store.rebuild_index();
  return store;
}

void VectorStore::rebuild_index() {
  index_.clear();
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw DataError("duplicate image id in vector store: " + ids_[i]);
    }
  }
}

std::span<const float> VectorStore::row(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) {
    throw DataError("no vector for image id: " + id);
  }
  return row_at(it->second);
}

std::span<const float> VectorStore::row_at(std::size_t i) const {
  return {data_.data() + i * dim(), dim()};
}

void VectorStore::merge(const VectorStore& other) {
  if (side_ == 0) {
    *this = other;
    return;
  }
  if (other.side_ != side_) {
    throw DataError("vector store merge: side mismatch");
  }
  std::vector<std::string> ids = ids_;
  ids.insert(ids.end(), other.ids_.begin(), other.ids_.end());
  std::vector<float> data = data_;
  data.insert(data.end(), other.data_.begin(), other.data_.end());
  *this = from_vectors(side_, std::move(ids), std::move(data));
}

void VectorStore::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vector cache: " + path.string());
  out.write(kMagic, 4);
  put_u32_le(out, kVersion);
  put_u32_le(out, static_cast<std::uint32_t>(side_));
  put_u32_le(out, static_cast<std::uint32_t>(ids_.size()));
  static_assert(sizeof(float) == 4);
  // Little-endian host assumed for the raw float block (x86-64 / aarch64).
  out.write(reinterpret_cast<const char*>(data_.data()),
            static_cast<std::streamsize>(data_.size() * sizeof(float)));
  if (!out) throw DataError("short write to vector cache: " + path.string());
}

VectorStore VectorStore::load(const fs::path& path, const DatasetManifest& manifest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vector cache: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("not a CSIF vector cache: " + path.string());
  }
  const std::uint32_t version = get_u32_le(in);
  if (version != kVersion) {
    throw DataError("unsupported CSIF version " + std::to_string(version));
  }
  const std::uint32_t side = get_u32_le(in);
  const std::uint32_t count = get_u32_le(in);

  VectorStore store;
  store.side_ = static_cast<int>(side);
  const auto refs = manifest.all_refs_sorted();
  if (refs.size() != count) {
    throw DataError("vector cache holds " + std::to_string(count) +
                    " rows but manifest has " + std::to_string(refs.size()));
  }
  store.ids_.reserve(count);
  for (const auto& ref : refs) store.ids_.push_back(ref.id);
  store.data_.resize(static_cast<std::size_t>(count) * store.dim());
  in.read(reinterpret_cast<char*>(store.data_.data()),
          static_cast<std::streamsize>(store.data_.size() * sizeof(float)));
  if (!in || in.gcount() != static_cast<std::streamsize>(store.data_.size() * sizeof(float))) {
    throw DataError("truncated vector cache: " + path.string());
  }
  store.rebuild_index();
  return store;
}

}  // namespace cossif
