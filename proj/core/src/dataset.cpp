#include "ctxrr/dataset.hpp"

#include <bit>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctxrr/errors.hpp"

namespace ctxrr {

using nlohmann::json;

Dataset::Dataset(std::size_t d, std::vector<Scene> s) : dim(d), scenes(std::move(s)) { reindex(); }

void Dataset::reindex() {
  scene_index_.clear();
  instance_index_.clear();
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const Scene& scene = scenes[si];
    if (scene.scene_id.empty()) throw DataError("scene with empty scene_id");
    if (!scene_index_.emplace(scene.scene_id, si).second) {
      throw DataError("duplicate scene_id '" + scene.scene_id + "'");
    }
    for (std::size_t ii = 0; ii < scene.instances.size(); ++ii) {
      const Instance& inst = scene.instances[ii];
      if (inst.instance_id.empty()) throw DataError("instance with empty instance_id in scene " + scene.scene_id);
      if (!instance_index_.emplace(inst.instance_id, std::pair{si, ii}).second) {
        throw DataError("duplicate instance_id '" + inst.instance_id + "'");
      }
      if (inst.scene_id != scene.scene_id) {
        throw DataError("instance '" + inst.instance_id + "' references scene '" + inst.scene_id +
                        "' but is stored in '" + scene.scene_id + "'");
      }
      if (!(inst.box.w > 0.0) || !(inst.box.h > 0.0)) {
        throw DataError("instance '" + inst.instance_id + "' has a non-positive box size");
      }
      if (inst.identity && *inst.identity < 0) {
        throw DataError("instance '" + inst.instance_id + "' has a negative identity label");
      }
      if (inst.embedding.dim() != dim) {
        throw DataError("instance '" + inst.instance_id + "' has dimension " + std::to_string(inst.embedding.dim()) +
                        ", dataset declares " + std::to_string(dim));
      }
    }
  }
}

const Scene* Dataset::find_scene(std::string_view scene_id) const {
  auto it = scene_index_.find(std::string(scene_id));
  return it == scene_index_.end() ? nullptr : &scenes[it->second];
}

const Instance* Dataset::find_instance(std::string_view instance_id) const {
  auto it = instance_index_.find(std::string(instance_id));
  if (it == instance_index_.end()) return nullptr;
  return &scenes[it->second.first].instances[it->second.second];
}

const Scene& Dataset::scene_of(const Instance& inst) const {
  const Scene* s = find_scene(inst.scene_id);
  if (s == nullptr || !s->contains(inst)) {
    throw UsageError("instance '" + inst.instance_id + "' does not belong to this dataset");
  }
  return *s;
}

std::vector<const Scene*> Dataset::scenes_in_split(std::string_view split) const {
  std::vector<const Scene*> out;
  for (const Scene& s : scenes) {
    if (split.empty() || s.split == split) out.push_back(&s);
  }
  return out;
}

std::size_t Dataset::num_instances() const {
  std::size_t n = 0;
  for (const Scene& s : scenes) n += s.instances.size();
  return n;
}

std::string encode_f64_hex(std::span<const double> values) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(values.size() * 16);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int byte = 0; byte < 8; ++byte) {
      const auto b = static_cast<unsigned>((bits >> (8 * byte)) & 0xFF);
      out.push_back(kDigits[b >> 4]);
      out.push_back(kDigits[b & 0xF]);
    }
  }
  return out;
}

std::vector<double> decode_f64_hex(std::string_view hex) {
  if (hex.size() % 16 != 0) throw DataError("hex vector length is not a multiple of 16");
  auto nibble = [](char c) -> std::uint64_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint64_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint64_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint64_t>(c - 'A' + 10);
    throw DataError(std::string("invalid hex digit '") + c + "'");
  };
  std::vector<double> out(hex.size() / 16);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int byte = 0; byte < 8; ++byte) {
      const std::size_t at = i * 16 + static_cast<std::size_t>(byte) * 2;
      bits |= ((nibble(hex[at]) << 4) | nibble(hex[at + 1])) << (8 * byte);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

namespace {

const char* const kPartNames[kNumParts] = {"whole", "upper", "middle", "lower"};

json header_json(const Dataset& ds, EmbeddingStorage storage, const std::string& blob_name) {
  json h;
  h["type"] = "header";
  h["format"] = kDatasetFormatName;
  h["format_version"] = ds.format_version;
  h["d"] = ds.dim;
  h["R"] = kNumParts;
  h["parts"] = json::array({kPartNames[0], kPartNames[1], kPartNames[2], kPartNames[3]});
  if (storage == EmbeddingStorage::blob) {
    h["embedding_encoding"] = "blob-f64le";
    h["embedding_blob"] = blob_name;
  } else {
    h["embedding_encoding"] = "hex-f64le";
  }
  return h;
}

std::string serialize(const Dataset& ds, EmbeddingStorage storage, const std::string& blob_name,
                      std::vector<double>* blob) {
  std::string out = header_json(ds, storage, blob_name).dump() + "\n";
  std::size_t emb_index = 0;
  for (const Scene& scene : ds.scenes) {
    json s;
    s["type"] = "scene";
    s["scene_id"] = scene.scene_id;
    s["camera_id"] = scene.camera_id;
    if (!scene.split.empty()) s["split"] = scene.split;
    json instances = json::array();
    for (const Instance& inst : scene.instances) {
      json i;
      i["instance_id"] = inst.instance_id;
      i["box"] = json::array({inst.box.x, inst.box.y, inst.box.w, inst.box.h});
      i["identity"] = inst.identity ? json(*inst.identity) : json(nullptr);
      if (storage == EmbeddingStorage::blob) {
        i["emb_index"] = emb_index++;
        for (std::size_t r = 0; r < kNumParts; ++r) {
          auto p = inst.embedding.part(r);
          blob->insert(blob->end(), p.begin(), p.end());
        }
      } else {
        json parts = json::array();
        for (std::size_t r = 0; r < kNumParts; ++r) parts.push_back(encode_f64_hex(inst.embedding.part(r)));
        i["parts"] = std::move(parts);
      }
      instances.push_back(std::move(i));
    }
    s["instances"] = std::move(instances);
    out += s.dump() + "\n";
  }
  return out;
}

std::vector<double> read_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding blob " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 8 != 0) throw DataError("embedding blob size is not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)]))
              << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace

std::string dataset_to_string(const Dataset& ds) {
  return serialize(ds, EmbeddingStorage::inline_hex, {}, nullptr);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path, EmbeddingStorage storage) {
  std::vector<double> blob;
  const std::string blob_name = path.filename().string() + ".emb";
  const std::string text = serialize(ds, storage, blob_name, &blob);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write dataset " + path.string());
  out << text;
  if (storage == EmbeddingStorage::blob) {
    std::ofstream bout(path.parent_path() / blob_name, std::ios::binary | std::ios::trunc);
    if (!bout) throw DataError("cannot write embedding blob for " + path.string());
    for (double v : blob) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
      bout.write(bytes, 8);
    }
  }
}

Dataset dataset_from_string(std::string_view text, const std::filesystem::path& base_dir) {
  Dataset ds;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<double> blob;
  bool use_blob = false;

  auto fail = [&](const std::string& what) -> DataError {
    return DataError("line " + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("parse error: ") + e.what());
    }
    try {
      const std::string type = rec.at("type").get<std::string>();
      if (!have_header) {
        if (type != "header") throw fail("first record must be the header");
        if (rec.at("format").get<std::string>() != kDatasetFormatName) throw fail("unknown format");
        ds.format_version = rec.at("format_version").get<int>();
        if (ds.format_version != kDatasetFormatVersion) {
          throw fail("unsupported format_version " + std::to_string(ds.format_version));
        }
        ds.dim = rec.at("d").get<std::size_t>();
        if (ds.dim < 2) throw fail("d must be >= 2");
        if (rec.at("R").get<std::size_t>() != kNumParts) throw fail("R must be 4");
        const std::string encoding = rec.value("embedding_encoding", std::string("hex-f64le"));
        if (encoding == "blob-f64le") {
          use_blob = true;
          blob = read_blob(base_dir / rec.at("embedding_blob").get<std::string>());
        } else if (encoding != "hex-f64le") {
          throw fail("unknown embedding_encoding '" + encoding + "'");
        }
        have_header = true;
        continue;
      }
      if (type != "scene") throw fail("unexpected record type '" + type + "'");
      Scene scene;
      scene.scene_id = rec.at("scene_id").get<std::string>();
      scene.camera_id = rec.at("camera_id").get<std::string>();
      scene.split = rec.value("split", std::string());
      for (const json& ij : rec.at("instances")) {
        const std::string id = ij.at("instance_id").get<std::string>();
        const auto& box = ij.at("box");
        if (box.size() != 4) throw fail("instance '" + id + "': box needs 4 numbers");
        PartEmbedding::Parts parts;
        if (use_blob) {
          const std::size_t index = ij.at("emb_index").get<std::size_t>();
          const std::size_t stride = kNumParts * ds.dim;
          if ((index + 1) * stride > blob.size()) throw fail("instance '" + id + "': emb_index out of range");
          for (std::size_t r = 0; r < kNumParts; ++r) {
            const auto first = blob.begin() + static_cast<std::ptrdiff_t>(index * stride + r * ds.dim);
            parts[r].assign(first, first + static_cast<std::ptrdiff_t>(ds.dim));
          }
        } else {
          const auto& pj = ij.at("parts");
          if (pj.size() != kNumParts) throw fail("instance '" + id + "': expected 4 parts");
          for (std::size_t r = 0; r < kNumParts; ++r) {
            parts[r] = decode_f64_hex(pj[r].get<std::string>());
            if (parts[r].size() != ds.dim) {
              throw fail("instance '" + id + "': part " + kPartNames[r] + " has dimension " +
                         std::to_string(parts[r].size()) + ", header says " + std::to_string(ds.dim));
            }
          }
        }
        Instance inst{id, scene.scene_id,
                      Box{box[0].get<double>(), box[1].get<double>(), box[2].get<double>(), box[3].get<double>()},
                      std::nullopt, PartEmbedding::from_parts(std::move(parts), "instance '" + id + "'")};
        if (!ij.at("identity").is_null()) inst.identity = ij.at("identity").get<int>();
        scene.instances.push_back(std::move(inst));
      }
      ds.scenes.push_back(std::move(scene));
    } catch (const json::exception& e) {
      throw fail(std::string("malformed record: ") + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw DataError("dataset has no header record");
  ds.reindex();
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return dataset_from_string(buf.str(), path.parent_path());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::filesystem::path resolve_data_path(const std::filesystem::path& path) {
  if (path.is_absolute() || std::filesystem::exists(path)) return path;
  if (const char* root = std::getenv(std::string(kDataDirEnv).c_str()); root != nullptr && *root != '\0') {
    return std::filesystem::path(root) / path;
  }
  return path;
}

ValidationReport validate(const Dataset& ds) {
  ValidationReport rep;
  rep.num_scenes = ds.scenes.size();
  std::map<int, std::vector<const Scene*>> by_identity;
  for (const Scene& scene : ds.scenes) {
    rep.num_instances += scene.instances.size();
    if (scene.instances.size() == 1) ++rep.singleton_scenes;
    for (const Instance& inst : scene.instances) {
      if (inst.identity) {
        by_identity[*inst.identity].push_back(&scene);
      } else {
        ++rep.unlabeled_instances;
      }
    }
  }
  rep.num_identities = by_identity.size();
  for (const auto& [id, scenes] : by_identity) {
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      for (std::size_t j = i + 1; j < scenes.size(); ++j) {
        if (scenes[i] == scenes[j]) continue;
        ++rep.positive_pairs;
        if (scenes[i]->camera_id != scenes[j]->camera_id) ++rep.cross_camera_positive_pairs;
        if (scenes[i]->instances.size() > 1 && scenes[j]->instances.size() > 1) ++rep.graph_trainable_pairs;
      }
    }
  }
  if (rep.num_instances > 0 && rep.num_identities == 0) rep.warnings.push_back("no instance carries an identity label");
  if (rep.graph_trainable_pairs == 0) {
    rep.warnings.push_back("zero graph-trainable pairs: no positive pair has context in both scenes");
  }
  if (rep.positive_pairs == 0 && rep.num_instances > 0) rep.warnings.push_back("no positive pairs across scenes");
  return rep;
}

}  // namespace ctxrr
