#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctxrr/embedding.hpp"

namespace ctxrr {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr std::string_view kDatasetFormatName = "ctxrr-scenes";
inline constexpr std::string_view kDataDirEnv = "CONTEXT_RERANK_DATA_DIR";

/// A loaded scene collection with id lookup. Instance pointers handed out by
/// the lookup functions stay valid until `scenes` is modified; call reindex()
/// after any modification.
class Dataset {
 public:
  int format_version = kDatasetFormatVersion;
  std::size_t dim = 0;
  std::vector<Scene> scenes;

  Dataset() = default;
  Dataset(std::size_t dim, std::vector<Scene> scenes);

  // Rebuilds the id maps and checks referential integrity: unique scene and
  // instance ids, instance.scene_id matching its scene, a single embedding
  // dimension, positive box sizes. Throws DataError.
  void reindex();

  const Scene* find_scene(std::string_view scene_id) const;
  const Instance* find_instance(std::string_view instance_id) const;
  // Scene holding `inst`; throws UsageError for foreign instances.
  const Scene& scene_of(const Instance& inst) const;

  std::vector<const Scene*> scenes_in_split(std::string_view split) const;
  std::size_t num_instances() const;

 private:
  std::unordered_map<std::string, std::size_t> scene_index_;
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> instance_index_;
};

enum class EmbeddingStorage { inline_hex, blob };

// Writes the line-delimited dataset file. With EmbeddingStorage::blob the
// part vectors go to a companion "<file>.emb" raw little-endian f64 blob.
void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  EmbeddingStorage storage = EmbeddingStorage::inline_hex);
std::string dataset_to_string(const Dataset& ds);

// Parses and validates. Errors carry the line number (parse problems), the
// instance id (norm violations) or the duplicated id.
Dataset load_dataset(const std::filesystem::path& path);
Dataset dataset_from_string(std::string_view text, const std::filesystem::path& base_dir = {});

// Resolves a dataset argument: absolute or existing paths are used as is,
// otherwise the path is looked up under $CONTEXT_RERANK_DATA_DIR.
std::filesystem::path resolve_data_path(const std::filesystem::path& path);

std::string encode_f64_hex(std::span<const double> values);
std::vector<double> decode_f64_hex(std::string_view hex);

struct ValidationReport {
  std::size_t num_scenes = 0;
  std::size_t num_instances = 0;
  std::size_t num_identities = 0;
  std::size_t singleton_scenes = 0;
  std::size_t unlabeled_instances = 0;
  std::size_t positive_pairs = 0;
  std::size_t cross_camera_positive_pairs = 0;
  // Positive pairs whose two scenes both hold at least one other person.
  std::size_t graph_trainable_pairs = 0;
  std::vector<std::string> warnings;
};

ValidationReport validate(const Dataset& ds);

struct SynthConfig {
  std::size_t num_identities = 200;
  std::size_t num_cameras = 6;
  std::size_t scenes_per_camera = 60;
  std::size_t min_instances_per_scene = 2;
  std::size_t max_instances_per_scene = 6;
  double group_size_mean = 2.5;
  double co_travel_prob = 0.8;
  double view_noise_sigma = 0.35;
  double part_dropout_prob = 0.25;
  std::uint64_t seed = 42;

  std::size_t dim = 16;
  // Identities share appearance clusters per part, which produces
  // look-alikes (hard negatives).
  std::size_t appearance_clusters = 24;
  double appearance_spread = 0.15;
  // Body-part crops are smaller than the whole box, so their view noise is
  // view_noise_sigma times this factor.
  double part_noise_scale = 3.0;
  // Occluded parts are drawn around a small set of occluder appearances.
  std::size_t num_occluders = 4;
  double occluder_noise = 0.25;
  double train_fraction = 0.5;

  // Throws ConfigError for infeasible or out-of-range settings.
  void validate() const;
};

Dataset generate_synthetic(const SynthConfig& cfg);

}  // namespace ctxrr
