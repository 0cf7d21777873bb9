#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "ctxrr/dataset.hpp"
#include "ctxrr/errors.hpp"
#include "ctxrr/random.hpp"

namespace ctxrr {

void SynthConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  if (num_identities == 0 || num_cameras == 0 || scenes_per_camera == 0) {
    throw ConfigError("identities, cameras and scenes per camera must be positive");
  }
  if (min_instances_per_scene == 0 || min_instances_per_scene > max_instances_per_scene) {
    throw ConfigError("instances per scene must satisfy 1 <= min <= max");
  }
  prob(co_travel_prob, "co_travel_prob");
  prob(part_dropout_prob, "part_dropout_prob");
  if (!(view_noise_sigma >= 0.0)) throw ConfigError("view_noise_sigma must be >= 0");
  if (!(appearance_spread >= 0.0) || !(occluder_noise >= 0.0) || !(part_noise_scale >= 0.0)) throw ConfigError("noise scales must be >= 0");
  if (!(group_size_mean >= 1.0)) throw ConfigError("group_size_mean must be >= 1");
  if (dim < 2) throw ConfigError("dim must be >= 2");
  if (appearance_clusters == 0 || num_occluders == 0) throw ConfigError("cluster and occluder counts must be positive");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must lie in [0, 1]");

  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(num_identities) * train_fraction));
  const std::size_t n_test = num_identities - n_train;
  const auto scenes_train =
      static_cast<std::size_t>(std::llround(static_cast<double>(scenes_per_camera) * train_fraction));
  const std::size_t scenes_test = scenes_per_camera - scenes_train;
  if (max_instances_per_scene > num_identities || (scenes_train > 0 && max_instances_per_scene > n_train) ||
      (scenes_test > 0 && max_instances_per_scene > n_test)) {
    throw ConfigError("infeasible config: max instances per scene (" + std::to_string(max_instances_per_scene) +
                      ") exceeds the identities available to a split");
  }
}

namespace {

struct Group {
  std::vector<int> members;
  std::size_t home = 0;
};

class Generator {
 public:
  explicit Generator(const SynthConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  Dataset run() {
    make_appearance();
    const auto n_train =
        static_cast<std::size_t>(std::llround(static_cast<double>(cfg_.num_identities) * cfg_.train_fraction));
    const auto scenes_train =
        static_cast<std::size_t>(std::llround(static_cast<double>(cfg_.scenes_per_camera) * cfg_.train_fraction));

    std::vector<int> train_ids, test_ids;
    for (std::size_t i = 0; i < cfg_.num_identities; ++i) {
      (i < n_train ? train_ids : test_ids).push_back(static_cast<int>(i));
    }
    std::vector<Group> train_groups = make_groups(train_ids);
    std::vector<Group> test_groups = make_groups(test_ids);

    std::vector<Scene> scenes;
    for (std::size_t c = 0; c < cfg_.num_cameras; ++c) {
      // Reserve one scene per home group so every identity is observed.
      auto reserve = [&](const std::vector<Group>& groups, std::size_t count) {
        std::vector<int> owner(count, -1);
        std::size_t slot = 0;
        for (std::size_t g = 0; g < groups.size() && slot < count; ++g) {
          if (groups[g].home == c) owner[slot++] = static_cast<int>(g);
        }
        std::shuffle(owner.begin(), owner.end(), rng_);
        return owner;
      };
      const auto train_owner = reserve(train_groups, scenes_train);
      const auto test_owner = reserve(test_groups, cfg_.scenes_per_camera - scenes_train);
      for (std::size_t s = 0; s < cfg_.scenes_per_camera; ++s) {
        const bool train = s < scenes_train;
        const auto& groups = train ? train_groups : test_groups;
        const int owner = train ? train_owner[s] : test_owner[s - scenes_train];
        scenes.push_back(make_scene(c, s, train ? "train" : "test", groups, owner));
      }
    }
    return Dataset(cfg_.dim, std::move(scenes));
  }

 private:
  std::vector<double> gaussian_direction(double scale) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(cfg_.dim);
    const double per_dim = scale / std::sqrt(static_cast<double>(cfg_.dim));
    for (double& x : v) x = normal(rng_) * per_dim;
    return v;
  }

  static std::vector<double> normalized(std::vector<double> v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double n = std::sqrt(sq);
    for (double& x : v) x /= n;
    return v;
  }

  std::vector<double> perturb(const std::vector<double>& base, double scale) {
    auto noise = gaussian_direction(scale);
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] += base[i];
    return normalized(std::move(noise));
  }

  void make_appearance() {
    std::vector<std::vector<std::vector<double>>> centers(kNumParts);
    for (auto& part_centers : centers) {
      for (std::size_t m = 0; m < cfg_.appearance_clusters; ++m) part_centers.push_back(normalized(gaussian_direction(1.0)));
    }
    std::uniform_int_distribution<std::size_t> pick(0, cfg_.appearance_clusters - 1);
    prototypes_.resize(cfg_.num_identities);
    // One look cluster per identity for all parts: members of a cluster are
    // look-alikes that appearance alone separates poorly.
    for (auto& proto : prototypes_) {
      const std::size_t look = pick(rng_);
      for (std::size_t r = 0; r < kNumParts; ++r) proto[r] = perturb(centers[r][look], cfg_.appearance_spread);
    }
    for (std::size_t k = 0; k < cfg_.num_occluders; ++k) occluders_.push_back(normalized(gaussian_direction(1.0)));
  }

  std::vector<Group> make_groups(std::vector<int> ids) {
    std::shuffle(ids.begin(), ids.end(), rng_);
    const double base = std::floor(cfg_.group_size_mean);
    const double frac = cfg_.group_size_mean - base;
    std::bernoulli_distribution bump(frac);
    std::uniform_int_distribution<std::size_t> camera(0, cfg_.num_cameras - 1);
    std::vector<Group> groups;
    std::size_t at = 0;
    while (at < ids.size()) {
      std::size_t size = static_cast<std::size_t>(base) + (bump(rng_) ? 1 : 0);
      size = std::clamp<std::size_t>(size, 1, cfg_.max_instances_per_scene);
      size = std::min(size, ids.size() - at);
      Group g;
      g.members.assign(ids.begin() + static_cast<std::ptrdiff_t>(at),
                       ids.begin() + static_cast<std::ptrdiff_t>(at + size));
      g.home = camera(rng_);
      groups.push_back(std::move(g));
      at += size;
    }
    // Avoid a trailing loner when groups are meant to be at least pairs.
    if (groups.size() > 1 && groups.back().members.size() == 1 && base >= 2.0 &&
        groups[groups.size() - 2].members.size() < cfg_.max_instances_per_scene) {
      groups[groups.size() - 2].members.push_back(groups.back().members.front());
      groups.pop_back();
    }
    return groups;
  }

  // One random member always, each other member with co_travel_prob.
  std::vector<int> sighting(const Group& g) {
    std::uniform_int_distribution<std::size_t> lead(0, g.members.size() - 1);
    std::bernoulli_distribution along(cfg_.co_travel_prob);
    const std::size_t first = lead(rng_);
    std::vector<int> out{g.members[first]};
    for (std::size_t i = 0; i < g.members.size(); ++i) {
      if (i != first && along(rng_)) out.push_back(g.members[i]);
    }
    return out;
  }

  Scene make_scene(std::size_t camera, std::size_t index, const std::string& split, const std::vector<Group>& groups,
                   int owner) {
    const std::size_t cams = cfg_.num_cameras;
    std::vector<std::size_t> local;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const std::size_t d = (groups[g].home + cams - camera) % cams;
      if (d == 0 || d == 1 || d == cams - 1) local.push_back(g);
    }
    std::vector<std::size_t> used;
    std::vector<int> people;
    if (owner >= 0) {
      people = groups[static_cast<std::size_t>(owner)].members;
      used.push_back(static_cast<std::size_t>(owner));
    } else {
      std::size_t g;
      if (local.empty()) {
        g = std::uniform_int_distribution<std::size_t>(0, groups.size() - 1)(rng_);
      } else {
        g = local[std::uniform_int_distribution<std::size_t>(0, local.size() - 1)(rng_)];
      }
      people = sighting(groups[g]);
      used.push_back(g);
    }

    std::uniform_int_distribution<std::size_t> size_dist(cfg_.min_instances_per_scene, cfg_.max_instances_per_scene);
    const std::size_t target = std::max(size_dist(rng_), people.size());
    std::uniform_int_distribution<std::size_t> any_group(0, groups.size() - 1);
    for (int attempt = 0; attempt < 64 && people.size() < target; ++attempt) {
      const std::size_t g = any_group(rng_);
      if (std::find(used.begin(), used.end(), g) != used.end()) continue;
      auto extra = sighting(groups[g]);
      const std::size_t room = target - people.size();
      if (extra.size() > room) {
        const bool may_split = cfg_.co_travel_prob < 1.0;
        if (!may_split || people.size() >= cfg_.min_instances_per_scene || attempt < 48) continue;
        extra.resize(room);
      }
      used.push_back(g);
      people.insert(people.end(), extra.begin(), extra.end());
    }
    std::shuffle(people.begin(), people.end(), rng_);

    char scene_id[48];
    std::snprintf(scene_id, sizeof(scene_id), "c%zu_s%03zu", camera, index);
    Scene scene;
    scene.scene_id = scene_id;
    scene.camera_id = "c" + std::to_string(camera);
    scene.split = split;
    std::bernoulli_distribution occluded(cfg_.part_dropout_prob);
    std::uniform_int_distribution<std::size_t> which_part(1, kNumParts - 1);
    std::uniform_int_distribution<std::size_t> which_occluder(0, occluders_.size() - 1);
    for (std::size_t j = 0; j < people.size(); ++j) {
      const int id = people[j];
      PartEmbedding::Parts parts;
      for (std::size_t r = 0; r < kNumParts; ++r) {
        const double sigma = cfg_.view_noise_sigma * (r == 0 ? 1.0 : cfg_.part_noise_scale);
        parts[r] = perturb(prototypes_[static_cast<std::size_t>(id)][r], sigma);
      }
      if (occluded(rng_)) {
        const std::size_t r = which_part(rng_);
        parts[r] = perturb(occluders_[which_occluder(rng_)], cfg_.occluder_noise);
      }
      Instance inst{scene.scene_id + "_p" + std::to_string(j), scene.scene_id,
                    Box{20.0 + 80.0 * static_cast<double>(j), 60.0, 48.0, 128.0}, id,
                    PartEmbedding::from_parts(std::move(parts))};
      scene.instances.push_back(std::move(inst));
    }
    return scene;
  }

  const SynthConfig& cfg_;
  Rng rng_;
  std::vector<std::array<std::vector<double>, kNumParts>> prototypes_;
  std::vector<std::vector<double>> occluders_;
};

}  // namespace

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  return Generator(cfg).run();
}

}  // namespace ctxrr
