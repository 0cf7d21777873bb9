#include "ctxrr/eval.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "ctxrr/errors.hpp"
#include "ctxrr/random.hpp"

namespace ctxrr {

std::optional<double> average_precision(std::span<const bool> relevance) {
  std::size_t hits = 0;
  double total = 0.0;
  for (std::size_t k = 0; k < relevance.size(); ++k) {
    if (!relevance[k]) continue;
    ++hits;
    total += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) return std::nullopt;
  return total / static_cast<double>(hits);
}

std::optional<double> average_precision(const std::vector<bool>& relevance) {
  // vector<bool> has no contiguous storage.
  std::unique_ptr<bool[]> flat(new bool[relevance.size()]);
  std::copy(relevance.begin(), relevance.end(), flat.get());
  return average_precision(std::span<const bool>(flat.get(), relevance.size()));
}

std::vector<bool> RankedResult::relevance() const {
  std::vector<bool> out;
  out.reserve(ranked.size());
  for (const RankedEntry& e : ranked) out.push_back(e.relevant);
  return out;
}

RankedResult rank_gallery(const Instance& query, std::span<const Scene* const> gallery,
                          const std::vector<std::vector<double>>& scores) {
  if (scores.size() != gallery.size()) throw UsageError("rank_gallery: one score row per gallery scene required");
  RankedResult result{&query, {}};
  for (std::size_t s = 0; s < gallery.size(); ++s) {
    const auto& instances = gallery[s]->instances;
    if (scores[s].size() != instances.size()) throw UsageError("rank_gallery: one score per instance required");
    for (std::size_t j = 0; j < instances.size(); ++j) {
      const Instance& g = instances[j];
      const bool relevant = query.identity && g.identity && *query.identity == *g.identity;
      result.ranked.push_back({&g, scores[s][j], relevant});
    }
  }
  std::sort(result.ranked.begin(), result.ranked.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.gallery->instance_id < b.gallery->instance_id;
  });
  return result;
}

std::vector<const Instance*> make_queries(const Dataset& ds, std::string_view split) {
  std::set<int> seen;
  std::vector<const Instance*> out;
  for (const Scene* scene : ds.scenes_in_split(split)) {
    for (const Instance& inst : scene->instances) {
      if (inst.identity && seen.insert(*inst.identity).second) out.push_back(&inst);
    }
  }
  return out;
}

std::vector<const Scene*> sample_gallery(const Dataset& ds, const Instance& query,
                                         std::span<const Scene* const> pool, std::size_t gallery_size,
                                         std::uint64_t seed) {
  if (gallery_size == 0) throw ConfigError("gallery size must be positive");
  const Scene& own = ds.scene_of(query);
  std::vector<const Scene*> positives, negatives;
  for (const Scene* scene : pool) {
    if (scene == &own) continue;
    const bool has_match = query.identity && std::any_of(scene->instances.begin(), scene->instances.end(),
                                                         [&](const Instance& inst) {
                                                           return inst.identity && *inst.identity == *query.identity;
                                                         });
    (has_match ? positives : negatives).push_back(scene);
  }
  if (positives.size() + negatives.size() < gallery_size) {
    throw ConfigError("gallery size " + std::to_string(gallery_size) + " exceeds the " +
                      std::to_string(positives.size() + negatives.size()) + " scenes available to query '" +
                      query.instance_id + "'");
  }
  Rng rng(derive_seed(seed, "gallery/" + query.instance_id));
  std::shuffle(positives.begin(), positives.end(), rng);
  std::shuffle(negatives.begin(), negatives.end(), rng);
  std::vector<const Scene*> out(positives.begin(), positives.begin() + std::min(positives.size(), gallery_size));
  for (std::size_t i = 0; out.size() < gallery_size; ++i) out.push_back(negatives[i]);
  return out;
}

EvalReport evaluate(const Dataset& ds, std::span<const Instance* const> queries, std::span<const Scene* const> pool,
                    const Scorer& scorer, std::size_t gallery_size, std::uint64_t seed) {
  EvalReport report;
  report.scorer = scorer.name();
  report.gallery_size = gallery_size;
  double ap_total = 0.0;
  std::size_t hits = 0;
  for (const Instance* query : queries) {
    const auto gallery = sample_gallery(ds, *query, pool, gallery_size, seed);
    const auto scores = scorer.score(*query, ds.scene_of(*query), gallery);
    const RankedResult ranked = rank_gallery(*query, gallery, scores);
    const auto relevance = ranked.relevance();
    QueryResult qr;
    qr.query_id = query->instance_id;
    qr.num_candidates = relevance.size();
    qr.num_relevant = static_cast<std::size_t>(std::count(relevance.begin(), relevance.end(), true));
    const auto ap = average_precision(relevance);
    if (!ap) {
      qr.excluded = true;
      ++report.excluded_queries;
    } else {
      qr.ap = *ap;
      qr.top1 = relevance.front();
      ap_total += qr.ap;
      hits += qr.top1 ? 1 : 0;
      ++report.num_queries;
    }
    report.queries.push_back(std::move(qr));
  }
  if (report.num_queries > 0) {
    report.map = ap_total / static_cast<double>(report.num_queries);
    report.top1 = static_cast<double>(hits) / static_cast<double>(report.num_queries);
  }
  return report;
}

std::vector<EvalReport> gallery_sweep(const Dataset& ds, std::span<const Instance* const> queries,
                                      std::span<const Scene* const> pool, const Scorer& scorer,
                                      std::span<const std::size_t> sizes, std::uint64_t seed) {
  if (sizes.empty()) throw ConfigError("gallery sweep needs at least one size");
  std::vector<EvalReport> out;
  out.reserve(sizes.size());
  for (std::size_t size : sizes) out.push_back(evaluate(ds, queries, pool, scorer, size, seed));
  return out;
}

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << kReportCsvHeader << '\n';
  for (const EvalReport& r : reports) {
    out << fmt::format("{},{},{:.6f},{:.6f},{},{}\n", r.scorer, r.gallery_size, r.map, r.top1, r.num_queries,
                       r.excluded_queries);
  }
}

void write_per_query_csv(std::ostream& out, const EvalReport& report) {
  out << "query_id,ap,top1,num_relevant,num_candidates,excluded\n";
  for (const QueryResult& q : report.queries) {
    out << fmt::format("{},{:.6f},{},{},{},{}\n", q.query_id, q.ap, q.top1 ? 1 : 0, q.num_relevant, q.num_candidates,
                       q.excluded ? 1 : 0);
  }
}

}  // namespace ctxrr
