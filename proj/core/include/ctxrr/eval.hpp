#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxrr/dataset.hpp"
#include "ctxrr/scoring.hpp"

namespace ctxrr {

// Mean of precision@k over the ranks k of relevant entries. Returns nullopt
// when nothing is relevant (the query is then counted as excluded).
std::optional<double> average_precision(std::span<const bool> relevance);
std::optional<double> average_precision(const std::vector<bool>& relevance);

struct RankedEntry {
  const Instance* gallery = nullptr;
  double score = 0.0;
  bool relevant = false;
};

struct RankedResult {
  const Instance* query = nullptr;
  // Score descending, ties by instance_id ascending.
  std::vector<RankedEntry> ranked;

  std::vector<bool> relevance() const;
};

// Ranks all instances of `gallery` under `scores` (scores[i][j] for
// gallery[i]->instances[j]); relevance is identity equality with the query.
RankedResult rank_gallery(const Instance& query, std::span<const Scene* const> gallery,
                          const std::vector<std::vector<double>>& scores);

struct QueryResult {
  std::string query_id;
  double ap = 0.0;
  bool top1 = false;
  std::size_t num_relevant = 0;
  std::size_t num_candidates = 0;
  bool excluded = false;
};

struct EvalReport {
  std::string scorer;
  std::size_t gallery_size = 0;
  double map = 0.0;
  double top1 = 0.0;
  std::size_t num_queries = 0;  // queries with at least one relevant entry
  std::size_t excluded_queries = 0;
  std::vector<QueryResult> queries;
  // Detections are ground-truth boxes, so the IoU >= 0.5 matching rule holds
  // trivially.
  std::string iou_criterion = "ground-truth boxes";
};

// One query per labeled identity of `split`: its first instance in scene
// order.
std::vector<const Instance*> make_queries(const Dataset& ds, std::string_view split);

// The query's gallery: every pool scene holding the query identity (other
// than the query's own scene) plus negative scenes taken in a fixed order
// seeded by (seed, query id), up to `gallery_size` scenes. Galleries of
// different sizes for one query are therefore nested. Throws ConfigError
// when the pool holds fewer than `gallery_size` scenes besides the query's.
std::vector<const Scene*> sample_gallery(const Dataset& ds, const Instance& query,
                                         std::span<const Scene* const> pool, std::size_t gallery_size,
                                         std::uint64_t seed);

EvalReport evaluate(const Dataset& ds, std::span<const Instance* const> queries, std::span<const Scene* const> pool,
                    const Scorer& scorer, std::size_t gallery_size, std::uint64_t seed);

std::vector<EvalReport> gallery_sweep(const Dataset& ds, std::span<const Instance* const> queries,
                                      std::span<const Scene* const> pool, const Scorer& scorer,
                                      std::span<const std::size_t> sizes, std::uint64_t seed);

inline constexpr std::string_view kReportCsvHeader = "scorer,gallery_size,map,top1,num_queries,excluded_queries";

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports);
void write_per_query_csv(std::ostream& out, const EvalReport& report);

}  // namespace ctxrr
