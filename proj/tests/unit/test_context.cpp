#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "ctxrr/context.hpp"
#include "ctxrr/errors.hpp"
#include "test_util.hpp"

namespace ctxrr {
namespace {

using testing::make_scene;

// Scores looked up by (probe ctx id, gallery ctx id).
PairScorer table_scorer(std::map<std::pair<std::string, std::string>, double> table) {
  return [table = std::move(table)](const Instance& p, const Instance& g) {
    return table.at({p.instance_id, g.instance_id});
  };
}

// Repeatedly scans every candidate for the best one whose two members are
// still free.
std::vector<std::pair<std::size_t, std::size_t>> greedy_oracle(const std::vector<std::vector<double>>& s,
                                                               std::size_t k) {
  const std::size_t n = s.size(), m = s[0].size();
  std::vector<bool> used_p(n), used_g(m);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  while (out.size() < k) {
    bool found = false;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (used_p[i] || used_g[j]) continue;
        if (!found || s[i][j] > s[bi][bj]) {
          bi = i;
          bj = j;
          found = true;
        }
      }
    }
    if (!found) break;
    used_p[bi] = used_g[bj] = true;
    out.emplace_back(bi, bj);
  }
  return out;
}

TEST(Candidates, CrossProductOfOtherInstances) {
  Rng rng(1);
  const Scene p = make_scene("p", {0, 1, 2, 3}, 4, rng);
  const Scene g = make_scene("g", {0, 4, 5}, 4, rng);
  const auto c = enumerate_candidates(p, p.instances[0], g, g.instances[0]);
  ASSERT_EQ(c.size(), 6u);
  EXPECT_EQ(c.front().first, &p.instances[1]);
  EXPECT_EQ(c.front().second, &g.instances[1]);
  EXPECT_EQ(c.back().first, &p.instances[3]);
  EXPECT_EQ(c.back().second, &g.instances[2]);
  EXPECT_THROW(enumerate_candidates(p, g.instances[0], g, g.instances[0]), UsageError);
}

TEST(SelectTopK, GreedyExample) {
  Rng rng(2);
  const Scene p = make_scene("p", {0, 1, 2}, 4, rng);
  const Scene g = make_scene("g", {0, 3, 4}, 4, rng);
  const auto c = enumerate_candidates(p, p.instances[0], g, g.instances[0]);
  // (p1,g1) 0.9, (p1,g2) 0.8, (p2,g1) 0.85, (p2,g2) 0.1: after (p1,g1) only
  // (p2,g2) is free, although it scores lowest.
  const auto scorer = table_scorer({{{"p_p1", "g_p1"}, 0.9},
                                    {{"p_p1", "g_p2"}, 0.8},
                                    {{"p_p2", "g_p1"}, 0.85},
                                    {{"p_p2", "g_p2"}, 0.1}});
  const auto top = select_top_k(c, scorer, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].probe_ctx->instance_id, "p_p1");
  EXPECT_EQ(top[0].gallery_ctx->instance_id, "g_p1");
  EXPECT_DOUBLE_EQ(top[0].score, 0.9);
  EXPECT_EQ(top[1].probe_ctx->instance_id, "p_p2");
  EXPECT_EQ(top[1].gallery_ctx->instance_id, "g_p2");
  EXPECT_EQ(select_top_k(c, scorer, 5).size(), 2u);
}

TEST(SelectTopK, SparseCandidateList) {
  Rng rng(8);
  const Scene p = make_scene("p", {0, 1, 2}, 4, rng);
  const Scene g = make_scene("g", {0, 3, 4}, 4, rng);
  const Instance *p1 = &p.instances[1], *p2 = &p.instances[2], *g1 = &g.instances[1], *g2 = &g.instances[2];
  const std::vector<CandidatePair> c{{p1, g1}, {p1, g2}, {p2, g2}};
  const auto top = select_top_k(c, std::vector<double>{0.9, 0.8, 0.7}, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].probe_ctx, p1);
  EXPECT_EQ(top[0].gallery_ctx, g1);
  EXPECT_DOUBLE_EQ(top[0].score, 0.9);
  EXPECT_EQ(top[1].probe_ctx, p2);
  EXPECT_EQ(top[1].gallery_ctx, g2);
  EXPECT_DOUBLE_EQ(top[1].score, 0.7);
  EXPECT_EQ(select_top_k(std::vector<CandidatePair>{{p1, g1}}, std::vector<double>{0.3}, 3).size(), 1u);
}

TEST(SelectTopK, MatchesExhaustiveGreedyOracle) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t np = 1; np <= 4; ++np) {
    for (std::size_t ng = 1; ng <= 4; ++ng) {
      for (int trial = 0; trial < 25; ++trial) {
        std::vector<int> pid(np + 1), gid(ng + 1);
        const Scene p = make_scene("p", pid, 3, rng);
        const Scene g = make_scene("g", gid, 3, rng);
        std::vector<std::vector<double>> s(np, std::vector<double>(ng));
        for (auto& row : s) {
          for (double& v : row) v = u(rng);
        }
        const auto c = enumerate_candidates(p, p.instances[0], g, g.instances[0]);
        std::vector<double> scores;
        for (const auto& [a, b] : c) {
          scores.push_back(s[std::stoul(a->instance_id.substr(3)) - 1][std::stoul(b->instance_id.substr(3)) - 1]);
        }
        for (std::size_t k = 1; k <= 4; ++k) {
          const auto want = greedy_oracle(s, k);
          const auto got = select_top_k(c, scores, k);
          ASSERT_EQ(got.size(), want.size());
          for (std::size_t i = 0; i < want.size(); ++i) {
            EXPECT_EQ(got[i].probe_ctx, &p.instances[want[i].first + 1]);
            EXPECT_EQ(got[i].gallery_ctx, &g.instances[want[i].second + 1]);
          }
        }
      }
    }
  }
}

TEST(SelectTopK, CandidateOrderDoesNotMatter) {
  Rng rng(4);
  const Scene p = make_scene("p", {0, 1, 2, 3, 4}, 4, rng);
  const Scene g = make_scene("g", {0, 5, 6, 7}, 4, rng);
  auto c = enumerate_candidates(p, p.instances[0], g, g.instances[0]);
  // Ties everywhere exercise the id tie-break.
  const PairScorer scorer = [](const Instance& a, const Instance& b) {
    return double((a.instance_id.back() + b.instance_id.back()) % 3);
  };
  const auto base = select_top_k(c, scorer, 3);
  for (int t = 0; t < 20; ++t) {
    std::shuffle(c.begin(), c.end(), rng);
    const auto again = select_top_k(c, scorer, 3);
    ASSERT_EQ(again.size(), base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      EXPECT_EQ(again[i].probe_ctx, base[i].probe_ctx);
      EXPECT_EQ(again[i].gallery_ctx, base[i].gallery_ctx);
    }
  }
}

TEST(Expand, ReplicatesASinglePair) {
  Rng rng(5);
  const Scene p = make_scene("p", {0, 1}, 4, rng);
  const Scene g = make_scene("g", {0, 2}, 4, rng);
  const PairScorer scorer = [](const Instance&, const Instance&) { return 0.5; };
  const auto ep = expand(p, p.instances[0], g, g.instances[0], scorer, 3, 7);
  EXPECT_FALSE(ep.degenerate);
  ASSERT_EQ(ep.contexts.size(), 3u);
  for (const auto& c : ep.contexts) {
    EXPECT_EQ(c.probe_ctx, &p.instances[1]);
    EXPECT_EQ(c.gallery_ctx, &g.instances[1]);
  }
}

TEST(Expand, FillsToKAndIsDeterministic) {
  Rng rng(6);
  const Scene p = make_scene("p", {0, 1, 2}, 4, rng);
  const Scene g = make_scene("g", {0, 3, 4, 5}, 4, rng);
  const PairScorer scorer = [](const Instance& a, const Instance& b) {
    return double(a.instance_id.back() * 7 + b.instance_id.back() % 5);
  };
  const auto a = expand(p, p.instances[0], g, g.instances[0], scorer, 5, 11);
  const auto b = expand(p, p.instances[0], g, g.instances[0], scorer, 5, 11);
  ASSERT_EQ(a.contexts.size(), 5u);
  ASSERT_EQ(b.contexts.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a.contexts[i].probe_ctx, b.contexts[i].probe_ctx);
    EXPECT_EQ(a.contexts[i].gallery_ctx, b.contexts[i].gallery_ctx);
  }
  // Every copy is one of the two matched pairs.
  const auto top = select_top_k(enumerate_candidates(p, p.instances[0], g, g.instances[0]), scorer, 5);
  ASSERT_EQ(top.size(), 2u);
  for (const auto& c : a.contexts) {
    EXPECT_TRUE(std::any_of(top.begin(), top.end(), [&](const ContextPair& t) {
      return t.probe_ctx == c.probe_ctx && t.gallery_ctx == c.gallery_ctx;
    }));
  }
}

TEST(Expand, DegenerateWithoutContext) {
  Rng rng(7);
  const Scene p = make_scene("p", {0}, 4, rng);
  const Scene g = make_scene("g", {0, 1, 2}, 4, rng);
  const PairScorer scorer = [](const Instance&, const Instance&) { return 0.0; };
  const auto ep = expand(p, p.instances[0], g, g.instances[0], scorer, 3, 1);
  EXPECT_TRUE(ep.degenerate);
  EXPECT_TRUE(ep.contexts.empty());
}

}  // namespace
}  // namespace ctxrr
