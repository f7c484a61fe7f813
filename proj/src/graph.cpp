#include "sgc/graph.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

static_assert(std::endian::native == std::endian::little,
              "graph files assume a little-endian host");

namespace sgc {

namespace fs = std::filesystem;

namespace {

// (score desc, id asc) ordering used for neighbor lists and rankings.
struct Ranked {
  double score;
  Index node;
  bool operator<(const Ranked& o) const {
    if (score != o.score) return score > o.score;
    return node < o.node;
  }
};

std::vector<std::string> build_scan_table(std::span<const SgcDescriptor> corpus,
                                          std::vector<std::int32_t>& scan_of) {
  std::vector<std::string> table;
  std::unordered_map<std::string, std::int32_t> lookup;
  scan_of.resize(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto [it, inserted] = lookup.try_emplace(corpus[i].scan_id, std::int32_t(table.size()));
    if (inserted) table.push_back(corpus[i].scan_id);
    scan_of[i] = it->second;
  }
  return table;
}

int log2_probes(Index n) { return std::max(1, int(std::ceil(std::log2(double(std::max<Index>(2, n)))))); }

// Reverse adjacency in CSR form, ordered by source id.
void rebuild_reverse_adjacency(DescriptorGraph& graph) {
  const Index n = graph.node_count();
  graph.reverse_offsets.assign(std::size_t(n) + 1, 0);
  for (std::int32_t j : graph.neighbors) ++graph.reverse_offsets[std::size_t(j) + 1];
  for (Index i = 0; i < n; ++i)
    graph.reverse_offsets[std::size_t(i) + 1] += graph.reverse_offsets[std::size_t(i)];
  graph.reverse_neighbors.resize(graph.neighbors.size());
  std::vector<std::int64_t> cursor(graph.reverse_offsets.begin(), graph.reverse_offsets.end() - 1);
  for (Index i = 0; i < n; ++i)
    for (std::int32_t j : graph.neighbors_of(i))
      graph.reverse_neighbors[std::size_t(cursor[std::size_t(j)]++)] = std::int32_t(i);
}

}  // namespace

void DescriptorGraph::check() const {
  const Index n = node_count();
  require(k >= 1 && neighbors.size() == std::size_t(n) * std::size_t(k),
          "DescriptorGraph: bad edge storage");
  std::vector<std::int32_t> observed(std::size_t(n), 0);
  for (Index i = 0; i < n; ++i) {
    std::vector<std::int32_t> seen(neighbors_of(i).begin(), neighbors_of(i).end());
    std::sort(seen.begin(), seen.end());
    require(std::adjacent_find(seen.begin(), seen.end()) == seen.end(),
            "DescriptorGraph: duplicate out-neighbor");
    for (std::int32_t j : seen) {
      require(j >= 0 && j < n, "DescriptorGraph: neighbor id out of range");
      require(j != i, "DescriptorGraph: self edge");
      ++observed[std::size_t(j)];
    }
  }
  for (Index i = 0; i < n; ++i)
    require(observed[std::size_t(i)] == indegree[std::size_t(i)],
            "DescriptorGraph: stored indegree disagrees with edges");
}

DescriptorGraph brute_force_knn(std::span<const SgcDescriptor> corpus, int k, int threads) {
  const Index n = static_cast<Index>(corpus.size());
  require(k >= 1, "brute_force_knn: k must be >= 1");
  require(n > k, "brute_force_knn: corpus must hold more than k descriptors");

  DescriptorGraph graph;
  graph.k = k;
  graph.scan_ids = build_scan_table(corpus, graph.scan_of);
  graph.neighbors.resize(std::size_t(n) * std::size_t(k));
  graph.scores.resize(std::size_t(n) * std::size_t(k));

  parallel_for(
      n,
      [&](Index i) {
        std::vector<Ranked> row;
        row.reserve(std::size_t(n - 1));
        for (Index j = 0; j < n; ++j) {
          if (j == i) continue;
          row.push_back({descriptor_similarity(corpus[std::size_t(i)], corpus[std::size_t(j)]), j});
        }
        std::partial_sort(row.begin(), row.begin() + k, row.end());
        for (int s = 0; s < k; ++s) {
          graph.neighbors[std::size_t(i) * k + s] = std::int32_t(row[std::size_t(s)].node);
          graph.scores[std::size_t(i) * k + s] = row[std::size_t(s)].score;
        }
      },
      threads);

  compute_saliency(graph);
  return graph;
}

DescriptorGraph build_graph(std::span<const SgcDescriptor> corpus, const SaliencyParams& params,
                            int threads) {
  params.validate();
  const Index n = static_cast<Index>(corpus.size());
  const int k = params.k;
  require(n > k, "build_graph: corpus must hold more than k descriptors");

  DescriptorGraph graph;
  graph.k = k;
  graph.scan_ids = build_scan_table(corpus, graph.scan_of);
  graph.neighbors.resize(std::size_t(n) * std::size_t(k));
  graph.scores.resize(std::size_t(n) * std::size_t(k));

  // Random initial edge lists, scored in parallel (slots are independent).
  parallel_for(
      n,
      [&](Index i) {
        Rng rng = Rng::derive(params.seed, 0x11, std::uint64_t(i));
        auto picks = rng.sample_without_replacement(n - 1, k);
        for (int s = 0; s < k; ++s) {
          Index j = picks[std::size_t(s)];
          if (j >= i) ++j;  // skip self
          graph.neighbors[std::size_t(i) * k + s] = std::int32_t(j);
          graph.scores[std::size_t(i) * k + s] =
              descriptor_similarity(corpus[std::size_t(i)], corpus[std::size_t(j)]);
        }
      },
      threads);

  // Propagation rounds: the edge lists are shared state read while being
  // improved, so rounds run single-writer in node order for determinism.
  // Candidates come from the two-hop neighborhood over both edge directions
  // (NN-descent style); reverse lists are rebuilt once per round and capped
  // at k entries per node to bound the join.
  const int probes = log2_probes(n);
  std::vector<std::uint32_t> stamp(std::size_t(n), 0);
  std::uint32_t stamp_id = 0;
  std::vector<Index> candidates;
  std::vector<std::vector<std::int32_t>> reverse(static_cast<std::size_t>(n));
  std::vector<Index> hop_one;
  for (int round = 0; round < params.build_iterations; ++round) {
    for (auto& r : reverse) r.clear();
    for (Index i = 0; i < n; ++i)
      for (std::int32_t j : graph.neighbors_of(i))
        if (reverse[std::size_t(j)].size() < std::size_t(k))
          reverse[std::size_t(j)].push_back(std::int32_t(i));

    for (Index i = 0; i < n; ++i) {
      ++stamp_id;
      auto nbrs = [&](Index node) {
        return std::span<const std::int32_t>(graph.neighbors.data() + node * k, std::size_t(k));
      };
      stamp[std::size_t(i)] = stamp_id;
      for (std::int32_t j : nbrs(i)) stamp[std::size_t(j)] = stamp_id;  // skip current edges

      hop_one.clear();
      for (std::int32_t j : nbrs(i)) hop_one.push_back(j);
      for (std::int32_t j : reverse[std::size_t(i)])
        if (j != i) hop_one.push_back(j);

      candidates.clear();
      for (Index j : hop_one) {
        if (stamp[std::size_t(j)] != stamp_id) {
          stamp[std::size_t(j)] = stamp_id;
          candidates.push_back(j);
        }
        for (std::int32_t l : nbrs(j))
          if (stamp[std::size_t(l)] != stamp_id) {
            stamp[std::size_t(l)] = stamp_id;
            candidates.push_back(l);
          }
        for (std::int32_t l : reverse[std::size_t(j)])
          if (stamp[std::size_t(l)] != stamp_id) {
            stamp[std::size_t(l)] = stamp_id;
            candidates.push_back(l);
          }
      }
      Rng rng = Rng::derive(params.seed, 0x12, std::uint64_t(round) * std::uint64_t(n) + std::uint64_t(i));
      for (int p = 0; p < probes; ++p) {
        const Index c = static_cast<Index>(rng.uniform_index(std::uint64_t(n)));
        if (stamp[std::size_t(c)] != stamp_id) {
          stamp[std::size_t(c)] = stamp_id;
          candidates.push_back(c);
        }
      }

      double* row_scores = graph.scores.data() + i * k;
      std::int32_t* row_nodes = graph.neighbors.data() + i * k;
      for (Index c : candidates) {
        const double s = descriptor_similarity(corpus[std::size_t(i)], corpus[std::size_t(c)]);
        int worst = 0;
        for (int t = 1; t < k; ++t) {
          if (row_scores[t] < row_scores[worst] ||
              (row_scores[t] == row_scores[worst] && row_nodes[t] > row_nodes[worst]))
            worst = t;
        }
        if (s > row_scores[worst]) {
          row_scores[worst] = s;
          row_nodes[worst] = std::int32_t(c);
        }
      }
    }
  }

  // Canonical neighbor order.
  for (Index i = 0; i < n; ++i) {
    std::array<Ranked, 64> buffer;  // k is small; spill to heap if ever larger
    std::vector<Ranked> heap_row;
    Ranked* row = buffer.data();
    if (k > int(buffer.size())) {
      heap_row.resize(std::size_t(k));
      row = heap_row.data();
    }
    for (int s = 0; s < k; ++s)
      row[s] = {graph.scores[std::size_t(i) * k + s], graph.neighbors[std::size_t(i) * k + s]};
    std::sort(row, row + k);
    for (int s = 0; s < k; ++s) {
      graph.scores[std::size_t(i) * k + s] = row[s].score;
      graph.neighbors[std::size_t(i) * k + s] = std::int32_t(row[s].node);
    }
  }

  compute_saliency(graph);
  return graph;
}

void compute_saliency(DescriptorGraph& graph) {
  const Index n = graph.node_count();
  require(n > 0 && graph.k >= 1, "compute_saliency: empty graph");
  graph.indegree.assign(std::size_t(n), 0);
  for (std::int32_t j : graph.neighbors) ++graph.indegree[std::size_t(j)];

  std::int64_t sum = 0;
  Index positive = 0;
  for (std::int32_t d : graph.indegree) {
    if (d > 0) {
      sum += d;
      ++positive;
    }
  }
  require(positive > 0, "compute_saliency: no node has positive indegree");
  graph.mean_indegree = double(sum) / double(positive);

  graph.saliency.resize(std::size_t(n));
  for (Index i = 0; i < n; ++i)
    graph.saliency[std::size_t(i)] =
        1.0 / (1.0 + std::exp(double(graph.indegree[std::size_t(i)]) - graph.mean_indegree));

  rebuild_reverse_adjacency(graph);
}

double graph_recall(const DescriptorGraph& graph, const DescriptorGraph& reference) {
  require(graph.node_count() == reference.node_count() && graph.k == reference.k,
          "graph_recall: graphs are not comparable");
  const Index n = graph.node_count();
  double total = 0.0;
  std::vector<std::int32_t> truth;
  for (Index i = 0; i < n; ++i) {
    truth.assign(reference.neighbors_of(i).begin(), reference.neighbors_of(i).end());
    std::sort(truth.begin(), truth.end());
    Index hits = 0;
    for (std::int32_t j : graph.neighbors_of(i))
      if (std::binary_search(truth.begin(), truth.end(), j)) ++hits;
    total += double(hits) / double(graph.k);
  }
  return total / double(n);
}

namespace {

bool node_allowed(const DescriptorGraph& graph, const SgcDescriptor& query,
                  const QueryFilter& filter, Index node) {
  if (filter.exclude_query_scan && graph.scan_id_of(node) == query.scan_id) return false;
  if (filter.allowed_scans) {
    const auto scan = std::size_t(graph.scan_of[std::size_t(node)]);
    if (scan >= filter.allowed_scans->size() || !(*filter.allowed_scans)[scan]) return false;
  }
  return true;
}

void finalize_hits(std::vector<QueryHit>& hits, const DescriptorGraph& graph, double alpha,
                   bool rerank) {
  for (QueryHit& h : hits)
    h.enhanced_score =
        enhanced_similarity(h.raw_score, graph.saliency[std::size_t(h.node)], alpha);
  if (rerank) {
    std::stable_sort(hits.begin(), hits.end(), [](const QueryHit& a, const QueryHit& b) {
      if (a.enhanced_score != b.enhanced_score) return a.enhanced_score > b.enhanced_score;
      return a.node < b.node;
    });
  }
}

}  // namespace

std::vector<QueryHit> graph_query(const DescriptorGraph& graph,
                                  std::span<const SgcDescriptor> corpus,
                                  const SgcDescriptor& query, const SaliencyParams& params,
                                  std::uint64_t query_key, const QueryFilter& filter) {
  params.validate();
  const Index n = graph.node_count();
  require(n > 0, "graph_query: empty graph");
  require(std::size_t(n) == corpus.size(), "graph_query: corpus does not match graph");
  require(!graph.saliency.empty(), "graph_query: saliency not computed");

  Rng rng = Rng::derive(params.seed, 0x21, query_key);
  std::vector<char> visited(std::size_t(n), 0);
  std::vector<char> expanded(std::size_t(n), 0);
  std::vector<Ranked> pool;  // kept sorted, capped at query_pool
  const std::size_t cap = std::size_t(params.query_pool);

  auto evaluate = [&](Index node) {
    if (visited[std::size_t(node)]) return;
    visited[std::size_t(node)] = 1;
    if (!node_allowed(graph, query, filter, node)) return;
    const Ranked entry{descriptor_similarity(query, corpus[std::size_t(node)]), node};
    const auto pos = std::lower_bound(pool.begin(), pool.end(), entry);
    if (pool.size() < cap) {
      pool.insert(pos, entry);
    } else if (pos != pool.end()) {
      pool.insert(pos, entry);
      pool.pop_back();
    }
  };

  for (int s = 0; s < params.query_seeds; ++s)
    evaluate(static_cast<Index>(rng.uniform_index(std::uint64_t(n))));

  const int probes = log2_probes(n);
  for (int round = 0; round < params.query_iterations; ++round) {
    // Expand the best not-yet-expanded candidates through their out-edges.
    std::array<Index, 64> beam;
    int beam_size = 0;
    for (const Ranked& r : pool) {
      if (expanded[std::size_t(r.node)]) continue;
      beam[std::size_t(beam_size++)] = r.node;
      if (beam_size == std::min(params.query_beam, 64)) break;
    }
    for (int b = 0; b < beam_size; ++b) {
      expanded[std::size_t(beam[std::size_t(b)])] = 1;
      for (std::int32_t o : graph.neighbors_of(beam[std::size_t(b)])) evaluate(o);
      // Reverse edges keep nodes with few in-links reachable.
      for (std::int32_t o : graph.reverse_neighbors_of(beam[std::size_t(b)])) evaluate(o);
    }
    for (int p = 0; p < probes; ++p)
      evaluate(static_cast<Index>(rng.uniform_index(std::uint64_t(n))));
  }

  std::vector<QueryHit> hits;
  hits.reserve(pool.size());
  for (const Ranked& r : pool) hits.push_back({r.node, r.score, 0.0});
  finalize_hits(hits, graph, params.alpha, params.rerank);
  return hits;
}

std::vector<QueryHit> exhaustive_query(const DescriptorGraph& graph,
                                       std::span<const SgcDescriptor> corpus,
                                       const SgcDescriptor& query, Index top_n,
                                       const QueryFilter& filter) {
  const Index n = graph.node_count();
  require(n > 0, "exhaustive_query: empty graph");
  require(std::size_t(n) == corpus.size(), "exhaustive_query: corpus does not match graph");
  require(top_n >= 1, "exhaustive_query: top_n must be >= 1");

  std::vector<Ranked> ranking;
  ranking.reserve(std::size_t(n));
  for (Index j = 0; j < n; ++j) {
    if (!node_allowed(graph, query, filter, j)) continue;
    ranking.push_back({descriptor_similarity(query, corpus[std::size_t(j)]), j});
  }
  const std::size_t keep = std::min(std::size_t(top_n), ranking.size());
  std::partial_sort(ranking.begin(), ranking.begin() + std::ptrdiff_t(keep), ranking.end());
  ranking.resize(keep);

  std::vector<QueryHit> hits;
  hits.reserve(keep);
  for (const Ranked& r : ranking) hits.push_back({r.node, r.score, 0.0});
  finalize_hits(hits, graph, 0.0, false);  // exhaustive mode ranks by raw score
  return hits;
}

void save_graph(const DescriptorGraph& graph, const fs::path& path) {
  const Index n = graph.node_count();
  require(n > 0, "save_graph: empty graph");
  require(!graph.saliency.empty(), "save_graph: saliency not computed");

  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(path.string() + ": cannot open for writing");
    out.write("SGCG", 4);
    const std::uint32_t k32 = std::uint32_t(graph.k);
    const std::uint64_t n64 = std::uint64_t(n);
    out.write(reinterpret_cast<const char*>(&k32), 4);
    out.write(reinterpret_cast<const char*>(&n64), 8);
    const std::uint32_t scans = std::uint32_t(graph.scan_ids.size());
    out.write(reinterpret_cast<const char*>(&scans), 4);
    for (const std::string& id : graph.scan_ids) {
      require(id.size() <= 0xffff, "save_graph: scan id too long");
      const std::uint16_t len = std::uint16_t(id.size());
      out.write(reinterpret_cast<const char*>(&len), 2);
      out.write(id.data(), std::streamsize(id.size()));
    }
    for (Index i = 0; i < n; ++i) {
      out.write(reinterpret_cast<const char*>(&graph.scan_of[std::size_t(i)]), 4);
      for (int s = 0; s < graph.k; ++s) {
        out.write(reinterpret_cast<const char*>(&graph.neighbors[std::size_t(i) * graph.k + s]), 4);
        out.write(reinterpret_cast<const char*>(&graph.scores[std::size_t(i) * graph.k + s]), 8);
      }
      out.write(reinterpret_cast<const char*>(&graph.indegree[std::size_t(i)]), 4);
      out.write(reinterpret_cast<const char*>(&graph.saliency[std::size_t(i)]), 8);
    }
    if (!out) fail(path.string() + ": write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(path.string() + ": rename failed: " + ec.message());
  }
}

DescriptorGraph load_graph(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path.string() + ": cannot open for reading");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SGCG", 4) != 0)
    fail(path.string() + ": not a graph file (bad magic)");

  auto read_raw = [&](void* dst, std::size_t bytes) {
    in.read(reinterpret_cast<char*>(dst), std::streamsize(bytes));
    if (!in) fail(path.string() + ": truncated graph file");
  };

  DescriptorGraph graph;
  std::uint32_t k32 = 0;
  std::uint64_t n64 = 0;
  read_raw(&k32, 4);
  read_raw(&n64, 8);
  graph.k = int(k32);
  std::uint32_t scans = 0;
  read_raw(&scans, 4);
  graph.scan_ids.resize(scans);
  for (std::string& id : graph.scan_ids) {
    std::uint16_t len = 0;
    read_raw(&len, 2);
    id.resize(len);
    if (len > 0) read_raw(id.data(), len);
  }
  const Index n = Index(n64);
  graph.scan_of.resize(std::size_t(n));
  graph.neighbors.resize(std::size_t(n) * k32);
  graph.scores.resize(std::size_t(n) * k32);
  graph.indegree.resize(std::size_t(n));
  graph.saliency.resize(std::size_t(n));
  for (Index i = 0; i < n; ++i) {
    read_raw(&graph.scan_of[std::size_t(i)], 4);
    for (std::uint32_t s = 0; s < k32; ++s) {
      read_raw(&graph.neighbors[std::size_t(i) * k32 + s], 4);
      read_raw(&graph.scores[std::size_t(i) * k32 + s], 8);
    }
    read_raw(&graph.indegree[std::size_t(i)], 4);
    read_raw(&graph.saliency[std::size_t(i)], 8);
  }

  // Mean indegree and reverse adjacency are derivable; recompute instead of
  // trusting the file.
  std::int64_t sum = 0;
  Index positive = 0;
  for (std::int32_t d : graph.indegree) {
    if (d > 0) {
      sum += d;
      ++positive;
    }
  }
  require(positive > 0, path.string() + ": graph has no positive indegree");
  graph.mean_indegree = double(sum) / double(positive);
  rebuild_reverse_adjacency(graph);
  return graph;
}

}  // namespace sgc
