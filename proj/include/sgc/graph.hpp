#pragma once

#include "sgc/descriptor.hpp"

#include <filesystem>

namespace sgc {

/// Parameters for descriptor-graph construction and queries.
struct SaliencyParams {
  int k = 16;                // out-degree per node
  double alpha = 0.2;        // weight of saliency in the enhanced score
  int build_iterations = 8;  // propagation rounds while building
  int query_seeds = 16;      // random entry nodes per query
  int query_iterations = 4;  // propagation rounds per query
  int query_beam = 8;        // best candidates expanded per round
  int query_pool = 32;       // candidates kept for re-ranking
  bool rerank = true;        // order results by the saliency-enhanced score
  std::uint64_t seed = 0;

  void validate() const {
    require(k >= 1, "SaliencyParams: k must be >= 1");
    require(alpha >= 0.0, "SaliencyParams: alpha must be >= 0");
    require(build_iterations >= 0 && query_iterations >= 0,
            "SaliencyParams: iteration counts must be >= 0");
    require(query_seeds >= 1 && query_beam >= 1 && query_pool >= 1,
            "SaliencyParams: query sizes must be >= 1");
  }
};

/// Directed k-NN graph over a descriptor corpus. Node i's out-neighbors are
/// stored flat at [i*k, (i+1)*k) together with their cached similarity
/// scores, ordered by (score desc, id asc). Nodes reference the corpus by
/// position; the graph does not own descriptors. Immutable after
/// construction; queries are read-only and safe to run concurrently.
struct DescriptorGraph {
  int k = 0;
  std::vector<std::int32_t> neighbors;
  std::vector<double> scores;
  std::vector<std::int32_t> indegree;
  double mean_indegree = 0.0;  // over nodes with indegree > 0
  std::vector<double> saliency;
  std::vector<std::string> scan_ids;    // string table
  std::vector<std::int32_t> scan_of;    // per node, index into scan_ids
  // Reverse adjacency (CSR layout), derived from the edges; queries walk
  // edges in both directions so that weakly referenced nodes stay reachable.
  std::vector<std::int64_t> reverse_offsets;
  std::vector<std::int32_t> reverse_neighbors;

  Index node_count() const { return static_cast<Index>(scan_of.size()); }
  std::span<const std::int32_t> neighbors_of(Index i) const {
    return {neighbors.data() + i * k, std::size_t(k)};
  }
  std::span<const double> scores_of(Index i) const {
    return {scores.data() + i * k, std::size_t(k)};
  }
  std::span<const std::int32_t> reverse_neighbors_of(Index i) const {
    const auto begin = std::size_t(reverse_offsets[std::size_t(i)]);
    const auto end = std::size_t(reverse_offsets[std::size_t(i) + 1]);
    return {reverse_neighbors.data() + begin, end - begin};
  }
  const std::string& scan_id_of(Index i) const {
    return scan_ids[std::size_t(scan_of[std::size_t(i)])];
  }

  /// Structural invariants: degree, no self-edges, indegree consistency.
  void check() const;
};

/// Exact k-NN graph by exhaustive search; the oracle the randomized build is
/// measured against. Ties go to the lower node id. Requires corpus size > k.
DescriptorGraph brute_force_knn(std::span<const SgcDescriptor> corpus, int k, int threads = 0);

/// Randomized k-NN graph: neighbor lists start random and improve over
/// build_iterations rounds of similarity propagation plus ceil(log2 N)
/// random probes per node and round. Propagation candidates are drawn from
/// the two-hop neighborhood over both edge directions (forward-only
/// propagation stalls well below exact-graph recall). Deterministic per
/// seed. Indegrees and saliency are computed on the finished edges.
DescriptorGraph build_graph(std::span<const SgcDescriptor> corpus, const SaliencyParams& params,
                            int threads = 0);

/// Recomputes indegrees, the mean positive indegree, per-node saliency
/// sali_i = 1 / (1 + exp(I_i - mean)), and the reverse adjacency.
void compute_saliency(DescriptorGraph& graph);

/// Saliency-weighted score sali^alpha * s.
inline double enhanced_similarity(double s, double saliency, double alpha) {
  return std::pow(saliency, alpha) * s;
}

/// Mean fraction of true k-nearest neighbors present in `graph`'s edge lists.
double graph_recall(const DescriptorGraph& graph, const DescriptorGraph& reference);

struct QueryHit {
  Index node = -1;
  double raw_score = 0.0;
  double enhanced_score = 0.0;
};

struct QueryFilter {
  /// Drop nodes whose scan id equals the query descriptor's scan id.
  bool exclude_query_scan = false;
  /// When set, only nodes whose scan index maps to true are eligible.
  const std::vector<char>* allowed_scans = nullptr;
};

/// Approximate best-match search: seeds random entry nodes, then expands the
/// best candidates through their out-edges plus random restarts for
/// query_iterations rounds, scoring with raw descriptor similarity. The
/// final pool is ordered by the saliency-enhanced score (or by raw score
/// when params.rerank is false). Deterministic for a fixed (seed, query_key).
std::vector<QueryHit> graph_query(const DescriptorGraph& graph,
                                  std::span<const SgcDescriptor> corpus,
                                  const SgcDescriptor& query, const SaliencyParams& params,
                                  std::uint64_t query_key = 0, const QueryFilter& filter = {});

/// Exact ranking of every eligible node by raw similarity, truncated to
/// top_n. The oracle for graph_query and the exhaustive CMC mode.
std::vector<QueryHit> exhaustive_query(const DescriptorGraph& graph,
                                       std::span<const SgcDescriptor> corpus,
                                       const SgcDescriptor& query, Index top_n,
                                       const QueryFilter& filter = {});

/// Graph container, binary little-endian, magic "SGCG":
///   magic | u32 k | u64 N | u32 scan count | scan ids (u16 length + bytes)
///   per node: u32 scan index | k x (u32 neighbor, f64 score) | u32 indegree
///             | f64 saliency
void save_graph(const DescriptorGraph& graph, const std::filesystem::path& path);
DescriptorGraph load_graph(const std::filesystem::path& path);

}  // namespace sgc
