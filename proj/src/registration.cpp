#include "sgc/registration.hpp"

#include "sgc/boundary.hpp"
#include "sgc/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <unordered_set>

namespace sgc {

RigidTransform transform_from_lrfs(const Lrf& lrf_d, const Lrf& lrf_r) {
  RigidTransform t;
  t.rotation = lrf_r.axes.transpose() * lrf_d.axes;
  t.translation = lrf_r.origin - t.rotation * lrf_d.origin;
  return t;
}

double overlap_ratio(const PointCloud& cloud_d, const PointCloud& cloud_r, const KdTree& tree_r,
                     const RigidTransform& transform, double dist_threshold, int threads) {
  require(dist_threshold > 0.0, "overlap_ratio: distance threshold must be positive");
  require(!cloud_d.empty() && !cloud_r.empty(), "overlap_ratio: empty cloud");
  const double t2 = dist_threshold * dist_threshold;
  std::atomic<Index> hits{0};
  parallel_for(
      cloud_d.size(),
      [&](Index i) {
        const Vec3 moved = transform.apply(cloud_d.point(i));
        if (tree_r.nearest_distance_squared(moved) <= t2) hits.fetch_add(1);
      },
      threads);
  const double denom = double(std::min(cloud_d.size(), cloud_r.size()));
  return std::clamp(double(hits.load()) / denom, 0.0, 1.0);
}

namespace {

// Least-squares rigid fit mapping `src` onto `dst` (Kabsch, SVD based).
RigidTransform fit_rigid(std::span<const Vec3> src, std::span<const Vec3> dst) {
  Vec3 src_mean = Vec3::Zero(), dst_mean = Vec3::Zero();
  for (const Vec3& p : src) src_mean += p;
  for (const Vec3& p : dst) dst_mean += p;
  src_mean /= double(src.size());
  dst_mean /= double(dst.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i)
    h += (src[i] - src_mean) * (dst[i] - dst_mean).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixV() * svd.matrixU().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixV() * flip * svd.matrixU().transpose();
  }
  RigidTransform t;
  t.rotation = r;
  t.translation = dst_mean - r * src_mean;
  return t;
}

}  // namespace

IcpResult icp_refine(const PointCloud& cloud_d, const PointCloud& cloud_r, const KdTree& tree_r,
                     const RigidTransform& initial, int max_iterations, double dist_threshold,
                     double improvement_tol, int threads, const std::vector<char>* exclude_ref) {
  require(initial.is_valid(1e-6), "icp_refine: initial transform is not rigid");
  require(dist_threshold > 0.0, "icp_refine: distance threshold must be positive");
  require(!exclude_ref || exclude_ref->size() == std::size_t(cloud_r.size()),
          "icp_refine: exclusion mask size mismatch");
  const double t2 = dist_threshold * dist_threshold;
  const Index n = cloud_d.size();

  IcpResult result;
  result.transform = initial;

  std::vector<Index> match(static_cast<std::size_t>(n));
  for (int iter = 0; iter < max_iterations; ++iter) {
    // Correspondences under the current transform.
    parallel_for(
        n,
        [&](Index i) {
          const Vec3 moved = result.transform.apply(cloud_d.point(i));
          const Index j = tree_r.nearest_one(moved);
          const bool excluded = exclude_ref && (*exclude_ref)[std::size_t(j)];
          match[std::size_t(i)] =
              (!excluded && (cloud_r.point(j) - moved).squaredNorm() <= t2) ? j : Index(-1);
        },
        threads);

    std::vector<Vec3> src, dst;
    src.reserve(std::size_t(n));
    dst.reserve(std::size_t(n));
    for (Index i = 0; i < n; ++i) {
      if (match[std::size_t(i)] < 0) continue;
      src.push_back(cloud_d.point(i));
      dst.push_back(cloud_r.point(match[std::size_t(i)]));
    }
    if (src.size() < 3) fail("icp_refine: fewer than 3 correspondences");

    const RigidTransform refit = fit_rigid(src, dst);
    double pre_sum = 0.0, post_sum = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      pre_sum += (result.transform.apply(src[i]) - dst[i]).squaredNorm();
      post_sum += (refit.apply(src[i]) - dst[i]).squaredNorm();
    }
    const double pre_rms = std::sqrt(pre_sum / double(src.size()));
    const double post_rms = std::sqrt(post_sum / double(src.size()));

    result.transform = refit;
    result.rms_trace.push_back(post_rms);
    ++result.iterations;
    // The fit never raises the rms on its own pair set, so this improvement
    // is non-negative; it vanishing means the transform stopped moving.
    // Comparing post-fit rms across iterations instead would stall at the
    // noise floor long before geometric convergence.
    if (pre_rms - post_rms < improvement_tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

namespace {

struct PreparedScan {
  const PointCloud* cloud = nullptr;
  const KdTree* tree = nullptr;
  std::vector<SgcDescriptor> descriptors;
};

double percentile(std::vector<double> values, double fraction) {
  require(!values.empty(), "percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = fraction * double(values.size() - 1);
  const std::size_t lo = std::size_t(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - double(lo);
  return values[lo] * (1.0 - w) + values[hi] * w;
}

}  // namespace

RegistrationResult register_pair(const PointCloud& scan_d, const PointCloud& scan_r,
                                 const RegisterConfig& config) {
  require(!scan_d.empty() && !scan_r.empty(), "register_pair: empty scan");
  require(config.feature_count >= 1, "register_pair: feature count must be >= 1");
  require(config.top_candidates >= 1, "register_pair: top candidate count must be >= 1");

  const KdTree tree_d(scan_d.points);
  const KdTree tree_r(scan_r.points);
  const double pr =
      0.5 * (compute_resolution(scan_d, tree_d).pr + compute_resolution(scan_r, tree_r).pr);
  const SgcParams params = SgcParams::from_resolution(pr, config.radius_in_pr,
                                                      config.lrf_factor, config.grid_resolution);

  const auto features_d = uniform_sample(scan_d, tree_d, config.feature_count, config.seed);
  const auto features_r =
      uniform_sample(scan_r, tree_r, config.feature_count, config.seed + 1);
  const auto batch_d = describe_cloud(scan_d, tree_d, features_d, params, config.threads);
  const auto batch_r = describe_cloud(scan_r, tree_r, features_r, params, config.threads);

  RegistrationResult result;
  result.resolution = pr;
  if (batch_d.descriptors.empty() || batch_r.descriptors.empty()) return result;

  // Best reference partner per data descriptor.
  const Index nd = static_cast<Index>(batch_d.descriptors.size());
  const Index nr = static_cast<Index>(batch_r.descriptors.size());
  std::vector<Index> best_ref(std::size_t(nd), -1);
  std::vector<double> best_score(std::size_t(nd), -kInfinity);
  parallel_for(
      nd,
      [&](Index i) {
        const SgcDescriptor& d = batch_d.descriptors[std::size_t(i)];
        double best = -kInfinity;
        Index arg = -1;
        for (Index j = 0; j < nr; ++j) {
          const double s = descriptor_similarity(d, batch_r.descriptors[std::size_t(j)]);
          if (s > best) {
            best = s;
            arg = j;
          }
        }
        best_ref[std::size_t(i)] = arg;
        best_score[std::size_t(i)] = best;
      },
      config.threads);

  result.similarity_threshold =
      config.absolute_threshold
          ? *config.absolute_threshold
          : percentile({best_score.begin(), best_score.end()}, config.threshold_percentile);

  // Percentile mode keeps scores at the threshold (it is one of them); an
  // absolute override demands strictly higher scores.
  std::vector<Index> order;
  for (Index i = 0; i < nd; ++i) {
    const double s = best_score[std::size_t(i)];
    if (config.absolute_threshold ? s > result.similarity_threshold
                                  : s >= result.similarity_threshold)
      order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (best_score[std::size_t(a)] != best_score[std::size_t(b)])
      return best_score[std::size_t(a)] > best_score[std::size_t(b)];
    return a < b;
  });
  if (order.empty()) return result;  // explicit no-match

  const double overlap_dist = config.overlap_distance_in_pr * pr;
  const Index tried = std::min<Index>(config.top_candidates, static_cast<Index>(order.size()));
  for (Index c = 0; c < tried; ++c) {
    const Index i = order[std::size_t(c)];
    const SgcDescriptor& dd = batch_d.descriptors[std::size_t(i)];
    const SgcDescriptor& dr = batch_r.descriptors[std::size_t(best_ref[std::size_t(i)])];
    MatchCandidate cand;
    cand.data_feature = dd.feature_index;
    cand.ref_feature = dr.feature_index;
    cand.score = best_score[std::size_t(i)];
    cand.enhanced_score = cand.score;
    cand.transform = transform_from_lrfs(dd.lrf, dr.lrf);
    cand.overlap =
        overlap_ratio(scan_d, scan_r, tree_r, cand.transform, overlap_dist, config.threads);
    result.candidates.push_back(cand);
  }
  result.candidates_tried = tried;

  // Highest overlap wins; candidates are already in descending score order,
  // so a strict comparison breaks overlap ties toward the higher score.
  std::size_t best_c = 0;
  for (std::size_t c = 1; c < result.candidates.size(); ++c)
    if (result.candidates[c].overlap > result.candidates[best_c].overlap) best_c = c;

  result.found = true;
  result.pre_icp_transform = result.candidates[best_c].transform;
  result.transform = result.pre_icp_transform;
  result.overlap = result.candidates[best_c].overlap;

  if (config.run_icp) {
    // Boundary points of the reference attract the data scan's non-shared
    // region; pairs ending on them are rejected.
    const BoundaryInfo ref_boundary = detect_boundary(scan_r, tree_r, pr, config.threads);
    const IcpResult icp =
        icp_refine(scan_d, scan_r, tree_r, result.pre_icp_transform, config.icp_max_iterations,
                   config.icp_distance_in_pr * pr, config.icp_improvement_tol, config.threads,
                   &ref_boundary.is_boundary);
    result.transform = icp.transform;
    result.icp_iterations = icp.iterations;
    result.final_rms = icp.final_rms();
    result.icp_trace = icp.rms_trace;
    result.overlap =
        overlap_ratio(scan_d, scan_r, tree_r, result.transform, overlap_dist, config.threads);
  }
  return result;
}

void write_registration_report(const RegistrationResult& result, const std::string& data_id,
                               const std::string& ref_id, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) fail(path.string() + ": cannot open for writing");
    out << "# sgc registration report\n";
    out << "data: " << data_id << "\n";
    out << "reference: " << ref_id << "\n";
    out << "resolution_pr: " << result.resolution << "\n";
    out << "similarity_threshold: " << result.similarity_threshold << "\n";
    out << "match_found: " << (result.found ? "true" : "false") << "\n";
    out << "candidates_tried: " << result.candidates_tried << "\n";
    out << "candidates:\n";
    out << "  index data_feature ref_feature score overlap\n";
    for (std::size_t c = 0; c < result.candidates.size(); ++c) {
      const MatchCandidate& cand = result.candidates[c];
      out << "  " << c << " " << cand.data_feature << " " << cand.ref_feature << " "
          << cand.score << " " << cand.overlap << "\n";
    }
    if (result.found) {
      out << "overlap: " << result.overlap << "\n";
      out << "transform_row_major:\n";
      const Mat3& r = result.transform.rotation;
      const Vec3& t = result.transform.translation;
      out.precision(17);
      for (int row = 0; row < 3; ++row)
        out << "  " << r(row, 0) << " " << r(row, 1) << " " << r(row, 2) << " " << t[row]
            << "\n";
      out << "  0 0 0 1\n";
      out.precision(6);
      out << "icp_iterations: " << result.icp_iterations << "\n";
      out << "icp_trace:\n";
      for (std::size_t i = 0; i < result.icp_trace.size(); ++i)
        out << "  " << (i + 1) << " " << result.icp_trace[i] << "\n";
    }
    if (!out) fail(path.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    fail(path.string() + ": rename failed: " + ec.message());
  }
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

namespace {

std::uint64_t dedup_key(const Vec3& p, const Vec3& origin, double cell) {
  const auto ix = std::uint64_t(std::int64_t(std::floor((p.x() - origin.x()) / cell)));
  const auto iy = std::uint64_t(std::int64_t(std::floor((p.y() - origin.y()) / cell)));
  const auto iz = std::uint64_t(std::int64_t(std::floor((p.z() - origin.z()) / cell)));
  return (ix & 0x1fffffULL) | ((iy & 0x1fffffULL) << 21) | ((iz & 0x1fffffULL) << 42);
}

}  // namespace

ReconstructionResult reconstruct(std::span<const PointCloud> scans,
                                 const ReconstructConfig& config) {
  const Index n_scans = static_cast<Index>(scans.size());
  require(n_scans >= 2, "reconstruct: need at least 2 scans");
  for (const PointCloud& s : scans) require(!s.empty(), "reconstruct: empty scan");

  // Per-scan preparation: resolution, features, descriptors with unique ids.
  std::vector<KdTree> trees;
  trees.reserve(std::size_t(n_scans));
  double pr_sum = 0.0;
  for (const PointCloud& s : scans) {
    trees.emplace_back(s.points);
    pr_sum += compute_resolution(s, trees.back()).pr;
  }
  const double pr = pr_sum / double(n_scans);
  const SgcParams params =
      SgcParams::from_resolution(pr, config.pairwise.radius_in_pr, config.pairwise.lrf_factor,
                                 config.pairwise.grid_resolution);

  std::vector<SgcDescriptor> corpus;
  std::vector<Index> scan_of_node;
  for (Index s = 0; s < n_scans; ++s) {
    const auto features = uniform_sample(scans[std::size_t(s)], trees[std::size_t(s)],
                                         config.pairwise.feature_count,
                                         config.pairwise.seed + std::uint64_t(s));
    auto batch = describe_cloud(scans[std::size_t(s)], trees[std::size_t(s)], features, params,
                                config.pairwise.threads);
    for (SgcDescriptor& d : batch.descriptors) {
      d.scan_id = "scan" + std::to_string(s);  // unique even for copied inputs
      corpus.push_back(std::move(d));
      scan_of_node.push_back(s);
    }
  }
  require(static_cast<Index>(corpus.size()) > config.graph.k,
          "reconstruct: too few descriptors for the graph");

  DescriptorGraph graph = build_graph(corpus, config.graph, config.pairwise.threads);

  // Cross-scan candidate pools per descriptor, one graph query each.
  const Index n_nodes = static_cast<Index>(corpus.size());
  std::vector<std::vector<QueryHit>> pools(static_cast<std::size_t>(n_nodes));
  parallel_for(
      n_nodes,
      [&](Index i) {
        QueryFilter filter;
        filter.exclude_query_scan = true;
        pools[std::size_t(i)] = graph_query(graph, corpus, corpus[std::size_t(i)], config.graph,
                                            std::uint64_t(i), filter);
      },
      config.pairwise.threads);

  ReconstructionResult result;
  result.poses.resize(std::size_t(n_scans));

  // Seed the merged cloud with the scan on the receiving end of the single
  // strongest cross-scan match.
  Index seed_scan = 0;
  double seed_score = -kInfinity;
  for (Index i = 0; i < n_nodes; ++i) {
    for (const QueryHit& h : pools[std::size_t(i)]) {
      if (h.enhanced_score > seed_score) {
        seed_score = h.enhanced_score;
        seed_scan = scan_of_node[std::size_t(h.node)];
      }
      break;  // pools are ranked; only the best entry matters here
    }
  }
  result.reference_scan = seed_scan;

  std::vector<char> placed(std::size_t(n_scans), 0);
  placed[std::size_t(seed_scan)] = 1;
  result.poses[std::size_t(seed_scan)] = {true, RigidTransform::identity(),
                                          RigidTransform::identity(), 1.0};

  // Growing merged cloud, deduplicated on a pr/2 grid.
  PointCloud merged;
  merged.id = "merged";
  std::unordered_set<std::uint64_t> occupied;
  const double cell = 0.5 * pr;
  const Vec3 dedup_origin = scans[std::size_t(seed_scan)].points.front();
  auto merge_scan = [&](Index s, const RigidTransform& pose) {
    for (const Vec3& p : scans[std::size_t(s)].points) {
      const Vec3 moved = pose.apply(p);
      if (occupied.insert(dedup_key(moved, dedup_origin, cell)).second)
        merged.points.push_back(moved);
    }
  };
  merge_scan(seed_scan, RigidTransform::identity());

  std::vector<char> rejected(std::size_t(n_scans), 0);
  const double overlap_dist = config.pairwise.overlap_distance_in_pr * pr;
  for (;;) {
    KdTree merged_tree(merged.points);

    // Next scan: the unplaced one whose best match into a placed scan has
    // the highest enhanced score.
    Index next = -1;
    double next_score = -kInfinity;
    for (Index s = 0; s < n_scans; ++s) {
      if (placed[std::size_t(s)] || rejected[std::size_t(s)]) continue;
      for (Index i = 0; i < n_nodes; ++i) {
        if (scan_of_node[std::size_t(i)] != s) continue;
        for (const QueryHit& h : pools[std::size_t(i)]) {
          if (!placed[std::size_t(scan_of_node[std::size_t(h.node)])]) continue;
          if (h.enhanced_score > next_score) {
            next_score = h.enhanced_score;
            next = s;
          }
          break;  // best placed-target hit per pool
        }
      }
    }
    if (next < 0) break;

    // Top candidates for this scan, each a pair of LRFs.
    struct Candidate {
      double score;
      Index node;     // data-side descriptor
      Index target;   // placed-side descriptor
    };
    std::vector<Candidate> cands;
    for (Index i = 0; i < n_nodes; ++i) {
      if (scan_of_node[std::size_t(i)] != next) continue;
      for (const QueryHit& h : pools[std::size_t(i)]) {
        if (!placed[std::size_t(scan_of_node[std::size_t(h.node)])]) continue;
        cands.push_back({h.enhanced_score, i, h.node});
        break;
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.node < b.node;
    });
    if (static_cast<Index>(cands.size()) > config.pairwise.top_candidates)
      cands.resize(std::size_t(config.pairwise.top_candidates));

    double best_overlap = -1.0;
    RigidTransform best_transform;
    for (const Candidate& c : cands) {
      const Index target_scan = scan_of_node[std::size_t(c.target)];
      const RigidTransform to_target =
          transform_from_lrfs(corpus[std::size_t(c.node)].lrf, corpus[std::size_t(c.target)].lrf);
      const RigidTransform pose =
          result.poses[std::size_t(target_scan)].transform.compose(to_target);
      const double ov = overlap_ratio(scans[std::size_t(next)], merged, merged_tree, pose,
                                      overlap_dist, config.pairwise.threads);
      if (ov > best_overlap) {
        best_overlap = ov;
        best_transform = pose;
      }
    }

    if (best_overlap < config.min_overlap) {
      rejected[std::size_t(next)] = 1;  // no acceptable match for this scan
      continue;
    }

    ScanPose& pose = result.poses[std::size_t(next)];
    pose.placed = true;
    pose.pre_icp_transform = best_transform;
    pose.transform = best_transform;
    pose.overlap = best_overlap;
    if (config.pairwise.run_icp) {
      try {
        const BoundaryInfo merged_boundary =
            detect_boundary(merged, merged_tree, pr, config.pairwise.threads);
        const IcpResult icp = icp_refine(scans[std::size_t(next)], merged, merged_tree,
                                         best_transform, config.pairwise.icp_max_iterations,
                                         config.pairwise.icp_distance_in_pr * pr,
                                         config.pairwise.icp_improvement_tol,
                                         config.pairwise.threads, &merged_boundary.is_boundary);
        pose.transform = icp.transform;
      } catch (const Error&) {
        // Too few ICP correspondences: keep the candidate transform.
      }
    }
    placed[std::size_t(next)] = 1;
    merge_scan(next, pose.transform);
  }

  for (Index s = 0; s < n_scans; ++s)
    if (!placed[std::size_t(s)]) result.unplaced.push_back(s);
  result.merged = std::move(merged);
  return result;
}

}  // namespace sgc
