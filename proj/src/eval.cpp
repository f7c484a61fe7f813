#include "sgc/eval.hpp"

#include "sgc/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>

namespace sgc {

namespace fs = std::filesystem;

PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma_in_pr, std::uint64_t seed,
                              std::optional<double> pr) {
  require(sigma_in_pr >= 0.0, "add_gaussian_noise: sigma must be >= 0");
  PointCloud out = cloud;
  if (sigma_in_pr == 0.0) return out;
  const double sigma = sigma_in_pr * (pr ? *pr : compute_resolution(cloud).pr);
  Rng rng = Rng::derive(seed, 0x40);
  for (Vec3& p : out.points) p += rng.gaussian3(sigma);
  return out;
}

PointCloud downsample(const PointCloud& cloud, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, "downsample: fraction must be in (0, 1]");
  require(!cloud.empty(), "downsample: empty cloud");
  if (fraction == 1.0) return cloud;
  const Index keep = static_cast<Index>(std::ceil(fraction * double(cloud.size())));
  require(keep >= 1, "downsample: result would be empty");
  Rng rng = Rng::derive(seed, 0x41);
  auto picks = rng.sample_without_replacement(cloud.size(), keep);
  std::sort(picks.begin(), picks.end());
  PointCloud out;
  out.id = cloud.id;
  out.points.reserve(std::size_t(keep));
  for (Index i : picks) out.points.push_back(cloud.point(i));
  if (cloud.has_normals()) {
    out.normals.reserve(std::size_t(keep));
    for (Index i : picks) out.normals.push_back(cloud.normal(i));
  }
  return out;
}

Scene make_scene(std::span<const PointCloud> models, std::span<const RigidTransform> transforms,
                 double tolerance) {
  require(models.size() == transforms.size(), "make_scene: model/transform count mismatch");
  require(!models.empty(), "make_scene: no models");
  Scene scene;
  scene.cloud.id = "scene";
  scene.ground_truth.tolerance = tolerance;
  bool all_normals = true;
  for (const PointCloud& m : models) all_normals = all_normals && m.has_normals();
  for (std::size_t m = 0; m < models.size(); ++m) {
    require(transforms[m].is_valid(1e-6), "make_scene: transform is not rigid");
    const Index begin = scene.cloud.size();
    const PointCloud moved = apply_transform(models[m], transforms[m]);
    scene.cloud.points.insert(scene.cloud.points.end(), moved.points.begin(), moved.points.end());
    if (all_normals)
      scene.cloud.normals.insert(scene.cloud.normals.end(), moved.normals.begin(),
                                 moved.normals.end());
    scene.ground_truth.transforms.push_back(transforms[m]);
    scene.ground_truth.ranges.emplace_back(begin, scene.cloud.size());
  }
  return scene;
}

Scene make_scene(std::span<const PointCloud> models, std::uint64_t seed, double tolerance) {
  require(!models.empty(), "make_scene: no models");
  Rng rng = Rng::derive(seed, 0x42);
  std::vector<RigidTransform> transforms;
  double spread = 0.0;
  for (const PointCloud& m : models) {
    const auto [lo, hi] = bounding_box(m.points);
    spread = std::max(spread, (hi - lo).norm());
  }
  for (std::size_t m = 0; m < models.size(); ++m) {
    RigidTransform t;
    t.rotation = rng.random_rotation();
    t.translation = rng.gaussian3(spread * (models.size() > 1 ? 0.8 : 0.0)) +
                    Vec3(double(m) * spread * 1.5, 0.0, 0.0);
    transforms.push_back(t);
  }
  return make_scene(models, transforms, tolerance);
}

RpCurve rp_curve(const RpInputs& inputs, const GroundTruth& gt,
                 std::span<const double> thresholds, int threads) {
  require(!gt.transforms.empty(), "rp_curve: empty ground truth");
  require(!inputs.model_descriptors.empty() && !inputs.scene_descriptors.empty(),
          "rp_curve: empty feature sets");
  require(inputs.model_descriptors.size() == inputs.model_points.size() &&
              inputs.model_descriptors.size() == inputs.model_of.size(),
          "rp_curve: inconsistent model feature arrays");
  require(inputs.scene_descriptors.size() == inputs.scene_points.size(),
          "rp_curve: inconsistent scene feature arrays");
  const int n_models = int(gt.transforms.size());
  for (int m : inputs.model_of)
    require(m >= 0 && m < n_models, "rp_curve: model index outside ground truth");
  require(gt.tolerance > 0.0, "rp_curve: ground truth tolerance must be positive");

  const Index n_scene = static_cast<Index>(inputs.scene_descriptors.size());
  const Index n_model = static_cast<Index>(inputs.model_descriptors.size());

  // Best model feature per scene feature.
  std::vector<Index> best(std::size_t(n_scene), -1);
  std::vector<double> best_score(std::size_t(n_scene), -kInfinity);
  parallel_for(
      n_scene,
      [&](Index s) {
        const SgcDescriptor& q = inputs.scene_descriptors[std::size_t(s)];
        double bs = -kInfinity;
        Index arg = -1;
        for (Index f = 0; f < n_model; ++f) {
          const double score = descriptor_similarity(q, inputs.model_descriptors[std::size_t(f)]);
          if (score > bs) {
            bs = score;
            arg = f;
          }
        }
        best[std::size_t(s)] = arg;
        best_score[std::size_t(s)] = bs;
      },
      threads);

  // A scene feature is valid when some model feature of some model lies
  // within the tolerance of its ground-truth image; the declared match is
  // correct when that holds for the matched feature itself.
  const double tol2 = gt.tolerance * gt.tolerance;
  std::vector<char> valid(std::size_t(n_scene), 0);
  std::vector<char> correct(std::size_t(n_scene), 0);
  std::vector<RigidTransform> inverses;
  inverses.reserve(gt.transforms.size());
  for (const RigidTransform& t : gt.transforms) inverses.push_back(t.inverse());
  parallel_for(
      n_scene,
      [&](Index s) {
        const Vec3& sp = inputs.scene_points[std::size_t(s)];
        for (Index f = 0; f < n_model; ++f) {
          const int m = inputs.model_of[std::size_t(f)];
          const Vec3 image = inverses[std::size_t(m)].apply(sp);
          if ((image - inputs.model_points[std::size_t(f)]).squaredNorm() <= tol2) {
            valid[std::size_t(s)] = 1;
            if (f == best[std::size_t(s)]) correct[std::size_t(s)] = 1;
          }
        }
      },
      threads);

  Index n_valid = 0;
  for (char v : valid) n_valid += v;
  require(n_valid > 0, "rp_curve: ground truth covers no scene feature");

  // An empty grid requests an automatic 64-point sweep of the score range.
  std::vector<double> auto_grid;
  if (thresholds.empty()) {
    auto_grid = make_threshold_grid(best_score, 64);
    thresholds = auto_grid;
  }

  RpCurve curve;
  for (double threshold : thresholds) {
    Index declared = 0, hits = 0;
    for (Index s = 0; s < n_scene; ++s) {
      if (best_score[std::size_t(s)] > threshold) {
        ++declared;
        if (correct[std::size_t(s)]) ++hits;
      }
    }
    curve.thresholds.push_back(threshold);
    curve.precision.push_back(declared == 0 ? 1.0 : double(hits) / double(declared));
    curve.recall.push_back(double(hits) / double(n_valid));
  }
  return curve;
}

std::vector<double> make_threshold_grid(std::span<const double> scores, Index count) {
  require(!scores.empty(), "make_threshold_grid: no scores");
  require(count >= 2, "make_threshold_grid: need at least 2 grid points");
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it, hi = *hi_it;
  const double pad = std::max(1e-9, (hi - lo) * 1e-3);
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i)
    grid[std::size_t(i)] =
        (lo - pad) + (hi + pad - (lo - pad)) * double(i) / double(count - 1);
  return grid;
}

double recall_at_precision(const RpCurve& curve, double min_precision) {
  double best = 0.0;
  for (std::size_t i = 0; i < curve.precision.size(); ++i)
    if (curve.precision[i] >= min_precision) best = std::max(best, curve.recall[i]);
  return best;
}

CmcCurve cmc_curve(const DescriptorGraph& graph, std::span<const SgcDescriptor> corpus,
                   std::span<const CmcQuery> queries, Index n_max, CmcMode mode,
                   const SaliencyParams& params) {
  require(!queries.empty(), "cmc_curve: no queries");
  require(n_max >= 1, "cmc_curve: n_max must be >= 1");
  for (const CmcQuery& q : queries)
    require(q.true_node >= 0 && q.true_node < graph.node_count(),
            "cmc_curve: true correspondent not in graph");

  SaliencyParams query_params = params;
  query_params.query_pool = std::max<int>(query_params.query_pool, int(n_max));

  std::vector<Index> ranks(queries.size(), -1);  // 1-based; -1 means not retrieved
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const std::vector<QueryHit> hits =
        (mode == CmcMode::Graph)
            ? graph_query(graph, corpus, queries[qi].descriptor, query_params, qi)
            : exhaustive_query(graph, corpus, queries[qi].descriptor, n_max);
    for (std::size_t r = 0; r < hits.size() && Index(r) < n_max; ++r) {
      if (hits[r].node == queries[qi].true_node) {
        ranks[qi] = Index(r) + 1;
        break;
      }
    }
  }
  const auto stop = std::chrono::steady_clock::now();

  CmcCurve curve;
  curve.mean_query_seconds =
      std::chrono::duration<double>(stop - start).count() / double(queries.size());
  curve.hit_rate.resize(std::size_t(n_max), 0.0);
  for (Index n = 1; n <= n_max; ++n) {
    Index hits = 0;
    for (Index r : ranks)
      if (r >= 1 && r <= n) ++hits;
    curve.hit_rate[std::size_t(n - 1)] = double(hits) / double(queries.size());
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

namespace {

void atomic_write(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(path.string() + ": cannot open for writing");
    out << text;
    if (!out) fail(path.string() + ": write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(path.string() + ": rename failed: " + ec.message());
  }
}

std::string format_value(double v) {
  std::ostringstream ss;
  ss.precision(12);
  ss << v;
  return ss.str();
}

}  // namespace

void write_rp_curve(const RpCurve& curve, const fs::path& csv_path, const fs::path& table_path) {
  std::string csv = "threshold,precision,recall\n";
  std::string table = "# threshold precision recall\n";
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    const std::string t = format_value(curve.thresholds[i]);
    const std::string p = format_value(curve.precision[i]);
    const std::string r = format_value(curve.recall[i]);
    csv += t + "," + p + "," + r + "\n";
    table += t + " " + p + " " + r + "\n";
  }
  atomic_write(csv_path, csv);
  if (!table_path.empty()) atomic_write(table_path, table);
}

void write_cmc_curve(const CmcCurve& curve, const fs::path& csv_path, const fs::path& table_path) {
  std::string csv = "rank,hit_rate\n";
  std::string table = "# rank hit_rate\n";
  for (std::size_t i = 0; i < curve.hit_rate.size(); ++i) {
    const std::string h = format_value(curve.hit_rate[i]);
    csv += std::to_string(i + 1) + "," + h + "\n";
    table += std::to_string(i + 1) + " " + h + "\n";
  }
  atomic_write(csv_path, csv);
  if (!table_path.empty()) atomic_write(table_path, table);
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

Manifest Manifest::parse_text(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      fail("manifest line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) fail("manifest line " + std::to_string(line_no) + ": empty key");
    m.values[key] = value;
  }
  return m;
}

Manifest Manifest::parse_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(path.string() + ": cannot open manifest");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_text(buffer.str());
}

std::string Manifest::get(const std::string& key, const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double Manifest::get_double(const std::string& key, double fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    fail("manifest: key '" + key + "' is not a number: " + it->second);
  }
}

Index Manifest::get_index(const std::string& key, Index fallback) const {
  return static_cast<Index>(get_double(key, double(fallback)));
}

std::vector<std::string> Manifest::get_list(const std::string& key) const {
  std::vector<std::string> out;
  const auto it = values.find(key);
  if (it == values.end()) return out;
  std::string item;
  std::istringstream ss(it->second);
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> Manifest::get_double_list(const std::string& key,
                                              std::span<const double> fallback) const {
  if (!has(key)) return {fallback.begin(), fallback.end()};
  std::vector<double> out;
  for (const std::string& item : get_list(key)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      fail("manifest: key '" + key + "' has a non-numeric entry: " + item);
    }
  }
  return out;
}

}  // namespace sgc
