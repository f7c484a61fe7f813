#include "sgc/synthetic.hpp"

namespace sgc {

PointCloud make_grid_cloud(Index nx, Index ny, double spacing) {
  require(nx >= 1 && ny >= 1 && spacing > 0.0, "make_grid_cloud: bad dimensions");
  PointCloud cloud;
  cloud.id = "grid";
  cloud.points.reserve(std::size_t(nx * ny));
  const double cx = 0.5 * double(nx - 1) * spacing;
  const double cy = 0.5 * double(ny - 1) * spacing;
  for (Index j = 0; j < ny; ++j)
    for (Index i = 0; i < nx; ++i) {
      cloud.points.emplace_back(double(i) * spacing - cx, double(j) * spacing - cy, 0.0);
      cloud.normals.emplace_back(0.0, 0.0, 1.0);
    }
  return cloud;
}

PointCloud make_bumpy_surface(Index nx, Index ny, double spacing, Index bump_count,
                              double amplitude, double sigma_min, double sigma_max,
                              std::uint64_t seed) {
  require(nx >= 2 && ny >= 2 && spacing > 0.0, "make_bumpy_surface: bad dimensions");
  require(sigma_min > 0.0 && sigma_max >= sigma_min, "make_bumpy_surface: bad widths");
  Rng rng = Rng::derive(seed, 0x51);
  struct Bump {
    double cx, cy, amp, inv_two_sigma2, sigma;
  };
  std::vector<Bump> bumps;
  const double w = double(nx - 1) * spacing, h = double(ny - 1) * spacing;
  for (Index b = 0; b < bump_count; ++b) {
    Bump bump;
    bump.cx = rng.uniform(-0.5 * w, 0.5 * w);
    bump.cy = rng.uniform(-0.5 * h, 0.5 * h);
    bump.amp = rng.uniform(0.35, 1.0) * amplitude * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    bump.sigma = rng.uniform(sigma_min, sigma_max) * spacing;
    bump.inv_two_sigma2 = 1.0 / (2.0 * bump.sigma * bump.sigma);
    bumps.push_back(bump);
  }

  PointCloud cloud;
  cloud.id = "surface";
  cloud.points.reserve(std::size_t(nx * ny));
  cloud.normals.reserve(std::size_t(nx * ny));
  for (Index j = 0; j < ny; ++j)
    for (Index i = 0; i < nx; ++i) {
      const double x = double(i) * spacing - 0.5 * w;
      const double y = double(j) * spacing - 0.5 * h;
      double z = 0.0, dzdx = 0.0, dzdy = 0.0;
      for (const Bump& b : bumps) {
        const double dx = x - b.cx, dy = y - b.cy;
        const double g = b.amp * std::exp(-(dx * dx + dy * dy) * b.inv_two_sigma2);
        z += g;
        dzdx += -2.0 * dx * b.inv_two_sigma2 * g;
        dzdy += -2.0 * dy * b.inv_two_sigma2 * g;
      }
      cloud.points.emplace_back(x, y, z);
      cloud.normals.push_back(Vec3(-dzdx, -dzdy, 1.0).normalized());
    }
  return cloud;
}

PointCloud make_disk_cloud(double radius, double spacing) {
  require(radius > 0.0 && spacing > 0.0, "make_disk_cloud: bad dimensions");
  PointCloud cloud;
  cloud.id = "disk";
  const Index half = Index(std::ceil(radius / spacing));
  const double r2 = radius * radius;
  for (Index j = -half; j <= half; ++j)
    for (Index i = -half; i <= half; ++i) {
      const double x = double(i) * spacing, y = double(j) * spacing;
      if (x * x + y * y > r2) continue;
      cloud.points.emplace_back(x, y, 0.0);
      cloud.normals.emplace_back(0.0, 0.0, 1.0);
    }
  require(!cloud.empty(), "make_disk_cloud: radius smaller than spacing");
  return cloud;
}

PointCloud make_sphere_cloud(Index count, double radius, std::uint64_t seed) {
  require(count >= 4 && radius > 0.0, "make_sphere_cloud: bad dimensions");
  Rng rng = Rng::derive(seed, 0x52);
  PointCloud cloud;
  cloud.id = "sphere";
  cloud.points.reserve(std::size_t(count));
  cloud.normals.reserve(std::size_t(count));
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  const double jitter = 0.6 * std::sqrt(4.0 * M_PI / double(count));  // ~mean spacing, radians
  for (Index i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (double(i) + 0.5) / double(count);
    const double phi = golden * double(i);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    Vec3 dir(s * std::cos(phi), s * std::sin(phi), z);
    // Tangent jitter breaks the spiral's global symmetry.
    const Vec3 t1 = dir.cross(std::abs(dir.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX()).normalized();
    const Vec3 t2 = dir.cross(t1);
    dir = (dir + t1 * rng.uniform(-jitter, jitter) + t2 * rng.uniform(-jitter, jitter))
              .normalized();
    cloud.points.push_back(dir * radius);
    cloud.normals.push_back(dir);
  }
  return cloud;
}

PointCloud make_bumpy_sphere(Index count, double radius, Index bump_count, double amplitude,
                             std::uint64_t seed) {
  PointCloud cloud = make_sphere_cloud(count, radius, seed);
  cloud.id = "bumpy_sphere";
  Rng rng = Rng::derive(seed, 0x53);
  struct Bump {
    Vec3 center;
    double amp, inv_two_sigma2;
  };
  std::vector<Bump> bumps;
  for (Index b = 0; b < bump_count; ++b) {
    Bump bump;
    bump.center = rng.random_direction();
    bump.amp = rng.uniform(0.35, 1.0) * amplitude * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const double sigma = rng.uniform(0.08, 0.25);  // radians on the sphere
    bump.inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    bumps.push_back(bump);
  }
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3 dir = cloud.normals[i];  // radial unit direction
    double rho = 1.0;
    for (const Bump& b : bumps) {
      const double angle = std::acos(std::clamp(dir.dot(b.center), -1.0, 1.0));
      rho += b.amp * std::exp(-angle * angle * b.inv_two_sigma2);
    }
    cloud.points[i] = dir * (radius * rho);
  }
  return cloud;
}

PointCloud crop_halfspace(const PointCloud& cloud, const Vec3& plane_normal, double offset) {
  PointCloud out;
  out.id = cloud.id;
  for (Index i = 0; i < cloud.size(); ++i) {
    if (cloud.point(i).dot(plane_normal) > offset) continue;
    out.points.push_back(cloud.point(i));
    if (cloud.has_normals()) out.normals.push_back(cloud.normal(i));
  }
  return out;
}

PointCloud crop_view_cap(const PointCloud& cloud, const Vec3& direction, double cos_threshold) {
  const Vec3 dir = direction.normalized();
  PointCloud out;
  out.id = cloud.id;
  for (Index i = 0; i < cloud.size(); ++i) {
    const double norm = cloud.point(i).norm();
    if (norm <= 0.0 || cloud.point(i).dot(dir) / norm < cos_threshold) continue;
    out.points.push_back(cloud.point(i));
    if (cloud.has_normals()) out.normals.push_back(cloud.normal(i));
  }
  return out;
}

}  // namespace sgc
