#pragma once

#include "sgc/point_cloud.hpp"

namespace sgc {

/// Planar grid on z = 0 with the given spacing, normals +z.
PointCloud make_grid_cloud(Index nx, Index ny, double spacing);

/// Height field z = sum of seeded Gaussian bumps over an nx x ny grid, with
/// analytic unit normals. Bump amplitudes and widths are drawn from the
/// given ranges (widths in grid units). Centered on the origin.
PointCloud make_bumpy_surface(Index nx, Index ny, double spacing, Index bump_count,
                              double amplitude, double sigma_min, double sigma_max,
                              std::uint64_t seed);

/// Grid-sampled disk of the given radius in the z = 0 plane (open surface
/// with a circular boundary), normals +z.
PointCloud make_disk_cloud(double radius, double spacing);

/// Near-uniform sphere sampling (golden-spiral with seeded tangent jitter),
/// radial normals.
PointCloud make_sphere_cloud(Index count, double radius, std::uint64_t seed);

/// Sphere with seeded radial Gaussian bumps (relative amplitude), making the
/// local geometry distinctive. Normals are radial (approximate).
PointCloud make_bumpy_sphere(Index count, double radius, Index bump_count, double amplitude,
                             std::uint64_t seed);

/// Points with dot(point, plane_normal) <= offset.
PointCloud crop_halfspace(const PointCloud& cloud, const Vec3& plane_normal, double offset);

/// Points whose direction from the origin satisfies dot(unit(p), dir) >=
/// cos_threshold; extracts a view cap of a star-shaped surface.
PointCloud crop_view_cap(const PointCloud& cloud, const Vec3& direction, double cos_threshold);

}  // namespace sgc
