#pragma once

#include "rigsplat/common.hpp"
#include "rigsplat/rig.hpp"

#include <span>
#include <vector>

namespace rigsplat {

/// Local coordinate system of one triangle. Gaussians bound to the triangle
/// live in this frame: world = scale * rotation * local + centroid.
struct TriangleFrame {
    Vec3 centroid = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();   ///< columns: edge direction, unit normal, their cross product
    double scale = 1.0;
};

/// Triangles with area at or below this are treated as degenerate.
inline constexpr double kDegenerateArea = 1e-12;

/// Throws DegenerateGeometryError for (near) zero-area triangles.
TriangleFrame triangle_frame(const Vec3 &v0, const Vec3 &v1, const Vec3 &v2);

/// Frames for every face of a mesh. A degenerate face takes its frame from
/// `fallback` (typically the last valid frame of the same face); with no
/// fallback the error propagates.
std::vector<TriangleFrame> compute_frames(const MeshInstance &mesh,
                                          std::span<const TriangleFrame> fallback = {});

} // namespace rigsplat
