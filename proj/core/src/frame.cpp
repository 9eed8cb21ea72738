#include "rigsplat/frame.hpp"

#include <cmath>

namespace rigsplat {

TriangleFrame triangle_frame(const Vec3 &v0, const Vec3 &v1, const Vec3 &v2) {
    const Vec3 a10 = v1 - v0;
    const Vec3 a20 = v2 - v0;
    const Vec3 a21 = v2 - v1;
    const Vec3 cross = a10.cross(a20);
    const double area = 0.5 * cross.norm();
    if (!(area > kDegenerateArea)) {
        throw DegenerateGeometryError("degenerate triangle (area " + std::to_string(area) + ")");
    }
    const Vec3 n0 = a10.normalized();
    const Vec3 n1 = cross.normalized();
    const Vec3 n2 = n0.cross(n1);

    TriangleFrame frame;
    frame.centroid = (v0 + v1 + v2) / 3.0;
    frame.rotation.col(0) = n0;
    frame.rotation.col(1) = n1;
    frame.rotation.col(2) = n2;
    frame.scale = 0.5 * (a20.norm() + std::abs(n2.dot(a21)));
    return frame;
}

std::vector<TriangleFrame> compute_frames(const MeshInstance &mesh,
                                          std::span<const TriangleFrame> fallback) {
    if (!fallback.empty()) {
        require_size(fallback.size(), mesh.faces.size(), "fallback frames");
    }
    std::vector<TriangleFrame> frames;
    frames.reserve(mesh.faces.size());
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        const Face &f = mesh.faces[i];
        try {
            frames.push_back(triangle_frame(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]));
        } catch (const DegenerateGeometryError &) {
            if (fallback.empty()) {
                throw;
            }
            frames.push_back(fallback[i]);
        }
    }
    return frames;
}

} // namespace rigsplat
