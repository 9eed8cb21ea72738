#pragma once

#include "rigsplat/common.hpp"
#include "rigsplat/math.hpp"

namespace rigsplat {

/// Pinhole camera. Pixel (i, j) has its center at image coordinate (i, j).
struct Camera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    RigidTransform world_to_camera;
    int width = 1;
    int height = 1;
    double near_plane = 0.01;
    double far_plane = 100.0;

    /// Throws SizeError/ConsistencyError on non-positive focal lengths,
    /// empty images or near >= far.
    void validate() const;

    Vec3 center() const { return world_to_camera.inverse().translation; }

    /// Camera that sees `object_to_world`-transformed content the way this
    /// camera sees untransformed content: extrinsics ∘ pose.
    Camera with_object_pose(const RigidTransform &object_to_world) const;
};

struct PixelProjection {
    Vec2 pixel;
    double depth = 0.0;
    bool in_frustum = false;
};

PixelProjection world_to_pixel(const Camera &camera, const Vec3 &x);

/// Camera at `eye` looking at `target` with +y of the image pointing along -up.
Camera look_at_camera(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double focal, int width,
                      int height);

} // namespace rigsplat
