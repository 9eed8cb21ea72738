#include "rigsplat/camera.hpp"

namespace rigsplat {

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw ConsistencyError("camera focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
        throw SizeError("camera image dimensions must be positive");
    }
    if (!(near_plane < far_plane)) {
        throw ConsistencyError("camera near plane must be closer than far plane");
    }
}

Camera Camera::with_object_pose(const RigidTransform &object_to_world) const {
    Camera out = *this;
    out.world_to_camera = world_to_camera.compose(object_to_world);
    return out;
}

PixelProjection world_to_pixel(const Camera &camera, const Vec3 &x) {
    const Vec3 c = camera.world_to_camera.apply(x);
    PixelProjection p;
    p.depth = c.z();
    p.in_frustum = c.z() >= camera.near_plane && c.z() <= camera.far_plane;
    if (c.z() != 0.0) {
        p.pixel = Vec2(camera.fx * c.x() / c.z() + camera.cx, camera.fy * c.y() / c.z() + camera.cy);
    } else {
        p.pixel = Vec2(camera.cx, camera.cy);
    }
    return p;
}

Camera look_at_camera(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double focal, int width,
                      int height) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    Camera cam;
    cam.world_to_camera.rotation.row(0) = right;
    cam.world_to_camera.rotation.row(1) = down;
    cam.world_to_camera.rotation.row(2) = forward;
    cam.world_to_camera.translation = -(cam.world_to_camera.rotation * eye);
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    cam.width = width;
    cam.height = height;
    return cam;
}

} // namespace rigsplat
