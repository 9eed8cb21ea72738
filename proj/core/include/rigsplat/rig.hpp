#pragma once

#include "rigsplat/common.hpp"
#include "rigsplat/math.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace rigsplat {

using Face = std::array<int, 3>;

struct Joint {
    int parent = -1;        ///< -1 for the root
    Vec3 rest_position;     ///< world-space pivot in the rest pose
};

struct SkinInfluence {
    int joint = 0;
    double weight = 0.0;
};

/// Blendshape + linear-blend-skinning rig over a fixed triangle topology.
/// Joints are topologically ordered: parent index < own index.
struct ParamRig {
    std::vector<Vec3> template_vertices;
    std::vector<Face> faces;
    std::vector<std::vector<Vec3>> blendshapes;             ///< [expression][vertex]
    std::vector<Joint> joints;
    std::vector<std::vector<SkinInfluence>> skin_weights;   ///< [vertex] sparse row

    std::size_t expression_dim() const { return blendshapes.size(); }
    std::size_t joint_count() const { return joints.size(); }
    std::size_t vertex_count() const { return template_vertices.size(); }
    std::size_t face_count() const { return faces.size(); }

    /// Throws SizeError / ConsistencyError when an invariant is violated.
    void validate() const;
};

/// Driving parameters for one frame.
struct RigParams {
    std::vector<double> psi;       ///< expression coefficients
    std::vector<double> theta;     ///< axis-angle per joint, 3 * joint_count
    RigidTransform head_pose;

    static RigParams neutral(const ParamRig &rig);
};

struct MeshInstance {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
};

/// template + Σ ψ_k Δ_k, then LBS over the joint tree, then head_pose.
MeshInstance evaluate_rig(const ParamRig &rig, const RigParams &params);

// Rig text format, version 1:
//
//   rigsplat-rig 1
//   vertices <N>          followed by N lines "x y z"
//   faces <F>             followed by F lines "i j k"
//   blendshapes <K>       followed by K*N lines "dx dy dz" (expression-major)
//   joints <J>            followed by J lines "parent px py pz"
//   skin <N>              followed by N lines "count j0 w0 j1 w1 ..."
//
// Reals are written with 17 significant digits so files round-trip exactly.
void write_rig(std::ostream &out, const ParamRig &rig);
ParamRig read_rig(std::istream &in);
void save_rig(const std::string &path, const ParamRig &rig);
ParamRig load_rig(const std::string &path);

} // namespace rigsplat
