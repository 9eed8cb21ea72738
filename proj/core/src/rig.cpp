#include "rigsplat/rig.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace rigsplat {

void ParamRig::validate() const {
    const auto nv = static_cast<int>(template_vertices.size());
    for (const Face &f : faces) {
        for (int idx : f) {
            if (idx < 0 || idx >= nv) {
                throw ConsistencyError("rig face index " + std::to_string(idx) + " out of range");
            }
        }
    }
    for (std::size_t k = 0; k < blendshapes.size(); ++k) {
        require_size(blendshapes[k].size(), template_vertices.size(), "rig blendshape");
    }
    for (std::size_t j = 0; j < joints.size(); ++j) {
        if (joints[j].parent >= static_cast<int>(j) || joints[j].parent < -1) {
            throw ConsistencyError("rig joint " + std::to_string(j) + " has invalid parent");
        }
    }
    require_size(skin_weights.size(), template_vertices.size(), "rig skin weights");
    for (std::size_t v = 0; v < skin_weights.size(); ++v) {
        double sum = 0.0;
        for (const SkinInfluence &s : skin_weights[v]) {
            if (s.joint < 0 || s.joint >= static_cast<int>(joints.size())) {
                throw ConsistencyError("skin weight references a missing joint");
            }
            if (s.weight < 0.0) {
                throw ConsistencyError("negative skin weight on vertex " + std::to_string(v));
            }
            sum += s.weight;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw ConsistencyError("skin weights of vertex " + std::to_string(v) + " do not sum to 1");
        }
    }
}

RigParams RigParams::neutral(const ParamRig &rig) {
    RigParams p;
    p.psi.assign(rig.expression_dim(), 0.0);
    p.theta.assign(3 * rig.joint_count(), 0.0);
    return p;
}

MeshInstance evaluate_rig(const ParamRig &rig, const RigParams &params) {
    require_size(params.psi.size(), rig.expression_dim(), "psi");
    require_size(params.theta.size(), 3 * rig.joint_count(), "theta");

    MeshInstance mesh;
    mesh.faces = rig.faces;
    mesh.vertices = rig.template_vertices;
    for (std::size_t k = 0; k < rig.blendshapes.size(); ++k) {
        const double w = params.psi[k];
        if (w == 0.0) {
            continue;
        }
        const auto &delta = rig.blendshapes[k];
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
            mesh.vertices[v] += w * delta[v];
        }
    }

    if (!rig.joints.empty()) {
        // Displacement form of LBS: joint j carries world rotation R_j and its
        // pivot moves by e_j, so x' = x + Σ w_j ((R_j - I)(x - p_j) + e_j).
        // Identity joints then leave vertices bit-exact whatever the weights.
        std::vector<Mat3> rotation(rig.joints.size());
        std::vector<Mat3> offset(rig.joints.size());   // R_j - I
        std::vector<Vec3> pivot_shift(rig.joints.size());
        for (std::size_t j = 0; j < rig.joints.size(); ++j) {
            const Joint &joint = rig.joints[j];
            const Mat3 local = axis_angle_to_matrix(
                Vec3(params.theta[3 * j], params.theta[3 * j + 1], params.theta[3 * j + 2]));
            if (joint.parent >= 0) {
                const auto p = static_cast<std::size_t>(joint.parent);
                rotation[j] = rotation[p] * local;
                pivot_shift[j] =
                    offset[p] * (joint.rest_position - rig.joints[p].rest_position) + pivot_shift[p];
            } else {
                rotation[j] = local;
                pivot_shift[j] = Vec3::Zero();
            }
            offset[j] = rotation[j] - Mat3::Identity();
        }
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
            const Vec3 x = mesh.vertices[v];
            Vec3 d = Vec3::Zero();
            for (const SkinInfluence &s : rig.skin_weights[v]) {
                const auto j = static_cast<std::size_t>(s.joint);
                d += s.weight * (offset[j] * (x - rig.joints[j].rest_position) + pivot_shift[j]);
            }
            mesh.vertices[v] = x + d;
        }
    }

    for (Vec3 &v : mesh.vertices) {
        v = params.head_pose.apply(v);
    }
    return mesh;
}

void write_rig(std::ostream &out, const ParamRig &rig) {
    out << std::setprecision(17);
    out << "rigsplat-rig 1\n";
    out << "vertices " << rig.template_vertices.size() << "\n";
    for (const Vec3 &v : rig.template_vertices) {
        out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    out << "faces " << rig.faces.size() << "\n";
    for (const Face &f : rig.faces) {
        out << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
    out << "blendshapes " << rig.blendshapes.size() << "\n";
    for (const auto &shape : rig.blendshapes) {
        for (const Vec3 &d : shape) {
            out << d.x() << ' ' << d.y() << ' ' << d.z() << '\n';
        }
    }
    out << "joints " << rig.joints.size() << "\n";
    for (const Joint &j : rig.joints) {
        out << j.parent << ' ' << j.rest_position.x() << ' ' << j.rest_position.y() << ' '
            << j.rest_position.z() << '\n';
    }
    out << "skin " << rig.skin_weights.size() << "\n";
    for (const auto &row : rig.skin_weights) {
        out << row.size();
        for (const SkinInfluence &s : row) {
            out << ' ' << s.joint << ' ' << s.weight;
        }
        out << '\n';
    }
}

namespace {

std::size_t expect_section(std::istream &in, const std::string &name) {
    std::string key;
    std::size_t count = 0;
    if (!(in >> key >> count) || key != name) {
        throw LoadError("rig file: expected section '" + name + "'");
    }
    return count;
}

template <typename T>
T read_value(std::istream &in, const char *what) {
    T value{};
    if (!(in >> value)) {
        throw LoadError(std::string("rig file: truncated while reading ") + what);
    }
    return value;
}

Vec3 read_vec3(std::istream &in, const char *what) {
    const double x = read_value<double>(in, what);
    const double y = read_value<double>(in, what);
    const double z = read_value<double>(in, what);
    return {x, y, z};
}

} // namespace

ParamRig read_rig(std::istream &in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "rigsplat-rig") {
        throw LoadError("rig file: missing 'rigsplat-rig' header");
    }
    if (version != 1) {
        throw LoadError("rig file: unsupported version " + std::to_string(version));
    }
    ParamRig rig;
    const std::size_t nv = expect_section(in, "vertices");
    rig.template_vertices.reserve(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        rig.template_vertices.push_back(read_vec3(in, "vertices"));
    }
    const std::size_t nf = expect_section(in, "faces");
    rig.faces.reserve(nf);
    for (std::size_t i = 0; i < nf; ++i) {
        Face f;
        for (int &idx : f) {
            idx = read_value<int>(in, "faces");
        }
        rig.faces.push_back(f);
    }
    const std::size_t nb = expect_section(in, "blendshapes");
    rig.blendshapes.resize(nb);
    for (auto &shape : rig.blendshapes) {
        shape.reserve(nv);
        for (std::size_t i = 0; i < nv; ++i) {
            shape.push_back(read_vec3(in, "blendshapes"));
        }
    }
    const std::size_t nj = expect_section(in, "joints");
    rig.joints.resize(nj);
    for (Joint &j : rig.joints) {
        j.parent = read_value<int>(in, "joints");
        j.rest_position = read_vec3(in, "joints");
    }
    const std::size_t ns = expect_section(in, "skin");
    rig.skin_weights.resize(ns);
    for (auto &row : rig.skin_weights) {
        const auto count = read_value<std::size_t>(in, "skin");
        row.resize(count);
        for (SkinInfluence &s : row) {
            s.joint = read_value<int>(in, "skin");
            s.weight = read_value<double>(in, "skin");
        }
    }
    rig.validate();
    return rig;
}

void save_rig(const std::string &path, const ParamRig &rig) {
    std::ofstream out(path);
    if (!out) {
        throw LoadError("cannot open rig file for writing: " + path);
    }
    write_rig(out, rig);
}

ParamRig load_rig(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open rig file: " + path);
    }
    return read_rig(in);
}

} // namespace rigsplat
