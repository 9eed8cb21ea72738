#include "rigsplat/dataset.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rigsplat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json mat3_to_json(const Mat3 &m) {
    json a = json::array();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            a.push_back(m(r, c));
        }
    }
    return a;
}

Mat3 mat3_from_json(const json &a) {
    if (!a.is_array() || a.size() != 9) {
        throw LoadError("rotation must hold 9 numbers");
    }
    Mat3 m;
    for (int k = 0; k < 9; ++k) {
        m(k / 3, k % 3) = a[k].get<double>();
    }
    return m;
}

json vec3_to_json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json &a) {
    if (!a.is_array() || a.size() != 3) {
        throw LoadError("translation must hold 3 numbers");
    }
    return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

json rigid_to_json(const RigidTransform &t) {
    return json{{"rotation", mat3_to_json(t.rotation)}, {"translation", vec3_to_json(t.translation)}};
}

RigidTransform rigid_from_json(const json &j) {
    RigidTransform t;
    t.rotation = mat3_from_json(j.at("rotation"));
    t.translation = vec3_from_json(j.at("translation"));
    return t;
}

json camera_json(const Camera &c) {
    json j = rigid_to_json(c.world_to_camera);
    j["fx"] = c.fx;
    j["fy"] = c.fy;
    j["cx"] = c.cx;
    j["cy"] = c.cy;
    j["width"] = c.width;
    j["height"] = c.height;
    j["near"] = c.near_plane;
    j["far"] = c.far_plane;
    return j;
}

Camera camera_from(const json &j) {
    Camera c;
    c.world_to_camera = rigid_from_json(j);
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.near_plane = j.value("near", c.near_plane);
    c.far_plane = j.value("far", c.far_plane);
    c.validate();
    return c;
}

std::vector<std::string> read_lines(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open " + path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            lines.push_back(line);
        }
    }
    return lines;
}

} // namespace

std::string frame_stem(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06zu", i);
    return buf;
}

std::string camera_to_json(const Camera &camera) { return camera_json(camera).dump(); }

std::string frame_record_to_json(const FrameRecord &record) {
    json j;
    j["psi"] = record.params.psi;
    j["theta"] = record.params.theta;
    j["head_pose"] = rigid_to_json(record.params.head_pose);
    j["camera"] = camera_json(record.camera);
    return j.dump();
}

FrameRecord frame_record_from_json(const std::string &line) {
    try {
        const json j = json::parse(line);
        FrameRecord r;
        r.params.psi = j.at("psi").get<std::vector<double>>();
        r.params.theta = j.at("theta").get<std::vector<double>>();
        if (j.contains("head_pose")) {
            r.params.head_pose = rigid_from_json(j.at("head_pose"));
        }
        r.camera = camera_from(j.at("camera"));
        return r;
    } catch (const json::exception &e) {
        throw LoadError(std::string("bad params record: ") + e.what());
    } catch (const LoadError &) {
        throw;
    } catch (const Error &e) {
        throw LoadError(std::string("bad params record: ") + e.what());
    }
}

std::vector<RigParams> read_rig_params_file(const std::string &path) {
    std::vector<RigParams> out;
    const std::vector<std::string> lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            const json j = json::parse(lines[i]);
            RigParams p;
            p.psi = j.at("psi").get<std::vector<double>>();
            p.theta = j.at("theta").get<std::vector<double>>();
            if (j.contains("head_pose")) {
                p.head_pose = rigid_from_json(j.at("head_pose"));
            }
            out.push_back(std::move(p));
        } catch (const json::exception &e) {
            throw LoadError(path + " line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

std::vector<FrameRecord> read_params_file(const std::string &path) {
    std::vector<FrameRecord> records;
    const std::vector<std::string> lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            records.push_back(frame_record_from_json(lines[i]));
        } catch (const LoadError &e) {
            throw LoadError(path + " line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return records;
}

void write_params_file(const std::string &path, const std::vector<FrameRecord> &records) {
    std::ofstream out(path);
    if (!out) {
        throw LoadError("cannot write " + path);
    }
    for (const FrameRecord &r : records) {
        out << frame_record_to_json(r) << '\n';
    }
}

std::vector<Camera> read_camera_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    std::vector<Camera> cams;
    try {
        // Either one JSON value or JSON lines.
        const json j = json::parse(ss.str(), nullptr, false);
        if (!j.is_discarded()) {
            if (j.is_array()) {
                for (const json &c : j) {
                    cams.push_back(camera_from(c));
                }
            } else {
                cams.push_back(camera_from(j));
            }
            return cams;
        }
        for (const std::string &line : read_lines(path)) {
            cams.push_back(camera_from(json::parse(line)));
        }
    } catch (const json::exception &e) {
        throw LoadError(path + ": " + e.what());
    }
    return cams;
}

void composite_background(Image &image, const std::vector<unsigned char> &mask, const Vec3 &background) {
    require_size(mask.size(), image.pixel_count(), "mask");
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (mask[static_cast<std::size_t>(y) * image.width + x] == 0) {
                image.set_pixel(x, y, background);
            }
        }
    }
}

void Dataset::validate() const {
    rig.validate();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const DatasetFrame &f = frames[i];
        const std::string name = "frame " + frame_stem(i);
        if (f.image.width != f.record.camera.width || f.image.height != f.record.camera.height) {
            throw SizeError(name + ": image size differs from camera size");
        }
        require_size(f.mask.size(), f.image.pixel_count(), (name + " mask").c_str());
        require_size(f.record.params.psi.size(), rig.expression_dim(), (name + " psi").c_str());
        require_size(f.record.params.theta.size(), 3 * rig.joint_count(), (name + " theta").c_str());
    }
}

Dataset load_dataset(const std::string &dir) {
    const fs::path root(dir);
    Dataset data;
    const fs::path rig_path = root / "rig.txt";
    if (!fs::exists(rig_path)) {
        throw LoadError("dataset " + dir + ": missing rig.txt");
    }
    data.rig = load_rig(rig_path.string());

    const fs::path meta_path = root / "meta.txt";
    std::ifstream meta(meta_path);
    if (!meta) {
        throw LoadError("dataset " + dir + ": missing meta.txt");
    }
    std::string key;
    while (meta >> key) {
        if (key == "background") {
            meta >> data.background.x() >> data.background.y() >> data.background.z();
        } else {
            std::string rest;
            std::getline(meta, rest);
        }
        if (!meta) {
            throw LoadError("dataset " + dir + ": malformed meta.txt");
        }
    }

    const fs::path params_path = root / "params.jsonl";
    if (!fs::exists(params_path)) {
        throw LoadError("dataset " + dir + ": missing params.jsonl");
    }
    const std::vector<FrameRecord> records = read_params_file(params_path.string());

    std::size_t image_files = 0;
    if (fs::is_directory(root / "frames")) {
        for (const auto &entry : fs::directory_iterator(root / "frames")) {
            image_files += entry.path().extension() == ".png" ? 1 : 0;
        }
    }
    if (image_files != records.size()) {
        throw LoadError("dataset " + dir + ": " + std::to_string(image_files) + " frame images but " +
                        std::to_string(records.size()) + " params records");
    }

    data.frames.resize(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::string stem = frame_stem(i);
        const fs::path img_path = root / "frames" / (stem + ".png");
        const fs::path mask_path = root / "masks" / (stem + ".png");
        if (!fs::exists(img_path)) {
            throw LoadError("frame " + stem + ": missing image " + img_path.string());
        }
        if (!fs::exists(mask_path)) {
            throw LoadError("frame " + stem + ": missing mask " + mask_path.string());
        }
        DatasetFrame &f = data.frames[i];
        f.record = records[i];
        f.image = read_png(img_path.string());
        int mw = 0, mh = 0;
        f.mask = read_mask_png(mask_path.string(), mw, mh);
        if (mw != f.image.width || mh != f.image.height) {
            throw LoadError("frame " + stem + ": mask size differs from image size");
        }
        composite_background(f.image, f.mask, data.background);
    }
    try {
        data.validate();
    } catch (const Error &e) {
        throw LoadError("dataset " + dir + ": " + e.what());
    }
    return data;
}

void save_dataset(const std::string &dir, const Dataset &data) {
    const fs::path root(dir);
    fs::create_directories(root / "frames");
    fs::create_directories(root / "masks");
    save_rig((root / "rig.txt").string(), data.rig);

    std::ofstream meta(root / "meta.txt");
    meta.precision(17);
    meta << "background " << data.background.x() << ' ' << data.background.y() << ' ' << data.background.z() << '\n';
    if (!data.frames.empty()) {
        meta << "resolution " << data.frames[0].image.width << ' ' << data.frames[0].image.height << '\n';
    }
    meta << "frames " << data.frames.size() << '\n';

    std::vector<FrameRecord> records;
    for (std::size_t i = 0; i < data.frames.size(); ++i) {
        const DatasetFrame &f = data.frames[i];
        const std::string stem = frame_stem(i);
        write_png((root / "frames" / (stem + ".png")).string(), f.image);
        std::vector<unsigned char> mask = f.mask;
        if (mask.empty()) {
            mask.assign(f.image.pixel_count(), 1);
        }
        write_mask_png((root / "masks" / (stem + ".png")).string(), mask, f.image.width, f.image.height);
        records.push_back(f.record);
    }
    write_params_file((root / "params.jsonl").string(), records);
}

} // namespace rigsplat
