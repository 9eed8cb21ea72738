#pragma once

#include "rigsplat/camera.hpp"
#include "rigsplat/image.hpp"
#include "rigsplat/rig.hpp"

#include <string>
#include <vector>

namespace rigsplat {

/// Driving parameters and camera of one frame, as stored in params.jsonl.
struct FrameRecord {
    RigParams params;
    Camera camera;
};

struct DatasetFrame {
    Image image;                        ///< masked-out pixels already hold the background
    std::vector<unsigned char> mask;    ///< 1 = foreground
    FrameRecord record;
};

struct Dataset {
    ParamRig rig;
    Vec3 background = Vec3::Zero();
    std::vector<DatasetFrame> frames;

    /// Throws SizeError/ConsistencyError when streams or dimensions disagree.
    void validate() const;
};

// On-disk layout of a dataset directory:
//
//   frames/%06d.png   RGB frames
//   masks/%06d.png    8-bit gray masks, > 127 is foreground
//   params.jsonl      one FrameRecord per line, in frame order
//   rig.txt           rig text file
//   meta.txt          "background r g b", "resolution w h", "frames n"
//
// A params record looks like
//   {"psi":[...],"theta":[...],
//    "head_pose":{"rotation":[9 row-major],"translation":[3]},
//    "camera":{"fx":..,"fy":..,"cx":..,"cy":..,"width":..,"height":..,
//              "near":..,"far":..,"rotation":[9],"translation":[3]}}

/// Throws LoadError naming the first missing or malformed file.
Dataset load_dataset(const std::string &dir);
void save_dataset(const std::string &dir, const Dataset &data);

std::string frame_record_to_json(const FrameRecord &record);
FrameRecord frame_record_from_json(const std::string &line);
std::vector<FrameRecord> read_params_file(const std::string &path);
void write_params_file(const std::string &path, const std::vector<FrameRecord> &records);

/// Driving parameters only (psi, theta, optional head_pose); any camera field is ignored.
std::vector<RigParams> read_rig_params_file(const std::string &path);

/// A single camera object, or one camera per line.
std::vector<Camera> read_camera_file(const std::string &path);
std::string camera_to_json(const Camera &camera);

/// Replaces pixels whose mask is 0 with `background`.
void composite_background(Image &image, const std::vector<unsigned char> &mask, const Vec3 &background);

/// "%06d" file stem for frame i.
std::string frame_stem(std::size_t i);

} // namespace rigsplat
