#include "woc/camera.h"

#include <cmath>
#include <stdexcept>

#include "woc/common.h"

namespace woc {

static void check_rotation(const tensor& e) {
    // Upper-left 3x3 must be orthonormal within 1e-9.
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += e.at(k, i) * e.at(k, j);
            const double want = i == j ? 1.0 : 0.0;
            if (std::fabs(dot - want) > 1e-9)
                throw std::invalid_argument("camera_model: extrinsics rotation not orthonormal");
        }
}

camera_model::camera_model(tensor k, tensor e, int h, int w)
    : intrinsics(std::move(k)), extrinsics(std::move(e)), h_img(h), w_img(w) {
    if (intrinsics.rank() != 2 || intrinsics.shape[0] != 3 || intrinsics.shape[1] != 3)
        throw std::invalid_argument(str("camera_model: intrinsics must be [3,3], got ",
                                        intrinsics.shape_str()));
    if (extrinsics.rank() != 2 || extrinsics.shape[0] != 4 || extrinsics.shape[1] != 4)
        throw std::invalid_argument(str("camera_model: extrinsics must be [4,4], got ",
                                        extrinsics.shape_str()));
    if (intrinsics.at(0, 0) <= 0.0 || intrinsics.at(1, 1) <= 0.0 || intrinsics.at(1, 0) != 0.0 ||
        intrinsics.at(2, 0) != 0.0 || intrinsics.at(2, 1) != 0.0)
        throw std::invalid_argument("camera_model: intrinsics must be upper-triangular with positive focals");
    if (h <= 0 || w <= 0) throw std::invalid_argument("camera_model: non-positive image dims");
    check_rotation(extrinsics);
}

void camera_model::pixel_ray(int u, int v, double origin[3], double dir[3]) const {
    const double fx = intrinsics.at(0, 0), fy = intrinsics.at(1, 1);
    const double cx = intrinsics.at(0, 2), cy = intrinsics.at(1, 2);
    const double dc[3] = {(u + 0.5 - cx) / fx, (v + 0.5 - cy) / fy, 1.0};
    double norm = 0.0;
    for (double c : dc) norm += c * c;
    norm = std::sqrt(norm);
    for (int i = 0; i < 3; ++i) {
        origin[i] = extrinsics.at(i, 3);
        dir[i] = (extrinsics.at(i, 0) * dc[0] + extrinsics.at(i, 1) * dc[1] +
                  extrinsics.at(i, 2) * dc[2]) /
                 norm;
    }
}

void camera_model::unproject(int u, int v, double depth, double out[3]) const {
    const double fx = intrinsics.at(0, 0), fy = intrinsics.at(1, 1);
    const double cx = intrinsics.at(0, 2), cy = intrinsics.at(1, 2);
    // z-depth convention: the camera-frame point has z exactly `depth`.
    const double pc[3] = {(u + 0.5 - cx) / fx * depth, (v + 0.5 - cy) / fy * depth, depth};
    for (int i = 0; i < 3; ++i)
        out[i] = extrinsics.at(i, 0) * pc[0] + extrinsics.at(i, 1) * pc[1] +
                 extrinsics.at(i, 2) * pc[2] + extrinsics.at(i, 3);
}

std::vector<camera_model> build_rig(const camera_rig_cfg& cfg) {
    if (cfg.cameras < 1 || cfg.cameras > 4)
        throw std::invalid_argument(str("build_rig: cameras must be 1..4, got ", cfg.cameras));
    const double pi = 3.14159265358979323846;
    const double fx = (cfg.w_img / 2.0) / std::tan(cfg.fov_h_deg * pi / 360.0);
    const double fy = (cfg.h_img / 2.0) / std::tan(cfg.fov_v_deg * pi / 360.0);
    tensor k = tensor::from_rows({{fx, 0, cfg.w_img / 2.0}, {0, fy, cfg.h_img / 2.0}, {0, 0, 1}});

    std::vector<camera_model> rig;
    for (int i = 0; i < cfg.cameras; ++i) {
        const double yaw = 2.0 * pi * i / cfg.cameras;
        const double pitch = cfg.pitch_deg * pi / 180.0;
        const double cy = std::cos(yaw), sy = std::sin(yaw);
        const double cp = std::cos(pitch), sp = std::sin(pitch);
        // Columns: camera x (right), y (down), z (forward) in ego coordinates.
        const double fwd[3] = {cp * cy, cp * sy, sp};
        const double right[3] = {sy, -cy, 0.0};
        const double down[3] = {fwd[1] * right[2] - fwd[2] * right[1],
                                fwd[2] * right[0] - fwd[0] * right[2],
                                fwd[0] * right[1] - fwd[1] * right[0]};
        tensor e({4, 4});
        for (int r = 0; r < 3; ++r) {
            e.at(r, 0) = right[r];
            e.at(r, 1) = down[r];
            e.at(r, 2) = fwd[r];
        }
        e.at(2, 3) = cfg.height;
        e.at(3, 3) = 1.0;
        rig.emplace_back(k, e, cfg.h_img, cfg.w_img);
    }
    return rig;
}

} // namespace woc
