#pragma once

#include <vector>

#include "woc/tensor.h"

namespace woc {

// Pinhole camera: intrinsics (3x3, upper-triangular, +z forward, x right,
// y down) and camera-to-ego rigid transform (4x4).
struct camera_model {
    tensor intrinsics; // [3,3]
    tensor extrinsics; // [4,4]
    int h_img, w_img;

    camera_model(tensor k, tensor e, int h, int w);

    // Unit-length ego-frame ray through pixel center (u: column, v: row),
    // plus the ego-frame origin of the camera.
    void pixel_ray(int u, int v, double origin[3], double dir[3]) const;
    // Ego point at camera z-depth d along pixel (u,v).
    void unproject(int u, int v, double depth, double out[3]) const;
};

// Surround rig used by the desk benchmark: `cameras` pinhole cameras with
// evenly spaced yaw, shared pitch/height/FOV.
struct camera_rig_cfg {
    int cameras = 4;
    int h_img = 32, w_img = 32;
    int c_img = 16;
    double fov_h_deg = 90.0;
    double fov_v_deg = 30.0;
    double pitch_deg = -18.0;
    double height = 1.2;
};

std::vector<camera_model> build_rig(const camera_rig_cfg& cfg);

} // namespace woc
