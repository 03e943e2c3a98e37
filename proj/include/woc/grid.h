#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "woc/tensor.h"

namespace woc {

// Semantic label conventions shared by the whole pipeline.
inline constexpr int kNumClasses = 16;        // semantic classes 1..16
inline constexpr int kNumLogits = kNumClasses + 1; // + empty (label 0)
inline constexpr uint8_t kLabelEmpty = 0;
inline constexpr uint8_t kLabelIgnore = 255;
inline constexpr uint8_t kClassDrivableSurface = 11; // ground-plane label

// Class names follow the nuScenes occupancy column order (ids 1..16).
const char* class_name(int id);

// Axis-aligned voxel lattice over a box extent. Half-open voxels:
// voxel i covers [min + i*voxel, min + (i+1)*voxel).
struct grid_spec {
    double x_min, x_max, y_min, y_max, z_min, z_max;
    double voxel;
    int nx, ny, nz;

    static grid_spec from_extents(double x0, double x1, double y0, double y1, double z0, double z1,
                                  double voxel);
    int64_t voxel_count() const { return static_cast<int64_t>(nx) * ny * nz; }
    bool operator==(const grid_spec& o) const;
    std::string describe() const;
};

grid_spec paper_spec(); // [200,200,16], 0.4 m, x,y in [-40,40], z in [-1,5.4]
grid_spec desk_spec();  // [40,40,8],   0.4 m, x,y in [-8,8],   z in [-1,2.2]
grid_spec grid_preset(const std::string& name); // "paper" | "desk"

struct voxel_coord {
    int ix, iy, iz;
    bool operator==(const voxel_coord& o) const { return ix == o.ix && iy == o.iy && iz == o.iz; }
};

// Point exactly on the max face is out of bounds (half-open boxes).
std::optional<voxel_coord> world_to_index(double x, double y, double z, const grid_spec& spec);
// Center of voxel idx; throws on out-of-range idx.
void index_to_center(const voxel_coord& idx, const grid_spec& spec, double& x, double& y, double& z);

inline int64_t flat_index(const voxel_coord& c, const grid_spec& s) {
    return (static_cast<int64_t>(c.ix) * s.ny + c.iy) * s.nz + c.iz;
}

// Per-voxel semantic labels, flat (x,y,z) row-major order.
struct label_grid {
    grid_spec spec;
    std::vector<uint8_t> labels; // voxel_count() entries

    explicit label_grid(const grid_spec& s) : spec(s), labels(s.voxel_count(), kLabelEmpty) {}
    uint8_t& at(const voxel_coord& c) { return labels[flat_index(c, spec)]; }
    uint8_t at(const voxel_coord& c) const { return labels[flat_index(c, spec)]; }
};

enum class feature_role { camera, lidar, fused };

// Dense feature volume, tensor laid out [C, nx, ny, nz] row-major.
struct voxel_features {
    int channels;
    feature_role role;
    tensor volume;

    voxel_features(int c, const grid_spec& s, feature_role r)
        : channels(c), role(r), volume({c, s.nx, s.ny, s.nz}) {}
    voxel_features(int c, feature_role r, tensor vol)
        : channels(c), role(r), volume(std::move(vol)) {}
};

} // namespace woc
