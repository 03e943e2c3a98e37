#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "woc/camera.h"
#include "woc/grid.h"

namespace woc {

struct weather_flags {
    bool rainy = false;
    bool night = false;
    bool operator==(const weather_flags& o) const { return rainy == o.rainy && night == o.night; }
};

struct scene_object {
    uint8_t cls; // 1..kNumClasses
    double cx, cy, cz;
    double hx, hy, hz; // half-extents
};

struct scene {
    std::vector<scene_object> objects;
    double z_ground; // top face of the ground slab
    weather_flags weather;
    uint64_t seed;
};

// (x, y, z, intensity) quadruples, 32-bit floats as stored on disk.
struct point_cloud {
    std::vector<std::array<float, 4>> pts;
};

struct scene_gen_cfg {
    grid_spec spec = desk_spec();
    int min_objects = 6;
    int max_objects = 6;
    double place_radius_min = 2.2; // keep the sensor origin clear
    double place_radius_max = 6.8;
    double size_jitter = 0.15; // relative half-extent jitter
};

struct lidar_cfg {
    double origin[3] = {0.0, 0.0, 0.2};
    int n_azimuth = 64;
    int n_elevation = 8;
    double el_min_deg = -25.0;
    double el_max_deg = 5.0;
    double range_max = 20.0;
};

// Weather degradation defaults; all config-exposed.
struct degradation_cfg {
    double a_night = 0.25;     // night feature attenuation
    double sigma_night = 0.3;  // night additive noise
    double sigma_rain = 0.1;   // rain additive noise
    double p_bs = 0.15;        // backscatter probability per ray
    double lambda_bs = 0.2;    // backscatter range distribution (1/m)
    double p_drop = 0.1;       // rain true-hit drop probability
    double streak_frac = 0.05; // fraction of image columns zeroed by streaks
};

// Sample boxes (per-class size priors, resting on the ground slab) and
// rasterize by voxel-center containment. Ground slab: the bottom voxel layer,
// labeled drivable surface.
std::pair<scene, label_grid> generate_scene(const scene_gen_cfg& cfg, uint64_t seed,
                                            weather_flags weather = {});

// Rasterize a scene into labels: ground slab first, then each object in
// order by half-open voxel-center containment ([lo, hi) per axis).
void rasterize_scene(const scene& sc, label_grid& grid);

// First-surface returns over an azimuth/elevation lattice via voxel DDA
// against the rasterized occupancy; rain adds backscatter and dropouts.
point_cloud simulate_lidar(const scene& sc, const label_grid& occ, const lidar_cfg& cfg,
                           const degradation_cfg& deg, weather_flags weather);

// Per-camera feature maps [C_img, H, W]: analytic nearest-hit class signature
// scaled by 1/(1+range/10), then night/rain degradation.
std::vector<tensor> simulate_camera(const scene& sc, const std::vector<camera_model>& cameras,
                                    int c_img, const degradation_cfg& deg, weather_flags weather);

// Fixed unit signature vector for a class (independent of any dataset seed).
tensor class_signature(int cls, int c_img);

// Voxel DDA: first occupied voxel hit along a ray; returns entry distance, or
// a negative value when nothing is hit within t_max. Exposed for testing
// against the analytic ray-box oracle.
double raycast_first_hit(const label_grid& occ, const double origin[3], const double dir[3],
                         double t_max);

// ---- ScenePack on-disk record -------------------------------------------

struct scene_record {
    grid_spec spec = desk_spec();
    weather_flags weather;
    point_cloud cloud;
    std::vector<camera_model> cameras;
    std::vector<tensor> feature_maps; // per camera [C_img, H, W]
    std::vector<uint8_t> labels;      // voxel_count() bytes
};

void write_scene_pack(const std::string& path, const scene_record& rec);
scene_record read_scene_pack(const std::string& path);

// ---- Dataset generation ---------------------------------------------------

struct dataset_gen_cfg {
    int scenes = 200;
    uint64_t seed = 1;
    // Weather mix (clear-day, clear-night, rainy-day, rainy-night), normalized.
    std::array<double, 4> mix = {0.4, 0.2, 0.2, 0.2};
    scene_gen_cfg scene_cfg;
    lidar_cfg lidar;
    degradation_cfg degrade;
    camera_rig_cfg rig;
};

struct manifest_entry {
    std::string file;
    weather_flags weather;
};

// Writes scene_XXXXX.wocpack files plus manifest.txt (path TAB rainy TAB night).
// Byte-identical output for identical cfg.
std::vector<manifest_entry> generate_dataset(const dataset_gen_cfg& cfg, const std::string& out_dir,
                                             std::ostream& log);

std::vector<manifest_entry> read_manifest(const std::string& dir);

} // namespace woc
