#include "woc/scenegen.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>

#include "woc/common.h"
#include "woc/rng.h"

static_assert(std::endian::native == std::endian::little,
              "ScenePack serialization assumes a little-endian host");

namespace woc {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kCameraFarClip = 60.0;

struct size_prior {
    double hx, hy, hz;
};

// Base half-extents (m) per class id; drivable surface (11) is ground-only.
const size_prior kSizePriors[kNumClasses + 1] = {
    {0, 0, 0},          // 0 empty
    {0.9, 0.15, 0.35},  // 1 barrier
    {0.55, 0.2, 0.45},  // 2 bicycle
    {2.2, 1.0, 1.1},    // 3 bus
    {1.1, 0.5, 0.5},    // 4 car
    {1.5, 0.9, 0.9},    // 5 construction vehicle
    {0.65, 0.3, 0.45},  // 6 motorcycle
    {0.3, 0.3, 0.8},    // 7 pedestrian
    {0.25, 0.25, 0.4},  // 8 traffic cone
    {1.9, 0.9, 1.0},    // 9 trailer
    {1.7, 0.9, 1.0},    // 10 truck
    {0, 0, 0},          // 11 drivable surface
    {1.2, 1.2, 0.2},    // 12 other flat
    {1.4, 1.0, 0.2},    // 13 sidewalk
    {1.3, 1.3, 0.2},    // 14 terrain
    {1.1, 0.9, 1.0},    // 15 manmade
    {0.9, 0.9, 0.9},    // 16 vegetation
};

// Classes that can be sampled as scene objects (everything but ground).
std::vector<uint8_t> placeable_classes() {
    std::vector<uint8_t> out;
    for (int c = 1; c <= kNumClasses; ++c)
        if (c != kClassDrivableSurface) out.push_back(static_cast<uint8_t>(c));
    return out;
}

} // namespace

void rasterize_scene(const scene& sc, label_grid& grid) {
    const grid_spec& s = grid.spec;
    // Ground slab: the bottom voxel layer.
    for (int ix = 0; ix < s.nx; ++ix)
        for (int iy = 0; iy < s.ny; ++iy) grid.at({ix, iy, 0}) = kClassDrivableSurface;
    for (const scene_object& ob : sc.objects) {
        // Conservative index window, then exact half-open center containment.
        const int ix0 = std::max(0, static_cast<int>(std::floor((ob.cx - ob.hx - s.x_min) / s.voxel)) - 1);
        const int ix1 = std::min(s.nx - 1, static_cast<int>(std::ceil((ob.cx + ob.hx - s.x_min) / s.voxel)) + 1);
        const int iy0 = std::max(0, static_cast<int>(std::floor((ob.cy - ob.hy - s.y_min) / s.voxel)) - 1);
        const int iy1 = std::min(s.ny - 1, static_cast<int>(std::ceil((ob.cy + ob.hy - s.y_min) / s.voxel)) + 1);
        const int iz0 = std::max(0, static_cast<int>(std::floor((ob.cz - ob.hz - s.z_min) / s.voxel)) - 1);
        const int iz1 = std::min(s.nz - 1, static_cast<int>(std::ceil((ob.cz + ob.hz - s.z_min) / s.voxel)) + 1);
        for (int ix = ix0; ix <= ix1; ++ix) {
            const double xc = s.x_min + (ix + 0.5) * s.voxel;
            if (!(ob.cx - ob.hx <= xc && xc < ob.cx + ob.hx)) continue;
            for (int iy = iy0; iy <= iy1; ++iy) {
                const double yc = s.y_min + (iy + 0.5) * s.voxel;
                if (!(ob.cy - ob.hy <= yc && yc < ob.cy + ob.hy)) continue;
                for (int iz = iz0; iz <= iz1; ++iz) {
                    const double zc = s.z_min + (iz + 0.5) * s.voxel;
                    if (!(ob.cz - ob.hz <= zc && zc < ob.cz + ob.hz)) continue;
                    grid.at({ix, iy, iz}) = ob.cls;
                }
            }
        }
    }
}

namespace {

// Nearest analytic intersection with the ground plane and object boxes.
// Returns hit class (0 = none) and distance.
int analytic_hit(const scene& sc, const double o[3], const double d[3], double& t_out) {
    double best_t = kCameraFarClip;
    int best_cls = 0;
    if (d[2] < -1e-12) {
        const double t = (sc.z_ground - o[2]) / d[2];
        if (t > 1e-9 && t < best_t) {
            best_t = t;
            best_cls = kClassDrivableSurface;
        }
    }
    for (const scene_object& ob : sc.objects) {
        const double lo[3] = {ob.cx - ob.hx, ob.cy - ob.hy, ob.cz - ob.hz};
        const double hi[3] = {ob.cx + ob.hx, ob.cy + ob.hy, ob.cz + ob.hz};
        double t0 = 1e-9, t1 = std::numeric_limits<double>::infinity();
        bool miss = false;
        for (int a = 0; a < 3 && !miss; ++a) {
            if (std::fabs(d[a]) < 1e-15) {
                if (o[a] < lo[a] || o[a] > hi[a]) miss = true;
            } else {
                double ta = (lo[a] - o[a]) / d[a];
                double tb = (hi[a] - o[a]) / d[a];
                if (ta > tb) std::swap(ta, tb);
                t0 = std::max(t0, ta);
                t1 = std::min(t1, tb);
                if (t0 > t1) miss = true;
            }
        }
        if (!miss && t0 < best_t) {
            best_t = t0;
            best_cls = ob.cls;
        }
    }
    t_out = best_t;
    return best_cls;
}

} // namespace

std::pair<scene, label_grid> generate_scene(const scene_gen_cfg& cfg, uint64_t seed,
                                            weather_flags weather) {
    if (cfg.min_objects < 0 || cfg.max_objects < cfg.min_objects)
        throw std::invalid_argument("generate_scene: need 0 <= min_objects <= max_objects");
    scene sc;
    sc.z_ground = cfg.spec.z_min + cfg.spec.voxel;
    sc.weather = weather;
    sc.seed = seed;

    rng r(mix_seed(seed, fnv1a64("scene")));
    const auto classes = placeable_classes();
    const int n = cfg.min_objects +
                  static_cast<int>(r.uniform_int(cfg.max_objects - cfg.min_objects + 1));
    for (int i = 0; i < n; ++i) {
        scene_object ob;
        ob.cls = classes[r.uniform_int(static_cast<int64_t>(classes.size()))];
        const size_prior& pr = kSizePriors[ob.cls];
        ob.hx = pr.hx * r.uniform(1.0 - cfg.size_jitter, 1.0 + cfg.size_jitter);
        ob.hy = pr.hy * r.uniform(1.0 - cfg.size_jitter, 1.0 + cfg.size_jitter);
        ob.hz = pr.hz * r.uniform(1.0 - cfg.size_jitter, 1.0 + cfg.size_jitter);
        const double radius = r.uniform(cfg.place_radius_min, cfg.place_radius_max);
        const double angle = r.uniform(0.0, 2.0 * kPi);
        ob.cx = radius * std::cos(angle);
        ob.cy = radius * std::sin(angle);
        ob.cz = sc.z_ground + ob.hz; // resting on the ground
        sc.objects.push_back(ob);
    }
    label_grid grid(cfg.spec);
    rasterize_scene(sc, grid);
    return {std::move(sc), std::move(grid)};
}

double raycast_first_hit(const label_grid& occ, const double o[3], const double d[3], double t_max) {
    const grid_spec& s = occ.spec;
    const double lo[3] = {s.x_min, s.y_min, s.z_min};
    const double hi[3] = {s.x_max, s.y_max, s.z_max};
    double t0 = 0.0, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
        if (std::fabs(d[a]) < 1e-15) {
            if (o[a] < lo[a] || o[a] >= hi[a]) return -1.0;
        } else {
            double ta = (lo[a] - o[a]) / d[a];
            double tb = (hi[a] - o[a]) / d[a];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
        }
    }
    if (t0 > t1) return -1.0;

    const double px = o[0] + (t0 + 1e-12) * d[0];
    const double py = o[1] + (t0 + 1e-12) * d[1];
    const double pz = o[2] + (t0 + 1e-12) * d[2];
    auto start = world_to_index(px, py, pz, s);
    if (!start) return -1.0;

    int c[3] = {start->ix, start->iy, start->iz};
    const int dims[3] = {s.nx, s.ny, s.nz};
    int step[3];
    double tmax[3], tdelta[3];
    for (int a = 0; a < 3; ++a) {
        if (std::fabs(d[a]) < 1e-15) {
            step[a] = 0;
            tmax[a] = std::numeric_limits<double>::infinity();
            tdelta[a] = std::numeric_limits<double>::infinity();
        } else if (d[a] > 0) {
            step[a] = 1;
            tmax[a] = (lo[a] + (c[a] + 1) * s.voxel - o[a]) / d[a];
            tdelta[a] = s.voxel / d[a];
        } else {
            step[a] = -1;
            tmax[a] = (lo[a] + c[a] * s.voxel - o[a]) / d[a];
            tdelta[a] = -s.voxel / d[a];
        }
    }
    double t_enter = t0;
    while (true) {
        const int64_t flat = (static_cast<int64_t>(c[0]) * s.ny + c[1]) * s.nz + c[2];
        const uint8_t lab = occ.labels[flat];
        if (lab != kLabelEmpty && lab != kLabelIgnore) return t_enter;
        int axis = 0;
        if (tmax[1] < tmax[axis]) axis = 1;
        if (tmax[2] < tmax[axis]) axis = 2;
        t_enter = tmax[axis];
        if (t_enter > t1) return -1.0;
        c[axis] += step[axis];
        if (c[axis] < 0 || c[axis] >= dims[axis]) return -1.0;
        tmax[axis] += tdelta[axis];
    }
}

point_cloud simulate_lidar(const scene& sc, const label_grid& occ, const lidar_cfg& cfg,
                           const degradation_cfg& deg, weather_flags weather) {
    if (cfg.n_azimuth <= 0 || cfg.n_elevation <= 0)
        throw std::invalid_argument("simulate_lidar: ray counts must be positive");
    point_cloud pc;
    rng r(mix_seed(sc.seed, fnv1a64("lidar")));
    for (int ie = 0; ie < cfg.n_elevation; ++ie) {
        const double el =
            (cfg.el_min_deg + (ie + 0.5) * (cfg.el_max_deg - cfg.el_min_deg) / cfg.n_elevation) *
            kPi / 180.0;
        for (int ia = 0; ia < cfg.n_azimuth; ++ia) {
            const double az = 2.0 * kPi * ia / cfg.n_azimuth;
            const double dir[3] = {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                                   std::sin(el)};
            const double t = raycast_first_hit(occ, cfg.origin, dir, cfg.range_max);
            const double true_range = t > 0.0 ? t : cfg.range_max;
            if (weather.rainy && r.bernoulli(deg.p_bs)) {
                double br = std::max(0.5, r.exponential(deg.lambda_bs));
                if (br >= true_range) br = true_range * (1.0 - 1e-9);
                const float inten = static_cast<float>(r.uniform(0.0, 0.2));
                pc.pts.push_back({static_cast<float>(cfg.origin[0] + br * dir[0]),
                                  static_cast<float>(cfg.origin[1] + br * dir[1]),
                                  static_cast<float>(cfg.origin[2] + br * dir[2]), inten});
                continue;
            }
            if (t <= 0.0) continue;
            if (weather.rainy && r.bernoulli(deg.p_drop)) continue;
            const float inten = static_cast<float>(1.0 - t / cfg.range_max);
            pc.pts.push_back({static_cast<float>(cfg.origin[0] + t * dir[0]),
                              static_cast<float>(cfg.origin[1] + t * dir[1]),
                              static_cast<float>(cfg.origin[2] + t * dir[2]), inten});
        }
    }
    return pc;
}

tensor class_signature(int cls, int c_img) {
    if (cls < 1 || cls > kNumClasses) throw std::invalid_argument(str("class_signature: bad class ", cls));
    rng r(mix_seed(0x5349474eULL, static_cast<uint64_t>(cls)));
    tensor sig({c_img});
    double norm = 0.0;
    for (double& v : sig.data) {
        v = r.normal();
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : sig.data) v /= norm;
    return sig;
}

std::vector<tensor> simulate_camera(const scene& sc, const std::vector<camera_model>& cameras,
                                    int c_img, const degradation_cfg& deg, weather_flags weather) {
    if (cameras.empty()) throw std::invalid_argument("simulate_camera: need at least one camera");
    std::vector<tensor> signatures;
    for (int c = 1; c <= kNumClasses; ++c) signatures.push_back(class_signature(c, c_img));

    std::vector<tensor> maps;
    rng r(mix_seed(sc.seed, fnv1a64("camera")));
    for (const camera_model& cam : cameras) {
        tensor map({c_img, cam.h_img, cam.w_img});
        for (int v = 0; v < cam.h_img; ++v) {
            for (int u = 0; u < cam.w_img; ++u) {
                double o[3], d[3];
                cam.pixel_ray(u, v, o, d);
                double t;
                const int cls = analytic_hit(sc, o, d, t);
                if (cls == 0) continue;
                const double scale = 1.0 / (1.0 + t / 10.0);
                const tensor& sig = signatures[cls - 1];
                for (int c = 0; c < c_img; ++c)
                    map.data[(static_cast<int64_t>(c) * cam.h_img + v) * cam.w_img + u] =
                        sig.data[c] * scale;
            }
        }
        if (weather.night)
            for (double& x : map.data) x = deg.a_night * x + r.normal(0.0, deg.sigma_night);
        if (weather.rainy) {
            for (double& x : map.data) x += r.normal(0.0, deg.sigma_rain);
            // Streaks zero an exact fraction of columns (after all noise, so
            // streaked columns are exactly zero).
            const int k = std::min(cam.w_img,
                                   static_cast<int>(std::lround(deg.streak_frac * cam.w_img)));
            std::vector<int> cols;
            while (static_cast<int>(cols.size()) < k) {
                const int col = static_cast<int>(r.uniform_int(cam.w_img));
                if (std::find(cols.begin(), cols.end(), col) == cols.end()) cols.push_back(col);
            }
            for (int col : cols)
                for (int c = 0; c < c_img; ++c)
                    for (int v = 0; v < cam.h_img; ++v)
                        map.data[(static_cast<int64_t>(c) * cam.h_img + v) * cam.w_img + col] = 0.0;
        }
        maps.push_back(std::move(map));
    }
    return maps;
}

// ---- ScenePack serialization ----------------------------------------------

namespace {

struct pack_writer {
    std::string buf;
    void bytes(const void* p, size_t n) { buf.append(static_cast<const char*>(p), n); }
    void u16(uint16_t v) { bytes(&v, 2); }
    void u32(uint32_t v) { bytes(&v, 4); }
    void i32(int32_t v) { bytes(&v, 4); }
    void f32(float v) { bytes(&v, 4); }
    void f64(double v) { bytes(&v, 8); }
};

struct pack_reader {
    std::string data;
    size_t pos = 0;
    const char* section = "header";

    void need(size_t n) {
        if (pos + n > data.size())
            throw std::runtime_error(str("scene pack: truncated in section '", section, "'"));
    }
    void bytes(void* p, size_t n) {
        need(n);
        std::memcpy(p, data.data() + pos, n);
        pos += n;
    }
    uint16_t u16() { uint16_t v; bytes(&v, 2); return v; }
    uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
    int32_t i32() { int32_t v; bytes(&v, 4); return v; }
    float f32() { float v; bytes(&v, 4); return v; }
    double f64() { double v; bytes(&v, 8); return v; }
};

} // namespace

void write_scene_pack(const std::string& path, const scene_record& rec) {
    const int n_cams = static_cast<int>(rec.cameras.size());
    if (static_cast<int>(rec.feature_maps.size()) != n_cams)
        throw std::invalid_argument("write_scene_pack: camera/feature-map count mismatch");
    if (static_cast<int64_t>(rec.labels.size()) != rec.spec.voxel_count())
        throw std::invalid_argument("write_scene_pack: label grid size mismatch");
    const int c_img = n_cams > 0 ? static_cast<int>(rec.feature_maps[0].shape[0]) : 0;
    const int h = n_cams > 0 ? rec.cameras[0].h_img : 0;
    const int w = n_cams > 0 ? rec.cameras[0].w_img : 0;
    for (int i = 0; i < n_cams; ++i) {
        const tensor& m = rec.feature_maps[i];
        if (m.rank() != 3 || m.shape[0] != c_img || m.shape[1] != h || m.shape[2] != w)
            throw std::invalid_argument(str("write_scene_pack: feature map ", i, " has shape ",
                                            m.shape_str(), ", want [", c_img, ",", h, ",", w, "]"));
    }

    pack_writer wr;
    wr.bytes("WOC1", 4);
    wr.u16(1);
    wr.f64(rec.spec.x_min); wr.f64(rec.spec.x_max);
    wr.f64(rec.spec.y_min); wr.f64(rec.spec.y_max);
    wr.f64(rec.spec.z_min); wr.f64(rec.spec.z_max);
    wr.f64(rec.spec.voxel);
    wr.i32(rec.spec.nx); wr.i32(rec.spec.ny); wr.i32(rec.spec.nz);
    wr.u32(static_cast<uint32_t>(n_cams));
    wr.u32(static_cast<uint32_t>(c_img));
    wr.u32(static_cast<uint32_t>(h));
    wr.u32(static_cast<uint32_t>(w));
    wr.u32(static_cast<uint32_t>(rec.cloud.pts.size()));
    for (const auto& p : rec.cloud.pts)
        for (float f : p) wr.f32(f);
    for (const tensor& m : rec.feature_maps)
        for (double v : m.data) wr.f32(static_cast<float>(v));
    for (const camera_model& cam : rec.cameras) {
        for (double v : cam.intrinsics.data) wr.f64(v);
        for (double v : cam.extrinsics.data) wr.f64(v);
    }
    wr.bytes(rec.labels.data(), rec.labels.size());
    const uint8_t wf[2] = {rec.weather.rainy ? uint8_t{1} : uint8_t{0},
                           rec.weather.night ? uint8_t{1} : uint8_t{0}};
    wr.bytes(wf, 2);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(str("write_scene_pack: cannot open '", path, "'"));
    out.write(wr.buf.data(), static_cast<std::streamsize>(wr.buf.size()));
    if (!out) throw std::runtime_error(str("write_scene_pack: write failed for '", path, "'"));
}

scene_record read_scene_pack(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(str("read_scene_pack: cannot open '", path, "'"));
    pack_reader rd;
    rd.data.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());

    char magic[4];
    rd.bytes(magic, 4);
    if (std::memcmp(magic, "WOC1", 4) != 0) throw std::runtime_error("scene pack: bad magic");
    const uint16_t version = rd.u16();
    if (version != 1)
        throw std::runtime_error(str("scene pack: unsupported version ", version));

    scene_record rec;
    const double x0 = rd.f64(), x1 = rd.f64(), y0 = rd.f64(), y1 = rd.f64(), z0 = rd.f64(),
                 z1 = rd.f64(), voxel = rd.f64();
    rec.spec = grid_spec::from_extents(x0, x1, y0, y1, z0, z1, voxel);
    const int nx = rd.i32(), ny = rd.i32(), nz = rd.i32();
    if (nx != rec.spec.nx || ny != rec.spec.ny || nz != rec.spec.nz)
        throw std::runtime_error("scene pack: stored grid dims disagree with extents");
    const uint32_t n_cams = rd.u32();
    const uint32_t c_img = rd.u32();
    const uint32_t h = rd.u32();
    const uint32_t w = rd.u32();
    const uint32_t n_points = rd.u32();

    rd.section = "points";
    rec.cloud.pts.resize(n_points);
    for (auto& p : rec.cloud.pts)
        for (float& f : p) f = rd.f32();

    rd.section = "features";
    for (uint32_t i = 0; i < n_cams; ++i) {
        tensor m({static_cast<int64_t>(c_img), static_cast<int64_t>(h), static_cast<int64_t>(w)});
        for (double& v : m.data) v = static_cast<double>(rd.f32());
        rec.feature_maps.push_back(std::move(m));
    }

    rd.section = "calibration";
    for (uint32_t i = 0; i < n_cams; ++i) {
        tensor k({3, 3}), e({4, 4});
        for (double& v : k.data) v = rd.f64();
        for (double& v : e.data) v = rd.f64();
        rec.cameras.emplace_back(std::move(k), std::move(e), static_cast<int>(h),
                                 static_cast<int>(w));
    }

    rd.section = "labels";
    rec.labels.resize(rec.spec.voxel_count());
    rd.bytes(rec.labels.data(), rec.labels.size());
    for (uint8_t lab : rec.labels)
        if (lab > kNumClasses && lab != kLabelIgnore)
            throw std::runtime_error(str("scene pack: invalid label value ", int(lab)));

    rd.section = "weather";
    uint8_t wf[2];
    rd.bytes(wf, 2);
    rec.weather.rainy = wf[0] != 0;
    rec.weather.night = wf[1] != 0;
    return rec;
}

// ---- Dataset generation ----------------------------------------------------

std::vector<manifest_entry> generate_dataset(const dataset_gen_cfg& cfg, const std::string& out_dir,
                                             std::ostream& log) {
    if (cfg.scenes <= 0) throw std::invalid_argument("generate_dataset: scenes must be positive");
    double mix_sum = 0.0;
    for (double m : cfg.mix) {
        if (m < 0.0) throw std::invalid_argument("generate_dataset: negative mix fraction");
        mix_sum += m;
    }
    if (mix_sum <= 0.0) throw std::invalid_argument("generate_dataset: mix sums to zero");

    // Largest-remainder apportionment of scene counts per condition.
    int counts[4];
    double frac[4];
    int assigned = 0;
    for (int i = 0; i < 4; ++i) {
        const double exact = cfg.scenes * cfg.mix[i] / mix_sum;
        counts[i] = static_cast<int>(std::floor(exact));
        frac[i] = exact - counts[i];
        assigned += counts[i];
    }
    while (assigned < cfg.scenes) {
        int best = 0;
        for (int i = 1; i < 4; ++i)
            if (frac[i] > frac[best]) best = i;
        counts[best] += 1;
        frac[best] = -1.0;
        assigned += 1;
    }

    // Condition id: bit1 = rainy, bit0 = night (0=cd, 1=cn, 2=rd, 3=rn).
    std::vector<weather_flags> weather;
    for (int cond = 0; cond < 4; ++cond)
        for (int i = 0; i < counts[cond]; ++i)
            weather.push_back(weather_flags{(cond & 2) != 0, (cond & 1) != 0});
    rng shuffle_rng(mix_seed(cfg.seed, fnv1a64("mix")));
    for (size_t i = weather.size(); i > 1; --i)
        std::swap(weather[i - 1], weather[shuffle_rng.uniform_int(static_cast<int64_t>(i))]);

    std::filesystem::create_directories(out_dir);
    const std::vector<camera_model> rig = build_rig(cfg.rig);

    std::vector<manifest_entry> manifest;
    std::string manifest_text;
    for (int i = 0; i < cfg.scenes; ++i) {
        const uint64_t scene_seed = mix_seed(cfg.seed, static_cast<uint64_t>(i));
        auto [sc, labels] = generate_scene(cfg.scene_cfg, scene_seed, weather[i]);

        scene_record rec;
        rec.spec = cfg.scene_cfg.spec;
        rec.weather = weather[i];
        rec.cloud = simulate_lidar(sc, labels, cfg.lidar, cfg.degrade, weather[i]);
        rec.cameras = rig;
        rec.feature_maps = simulate_camera(sc, rig, cfg.rig.c_img, cfg.degrade, weather[i]);
        // Quantize to the stored precision so write/read round-trips are
        // bit-exact in memory too.
        for (tensor& m : rec.feature_maps)
            for (double& v : m.data) v = static_cast<double>(static_cast<float>(v));
        rec.labels = labels.labels;

        char name[32];
        std::snprintf(name, sizeof name, "scene_%05d.wocpack", i);
        write_scene_pack(out_dir + "/" + name, rec);
        manifest.push_back({name, weather[i]});
        manifest_text += str(name, "\t", weather[i].rainy ? 1 : 0, "\t", weather[i].night ? 1 : 0, "\n");
    }
    std::ofstream mf(out_dir + "/manifest.txt", std::ios::binary | std::ios::trunc);
    if (!mf) throw std::runtime_error(str("generate_dataset: cannot write manifest in '", out_dir, "'"));
    mf << manifest_text;
    log << "generated " << cfg.scenes << " scenes in " << out_dir << " (cd/cn/rd/rn = " << counts[0]
        << "/" << counts[1] << "/" << counts[2] << "/" << counts[3] << ")\n";
    return manifest;
}

std::vector<manifest_entry> read_manifest(const std::string& dir) {
    std::ifstream in(dir + "/manifest.txt");
    if (!in) throw std::runtime_error(str("read_manifest: cannot open '", dir, "/manifest.txt'"));
    std::vector<manifest_entry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const size_t t1 = line.find('\t');
        const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            throw std::runtime_error(str("read_manifest: malformed line ", lineno));
        manifest_entry e;
        e.file = line.substr(0, t1);
        const std::string rainy = line.substr(t1 + 1, t2 - t1 - 1);
        const std::string night = line.substr(t2 + 1);
        if ((rainy != "0" && rainy != "1") || (night != "0" && night != "1"))
            throw std::runtime_error(str("read_manifest: bad weather flags on line ", lineno));
        e.weather.rainy = rainy == "1";
        e.weather.night = night == "1";
        out.push_back(std::move(e));
    }
    if (out.empty()) throw std::runtime_error(str("read_manifest: empty manifest in '", dir, "'"));
    return out;
}

} // namespace woc
