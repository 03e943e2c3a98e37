#include "woc/grid.h"

#include <cmath>
#include <stdexcept>

#include "woc/common.h"

namespace woc {

const char* class_name(int id) {
    static const char* names[] = {"empty",        "barrier", "bicycle",        "bus",
                                  "car",          "constr_veh", "motorcycle",  "pedestrian",
                                  "traffic_cone", "trailer", "truck",          "drivable_surface",
                                  "other_flat",   "sidewalk", "terrain",       "manmade",
                                  "vegetation"};
    if (id < 0 || id > kNumClasses) throw std::invalid_argument(str("class_name: bad class id ", id));
    return names[id];
}

static int axis_count(double lo, double hi, double voxel, const char* axis) {
    const double extent = hi - lo;
    if (voxel <= 0.0) throw std::invalid_argument("grid_spec: voxel size must be positive");
    const double n = extent / voxel;
    const int rounded = static_cast<int>(std::llround(n));
    if (rounded < 1 || std::fabs(rounded * voxel - extent) > 1e-9)
        throw std::invalid_argument(str("grid_spec: ", axis, " extent ", extent,
                                        " is not an integer multiple of voxel ", voxel));
    return rounded;
}

grid_spec grid_spec::from_extents(double x0, double x1, double y0, double y1, double z0, double z1,
                                  double voxel) {
    grid_spec s{x0, x1, y0, y1, z0, z1, voxel, 0, 0, 0};
    s.nx = axis_count(x0, x1, voxel, "x");
    s.ny = axis_count(y0, y1, voxel, "y");
    s.nz = axis_count(z0, z1, voxel, "z");
    return s;
}

bool grid_spec::operator==(const grid_spec& o) const {
    return x_min == o.x_min && x_max == o.x_max && y_min == o.y_min && y_max == o.y_max &&
           z_min == o.z_min && z_max == o.z_max && voxel == o.voxel && nx == o.nx && ny == o.ny &&
           nz == o.nz;
}

std::string grid_spec::describe() const {
    return str("[", nx, ",", ny, ",", nz, "] voxel=", voxel, " x[", x_min, ",", x_max, "] y[", y_min,
               ",", y_max, "] z[", z_min, ",", z_max, "]");
}

grid_spec paper_spec() { return grid_spec::from_extents(-40, 40, -40, 40, -1, 5.4, 0.4); }

grid_spec desk_spec() { return grid_spec::from_extents(-8, 8, -8, 8, -1, 2.2, 0.4); }

grid_spec grid_preset(const std::string& name) {
    if (name == "paper") return paper_spec();
    if (name == "desk") return desk_spec();
    throw std::invalid_argument(str("grid_preset: unknown preset '", name, "' (want desk|paper)"));
}

std::optional<voxel_coord> world_to_index(double x, double y, double z, const grid_spec& spec) {
    // The >= max guard makes the upper boundary exclusive even when
    // (p - min)/voxel rounds down to n-1 in floating point.
    if (x < spec.x_min || x >= spec.x_max || y < spec.y_min || y >= spec.y_max || z < spec.z_min ||
        z >= spec.z_max)
        return std::nullopt;
    voxel_coord c{static_cast<int>(std::floor((x - spec.x_min) / spec.voxel)),
                  static_cast<int>(std::floor((y - spec.y_min) / spec.voxel)),
                  static_cast<int>(std::floor((z - spec.z_min) / spec.voxel))};
    c.ix = std::min(c.ix, spec.nx - 1); // guard the p < max but (p-min)/voxel == n rounding corner
    c.iy = std::min(c.iy, spec.ny - 1);
    c.iz = std::min(c.iz, spec.nz - 1);
    return c;
}

void index_to_center(const voxel_coord& idx, const grid_spec& spec, double& x, double& y, double& z) {
    if (idx.ix < 0 || idx.ix >= spec.nx || idx.iy < 0 || idx.iy >= spec.ny || idx.iz < 0 ||
        idx.iz >= spec.nz)
        throw std::out_of_range(str("index_to_center: (", idx.ix, ",", idx.iy, ",", idx.iz,
                                    ") outside ", spec.describe()));
    x = spec.x_min + (idx.ix + 0.5) * spec.voxel;
    y = spec.y_min + (idx.iy + 0.5) * spec.voxel;
    z = spec.z_min + (idx.iz + 0.5) * spec.voxel;
}

} // namespace woc
