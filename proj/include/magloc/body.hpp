#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "magloc/textio.hpp"
#include "magloc/vec.hpp"

namespace magloc {

// Voxelized standing body: voxel centers are the candidate nano-machine
// positions. All coordinates live in the (+x, +y, +z) octant.
struct BodyModel {
    std::vector<Vec3> voxels;
    double resolution = 0.0;  // meters
    Aabb bounding_box;
};

inline Aabb bounding_box_of(const std::vector<Vec3>& points) {
    if (points.empty()) throw std::invalid_argument("bounding_box_of: no points");
    Aabb box{points.front(), points.front()};
    for (const Vec3& p : points) {
        box.min.x = std::min(box.min.x, p.x);
        box.min.y = std::min(box.min.y, p.y);
        box.min.z = std::min(box.min.z, p.z);
        box.max.x = std::max(box.max.x, p.x);
        box.max.y = std::max(box.max.y, p.y);
        box.max.z = std::max(box.max.z, p.z);
    }
    return box;
}

namespace detail {

// Standing figure assembled from analytic solids, expressed for a 1.75 m
// reference height and scaled uniformly. x spans left-right (sagittal plane
// at x = 0), y front-back, z height above the soles. All solids are mirror
// symmetric in x.
inline bool phantom_contains_ref(double x, double y, double z) {
    // legs: tapered cylinders, feet at z = 0, merging at the top
    if (z >= 0.0 && z <= 0.84) {
        const double t = z / 0.84;
        const double r = 0.05 + 0.035 * t;
        const double dx = std::abs(x) - 0.085;
        if (dx * dx + y * y <= r * r) return true;
    }
    // torso: elliptic cylinder
    if (z >= 0.80 && z <= 1.47) {
        const double ex = x / 0.17, ey = y / 0.105;
        if (ex * ex + ey * ey <= 1.0) return true;
    }
    // neck
    if (z >= 1.44 && z <= 1.56) {
        if (x * x + y * y <= 0.05 * 0.05) return true;
    }
    // head: ellipsoid with the crown at exactly 1.75
    {
        const double hx = x / 0.078, hy = y / 0.093, hz = (z - 1.635) / 0.115;
        if (hx * hx + hy * hy + hz * hz <= 1.0) return true;
    }
    // arms: tapered cylinders, tilted inward so the tops merge into the torso
    if (z >= 0.77 && z <= 1.43) {
        const double t = (z - 0.77) / 0.66;
        const double cx = 0.24 - 0.05 * t;
        const double r = 0.035 + 0.013 * t;
        const double dx = std::abs(x) - cx;
        if (dx * dx + y * y <= r * r) return true;
    }
    return false;
}

// Smallest positive gap between consecutive sorted values.
inline double min_positive_gap(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < values.size(); ++i) {
        const double d = values[i] - values[i - 1];
        if (d > 1e-12) gap = std::min(gap, d);
    }
    return gap;
}

}  // namespace detail

// Procedural voxel phantom. The body stands on the z = margin_z plane,
// centered over (margin_xy + half extents) in x and y, entirely inside the
// positive octant. Voxel centers form a regular grid of the given
// resolution.
inline BodyModel generate_phantom(double height = 1.75, double resolution = 0.005,
                                  double margin_xy = 0.05, double margin_z = 0.05) {
    if (!(height > 0.0) || !std::isfinite(height))
        throw std::invalid_argument("generate_phantom: height must be positive");
    if (!(resolution > 0.0) || !(resolution <= height / 50.0))
        throw std::invalid_argument("generate_phantom: resolution must be in (0, height/50]");
    if (!(margin_xy >= 0.0) || !(margin_z >= 0.0))
        throw std::invalid_argument("generate_phantom: margins must be non-negative");

    const double scale = height / 1.75;
    const double half_x = 0.30 * scale;
    const double half_y = 0.15 * scale;
    const int nx = static_cast<int>(std::ceil(half_x / resolution));
    const int ny = static_cast<int>(std::ceil(half_y / resolution));
    const int nz = static_cast<int>(std::ceil(height / resolution));

    std::vector<Vec3> voxels;
    for (int k = 0; k < nz; ++k) {
        const double z = (k + 0.5) * resolution;
        for (int j = -ny; j < ny; ++j) {
            const double y = (j + 0.5) * resolution;
            for (int i = -nx; i < nx; ++i) {
                const double x = (i + 0.5) * resolution;
                if (detail::phantom_contains_ref(x / scale, y / scale, z / scale))
                    voxels.push_back({x, y, z});
            }
        }
    }
    if (voxels.empty()) throw std::runtime_error("generate_phantom: produced no voxels");

    Aabb raw = bounding_box_of(voxels);
    const Vec3 shift{margin_xy - raw.min.x, margin_xy - raw.min.y, margin_z - raw.min.z};
    for (Vec3& v : voxels) v = v + shift;

    BodyModel body;
    body.voxels = std::move(voxels);
    body.resolution = resolution;
    body.bounding_box = bounding_box_of(body.voxels);
    return body;
}

// --- voxel file format -----------------------------------------------------
// One voxel center per line as `x,y,z` in meters, no header; '#' starts a
// comment line. Coordinates must be non-negative and lie on a regular grid.

inline BodyModel load_voxels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_voxels: cannot open " + path.string());
    std::vector<Vec3> voxels;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        double c[3];
        for (int i = 0; i < 3; ++i) {
            std::size_t comma = sv.find(',');
            if (i < 2 && comma == std::string_view::npos) fail("expected x,y,z");
            const std::string_view field = trim(i < 2 ? sv.substr(0, comma) : sv);
            if (!parse_double(field, c[i]) || !std::isfinite(c[i]))
                fail("bad coordinate '" + std::string(field) + "'");
            if (i < 2) sv = sv.substr(comma + 1);
        }
        if (c[0] < 0.0 || c[1] < 0.0 || c[2] < 0.0)
            fail("voxel outside the (+x,+y,+z) octant");
        voxels.push_back({c[0], c[1], c[2]});
    }
    if (voxels.empty()) throw std::runtime_error(path.string() + ": no voxels");

    std::vector<double> xs, ys, zs;
    xs.reserve(voxels.size());
    ys.reserve(voxels.size());
    zs.reserve(voxels.size());
    for (const Vec3& v : voxels) {
        xs.push_back(v.x);
        ys.push_back(v.y);
        zs.push_back(v.z);
    }
    const double resolution = std::min({detail::min_positive_gap(std::move(xs)),
                                        detail::min_positive_gap(std::move(ys)),
                                        detail::min_positive_gap(std::move(zs))});
    if (!std::isfinite(resolution))
        throw std::runtime_error(path.string() + ": cannot infer resolution (all voxels coincide)");

    BodyModel body;
    body.voxels = std::move(voxels);
    body.resolution = resolution;
    body.bounding_box = bounding_box_of(body.voxels);
    // grid alignment relative to the box origin
    for (const Vec3& v : body.voxels) {
        const Vec3 rel = v - body.bounding_box.min;
        for (double c : {rel.x, rel.y, rel.z}) {
            const double q = c / resolution;
            if (std::abs(q - std::round(q)) * resolution > 1e-9)
                throw std::runtime_error(path.string() + ": voxel (" + format_double(v.x) + "," +
                                         format_double(v.y) + "," + format_double(v.z) +
                                         ") is off the inferred grid");
        }
    }
    return body;
}

inline void save_voxels(const BodyModel& body, const std::filesystem::path& path,
                        std::span<const std::string> header_comments = {}) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_voxels: cannot open " + path.string());
    for (const std::string& c : header_comments) out << "# " << c << '\n';
    for (const Vec3& v : body.voxels)
        out << format_double(v.x) << ',' << format_double(v.y) << ',' << format_double(v.z) << '\n';
    if (!out) throw std::runtime_error("save_voxels: write failed for " + path.string());
}

}  // namespace magloc
