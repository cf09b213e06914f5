#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "magloc/body.hpp"
#include "magloc/field.hpp"
#include "magloc/geometry.hpp"
#include "magloc/locate.hpp"
#include "magloc/rng.hpp"
#include "magloc/sensor.hpp"
#include "magloc/textio.hpp"
#include "magloc/vec.hpp"

namespace magloc {

// Everything needed to reproduce one Monte Carlo study bit for bit.
struct ScenarioConfig {
    // wire source: exactly one of arrangement / wire_file
    std::optional<Arrangement> arrangement;
    std::filesystem::path wire_file;
    double clearance = 0.1;   // meters, builtin cages only
    double current = 100.0;   // amperes, builtin cages only

    MagnetometerSpec magnetometer{};
    EarthResidualBounds earth{};
    Permeability mu{};

    int runs_per_point = 100;
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = hardware concurrency; never affects results

    // phantom source: file wins when set
    std::filesystem::path phantom_file;
    double phantom_height = 1.75;
    double phantom_resolution = 0.005;
    double phantom_margin_xy = 0.05;
    double phantom_margin_z = 0.05;

    double saturation_limit = 0.12;   // tesla
    std::filesystem::path output_dir;  // empty = compute only, write nothing
};

inline void validate_scenario(const ScenarioConfig& cfg) {
    const bool has_builtin = cfg.arrangement.has_value();
    const bool has_file = !cfg.wire_file.empty();
    if (has_builtin == has_file)
        throw std::invalid_argument(
            "ScenarioConfig: set exactly one wire source (arrangement or wire file)");
    if (cfg.runs_per_point < 1)
        throw std::invalid_argument("ScenarioConfig: runs_per_point must be >= 1");
    validate(cfg.magnetometer);
}

struct PointResult {
    Vec3 voxel;
    // means over the successful runs; NaN when every run failed
    double mean_error = std::numeric_limits<double>::quiet_NaN();
    double mean_ex = std::numeric_limits<double>::quiet_NaN();
    double mean_ey = std::numeric_limits<double>::quiet_NaN();
    double mean_ez = std::numeric_limits<double>::quiet_NaN();
    int saturated_runs = 0;
    int failed_runs = 0;
};

// Repeated localization attempts at one voxel. Per run the draw order is:
// orientation (3 draws), Earth residual (3 draws, fixed across wires within
// the run), then per-wire sensor noise in wire order. Each run owns the
// substream (seed, voxel_index, run), so results do not depend on how voxels
// or runs are scheduled.
inline PointResult simulate_point(const Vec3& voxel, std::size_t voxel_index,
                                  const WireSet& wires, const ScenarioConfig& cfg) {
    PointResult out;
    out.voxel = voxel;
    double sum_err = 0.0, sum_ex = 0.0, sum_ey = 0.0, sum_ez = 0.0;
    int successes = 0;
    std::vector<Measurement> sweep(wires.size());
    for (int run = 0; run < cfg.runs_per_point; ++run) {
        RngStream rng(cfg.seed, static_cast<std::uint64_t>(voxel_index),
                      static_cast<std::uint64_t>(run));
        const Rotation orientation = random_rotation(rng);
        const FieldVector residual = earth_residual(cfg.earth, rng);
        try {
            for (std::size_t i = 0; i < wires.size(); ++i) {
                const FieldVector b = flux_density_at(wires.wires()[i], voxel, cfg.mu);
                sweep[i] = measure(b, residual, orientation, cfg.magnetometer, rng);
            }
            const LocalizeResult loc = localize(sweep, wires, cfg.mu);
            const double dx = loc.position.x - voxel.x;
            const double dy = loc.position.y - voxel.y;
            const double dz = loc.position.z - voxel.z;
            sum_err += std::sqrt(dx * dx + dy * dy + dz * dz);
            sum_ex += std::abs(dx);
            sum_ey += std::abs(dy);
            sum_ez += std::abs(dz);
            ++successes;
            if (loc.any_saturated) ++out.saturated_runs;
        } catch (const std::exception&) {
            ++out.failed_runs;
        }
    }
    if (successes > 0) {
        out.mean_error = sum_err / successes;
        out.mean_ex = sum_ex / successes;
        out.mean_ey = sum_ey / successes;
        out.mean_ez = sum_ez / successes;
    }
    return out;
}

struct QuartileSummary {
    double q1 = 0.0, q2 = 0.0, q3 = 0.0, max = 0.0;
};

struct ErrorStats {
    QuartileSummary position, ex, ey, ez;
    std::size_t voxels_used = 0;
};

// Quantile by linear interpolation between closest ranks of the sorted
// sample (rank h = (n - 1) q).
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

// Quartiles and maxima over the per-voxel mean errors; voxels where every
// run failed are skipped.
inline ErrorStats summarize(const std::vector<PointResult>& points) {
    std::vector<double> pe, xe, ye, ze;
    for (const PointResult& p : points) {
        if (std::isnan(p.mean_error)) continue;
        pe.push_back(p.mean_error);
        xe.push_back(p.mean_ex);
        ye.push_back(p.mean_ey);
        ze.push_back(p.mean_ez);
    }
    if (pe.empty()) throw std::invalid_argument("summarize: no localized voxels");
    ErrorStats stats;
    stats.voxels_used = pe.size();
    auto fill = [](std::vector<double>& v, QuartileSummary& s) {
        std::sort(v.begin(), v.end());
        s.q1 = quantile_sorted(v, 0.25);
        s.q2 = quantile_sorted(v, 0.50);
        s.q3 = quantile_sorted(v, 0.75);
        s.max = v.back();
    };
    fill(pe, stats.position);
    fill(xe, stats.ex);
    fill(ye, stats.ey);
    fill(ze, stats.ez);
    return stats;
}

namespace detail {

template <typename Fn>
inline void parallel_for(std::size_t n, int threads, Fn&& fn) {
    threads = std::max(1, threads);
    if (threads == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const std::size_t chunk =
        std::max<std::size_t>(1, n / (static_cast<std::size_t>(threads) * 8));
    auto worker = [&] {
        for (;;) {
            const std::size_t start = next.fetch_add(chunk);
            if (start >= n) return;
            const std::size_t end = std::min(n, start + chunk);
            try {
                for (std::size_t i = start; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

inline std::string fmt_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace detail

inline const char* kPointsCsvHeader =
    "x,y,z,mean_err,mean_ex,mean_ey,mean_ez,saturated_runs,failed_runs";

inline void write_points_csv(std::ostream& out, const std::vector<PointResult>& points) {
    out << kPointsCsvHeader << '\n';
    for (const PointResult& p : points) {
        out << format_double(p.voxel.x) << ',' << format_double(p.voxel.y) << ','
            << format_double(p.voxel.z) << ',' << format_double(p.mean_error) << ','
            << format_double(p.mean_ex) << ',' << format_double(p.mean_ey) << ','
            << format_double(p.mean_ez) << ',' << p.saturated_runs << ',' << p.failed_runs
            << '\n';
    }
}

inline std::vector<PointResult> load_points_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_points_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != kPointsCsvHeader)
        throw std::runtime_error("load_points_csv: bad header in " + path.string());
    std::vector<PointResult> points;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view sv = trim(line);
        if (sv.empty()) continue;
        std::array<std::string_view, 9> fields;
        std::string_view rest = sv;
        for (int i = 0; i < 9; ++i) {
            const std::size_t comma = rest.find(',');
            if (i < 8 && comma == std::string_view::npos)
                throw std::runtime_error("load_points_csv: short row at line " +
                                         std::to_string(lineno));
            fields[i] = i < 8 ? rest.substr(0, comma) : rest;
            if (i < 8) rest = rest.substr(comma + 1);
        }
        PointResult p;
        double sat = 0.0, failed = 0.0;
        const bool ok = parse_double(fields[0], p.voxel.x) && parse_double(fields[1], p.voxel.y) &&
                        parse_double(fields[2], p.voxel.z) && parse_double(fields[3], p.mean_error) &&
                        parse_double(fields[4], p.mean_ex) && parse_double(fields[5], p.mean_ey) &&
                        parse_double(fields[6], p.mean_ez) && parse_double(fields[7], sat) &&
                        parse_double(fields[8], failed);
        if (!ok)
            throw std::runtime_error("load_points_csv: bad row at line " + std::to_string(lineno));
        p.saturated_runs = static_cast<int>(sat);
        p.failed_runs = static_cast<int>(failed);
        points.push_back(p);
    }
    if (points.empty()) throw std::runtime_error("load_points_csv: no rows in " + path.string());
    return points;
}

// Summary rows follow the study table layout, values in centimeters.
inline void write_summary(std::ostream& out, const ErrorStats& stats) {
    const char* group[4] = {"Maximum", "Median", "1st quartile", "3rd quartile"};
    auto pick = [](const QuartileSummary& s, int g) {
        switch (g) {
            case 0: return s.max;
            case 1: return s.q2;
            case 2: return s.q1;
            default: return s.q3;
        }
    };
    for (int g = 0; g < 4; ++g) {
        out << group[g] << " X error [cm] = " << detail::fmt_fixed(pick(stats.ex, g) * 100.0, 4) << '\n';
        out << group[g] << " Y error [cm] = " << detail::fmt_fixed(pick(stats.ey, g) * 100.0, 4) << '\n';
        out << group[g] << " Z error [cm] = " << detail::fmt_fixed(pick(stats.ez, g) * 100.0, 4) << '\n';
        out << group[g] << " position error [cm] = "
            << detail::fmt_fixed(pick(stats.position, g) * 100.0, 4) << '\n';
    }
    out << "Localized voxels = " << stats.voxels_used << '\n';
}

inline void write_manifest(std::ostream& out, const ScenarioConfig& cfg, const WireSet& wires,
                           std::size_t voxel_count) {
    out << "# scenario run manifest\n";
    out << "seed = " << cfg.seed << '\n';
    out << "runs_per_point = " << cfg.runs_per_point << '\n';
    out << "arrangement = "
        << (cfg.arrangement ? std::string(arrangement_name(*cfg.arrangement)) : std::string("-"))
        << '\n';
    out << "wire_file = " << (cfg.wire_file.empty() ? "-" : cfg.wire_file.string()) << '\n';
    out << "clearance_meters = " << format_double(cfg.clearance) << '\n';
    out << "current_amperes = " << format_double(cfg.current) << '\n';
    out << "rel_error = " << format_double(cfg.magnetometer.rel_error) << '\n';
    out << "range_max_tesla = " << format_double(cfg.magnetometer.range_max) << '\n';
    out << "noise_basis = "
        << (cfg.magnetometer.noise_basis == NoiseBasis::Component ? "component" : "magnitude")
        << '\n';
    out << "earth_residual_x_tesla = " << format_double(cfg.earth.ex) << '\n';
    out << "earth_residual_y_tesla = " << format_double(cfg.earth.ey) << '\n';
    out << "earth_residual_z_tesla = " << format_double(cfg.earth.ez) << '\n';
    out << "mu_henry_per_meter = " << format_double(cfg.mu.mu) << '\n';
    out << "saturation_limit_tesla = " << format_double(cfg.saturation_limit) << '\n';
    out << "phantom_file = " << (cfg.phantom_file.empty() ? "-" : cfg.phantom_file.string()) << '\n';
    out << "phantom_height_meters = " << format_double(cfg.phantom_height) << '\n';
    out << "phantom_resolution_meters = " << format_double(cfg.phantom_resolution) << '\n';
    out << "phantom_margin_xy_meters = " << format_double(cfg.phantom_margin_xy) << '\n';
    out << "phantom_margin_z_meters = " << format_double(cfg.phantom_margin_z) << '\n';
    out << "voxels = " << voxel_count << '\n';
    out << "wires = " << wires.size() << '\n';
    for (std::size_t i = 0; i < wires.size(); ++i)
        out << "wire." << i << " = " << format_wire_record(wires.wires()[i]) << '\n';
}

struct ScenarioResult {
    std::vector<PointResult> points;
    ErrorStats stats;
    WireSet wires;
    SaturationReport saturation;
};

// Full study: phantom, cage, saturation guard, data-parallel Monte Carlo
// over the voxels, statistics, and (when an output directory is set) the
// points.csv / summary.txt / manifest.txt triple.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    validate_scenario(cfg);
    const BodyModel body =
        cfg.phantom_file.empty()
            ? generate_phantom(cfg.phantom_height, cfg.phantom_resolution, cfg.phantom_margin_xy,
                               cfg.phantom_margin_z)
            : load_voxels(cfg.phantom_file);
    WireSet wires = cfg.wire_file.empty()
                        ? builtin_arrangement(*cfg.arrangement, cfg.clearance, cfg.current,
                                              body.bounding_box)
                        : load_wires(cfg.wire_file);

    const SaturationReport saturation =
        validate_saturation(wires, body, cfg.saturation_limit, cfg.mu);
    if (!saturation.ok) {
        throw std::domain_error(
            "run_scenario: saturation check failed, max field " +
            format_double(saturation.max_field) + " T > " + format_double(cfg.saturation_limit) +
            " T at voxel (" + format_double(saturation.worst_voxel.x) + "," +
            format_double(saturation.worst_voxel.y) + "," +
            format_double(saturation.worst_voxel.z) + "), wire " +
            std::to_string(saturation.worst_wire));
    }

    std::vector<PointResult> points(body.voxels.size());
    detail::parallel_for(body.voxels.size(), detail::resolve_threads(cfg.threads),
                         [&](std::size_t i) {
                             points[i] = simulate_point(body.voxels[i], i, wires, cfg);
                         });
    ErrorStats stats = summarize(points);

    if (!cfg.output_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.output_dir);
        auto open = [&](const char* name) {
            std::ofstream out(cfg.output_dir / name);
            if (!out)
                throw std::runtime_error("run_scenario: cannot write " +
                                         (cfg.output_dir / name).string());
            return out;
        };
        {
            std::ofstream out = open("points.csv");
            write_points_csv(out, points);
        }
        {
            std::ofstream out = open("summary.txt");
            write_summary(out, stats);
        }
        {
            std::ofstream out = open("manifest.txt");
            write_manifest(out, cfg, wires, body.voxels.size());
        }
    }
    return {std::move(points), stats, std::move(wires), saturation};
}

// --- error maps ------------------------------------------------------------

enum class Plane { XY, XZ, YZ };

inline Plane plane_from_name(std::string_view s) {
    if (s == "xy" || s == "XY") return Plane::XY;
    if (s == "xz" || s == "XZ") return Plane::XZ;
    if (s == "yz" || s == "YZ") return Plane::YZ;
    throw std::invalid_argument("unknown plane name: " + std::string(s));
}

// Regular 2D grid of mean localization error in centimeters; NaN marks cells
// with no body voxel.
struct ErrorMap {
    Axis col_axis;
    Axis row_axis;
    std::vector<double> col_coords;  // meters, ascending
    std::vector<double> row_coords;  // meters, ascending
    std::vector<double> cells_cm;    // row-major [row * cols + col]

    double cell(std::size_t row, std::size_t col) const {
        return cells_cm[row * col_coords.size() + col];
    }
};

namespace detail {

inline double coord_of(const Vec3& v, Axis a) {
    switch (a) {
        case Axis::X: return v.x;
        case Axis::Y: return v.y;
        default: return v.z;
    }
}

inline ErrorMap grid_from_samples(Axis col_axis, Axis row_axis,
                                  const std::vector<const PointResult*>& samples,
                                  double resolution) {
    double cmin = std::numeric_limits<double>::infinity(), cmax = -cmin;
    double rmin = cmin, rmax = -cmin;
    for (const PointResult* p : samples) {
        cmin = std::min(cmin, coord_of(p->voxel, col_axis));
        cmax = std::max(cmax, coord_of(p->voxel, col_axis));
        rmin = std::min(rmin, coord_of(p->voxel, row_axis));
        rmax = std::max(rmax, coord_of(p->voxel, row_axis));
    }
    const std::size_t cols = static_cast<std::size_t>(std::llround((cmax - cmin) / resolution)) + 1;
    const std::size_t rows = static_cast<std::size_t>(std::llround((rmax - rmin) / resolution)) + 1;
    ErrorMap map;
    map.col_axis = col_axis;
    map.row_axis = row_axis;
    map.col_coords.resize(cols);
    map.row_coords.resize(rows);
    for (std::size_t c = 0; c < cols; ++c) map.col_coords[c] = cmin + resolution * c;
    for (std::size_t r = 0; r < rows; ++r) map.row_coords[r] = rmin + resolution * r;
    std::vector<double> sums(rows * cols, 0.0);
    std::vector<std::size_t> counts(rows * cols, 0);
    for (const PointResult* p : samples) {
        const std::size_t c =
            static_cast<std::size_t>(std::llround((coord_of(p->voxel, col_axis) - cmin) / resolution));
        const std::size_t r =
            static_cast<std::size_t>(std::llround((coord_of(p->voxel, row_axis) - rmin) / resolution));
        sums[r * cols + c] += p->mean_error;
        counts[r * cols + c] += 1;
    }
    map.cells_cm.assign(rows * cols, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < sums.size(); ++i)
        if (counts[i] > 0) map.cells_cm[i] = 100.0 * sums[i] / static_cast<double>(counts[i]);
    return map;
}

}  // namespace detail

// Planar cut: keeps the voxel layer nearest to `coordinate` on the sliced
// axis. Grid axes are the remaining two coordinates in (x, y, z) order.
inline ErrorMap slice_error_map(const std::vector<PointResult>& points, Axis slice_axis,
                                double coordinate, double resolution) {
    if (!(resolution > 0.0)) throw std::invalid_argument("slice_error_map: bad resolution");
    std::vector<const PointResult*> samples;
    for (const PointResult& p : points) {
        if (std::isnan(p.mean_error)) continue;
        if (std::abs(detail::coord_of(p.voxel, slice_axis) - coordinate) <= resolution / 2.0)
            samples.push_back(&p);
    }
    if (samples.empty()) throw std::domain_error("slice_error_map: slice does not intersect the body");
    const Axis col_axis = slice_axis == Axis::X ? Axis::Y : Axis::X;
    const Axis row_axis = slice_axis == Axis::Z ? Axis::Y : Axis::Z;
    return detail::grid_from_samples(col_axis, row_axis, samples, resolution);
}

// Whole-body map: collapses the axis missing from the plane, averaging the
// per-voxel means in each column.
inline ErrorMap projection_error_map(const std::vector<PointResult>& points, Plane plane,
                                     double resolution) {
    if (!(resolution > 0.0)) throw std::invalid_argument("projection_error_map: bad resolution");
    std::vector<const PointResult*> samples;
    for (const PointResult& p : points)
        if (!std::isnan(p.mean_error)) samples.push_back(&p);
    if (samples.empty()) throw std::domain_error("projection_error_map: no localized voxels");
    Axis col_axis = Axis::X, row_axis = Axis::Z;
    switch (plane) {
        case Plane::XY: col_axis = Axis::X; row_axis = Axis::Y; break;
        case Plane::XZ: col_axis = Axis::X; row_axis = Axis::Z; break;
        case Plane::YZ: col_axis = Axis::Y; row_axis = Axis::Z; break;
    }
    return detail::grid_from_samples(col_axis, row_axis, samples, resolution);
}

// CSV matrix: the corner cell names the axes as `row\col`, headers are in
// meters, cells are mean error in centimeters, empty where no body voxel
// maps to the cell.
inline void write_error_map_csv(const ErrorMap& map, std::ostream& out) {
    out << axis_name(map.row_axis) << '\\' << axis_name(map.col_axis);
    for (double c : map.col_coords) out << ',' << format_double(c);
    out << '\n';
    for (std::size_t r = 0; r < map.row_coords.size(); ++r) {
        out << format_double(map.row_coords[r]);
        for (std::size_t c = 0; c < map.col_coords.size(); ++c) {
            out << ',';
            const double v = map.cell(r, c);
            if (!std::isnan(v)) out << detail::fmt_fixed(v, 4);
        }
        out << '\n';
    }
}

// Grid pitch of a voxel result set (smallest positive coordinate gap).
inline double infer_resolution(const std::vector<PointResult>& points) {
    std::vector<double> xs, ys, zs;
    xs.reserve(points.size());
    ys.reserve(points.size());
    zs.reserve(points.size());
    for (const PointResult& p : points) {
        xs.push_back(p.voxel.x);
        ys.push_back(p.voxel.y);
        zs.push_back(p.voxel.z);
    }
    const double res = std::min({detail::min_positive_gap(std::move(xs)),
                                 detail::min_positive_gap(std::move(ys)),
                                 detail::min_positive_gap(std::move(zs))});
    if (!std::isfinite(res))
        throw std::invalid_argument("infer_resolution: all points coincide");
    return res;
}

}  // namespace magloc
