#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "magloc/rng.hpp"
#include "magloc/textio.hpp"
#include "magloc/vec.hpp"

namespace magloc {

enum class Axis : int { X = 0, Y = 1, Z = 2 };

constexpr Vec3 axis_direction(Axis a) {
    return a == Axis::X ? Vec3{1.0, 0.0, 0.0} : a == Axis::Y ? Vec3{0.0, 1.0, 0.0} : Vec3{0.0, 0.0, 1.0};
}

inline std::string_view axis_name(Axis a) {
    switch (a) {
        case Axis::X: return "X";
        case Axis::Y: return "Y";
        default: return "Z";
    }
}

inline Axis axis_from_name(std::string_view s) {
    if (s == "X" || s == "x") return Axis::X;
    if (s == "Y" || s == "y") return Axis::Y;
    if (s == "Z" || s == "z") return Axis::Z;
    throw std::invalid_argument("unknown axis name: " + std::string(s));
}

// An infinite straight DC conductor parallel to one coordinate axis.
// The 2D offset lives in the plane perpendicular to the axis; its components
// follow the remaining axes in (x, y, z) cyclic order, so an X wire stores
// (y, z), a Y wire stores (z, x) and a Z wire stores (x, y).
struct Wire {
    Wire(Axis axis_, double offset_a_, double offset_b_, double current_)
        : axis(axis_), offset_a(offset_a_), offset_b(offset_b_), current(current_) {
        if (!std::isfinite(offset_a) || !std::isfinite(offset_b))
            throw std::invalid_argument("Wire: offsets must be finite");
        if (!(current > 0.0) || !std::isfinite(current))
            throw std::invalid_argument("Wire: current must be positive and finite");
    }

    Axis axis;
    double offset_a;  // meters
    double offset_b;  // meters
    double current;   // amperes
};

// Point on the wire whose coordinate along the wire axis is zero.
inline Vec3 wire_origin(const Wire& w) {
    switch (w.axis) {
        case Axis::X: return {0.0, w.offset_a, w.offset_b};
        case Axis::Y: return {w.offset_b, 0.0, w.offset_a};
        default: return {w.offset_a, w.offset_b, 0.0};
    }
}

// Perpendicular distance from a point to the wire line.
inline double wire_distance(const Wire& w, const Vec3& point) {
    if (!is_finite(point)) throw std::invalid_argument("wire_distance: point must be finite");
    double da = 0.0, db = 0.0;
    switch (w.axis) {
        case Axis::X: da = point.y - w.offset_a; db = point.z - w.offset_b; break;
        case Axis::Y: da = point.z - w.offset_a; db = point.x - w.offset_b; break;
        default: da = point.x - w.offset_a; db = point.y - w.offset_b; break;
    }
    return std::sqrt(da * da + db * db);
}

namespace detail {

// True when all 2D points lie on a single line (scale-relative tolerance).
inline bool collinear2(const std::vector<std::array<double, 2>>& pts) {
    if (pts.size() < 3) return true;
    // pick the point farthest from pts[0] as the line direction
    std::size_t far = 0;
    double best = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double dx = pts[i][0] - pts[0][0];
        const double dy = pts[i][1] - pts[0][1];
        const double d2 = dx * dx + dy * dy;
        if (d2 > best) { best = d2; far = i; }
    }
    if (best == 0.0) return true;  // all coincident
    const double ux = pts[far][0] - pts[0][0];
    const double uy = pts[far][1] - pts[0][1];
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double vx = pts[i][0] - pts[0][0];
        const double vy = pts[i][1] - pts[0][1];
        const double area = std::abs(ux * vy - uy * vx);
        if (area > 1e-12 * best) return false;
    }
    return true;
}

}  // namespace detail

// A validated anchor arrangement. Valid sets are either one wire per axis
// (closed-form three-wire solve) or have at least two axis families with
// three or more wires at non-collinear offsets (least-squares solve).
class WireSet {
public:
    enum class Mode { Trilateration, Multilateration };

    explicit WireSet(std::vector<Wire> wires) : wires_(std::move(wires)) {
        for (const Wire& w : wires_) ++counts_[static_cast<int>(w.axis)];
        mode_ = deduce_mode();
    }

    const std::vector<Wire>& wires() const { return wires_; }
    std::size_t size() const { return wires_.size(); }
    int count(Axis a) const { return counts_[static_cast<int>(a)]; }
    Mode mode() const { return mode_; }

private:
    Mode deduce_mode() const {
        if (counts_[0] == 1 && counts_[1] == 1 && counts_[2] == 1) return Mode::Trilateration;
        int usable_families = 0;
        for (int a = 0; a < 3; ++a) {
            if (counts_[a] < 3) continue;
            std::vector<std::array<double, 2>> offsets;
            for (const Wire& w : wires_)
                if (static_cast<int>(w.axis) == a) offsets.push_back({w.offset_a, w.offset_b});
            if (!detail::collinear2(offsets)) ++usable_families;
        }
        if (usable_families >= 2) return Mode::Multilateration;
        throw std::invalid_argument(
            "WireSet: need exactly one wire per axis, or >= 3 non-collinear wires in at "
            "least two axis families");
    }

    std::vector<Wire> wires_;
    std::array<int, 3> counts_{0, 0, 0};
    Mode mode_;
};

// Unit quaternion rotation.
struct Rotation {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    static Rotation identity() { return {}; }

    static Rotation from_quaternion(double w, double x, double y, double z) {
        const double n = std::sqrt(w * w + x * x + y * y + z * z);
        if (!(n > 1e-12) || !std::isfinite(n))
            throw std::invalid_argument("Rotation: quaternion must be non-zero and finite");
        return {w / n, x / n, y / n, z / n};
    }

    Vec3 apply(const Vec3& v) const {
        const Vec3 u{x, y, z};
        const Vec3 t = cross(u, v) * 2.0;
        return v + t * w + cross(u, t);
    }

    // composition: (a * b).apply(v) == a.apply(b.apply(v))
    Rotation operator*(const Rotation& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }
};

// Uniform over the rotation group (Shoemake's method); consumes 3 draws.
inline Rotation random_rotation(RngStream& rng) {
    const double u1 = rng.next_double();
    const double u2 = rng.next_double();
    const double u3 = rng.next_double();
    const double two_pi = 2.0 * std::numbers::pi;
    const double r1 = std::sqrt(1.0 - u1);
    const double r2 = std::sqrt(u1);
    return {r2 * std::cos(two_pi * u3),
            r1 * std::sin(two_pi * u2),
            r1 * std::cos(two_pi * u2),
            r2 * std::sin(two_pi * u3)};
}

enum class Arrangement { W3, W6, W9, W15, W30 };

inline std::string_view arrangement_name(Arrangement a) {
    switch (a) {
        case Arrangement::W3: return "W3";
        case Arrangement::W6: return "W6";
        case Arrangement::W9: return "W9";
        case Arrangement::W15: return "W15";
        default: return "W30";
    }
}

inline Arrangement arrangement_from_name(std::string_view s) {
    if (s == "W3" || s == "w3") return Arrangement::W3;
    if (s == "W6" || s == "w6") return Arrangement::W6;
    if (s == "W9" || s == "w9") return Arrangement::W9;
    if (s == "W15" || s == "w15") return Arrangement::W15;
    if (s == "W30" || s == "w30") return Arrangement::W30;
    throw std::invalid_argument("unknown arrangement name: " + std::string(s));
}

namespace detail {

// k points evenly spaced along the closed rectangle perimeter, offset by
// half a step so none sits on the starting corner. Walk order: +a edge at
// b_lo, +b edge at a_hi, -a edge at b_hi, -b edge at a_lo.
inline std::vector<std::array<double, 2>> ring_points(double a_lo, double a_hi, double b_lo,
                                                      double b_hi, int k) {
    const double la = a_hi - a_lo, lb = b_hi - b_lo;
    const double perimeter = 2.0 * (la + lb);
    std::vector<std::array<double, 2>> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        double t = perimeter * (j + 0.5) / k;
        if (t < la) { out.push_back({a_lo + t, b_lo}); continue; }
        t -= la;
        if (t < lb) { out.push_back({a_hi, b_lo + t}); continue; }
        t -= lb;
        if (t < la) { out.push_back({a_hi - t, b_hi}); continue; }
        t -= la;
        out.push_back({a_lo, b_hi - t});
    }
    return out;
}

// k points evenly spaced on the open left-top-right walk of a rectangle in
// the (o, z) plane. The bottom edge (z == z_lo) stays empty: horizontal
// anchors cannot run through the floor the subject stands on.
inline std::vector<std::array<double, 2>> arch_points(double o_lo, double o_hi, double z_lo,
                                                      double z_hi, int k) {
    const double lz = z_hi - z_lo, lo = o_hi - o_lo;
    const double length = 2.0 * lz + lo;
    std::vector<std::array<double, 2>> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        double t = length * (j + 0.5) / k;
        if (t < lz) { out.push_back({o_lo, z_lo + t}); continue; }
        t -= lz;
        if (t < lo) { out.push_back({o_lo + t, z_hi}); continue; }
        t -= lo;
        out.push_back({o_hi, z_hi - t});
    }
    return out;
}

}  // namespace detail

// Generates the builtin cage around a body bounding box. Wires sit on the
// perimeter of the box expanded by `clearance`; the expansion is clamped at
// z = 0 (the floor). W3 is the corner triple used by the closed-form solve;
// the others are multilateration cages with a Z-heavy family split
// (W6 = 0/3/3, W9 = 3/3/3, W15 = 4/4/7, W30 = 8/8/14 for X/Y/Z).
inline WireSet builtin_arrangement(Arrangement name, double clearance, double current,
                                   const Aabb& body_box) {
    if (!(clearance > 0.0) || !std::isfinite(clearance))
        throw std::invalid_argument("builtin_arrangement: clearance must be positive");
    if (!is_finite(body_box.min) || !is_finite(body_box.max) || body_box.min.x > body_box.max.x ||
        body_box.min.y > body_box.max.y || body_box.min.z > body_box.max.z)
        throw std::invalid_argument("builtin_arrangement: invalid body box");

    const double x_lo = body_box.min.x - clearance, x_hi = body_box.max.x + clearance;
    const double y_lo = body_box.min.y - clearance, y_hi = body_box.max.y + clearance;
    const double z_lo = std::max(0.0, body_box.min.z - clearance);
    const double z_hi = body_box.max.z + clearance;

    std::vector<Wire> wires;
    auto add_x_family = [&](int k) {  // offsets (y, z)
        for (const auto& p : detail::arch_points(y_lo, y_hi, z_lo, z_hi, k))
            wires.emplace_back(Axis::X, p[0], p[1], current);
    };
    auto add_y_family = [&](int k) {  // offsets (z, x)
        for (const auto& p : detail::arch_points(x_lo, x_hi, z_lo, z_hi, k))
            wires.emplace_back(Axis::Y, p[1], p[0], current);
    };
    auto add_z_family = [&](int k) {  // offsets (x, y)
        for (const auto& p : detail::ring_points(x_lo, x_hi, y_lo, y_hi, k))
            wires.emplace_back(Axis::Z, p[0], p[1], current);
    };

    switch (name) {
        case Arrangement::W3: {
            // one wire per axis, meeting in the cage corner nearest the
            // origin; the corner is clamped at the octant corner so the
            // wires coincide with the coordinate axes when the cage would
            // cross them
            const double cx = std::max(0.0, x_lo);
            const double cy = std::max(0.0, y_lo);
            wires.emplace_back(Axis::X, cy, z_lo, current);
            wires.emplace_back(Axis::Y, z_lo, cx, current);
            wires.emplace_back(Axis::Z, cx, cy, current);
            break;
        }
        case Arrangement::W6:
            add_y_family(3);
            add_z_family(3);
            break;
        case Arrangement::W9:
            add_x_family(3);
            add_y_family(3);
            add_z_family(3);
            break;
        case Arrangement::W15:
            add_x_family(4);
            add_y_family(4);
            add_z_family(7);
            break;
        case Arrangement::W30:
            add_x_family(8);
            add_y_family(8);
            add_z_family(14);
            break;
    }
    return WireSet(std::move(wires));
}

// --- wire file format ----------------------------------------------------
// One record per line: `axis=Z offset_a=0.1 offset_b=0.2 current=100`.
// Blank lines and lines starting with '#' are skipped.

inline std::string format_wire_record(const Wire& w) {
    std::string s = "axis=";
    s += axis_name(w.axis);
    s += " offset_a=" + format_double(w.offset_a);
    s += " offset_b=" + format_double(w.offset_b);
    s += " current=" + format_double(w.current);
    return s;
}

inline Wire parse_wire_record(std::string_view line) {
    bool have_axis = false, have_a = false, have_b = false, have_current = false;
    Axis axis = Axis::X;
    double a = 0.0, b = 0.0, current = 0.0;
    std::string_view rest = trim(line);
    while (!rest.empty()) {
        std::size_t sp = rest.find_first_of(" \t");
        std::string_view token = rest.substr(0, sp);
        rest = sp == std::string_view::npos ? std::string_view{} : trim(rest.substr(sp));
        const std::size_t eq = token.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("wire record: expected key=value, got '" + std::string(token) + "'");
        const std::string_view key = token.substr(0, eq);
        const std::string_view value = token.substr(eq + 1);
        if (key == "axis") {
            axis = axis_from_name(value);
            have_axis = true;
        } else if (key == "offset_a" || key == "offset_b" || key == "current") {
            double v = 0.0;
            if (!parse_double(value, v))
                throw std::invalid_argument("wire record: bad number for " + std::string(key));
            if (key == "offset_a") { a = v; have_a = true; }
            else if (key == "offset_b") { b = v; have_b = true; }
            else { current = v; have_current = true; }
        } else {
            throw std::invalid_argument("wire record: unknown field '" + std::string(key) + "'");
        }
    }
    if (!have_axis || !have_a || !have_b || !have_current)
        throw std::invalid_argument("wire record: needs axis, offset_a, offset_b, current");
    return Wire(axis, a, b, current);
}

inline WireSet load_wires(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_wires: cannot open " + path.string());
    std::vector<Wire> wires;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        try {
            wires.push_back(parse_wire_record(sv));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    try {
        return WireSet(std::move(wires));
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

inline void save_wires(const WireSet& set, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_wires: cannot open " + path.string());
    for (const Wire& w : set.wires()) out << format_wire_record(w) << '\n';
    if (!out) throw std::runtime_error("save_wires: write failed for " + path.string());
}

}  // namespace magloc
