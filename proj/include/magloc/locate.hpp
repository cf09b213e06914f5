#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "magloc/field.hpp"
#include "magloc/geometry.hpp"
#include "magloc/sensor.hpp"
#include "magloc/vec.hpp"

namespace magloc {

struct RangeEstimate {
    std::size_t wire_index = 0;
    double distance = 0.0;  // meters
};

// Inverse of the straight-wire field law: R = mu I / (2 pi B).
inline double range_from_field(double b_tesla, double current_amperes,
                               const Permeability& mu = {}) {
    if (!(b_tesla > 0.0) || !std::isfinite(b_tesla))
        throw std::invalid_argument("range_from_field: field magnitude must be positive");
    if (!(current_amperes > 0.0) || !std::isfinite(current_amperes))
        throw std::invalid_argument("range_from_field: current must be positive");
    return mu.mu * current_amperes / (2.0 * std::numbers::pi * b_tesla);
}

struct Position {
    double x = 0.0, y = 0.0, z = 0.0;
    bool has_x = true, has_y = true, has_z = true;

    Vec3 vec() const { return {x, y, z}; }
};

// Two in-plane coordinates recovered from one wire family, stored in the
// family's offset order (X family -> (y, z), Y -> (z, x), Z -> (x, y)).
struct PlanarFix {
    Axis family;
    double coord_a = 0.0;
    double coord_b = 0.0;
};

// Closed-form three-wire solve. Distances are measured from three mutually
// perpendicular wires meeting at the frame origin, with the target in the
// all-positive octant:
//   x = sqrt((rz^2 + ry^2 - rx^2) / 2), and cyclically for y, z.
// A radicand pushed negative by measurement error is clamped to zero, never
// allowed to go imaginary.
inline Position trilaterate(double rx, double ry, double rz) {
    for (double r : {rx, ry, rz})
        if (!(r > 0.0) || !std::isfinite(r))
            throw std::invalid_argument("trilaterate: distances must be positive");
    const double rx2 = rx * rx, ry2 = ry * ry, rz2 = rz * rz;
    Position p;
    p.x = std::sqrt(std::max(0.0, 0.5 * (rz2 + ry2 - rx2)));
    p.y = std::sqrt(std::max(0.0, 0.5 * (rx2 + rz2 - ry2)));
    p.z = std::sqrt(std::max(0.0, 0.5 * (rx2 + ry2 - rz2)));
    return p;
}

namespace detail {

// Least-squares minimizer of ||A r - b|| for a k x 2 system, k >= 2, via
// Householder QR. Throws std::domain_error when the columns are numerically
// rank deficient.
inline std::array<double, 2> solve_lstsq2(std::vector<std::array<double, 2>>& a,
                                          std::vector<double>& b) {
    const std::size_t k = a.size();
    double scale = 0.0;
    for (const auto& row : a) scale = std::max({scale, std::abs(row[0]), std::abs(row[1])});
    const double tol = 1e-12 * std::max(scale, 1e-300);

    // reflect column 0 onto e1
    double n0 = 0.0;
    for (const auto& row : a) n0 += row[0] * row[0];
    n0 = std::sqrt(n0);
    if (n0 <= tol) throw std::domain_error("solve_lstsq2: rank deficient");
    const double alpha0 = a[0][0] > 0.0 ? -n0 : n0;
    std::vector<double> v(k);
    v[0] = a[0][0] - alpha0;
    for (std::size_t i = 1; i < k; ++i) v[i] = a[i][0];
    double vtv = 0.0;
    for (double vi : v) vtv += vi * vi;
    if (vtv > 0.0) {
        double vc = 0.0, vb = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            vc += v[i] * a[i][1];
            vb += v[i] * b[i];
        }
        const double fc = 2.0 * vc / vtv, fb = 2.0 * vb / vtv;
        for (std::size_t i = 0; i < k; ++i) {
            a[i][1] -= fc * v[i];
            b[i] -= fb * v[i];
        }
    }
    const double r00 = alpha0;
    const double r01 = a[0][1];

    // reflect column 1 (rows 1..k-1) onto e2
    double n1 = 0.0;
    for (std::size_t i = 1; i < k; ++i) n1 += a[i][1] * a[i][1];
    n1 = std::sqrt(n1);
    if (n1 <= tol) throw std::domain_error("solve_lstsq2: rank deficient");
    const double alpha1 = a[1][1] > 0.0 ? -n1 : n1;
    double vtv1 = 0.0, vb1 = 0.0;
    {
        const double v1 = a[1][1] - alpha1;
        vtv1 = v1 * v1;
        vb1 = v1 * b[1];
        for (std::size_t i = 2; i < k; ++i) {
            vtv1 += a[i][1] * a[i][1];
            vb1 += a[i][1] * b[i];
        }
        if (vtv1 > 0.0) b[1] -= 2.0 * vb1 / vtv1 * v1;
    }
    const double r11 = alpha1;

    const double second = b[1] / r11;
    const double first = (b[0] - r01 * second) / r00;
    return {first, second};
}

}  // namespace detail

// In-plane solve for one family of parallel wires. The first wire's circle
// equation is subtracted from the rest, which linearizes the system:
//   2 (a_i - a_1) u + 2 (b_i - b_1) v
//       = R_1^2 - R_i^2 + a_i^2 + b_i^2 - a_1^2 - b_1^2,
// and the remaining rows are solved in the least-squares sense. This reduces
// to the familiar origin-anchored form when wire 1 sits at (0, 0) but works
// for arbitrary cages.
inline PlanarFix laterate_family(Axis family, const std::vector<Wire>& wires,
                                 const std::vector<double>& distances) {
    if (wires.size() < 3)
        throw std::invalid_argument("laterate_family: need at least 3 wires in a family");
    if (wires.size() != distances.size())
        throw std::invalid_argument("laterate_family: one distance per wire");
    for (const Wire& w : wires)
        if (w.axis != family)
            throw std::invalid_argument("laterate_family: wire from a different family");
    for (double d : distances)
        if (!(d > 0.0) || !std::isfinite(d))
            throw std::invalid_argument("laterate_family: distances must be positive");

    const double a0 = wires[0].offset_a, b0 = wires[0].offset_b, r0 = distances[0];
    std::vector<std::array<double, 2>> rows;
    std::vector<double> rhs;
    rows.reserve(wires.size() - 1);
    rhs.reserve(wires.size() - 1);
    for (std::size_t i = 1; i < wires.size(); ++i) {
        const double ai = wires[i].offset_a, bi = wires[i].offset_b, ri = distances[i];
        rows.push_back({2.0 * (ai - a0), 2.0 * (bi - b0)});
        rhs.push_back(r0 * r0 - ri * ri + ai * ai + bi * bi - a0 * a0 - b0 * b0);
    }
    try {
        const auto uv = detail::solve_lstsq2(rows, rhs);
        return {family, uv[0], uv[1]};
    } catch (const std::domain_error&) {
        throw std::domain_error(std::string("laterate_family: collinear ") +
                                std::string(axis_name(family)) + "-wire offsets (singular system)");
    }
}

// Wire-count weighted means of the per-family fixes:
//   x = (m x_y + p x_z) / (m + p),  y = (n y_x + p y_z) / (n + p),
//   z = (n z_x + m z_y) / (n + m),
// where n, m, p count the X, Y, Z wires. A family without a fix contributes
// zero weight; a coordinate with zero total weight cannot be recovered.
inline Position fuse(const std::vector<PlanarFix>& fixes, int n_x_wires, int m_y_wires,
                     int p_z_wires) {
    if (n_x_wires < 0 || m_y_wires < 0 || p_z_wires < 0)
        throw std::invalid_argument("fuse: negative wire count");
    const PlanarFix* fix[3] = {nullptr, nullptr, nullptr};
    for (const PlanarFix& f : fixes) {
        const int i = static_cast<int>(f.family);
        if (fix[i]) throw std::invalid_argument("fuse: duplicate fix for one family");
        fix[i] = &f;
    }
    const double wx = fix[0] ? n_x_wires : 0.0;
    const double wy = fix[1] ? m_y_wires : 0.0;
    const double wz = fix[2] ? p_z_wires : 0.0;
    const double den_x = wy + wz, den_y = wx + wz, den_z = wx + wy;
    if (den_x <= 0.0 || den_y <= 0.0 || den_z <= 0.0)
        throw std::domain_error("fuse: a coordinate has zero total weight");
    Position p;
    p.x = (wy * (fix[1] ? fix[1]->coord_b : 0.0) + wz * (fix[2] ? fix[2]->coord_a : 0.0)) / den_x;
    p.y = (wx * (fix[0] ? fix[0]->coord_a : 0.0) + wz * (fix[2] ? fix[2]->coord_b : 0.0)) / den_y;
    p.z = (wx * (fix[0] ? fix[0]->coord_b : 0.0) + wy * (fix[1] ? fix[1]->coord_a : 0.0)) / den_z;
    return p;
}

struct LocalizeResult {
    Position position;
    bool any_saturated = false;
};

namespace detail {

inline bool approx_coord(double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace detail

// Full lateration pass over one measurement sweep: ranges every wire, then
// either runs the closed-form corner solve (one wire per axis) or the
// per-family least-squares solves followed by weighted fusion. Families with
// fewer than three wires are dropped from fusion (zero weight).
inline LocalizeResult localize(const std::vector<Measurement>& measurements, const WireSet& wires,
                               const Permeability& mu = {}) {
    if (measurements.size() != wires.size())
        throw std::invalid_argument("localize: one measurement per wire");
    bool any_saturated = false;
    std::vector<RangeEstimate> ranges;
    ranges.reserve(measurements.size());
    for (std::size_t i = 0; i < measurements.size(); ++i) {
        any_saturated |= measurements[i].saturated;
        ranges.push_back(
            {i, range_from_field(measurements[i].magnitude, wires.wires()[i].current, mu)});
    }

    if (wires.mode() == WireSet::Mode::Trilateration) {
        const Wire* wire_of[3] = {nullptr, nullptr, nullptr};
        double range_of[3] = {0.0, 0.0, 0.0};
        for (const RangeEstimate& r : ranges) {
            const int a = static_cast<int>(wires.wires()[r.wire_index].axis);
            wire_of[a] = &wires.wires()[r.wire_index];
            range_of[a] = r.distance;
        }
        // the three wires must meet in one corner; each corner coordinate is
        // stored by two of them
        const double cx_1 = wire_of[1]->offset_b, cx_2 = wire_of[2]->offset_a;
        const double cy_1 = wire_of[2]->offset_b, cy_2 = wire_of[0]->offset_a;
        const double cz_1 = wire_of[0]->offset_b, cz_2 = wire_of[1]->offset_a;
        if (!detail::approx_coord(cx_1, cx_2) || !detail::approx_coord(cy_1, cy_2) ||
            !detail::approx_coord(cz_1, cz_2))
            throw std::invalid_argument("localize: trilateration wires must meet in one corner");
        const Position local = trilaterate(range_of[0], range_of[1], range_of[2]);
        Position world;
        world.x = cx_1 + local.x;
        world.y = cy_1 + local.y;
        world.z = cz_1 + local.z;
        return {world, any_saturated};
    }

    std::vector<Wire> family[3];
    std::vector<double> family_ranges[3];
    for (const RangeEstimate& r : ranges) {
        const Wire& w = wires.wires()[r.wire_index];
        const int a = static_cast<int>(w.axis);
        family[a].push_back(w);
        family_ranges[a].push_back(r.distance);
    }
    std::vector<PlanarFix> fixes;
    for (int a = 0; a < 3; ++a) {
        if (family[a].size() < 3) continue;
        fixes.push_back(laterate_family(static_cast<Axis>(a), family[a], family_ranges[a]));
    }
    const Position p = fuse(fixes, wires.count(Axis::X), wires.count(Axis::Y), wires.count(Axis::Z));
    return {p, any_saturated};
}

}  // namespace magloc
