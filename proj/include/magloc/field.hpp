#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "magloc/body.hpp"
#include "magloc/geometry.hpp"
#include "magloc/rng.hpp"
#include "magloc/vec.hpp"

namespace magloc {

inline constexpr double kMu0 = 4.0 * std::numbers::pi * 1e-7;  // vacuum permeability, H/m

// Human tissues match vacuum permeability to about 1e-5 relative, so the
// default is used everywhere; the override exists for tests.
struct Permeability {
    double mu = kMu0;

    Permeability() = default;
    explicit Permeability(double mu_) : mu(mu_) {
        if (!(mu > 0.0) || !std::isfinite(mu))
            throw std::invalid_argument("Permeability: mu must be positive and finite");
    }
};

enum class Frame { World, Sensor };

struct FieldVector {
    Vec3 b;  // tesla
    Frame frame = Frame::World;

    double magnitude() const { return norm(b); }
};

// Half-widths of the uniform residual left per world axis after subtracting
// the geomagnetic model prediction. Defaults: 131 / 94 / 157 nT.
struct EarthResidualBounds {
    double ex = 131e-9;
    double ey = 94e-9;
    double ez = 157e-9;
};

// Static flux density of an infinite straight DC wire: magnitude
// mu I / (2 pi R), direction azimuthal around the axis (right-hand rule,
// current flowing in the +axis direction).
inline FieldVector flux_density_at(const Wire& wire, const Vec3& point,
                                   const Permeability& mu = {}) {
    const double r = wire_distance(wire, point);
    if (r <= 0.0) throw std::domain_error("flux_density_at: point lies on the wire axis");
    const Vec3 dir = axis_direction(wire.axis);
    const Vec3 from_origin = point - wire_origin(wire);
    const Vec3 radial = from_origin - dir * dot(from_origin, dir);
    const Vec3 azimuthal = cross(dir, radial / r);
    const double magnitude = mu.mu * wire.current / (2.0 * std::numbers::pi * r);
    return {azimuthal * magnitude, Frame::World};
}

// One residual vector per localization attempt, shared by every wire
// activation within it; components are independent uniforms.
inline FieldVector earth_residual(const EarthResidualBounds& bounds, RngStream& rng) {
    for (double b : {bounds.ex, bounds.ey, bounds.ez})
        if (!(b >= 0.0) || !std::isfinite(b))
            throw std::invalid_argument("EarthResidualBounds: half-widths must be >= 0");
    return {{rng.uniform(-bounds.ex, bounds.ex), rng.uniform(-bounds.ey, bounds.ey),
             rng.uniform(-bounds.ez, bounds.ez)},
            Frame::World};
}

struct SaturationReport {
    double max_field = 0.0;  // tesla; +inf when a voxel sits on a wire axis
    Vec3 worst_voxel;
    std::size_t worst_wire = 0;
    bool ok = false;
};

// Checks every (wire, voxel) pair against the magnetometer range limit.
// A voxel on a wire axis is reported as a saturation failure, not an error.
inline SaturationReport validate_saturation(const WireSet& wires, const BodyModel& body,
                                            double limit = 0.12, const Permeability& mu = {}) {
    if (body.voxels.empty()) throw std::invalid_argument("validate_saturation: body has no voxels");
    if (!(limit > 0.0) || !std::isfinite(limit))
        throw std::invalid_argument("validate_saturation: limit must be positive");
    SaturationReport report;
    for (std::size_t wi = 0; wi < wires.size(); ++wi) {
        const Wire& w = wires.wires()[wi];
        const double scale = mu.mu * w.current / (2.0 * std::numbers::pi);
        for (const Vec3& v : body.voxels) {
            const double r = wire_distance(w, v);
            const double field = r > 0.0 ? scale / r : std::numeric_limits<double>::infinity();
            if (field > report.max_field) {
                report.max_field = field;
                report.worst_voxel = v;
                report.worst_wire = wi;
            }
        }
    }
    report.ok = report.max_field <= limit;
    return report;
}

}  // namespace magloc
