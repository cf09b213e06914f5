#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "magloc/field.hpp"
#include "magloc/geometry.hpp"
#include "magloc/rng.hpp"

namespace magloc {

// Whether the relative error perturbs each sensor-frame component (one Hall
// device per axis) or the combined magnitude once.
enum class NoiseBasis { Component, Magnitude };

// Tri-axial Hall magnetometer: 1% relative error over 0..120 mT per device.
struct MagnetometerSpec {
    double rel_error = 0.01;
    double range_max = 0.12;  // tesla
    NoiseBasis noise_basis = NoiseBasis::Component;
};

inline void validate(const MagnetometerSpec& spec) {
    if (!(spec.rel_error >= 0.0 && spec.rel_error < 1.0))
        throw std::invalid_argument("MagnetometerSpec: rel_error must be in [0, 1)");
    if (!(spec.range_max > 0.0) || !std::isfinite(spec.range_max))
        throw std::invalid_argument("MagnetometerSpec: range_max must be positive");
}

struct Measurement {
    double magnitude = 0.0;  // tesla
    bool saturated = false;
};

// One ranging observation. The triad sees the wire field plus the Earth
// residual, rotated into its own frame; each component is then perturbed by
// an independent uniform draw within the relative error. Components beyond
// the validated range are clipped and flagged rather than rejected, so the
// simulation loop stays total.
inline Measurement measure(const FieldVector& true_field, const FieldVector& residual,
                           const Rotation& orientation, const MagnetometerSpec& spec,
                           RngStream& rng) {
    validate(spec);
    if (true_field.frame != Frame::World || residual.frame != Frame::World)
        throw std::invalid_argument("measure: inputs must be world-frame");
    const Vec3 world = true_field.b + residual.b;
    if (!is_finite(world)) throw std::invalid_argument("measure: field must be finite");

    Vec3 c = orientation.apply(world);  // sensor frame
    const bool saturated = std::abs(c.x) > spec.range_max || std::abs(c.y) > spec.range_max ||
                           std::abs(c.z) > spec.range_max;
    c.x = std::clamp(c.x, -spec.range_max, spec.range_max);
    c.y = std::clamp(c.y, -spec.range_max, spec.range_max);
    c.z = std::clamp(c.z, -spec.range_max, spec.range_max);

    if (spec.noise_basis == NoiseBasis::Component) {
        c.x *= 1.0 + rng.uniform(-spec.rel_error, spec.rel_error);
        c.y *= 1.0 + rng.uniform(-spec.rel_error, spec.rel_error);
        c.z *= 1.0 + rng.uniform(-spec.rel_error, spec.rel_error);
        return {norm(c), saturated};
    }
    return {norm(c) * (1.0 + rng.uniform(-spec.rel_error, spec.rel_error)), saturated};
}

}  // namespace magloc
