#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "magloc/sensor.hpp"

using namespace magloc;

namespace {

const FieldVector kZeroResidual{{0.0, 0.0, 0.0}, Frame::World};

MagnetometerSpec noiseless() {
    MagnetometerSpec spec;
    spec.rel_error = 0.0;
    return spec;
}

}  // namespace

TEST_CASE("noiseless identity measurement returns the exact magnitude") {
    RngStream rng(1);
    const FieldVector field{{4e-5, 0.0, 0.0}, Frame::World};
    const Measurement m = measure(field, kZeroResidual, Rotation::identity(), noiseless(), rng);
    CHECK(m.magnitude == 4e-5);
    CHECK_FALSE(m.saturated);
}

TEST_CASE("magnitude is invariant under sensor orientation") {
    RngStream rng(2);
    const FieldVector field{{4e-5, 0.0, 0.0}, Frame::World};
    for (int i = 0; i < 200; ++i) {
        const Rotation r = random_rotation(rng);
        const Measurement m = measure(field, kZeroResidual, r, noiseless(), rng);
        CHECK(m.magnitude == Catch::Approx(4e-5).epsilon(1e-12));
    }
}

TEST_CASE("noiseless measurement of a wire field recovers mu I / (2 pi R)") {
    RngStream rng(3);
    const Wire wire(Axis::Y, 0.2, 0.4, 75.0);
    for (int i = 0; i < 100; ++i) {
        const Vec3 p{0.4 + 0.01 * i, 0.9, 1.2};
        const double r = wire_distance(wire, p);
        const FieldVector b = flux_density_at(wire, p);
        const Measurement m = measure(b, kZeroResidual, random_rotation(rng), noiseless(), rng);
        const double expected = kMu0 * wire.current / (2.0 * std::numbers::pi * r);
        CHECK(m.magnitude == Catch::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("component noise keeps the magnitude within the relative band") {
    RngStream rng(4);
    MagnetometerSpec spec;
    spec.rel_error = 0.01;
    const FieldVector field{{4e-5, 0.0, 0.0}, Frame::World};
    for (int i = 0; i < 100000; ++i) {
        const Measurement m = measure(field, kZeroResidual, Rotation::identity(), spec, rng);
        CHECK(m.magnitude >= 0.99 * 4e-5);
        CHECK(m.magnitude <= 1.01 * 4e-5);
    }
}

TEST_CASE("noise bound holds for arbitrary orientations") {
    RngStream rng(5);
    MagnetometerSpec spec;
    spec.rel_error = 0.01;
    const FieldVector field{{3e-5, -1e-5, 2e-5}, Frame::World};
    const double truth = field.magnitude();
    for (int i = 0; i < 20000; ++i) {
        const Rotation r = random_rotation(rng);
        const Measurement m = measure(field, kZeroResidual, r, spec, rng);
        CHECK(std::abs(m.magnitude - truth) <= spec.rel_error * truth * std::sqrt(3.0));
    }
}

TEST_CASE("expected magnitude error grows with the relative error") {
    const FieldVector field{{2e-5, 1e-5, -3e-5}, Frame::World};
    const double truth = field.magnitude();
    auto mean_abs_error = [&](double rel) {
        RngStream rng(6);
        MagnetometerSpec spec;
        spec.rel_error = rel;
        double sum = 0.0;
        const int samples = 100000;
        for (int i = 0; i < samples; ++i) {
            const Rotation r = random_rotation(rng);
            sum += std::abs(measure(field, kZeroResidual, r, spec, rng).magnitude - truth);
        }
        return sum / samples;
    };
    const double e0 = mean_abs_error(0.0);
    const double e5 = mean_abs_error(0.005);
    const double e10 = mean_abs_error(0.01);
    CHECK(e0 < 1e-19);  // rotation rounding only
    CHECK(e5 > e0);
    CHECK(e10 > e5);
}

TEST_CASE("components beyond the range are clipped and flagged") {
    RngStream rng(7);
    const FieldVector field{{0.13, 0.0, 0.0}, Frame::World};
    const Measurement m = measure(field, kZeroResidual, Rotation::identity(), noiseless(), rng);
    CHECK(m.saturated);
    CHECK(m.magnitude == 0.12);

    const FieldVector in_range{{0.11, 0.0, 0.0}, Frame::World};
    CHECK_FALSE(measure(in_range, kZeroResidual, Rotation::identity(), noiseless(), rng).saturated);
}

TEST_CASE("the residual adds to the field before the magnitude is taken") {
    RngStream rng(8);
    const FieldVector field{{3e-5, 0.0, 0.0}, Frame::World};
    const FieldVector residual{{1e-5, 0.0, 0.0}, Frame::World};
    const Measurement m = measure(field, residual, Rotation::identity(), noiseless(), rng);
    CHECK(m.magnitude == Catch::Approx(4e-5).epsilon(1e-12));
}

TEST_CASE("measure validates its inputs") {
    RngStream rng(9);
    const FieldVector field{{1e-5, 0.0, 0.0}, Frame::World};
    const FieldVector sensor_frame{{1e-5, 0.0, 0.0}, Frame::Sensor};
    CHECK_THROWS_AS(measure(sensor_frame, kZeroResidual, Rotation::identity(), noiseless(), rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(measure(field, sensor_frame, Rotation::identity(), noiseless(), rng),
                    std::invalid_argument);
    MagnetometerSpec bad;
    bad.rel_error = 1.5;
    CHECK_THROWS_AS(measure(field, kZeroResidual, Rotation::identity(), bad, rng),
                    std::invalid_argument);
    bad.rel_error = -0.1;
    CHECK_THROWS_AS(measure(field, kZeroResidual, Rotation::identity(), bad, rng),
                    std::invalid_argument);
}

TEST_CASE("magnitude noise basis perturbs the combined magnitude once") {
    MagnetometerSpec spec;
    spec.rel_error = 0.01;
    spec.noise_basis = NoiseBasis::Magnitude;
    const FieldVector field{{3e-5, 4e-5, 0.0}, Frame::World};
    const double truth = field.magnitude();
    RngStream rng(10);
    for (int i = 0; i < 10000; ++i) {
        const Rotation r = random_rotation(rng);
        const Measurement m = measure(field, kZeroResidual, r, spec, rng);
        CHECK(std::abs(m.magnitude - truth) <= spec.rel_error * truth * (1.0 + 1e-9));
    }
}
