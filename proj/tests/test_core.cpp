#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dogm/frames.hpp"
#include "dogm/rng.hpp"
#include "dogm/types.hpp"

#include <Eigen/Dense>

using namespace dogm;

namespace {

// Independent frame-composition oracle: homogeneous 3x3 matrices.
Eigen::Vector2d matrix_oracle_polar_to_world(const Detection& d, const SensorMount& mount,
                                             const EgoPose& pose) {
    const auto make = [](double angle, const Eigen::Vector2d& t) {
        Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
        m(0, 0) = std::cos(angle);
        m(0, 1) = -std::sin(angle);
        m(1, 0) = std::sin(angle);
        m(1, 1) = std::cos(angle);
        m(0, 2) = t.x();
        m(1, 2) = t.y();
        return m;
    };
    const Eigen::Matrix3d world_from_platform = make(pose.heading, pose.position);
    const Eigen::Matrix3d platform_from_sensor = make(mount.yaw, mount.offset);
    Eigen::Vector3d p(d.range * std::cos(d.azimuth), d.range * std::sin(d.azimuth), 1.0);
    const Eigen::Vector3d w = world_from_platform * platform_from_sensor * p;
    return w.head<2>();
}

Detection make_detection(double r, double phi) {
    Detection d;
    d.range = r;
    d.azimuth = phi;
    return d;
}

}  // namespace

TEST_CASE("wrap_angle maps into (-pi, pi]") {
    CHECK(wrap_angle(0.0) == doctest::Approx(0.0));
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(3.0 * kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(2.0 * kPi) == doctest::Approx(0.0));
    SplitMix64 rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double a = rng.uniform(-50.0, 50.0);
        const double w = wrap_angle(a);
        CHECK(w > -kPi);
        CHECK(w <= kPi);
        // Same angle modulo 2*pi.
        CHECK(std::abs(std::remainder(w - a, 2.0 * kPi)) < 1e-9);
    }
}

TEST_CASE("polar_to_world identity chain") {
    SensorMount mount;
    EgoPose pose;
    const Vec2 p = polar_to_world(make_detection(10.0, 0.0), mount, pose);
    CHECK(p.x() == doctest::Approx(10.0));
    CHECK(p.y() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("polar_to_world pure rotation") {
    SensorMount mount;
    EgoPose pose;
    pose.heading = kPi / 2.0;
    const Vec2 p = polar_to_world(make_detection(10.0, 0.0), mount, pose);
    CHECK(p.x() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p.y() == doctest::Approx(10.0));
}

TEST_CASE("polar_to_world offset mount, hand-computed") {
    SensorMount mount;
    mount.offset = Vec2(1.0, 0.0);
    EgoPose pose;
    const Vec2 p = polar_to_world(make_detection(5.0, kPi / 2.0), mount, pose);
    CHECK(p.x() == doctest::Approx(1.0));
    CHECK(p.y() == doctest::Approx(5.0));
}

TEST_CASE("polar_to_world matches the matrix oracle on random frames") {
    SplitMix64 rng(11);
    for (int i = 0; i < 500; ++i) {
        Detection d = make_detection(rng.uniform(0.0, 100.0), rng.uniform(-kPi, kPi));
        SensorMount mount;
        mount.offset = Vec2(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
        mount.yaw = rng.uniform(-kPi, kPi);
        EgoPose pose;
        pose.position = Vec2(rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0));
        pose.heading = rng.uniform(-kPi, kPi);
        const Vec2 got = polar_to_world(d, mount, pose);
        const Eigen::Vector2d want = matrix_oracle_polar_to_world(d, mount, pose);
        CHECK(got.x() == doctest::Approx(want.x()).epsilon(1e-10));
        CHECK(got.y() == doctest::Approx(want.y()).epsilon(1e-10));
    }
}

TEST_CASE("world_to_sensor_polar inverts polar_to_world") {
    SplitMix64 rng(13);
    for (int i = 0; i < 500; ++i) {
        SensorMount mount;
        mount.offset = Vec2(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
        mount.yaw = rng.uniform(-kPi, kPi);
        EgoPose pose;
        pose.position = Vec2(rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0));
        pose.heading = rng.uniform(-kPi, kPi);
        Detection d = make_detection(rng.uniform(0.5, 100.0), rng.uniform(-2.0, 2.0));
        const Vec2 w = polar_to_world(d, mount, pose);
        const PolarPoint back = world_to_sensor_polar(w, mount, pose);
        CHECK(back.range == doctest::Approx(d.range).epsilon(1e-10));
        CHECK(back.azimuth == doctest::Approx(d.azimuth).epsilon(1e-9));
        CHECK(back.azimuth > -kPi);
        CHECK(back.azimuth <= kPi);
    }
}

TEST_CASE("world_to_cell floor binning and boundary ownership") {
    GridSpec spec;
    spec.cell_size = 0.5;
    spec.extent_forward = 10.0;
    spec.extent_backward = 0.0 + 0.5;  // small window starting just below zero
    spec.extent_lateral = 5.0;
    spec.origin = Vec2(0.0, 0.0);

    // Half-open cells: the boundary belongs to the larger index.
    const auto c0 = world_to_cell(Vec2(0.0, 0.0), spec);
    REQUIRE(c0.has_value());
    CHECK(*c0 == CellIndex{0, 0});
    const auto c1 = world_to_cell(Vec2(0.5, 0.0), spec);
    REQUIRE(c1.has_value());
    CHECK(*c1 == CellIndex{1, 0});
    CHECK_FALSE(world_to_cell(Vec2(-0.1, 0.0), spec).has_value());
}

TEST_CASE("world_to_cell / cell_center round trip") {
    GridSpec spec;
    spec.cell_size = 0.5;
    spec.extent_forward = 40.0;
    spec.extent_backward = 10.0;
    spec.extent_lateral = 20.0;
    spec.origin = Vec2(-3.0, 2.0);
    SplitMix64 rng(17);
    for (int i = 0; i < 2000; ++i) {
        const CellIndex c{static_cast<int>(rng.uniform01() * spec.cells_x()),
                          static_cast<int>(rng.uniform01() * spec.cells_y())};
        const auto back = world_to_cell(cell_center(c, spec), spec);
        REQUIRE(back.has_value());
        CHECK(*back == c);
    }
}

TEST_CASE("cell_center_polar examples") {
    GridSpec spec;
    spec.cell_size = 0.5;
    spec.extent_forward = 100.0;
    spec.extent_backward = 100.0;
    spec.extent_lateral = 100.0;
    spec.origin = Vec2(0.0, 0.0);
    SensorMount mount;
    EgoPose pose;

    // Cell whose center lands at (80.25, 0.25) ≈ (80, 0): use the exact center.
    const CellIndex c{160, 0};
    const Vec2 center = cell_center(c, spec);
    const PolarPoint p = cell_center_polar(c, spec, mount, pose);
    CHECK(p.range == doctest::Approx(center.norm()));
    CHECK(p.azimuth == doctest::Approx(std::atan2(center.y(), center.x())));

    // Pythagorean check at world (3, 4).
    GridSpec unit;
    unit.cell_size = 1.0;
    unit.extent_forward = 10.0;
    unit.extent_backward = 10.0;
    unit.extent_lateral = 10.0;
    unit.origin = Vec2(2.5, 3.5);
    const PolarPoint q = cell_center_polar(CellIndex{0, 0}, unit, mount, pose);
    CHECK(q.range == doctest::Approx(5.0));
    CHECK(q.azimuth == doctest::Approx(std::atan2(4.0, 3.0)));
}

TEST_CASE("GridSpec validation") {
    GridSpec spec;
    spec.cell_size = 0.5;
    spec.extent_forward = 75.0;
    spec.extent_backward = 75.0;
    spec.extent_lateral = 150.0;
    CHECK_NOTHROW(spec.validate());
    spec.extent_forward = 75.3;  // not a multiple of 0.5
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.extent_forward = 75.0;
    spec.cell_size = -1.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("SplitMix64 normal moments") {
    SplitMix64 rng(23);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}
