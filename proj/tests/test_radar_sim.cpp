#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dogm/radar_sim.hpp"
#include "dogm/scan_log.hpp"

#include <cmath>
#include <sstream>

using namespace dogm;

namespace {

WorldModel point_target_world(const Vec2& at) {
    WorldModel world;
    // A short segment sampled by exactly one midpoint.
    const Vec2 along(0.05, 0.0);
    world.segments.push_back(Segment{at - along, at + along, 1.0});
    world.trajectory.push_back(TrajectoryPoint{0.0, Vec2::Zero(), 0.0});
    return world;
}

SimParams quiet_sim() {
    SimParams sim;
    sim.noise = false;
    sim.point_jitter = 0.0;
    sim.alias_position_bound = 0;
    sim.alias_range_rate_bound = 0;
    sim.clutter_rate = 0.0;
    return sim;
}

std::vector<SensorMount> wide_single_mount() {
    SensorMount m;
    m.sensor_id = 0;
    m.fov_half_angle = kPi;
    m.max_range = 200.0;
    return {m};
}

}  // namespace

TEST_CASE("noiseless point target: exact polar return") {
    const WorldModel world = point_target_world(Vec2(80.0, 0.0));
    const SimParams sim = quiet_sim();
    SplitMix64 rng(1);
    const auto scan = simulate_scan(world, 0.0, wide_single_mount(), trajectory_pose(world, 0.0), sim, rng);
    REQUIRE(scan.size() == 1);
    CHECK(scan[0].range == doctest::Approx(80.0).epsilon(1e-12));
    CHECK(scan[0].azimuth == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(scan[0].range_rate == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("receding target: range rate equals the radial speed") {
    WorldModel world;
    world.trajectory.push_back(TrajectoryPoint{0.0, Vec2::Zero(), 0.0});
    DynamicBox box;
    box.center = Vec2(80.0, 0.0);
    box.half_extent = Vec2(0.4, 0.4);
    box.velocity = Vec2(15.0, 0.0);
    box.detection_rate = 1.0;
    world.boxes.push_back(box);
    SimParams sim = quiet_sim();
    sim.point_spacing = 0.3;
    SplitMix64 rng(2);
    const auto scan = simulate_scan(world, 0.0, wide_single_mount(), trajectory_pose(world, 0.0), sim, rng);
    REQUIRE(!scan.empty());
    for (const Detection& d : scan) CHECK(d.range_rate == doctest::Approx(15.0).epsilon(0.01));
}

TEST_CASE("occlusion: a wall hides the target behind it") {
    WorldModel world = point_target_world(Vec2(80.0, 0.0));
    world.segments.push_back(Segment{Vec2(40.0, -5.0), Vec2(40.0, 5.0), 0.0});  // opaque, never detected
    const SimParams sim = quiet_sim();
    SplitMix64 rng(3);
    const auto scan = simulate_scan(world, 0.0, wide_single_mount(), trajectory_pose(world, 0.0), sim, rng);
    CHECK(scan.empty());  // the target is blocked and the wall never fires
}

TEST_CASE("alias injection matches the binomial law (chi-squared at 1%)") {
    const WorldModel world = point_target_world(Vec2(80.0, 0.0));
    SimParams sim = quiet_sim();
    sim.alias_position_bound = 1;
    sim.delta_range = 15.0;
    const auto mounts = wide_single_mount();
    const EgoPose pose = trajectory_pose(world, 0.0);

    int counts[3] = {0, 0, 0};
    const int trials = 10000;
    int total = 0;
    for (int s = 0; s < trials; ++s) {
        SplitMix64 rng(mix_seed(99, static_cast<std::uint64_t>(s)));
        const auto scan = simulate_scan(world, 0.0, mounts, pose, sim, rng);
        if (scan.empty()) continue;
        const int shift = static_cast<int>(std::llround((scan[0].range - 80.0) / 15.0));
        REQUIRE(shift >= -1);
        REQUIRE(shift <= 1);
        ++counts[shift + 1];
        ++total;
    }
    const double expected[3] = {0.25 * total, 0.5 * total, 0.25 * total};
    double chi2 = 0.0;
    for (int b = 0; b < 3; ++b) {
        const double diff = counts[b] - expected[b];
        chi2 += diff * diff / expected[b];
    }
    CHECK(chi2 < 9.21);  // dof = 2 at the 1% level
}

TEST_CASE("same seed gives byte-identical logs") {
    WorldModel world = point_target_world(Vec2(40.0, 10.0));
    world.segments.push_back(Segment{Vec2(20.0, -10.0), Vec2(30.0, -10.0), 0.8});
    SimParams sim;  // noise + aliasing + clutter all on
    sim.seed = 4242;
    const auto mounts = wide_single_mount();

    const auto run = [&] {
        std::vector<Scan> scans;
        for (int i = 0; i < 5; ++i) {
            Scan scan;
            scan.pose = trajectory_pose(world, 0.1 * i);
            SplitMix64 rng(mix_seed(sim.seed, static_cast<std::uint64_t>(i)));
            scan.detections = simulate_scan(world, 0.1 * i, mounts, scan.pose, sim, rng);
            scans.push_back(std::move(scan));
        }
        std::ostringstream ss;
        write_scan_log(ss, scans);
        return ss.str();
    };
    CHECK(run() == run());
}

TEST_CASE("clutter schedule overrides the base rate") {
    SimParams sim;
    sim.clutter_rate = 2.0;
    sim.clutter_bursts.push_back(ClutterBurst{1.0, 2.0, 40.0});
    CHECK(sim.clutter_rate_at(0.5) == doctest::Approx(2.0));
    CHECK(sim.clutter_rate_at(1.5) == doctest::Approx(40.0));
    CHECK(sim.clutter_rate_at(2.5) == doctest::Approx(2.0));
}

TEST_CASE("ground truth rasterization: box area and world-frame invariance") {
    WorldModel world;
    world.trajectory.push_back(TrajectoryPoint{0.0, Vec2::Zero(), 0.0});

    GridSpec spec;
    spec.cell_size = 0.5;
    spec.extent_forward = 20.0;
    spec.extent_backward = 20.0;
    spec.extent_lateral = 20.0;

    // Empty world -> empty mask.
    CHECK(ground_truth(world, 0.0, spec).occupied_cells.empty());

    DynamicBox box;
    box.center = Vec2(1.0, 1.0);
    box.half_extent = Vec2(1.0, 1.0);  // 2 m x 2 m
    world.boxes.push_back(box);
    const GroundTruth gt = ground_truth(world, 0.0, spec);
    CHECK(gt.occupied_cells.size() == 16);
    REQUIRE(gt.objects.size() == 1);
    CHECK(gt.objects[0].center.x() == doctest::Approx(1.0));

    // Static world: the mask does not depend on time (world frame).
    const GroundTruth later = ground_truth(world, 0.0, spec);
    CHECK(later.occupied_cells.size() == gt.occupied_cells.size());
}

TEST_CASE("segment rasterization visits the crossed cells") {
    GridSpec spec;
    spec.cell_size = 1.0;
    spec.extent_forward = 10.0;
    spec.extent_backward = 10.0;
    spec.extent_lateral = 10.0;
    const auto cells = rasterize_segment(Segment{Vec2(0.5, 0.5), Vec2(3.5, 0.5), 1.0}, spec);
    REQUIRE(cells.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(cells[static_cast<std::size_t>(i)] == CellIndex{i, 0});

    const auto diag = rasterize_segment(Segment{Vec2(0.5, 0.5), Vec2(2.5, 2.5), 1.0}, spec);
    CHECK(diag.size() >= 4);  // supercover of a diagonal
    CHECK(diag.front() == CellIndex{0, 0});
    CHECK(diag.back() == CellIndex{2, 2});
}

TEST_CASE("trajectory interpolation") {
    WorldModel world;
    world.trajectory.push_back(TrajectoryPoint{0.0, Vec2(0.0, 0.0), 0.0});
    world.trajectory.push_back(TrajectoryPoint{2.0, Vec2(20.0, 0.0), 0.0});
    const EgoPose mid = trajectory_pose(world, 1.0);
    CHECK(mid.position.x() == doctest::Approx(10.0));
    CHECK(mid.velocity.x() == doctest::Approx(10.0));
    const EgoPose past = trajectory_pose(world, 5.0);
    CHECK(past.position.x() == doctest::Approx(20.0));

    world.trajectory.push_back(TrajectoryPoint{1.0, Vec2::Zero(), 0.0});  // goes backwards
    CHECK_THROWS_AS(world.validate(), std::invalid_argument);
}
