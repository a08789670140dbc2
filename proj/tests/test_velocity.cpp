#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dogm/frames.hpp"
#include "dogm/sensor_models.hpp"
#include "dogm/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

using namespace dogm;

namespace {

GridSpec vel_spec() {
    GridSpec spec;
    spec.cell_size = 1.0;
    spec.extent_forward = 20.0;
    spec.extent_backward = 20.0;
    spec.extent_lateral = 20.0;
    return spec;
}

SensorTable one_sensor() {
    SensorTable table;
    SensorMount m;
    m.sensor_id = 0;
    m.fov_half_angle = kPi;
    m.max_range = 500.0;
    table.mounts = {m};
    table.params = {SensorModelParams{}};
    return table;
}

Detection make_z(double r, double phi, double rr) {
    Detection z;
    z.range = r;
    z.azimuth = phi;
    z.range_rate = rr;
    return z;
}

// Two-pass reference for the weighted moments.
CellVelocityStats two_pass_stats(std::span<const Particle> ps) {
    CellVelocityStats out;
    out.particle_count = static_cast<int>(ps.size());
    double sw = 0.0;
    for (const Particle& p : ps) sw += p.weight;
    out.weight_sum = sw;
    if (!(sw > 0.0)) return out;
    Vec2 mean = Vec2::Zero();
    for (const Particle& p : ps) mean += p.weight * p.velocity;
    mean /= sw;
    Mat2 cov = Mat2::Zero();
    for (const Particle& p : ps) {
        const Vec2 d = p.velocity - mean;
        cov += p.weight * (d * d.transpose());
    }
    cov /= sw;
    out.mean = mean;
    out.covariance = cov;
    out.valid = true;
    return out;
}

}  // namespace

TEST_CASE("init_cell_particles: count, support, weights") {
    SplitMix64 rng(1);
    std::vector<Particle> out;
    init_cell_particles(out, Vec2(3.0, -2.0), 1.0, 4, 2.0, rng);
    CHECK(out.size() == 4);
    for (const Particle& p : out) CHECK(p.weight == doctest::Approx(0.25));

    out.clear();
    double max_speed = 0.0;
    for (int i = 0; i < 2500; ++i) init_cell_particles(out, Vec2(3.0, -2.0), 1.0, 4, 2.0, rng);
    for (const Particle& p : out) {
        CHECK(p.position.x() >= 3.0);
        CHECK(p.position.x() < 4.0);
        CHECK(p.position.y() >= -2.0);
        CHECK(p.position.y() < -1.0);
        max_speed = std::max(max_speed, p.velocity.norm());
    }
    CHECK(max_speed <= 2.0);
    CHECK(max_speed > 1.95);  // the disk boundary is approached
}

TEST_CASE("predict: constant-velocity kinematics without noise") {
    std::vector<Particle> ps = {Particle{Vec2(0.0, 0.0), Vec2(10.0, 0.0), 1.0},
                                Particle{Vec2(5.0, 5.0), Vec2(0.0, 0.0), 0.5}};
    MotionParams mp;
    mp.sigma_pos = 0.0;
    mp.sigma_vel = 0.0;
    mp.dt = 0.1;
    predict_particles(ps, mp, 7);
    CHECK(ps[0].position.x() == doctest::Approx(1.0));
    CHECK(ps[0].position.y() == doctest::Approx(0.0));
    CHECK(ps[0].velocity.x() == doctest::Approx(10.0));
    CHECK(ps[0].weight == doctest::Approx(1.0));
    CHECK(ps[1].position.x() == doctest::Approx(5.0));
    CHECK(ps[1].position.y() == doctest::Approx(5.0));
}

TEST_CASE("predict: velocity noise matches sigma_vel within 2%") {
    const int n = 100000;
    std::vector<Particle> ps(n, Particle{Vec2(0.0, 0.0), Vec2(0.0, 0.0), 1.0});
    MotionParams mp;
    mp.sigma_pos = 0.0;
    mp.sigma_vel = 0.4;
    mp.dt = 0.1;
    predict_particles(ps, mp, 99);
    double sum = 0.0, sum2 = 0.0;
    for (const Particle& p : ps) {
        sum += p.velocity.x();
        sum2 += p.velocity.x() * p.velocity.x();
    }
    const double mean = sum / n;
    const double std = std::sqrt(sum2 / n - mean * mean);
    CHECK(std == doctest::Approx(0.4).epsilon(0.02));
}

TEST_CASE("cell_statistics: examples and the two-pass oracle") {
    std::vector<Particle> pair = {Particle{Vec2::Zero(), Vec2(10.0, 0.0), 1.0},
                                  Particle{Vec2::Zero(), Vec2(20.0, 0.0), 1.0}};
    const CellVelocityStats mid = cell_statistics(pair);
    CHECK(mid.valid);
    CHECK(mid.mean.x() == doctest::Approx(15.0));
    CHECK(mid.mean.y() == doctest::Approx(0.0));

    std::vector<Particle> one = {Particle{Vec2::Zero(), Vec2(3.0, -4.0), 2.0}};
    const CellVelocityStats single = cell_statistics(one);
    CHECK(single.mean.x() == doctest::Approx(3.0));
    CHECK(single.covariance.norm() == doctest::Approx(0.0).epsilon(1e-12));

    SplitMix64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Particle> ps;
        for (int i = 0; i < 100; ++i)
            ps.push_back(Particle{Vec2::Zero(),
                                  Vec2(rng.uniform(-30.0, 30.0), rng.uniform(-30.0, 30.0)),
                                  rng.uniform(0.0, 2.0)});
        const CellVelocityStats a = cell_statistics(ps);
        const CellVelocityStats b = two_pass_stats(ps);
        CHECK(std::abs(a.mean.x() - b.mean.x()) < 1e-9);
        CHECK(std::abs(a.mean.y() - b.mean.y()) < 1e-9);
        CHECK((a.covariance - b.covariance).cwiseAbs().maxCoeff() < 1e-9);
        // PSD up to round-off.
        const Eigen::SelfAdjointEigenSolver<Mat2> eig(a.covariance);
        CHECK(eig.eigenvalues().minCoeff() > -1e-9);
    }

    std::vector<Particle> zero_w = {Particle{Vec2::Zero(), Vec2(1.0, 1.0), 0.0}};
    const CellVelocityStats degenerate = cell_statistics(zero_w);
    CHECK_FALSE(degenerate.valid);
    CHECK(std::isfinite(degenerate.mean.x()));
    CHECK(std::isfinite(degenerate.covariance.trace()));
}

TEST_CASE("resample: neutral case preserves the multiset") {
    std::vector<Particle> ps;
    for (int i = 0; i < 10; ++i)
        ps.push_back(Particle{Vec2(i, 0.0), Vec2(0.1 * i, 0.0), 0.1});  // uniform, sums to 1
    ResampleParams rp;
    rp.n_min = 1;
    rp.n_max = 100;
    SplitMix64 rng(5);
    const auto out = resample_cell(ps, rp, rng);
    REQUIRE(out.size() == 10);
    // Systematic resampling with exactly uniform weights copies each once.
    for (int i = 0; i < 10; ++i) CHECK(out[static_cast<std::size_t>(i)].position.x() == doctest::Approx(i));
    for (const Particle& p : out) CHECK(p.weight == doctest::Approx(0.1));
}

TEST_CASE("resample: dominant particle is copied in proportion to its weight") {
    ResampleParams rp;
    rp.n_min = 100;
    rp.n_max = 100;
    SplitMix64 rng(7);
    double dominant_copies = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Particle> ps;
        ps.push_back(Particle{Vec2(1.0, 0.0), Vec2(9.0, 9.0), 0.99});
        for (int i = 0; i < 9; ++i)
            ps.push_back(Particle{Vec2(0.0, 0.0), Vec2(0.0, 0.0), 0.99 / 891.0});  // tiny share
        const auto out = resample_cell(ps, rp, rng);
        REQUIRE(out.size() == 100);
        for (const Particle& p : out)
            if (p.velocity.x() == 9.0) dominant_copies += 1.0;
    }
    CHECK(dominant_copies / 100.0 >= 95.0);
}

TEST_CASE("resample: count law clamps") {
    ResampleParams rp;
    rp.n_min = 2;
    rp.n_max = 500;
    rp.growth_max = 1e9;  // let the weight drive it
    std::vector<Particle> ps(10, Particle{Vec2::Zero(), Vec2::Zero(), 1e5});
    SplitMix64 rng(9);
    CHECK(resample_cell(ps, rp, rng).size() == 500);

    ResampleParams shrink;
    shrink.n_min = 3;
    shrink.n_max = 500;
    std::vector<Particle> weak(10, Particle{Vec2::Zero(), Vec2::Zero(), 1e-9});
    CHECK(resample_cell(weak, shrink, rng).size() == 5);  // 10 * growth_min(0.5)
}

TEST_CASE("resample: all-zero weights fall back to a uniform draw") {
    std::vector<Particle> ps;
    for (int i = 0; i < 8; ++i) ps.push_back(Particle{Vec2(i, 0.0), Vec2::Zero(), 0.0});
    ResampleParams rp;
    rp.n_min = 8;
    rp.n_max = 8;
    SplitMix64 rng(11);
    const auto out = resample_cell(ps, rp, rng);
    REQUIRE(out.size() == 8);
    for (const Particle& p : out) {
        CHECK(p.weight == doctest::Approx(1.0 / 8.0));
        CHECK(p.position.x() >= 0.0);
        CHECK(p.position.x() <= 7.0);
    }
}

TEST_CASE("resample is weight-unbiased for the velocity mean") {
    std::vector<Particle> ps = {Particle{Vec2::Zero(), Vec2(0.0, 0.0), 0.2},
                                Particle{Vec2::Zero(), Vec2(10.0, 0.0), 0.5},
                                Particle{Vec2::Zero(), Vec2(20.0, 0.0), 0.3}};
    const double want = (0.5 * 10.0 + 0.3 * 20.0) / 1.0;
    ResampleParams rp;
    rp.n_min = 50;
    rp.n_max = 50;
    SplitMix64 rng(13);
    double acc = 0.0;
    const int trials = 200;
    std::vector<double> means;
    for (int t = 0; t < trials; ++t) {
        const auto out = resample_cell(ps, rp, rng);
        double m = 0.0;
        for (const Particle& p : out) m += p.velocity.x();
        means.push_back(m / out.size());
        acc += means.back();
    }
    const double mean_of_means = acc / trials;
    double var = 0.0;
    for (double m : means) var += (m - mean_of_means) * (m - mean_of_means);
    var /= trials;
    const double sigma = std::sqrt(var / trials);
    CHECK(std::abs(mean_of_means - want) <= std::max(3.0 * sigma, 1e-6));
}

TEST_CASE("VelocityGrid: construction fills every cell with n_min particles") {
    VelocityGrid grid(vel_spec(), 2, 2.0, 77);
    CHECK(grid.particle_count() == grid.window().cell_count() * 2);
    for (std::size_t c = 0; c < grid.window().cell_count(); ++c)
        CHECK(grid.cell_slice(c).size() == 2);
}

TEST_CASE("VelocityGrid: rebin drops out-of-window particles and keeps slices consistent") {
    VelocityGrid grid(vel_spec(), 2, 2.0, 78);
    std::vector<Particle> extra = {Particle{Vec2(500.0, 0.0), Vec2::Zero(), 1.0},
                                   Particle{Vec2(3.2, 4.7), Vec2(1.0, 0.0), 1.0}};
    const std::size_t before = grid.particle_count();
    grid.append(extra);
    grid.rebin();
    CHECK(grid.particle_count() == before + 1);  // the far particle is dropped
    for (std::size_t c = 0; c < grid.window().cell_count(); ++c)
        for (const Particle& p : grid.cell_slice(c)) {
            const auto cell = grid.window().cell_at(p.position);
            REQUIRE(cell.has_value());
            CHECK(grid.window().buffer_index(*cell) == c);
        }
}

TEST_CASE("VelocityGrid: scroll initializes entering cells") {
    VelocityGrid grid(vel_spec(), 3, 2.0, 79);
    grid.scroll_to(CellIndex{5, -4}, 80);
    CHECK(grid.window().origin() == CellIndex{5, -4});
    CHECK(grid.particle_count() == grid.window().cell_count() * 3);
    for (std::size_t c = 0; c < grid.window().cell_count(); ++c)
        CHECK(grid.cell_slice(c).size() == 3);
}

TEST_CASE("associate_measurements: gating and the exhaustive-sort oracle") {
    VelocityGrid grid(vel_spec(), 1, 2.0, 81);
    const SensorTable sensors = one_sensor();
    EgoPose pose;

    std::vector<Detection> scan;
    scan.push_back(make_z(5.0, 0.0, 0.0));  // world (5, 0)
    const Association single = associate_measurements(grid.window(), scan, sensors, pose, 2, 4.0);
    // Cell containing (5.5, 0.5) center == (5, 0) cell.
    const auto near_cell = grid.window().cell_at(Vec2(5.2, 0.2));
    REQUIRE(near_cell.has_value());
    CHECK(single.cell_candidates(grid.window().buffer_index(*near_cell)).size() == 1);
    const auto far_cell = grid.window().cell_at(Vec2(15.0, 15.0));
    REQUIRE(far_cell.has_value());
    CHECK(single.cell_candidates(grid.window().buffer_index(*far_cell)).empty());

    // Five detections, n = 2: brute-force two nearest per cell.
    scan.clear();
    const double rs[5] = {3.0, 6.0, 9.0, 12.0, 15.0};
    for (double r : rs) scan.push_back(make_z(r, 0.1 * r, 0.0));
    const int n = 2;
    const double gate = 8.0;
    const Association assoc = associate_measurements(grid.window(), scan, sensors, pose, n, gate);
    for (std::size_t c = 0; c < grid.window().cell_count(); ++c) {
        const Vec2 center = grid.window().center_of(grid.window().global_of(c));
        std::vector<std::pair<double, std::uint32_t>> dist;
        for (std::uint32_t di = 0; di < scan.size(); ++di) {
            const Vec2 w = polar_to_world(scan[di], sensors.mounts[0], pose);
            const double d2 = (w - center).squaredNorm();
            if (d2 <= gate * gate) dist.emplace_back(d2, di);
        }
        std::sort(dist.begin(), dist.end());
        if (dist.size() > n) dist.resize(n);
        const auto got = assoc.cell_candidates(c);
        REQUIRE(got.size() == dist.size());
        for (std::size_t q = 0; q < got.size(); ++q) CHECK(got[q] == dist[q].second);
    }
}

TEST_CASE("update_weights: no candidates leave weights untouched") {
    VelocityGrid grid(vel_spec(), 2, 2.0, 83);
    const SensorTable sensors = one_sensor();
    EgoPose pose;
    const std::vector<double> before = [&] {
        std::vector<double> w;
        for (const Particle& p : grid.particles()) w.push_back(p.weight);
        return w;
    }();
    const Association empty = associate_measurements(grid.window(), {}, sensors, pose, 3, 10.0);
    update_weights(grid, empty, {}, sensors, pose, 1e-3, 10.0, 6.0);
    std::size_t i = 0;
    for (const Particle& p : grid.particles()) CHECK(p.weight == before[i++]);
}

TEST_CASE("update_weights: consistent particle gains the peak factor; max rule picks the best") {
    // One detection exactly at a cell center, one inconsistent detection.
    const SensorTable sensors = one_sensor();
    EgoPose pose;
    VelocityGrid grid(vel_spec(), 1, 2.0, 85);

    const CellIndex target = *grid.window().cell_at(Vec2(10.5, 0.5));
    const Vec2 center = grid.window().center_of(target);  // (10.5, 0.5)
    const PolarPoint polar{center.norm(), std::atan2(center.y(), center.x())};

    std::vector<Detection> scan;
    scan.push_back(make_z(polar.range, polar.azimuth, 7.0));   // Doppler-consistent below
    scan.push_back(make_z(polar.range, polar.azimuth, 40.0));  // inconsistent alias-free

    // Plant one particle exactly at the center with a matching radial velocity.
    const Vec2 radial = center / center.norm();
    std::vector<Particle> planted = {Particle{center, 7.0 * radial, 1.0}};
    grid.append(planted);
    grid.rebin();

    const Association assoc = associate_measurements(grid.window(), scan, sensors, pose, 3, 10.0);
    const std::size_t bc = grid.window().buffer_index(target);
    REQUIRE(assoc.cell_candidates(bc).size() == 2);

    // Oracle: best combined likelihood over both candidates.
    double best = 0.0;
    for (const Detection& z : scan) {
        const double occ = occupancy_likelihood(polar, z, sensors.params[0]);
        const double vel = velocity_likelihood(center, 7.0 * radial, z, sensors.mounts[0], pose,
                                               sensors.params[0]);
        best = std::max(best, occ * vel);
    }

    // Find the planted particle (weight 1 before update).
    const double lambda_floor = 1e-3, gain = 10.0;
    update_weights(grid, assoc, scan, sensors, pose, lambda_floor, gain, 8.0);
    bool found = false;
    for (const Particle& p : grid.cell_slice(bc))
        if (p.position == center) {
            found = true;
            CHECK(p.weight == doctest::Approx(lambda_floor + gain * best).epsilon(1e-9));
        }
    CHECK(found);
}

TEST_CASE("update_weights never drops a weight below the survival floor share") {
    VelocityGrid grid(vel_spec(), 2, 2.0, 87);
    const SensorTable sensors = one_sensor();
    EgoPose pose;
    std::vector<Detection> scan = {make_z(10.0, 0.0, 30.0)};
    const std::vector<double> before = [&] {
        std::vector<double> w;
        for (const Particle& p : grid.particles()) w.push_back(p.weight);
        return w;
    }();
    const double lambda_floor = 1e-3;
    const Association assoc = associate_measurements(grid.window(), scan, sensors, pose, 3, 25.0);
    update_weights(grid, assoc, scan, sensors, pose, lambda_floor, 10.0, 6.0);
    std::size_t i = 0;
    for (const Particle& p : grid.particles()) {
        CHECK(p.weight >= lambda_floor * before[i] - 1e-300);
        ++i;
    }
}

TEST_CASE("resample_grid keeps cell counts within bounds and repopulates empty cells") {
    VelocityGrid grid(vel_spec(), 2, 2.0, 89);
    ResampleParams rp;
    rp.n_min = 2;
    rp.n_max = 6;
    // Skew weights wildly.
    SplitMix64 rng(90);
    for (Particle& p : grid.particles()) p.weight = rng.uniform01() < 0.2 ? 50.0 : 1e-6;
    resample_grid(grid, rp, 91);
    CHECK(grid.particle_count() <= rp.n_max * grid.window().cell_count());
    for (std::size_t c = 0; c < grid.window().cell_count(); ++c) {
        const auto slice = grid.cell_slice(c);
        CHECK(slice.size() >= static_cast<std::size_t>(rp.n_min));
        CHECK(slice.size() <= static_cast<std::size_t>(rp.n_max));
        double sum = 0.0;
        for (const Particle& p : slice) sum += p.weight;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));  // uniform 1/n' weights
    }
}

TEST_CASE("spawn_hypotheses: static scans spawn nothing") {
    VelocityGrid grid(vel_spec(), 2, 2.0, 93);
    const SensorTable sensors = one_sensor();
    EgoPose pose;
    HypothesesParams hp;
    ResampleParams rp;
    std::vector<Detection> scan = {make_z(10.0, 0.2, 0.05), make_z(12.0, -0.4, -0.3)};
    CHECK(spawn_hypotheses(grid, scan, sensors, pose, hp, rp, 94) == 0);
}

TEST_CASE("spawn_hypotheses: cluster spawns Doppler-consistent particles (single alias)") {
    GridSpec spec = vel_spec();
    VelocityGrid grid(spec, 2, 2.0, 95);
    SensorTable sensors = one_sensor();
    sensors.params[0].rr_index_bound = 0;
    EgoPose pose;
    HypothesesParams hp;
    hp.spawn_per_cell = 8;
    ResampleParams rp;
    rp.n_max = 30;

    std::vector<Detection> scan = {make_z(15.0, 0.0, 15.0), make_z(15.5, 0.01, 15.0)};
    const std::size_t spawned = spawn_hypotheses(grid, scan, sensors, pose, hp, rp, 96);
    CHECK(spawned > 0);

    // Every spawned particle (speed above the init range) predicts ~15 m/s.
    std::size_t checked = 0;
    for (const Particle& p : grid.particles()) {
        if (p.velocity.norm() <= 2.0) continue;
        const double rr = doppler_range_rate(p.position, p.velocity, sensors.mounts[0], pose);
        CHECK(rr == doctest::Approx(15.0).epsilon(1e-9));
        ++checked;
    }
    CHECK(checked == spawned);
}

TEST_CASE("spawn_hypotheses: alias hypotheses appear in shift-weight proportions") {
    GridSpec spec = vel_spec();
    VelocityGrid grid(spec, 2, 2.0, 97);
    SensorTable sensors = one_sensor();
    sensors.params[0].rr_index_bound = 1;
    sensors.params[0].delta_range_rate = 12.5;
    EgoPose pose;
    HypothesesParams hp;
    hp.spawn_per_cell = 25;
    hp.assoc_radius = 6.0;
    ResampleParams rp;
    rp.n_max = 40;

    std::vector<Detection> scan = {make_z(15.0, 0.0, 15.0), make_z(15.4, 0.02, 15.0),
                                   make_z(14.8, -0.02, 15.0)};
    const std::size_t spawned = spawn_hypotheses(grid, scan, sensors, pose, hp, rp, 98);
    REQUIRE(spawned > 400);

    std::map<int, int> histogram;  // alias index -> count
    for (const Particle& p : grid.particles()) {
        if (p.velocity.norm() <= 2.0) continue;
        const double rr = doppler_range_rate(p.position, p.velocity, sensors.mounts[0], pose);
        const int l = static_cast<int>(std::llround((15.0 - rr) / 12.5));
        histogram[l] += 1;
    }
    const double total = spawned;
    CHECK(histogram[0] / total == doctest::Approx(0.5).epsilon(0.15));
    CHECK(histogram[1] / total == doctest::Approx(0.25).epsilon(0.25));
    CHECK(histogram[-1] / total == doctest::Approx(0.25).epsilon(0.25));
}

TEST_CASE("emit_mass_transfers: examples and the normalization property") {
    GridSpec occ;
    occ.cell_size = 0.5;
    occ.extent_forward = 50.0;
    occ.extent_backward = 50.0;
    occ.extent_lateral = 50.0;

    // No border crossing -> empty.
    {
        std::vector<Vec2> before = {Vec2(1.1, 1.1)};
        std::vector<Vec2> after = {Vec2(1.2, 1.2)};  // same 0.5 m cell
        std::vector<double> w = {1.0};
        CHECK(emit_mass_transfers(before, after, w, occ, 0.5).empty());
    }
    // One crossing with normalized weight 0.2 and gain 0.5 -> fraction 0.1.
    {
        std::vector<Vec2> before = {Vec2(1.1, 1.1), Vec2(1.2, 1.2)};
        std::vector<Vec2> after = {Vec2(1.8, 1.1), Vec2(1.3, 1.2)};
        std::vector<double> w = {0.25, 1.0};  // crossing particle holds 0.2 of the cell weight
        const auto transfers = emit_mass_transfers(before, after, w, occ, 0.5);
        REQUIRE(transfers.size() == 1);
        CHECK(transfers[0].fraction == doctest::Approx(0.1));
        CHECK(transfers[0].from == CellIndex{2, 2});
        CHECK(transfers[0].to == CellIndex{3, 2});
    }
    // Random sets: per-source sums never exceed the gain.
    SplitMix64 rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Vec2> before, after;
        std::vector<double> w;
        for (int i = 0; i < 500; ++i) {
            const Vec2 b(rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0));
            before.push_back(b);
            after.push_back(b + Vec2(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)));
            w.push_back(rng.uniform(0.0, 3.0));
        }
        const auto transfers = emit_mass_transfers(before, after, w, occ, 1.0);
        std::map<std::pair<int, int>, double> per_source;
        for (const MassTransfer& t : transfers) per_source[{t.from.x, t.from.y}] += t.fraction;
        for (const auto& [cell, sum] : per_source) CHECK(sum <= 1.0 + 1e-9);
    }
}
