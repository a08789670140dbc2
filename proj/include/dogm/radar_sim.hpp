#pragma once

#include "dogm/rng.hpp"
#include "dogm/types.hpp"
#include "dogm/velocity.hpp"

#include <array>
#include <span>
#include <vector>

namespace dogm {

/// Static reflector: a wall/curb line segment with a per-sample-point
/// detection probability.
struct Segment {
    Vec2 a = Vec2::Zero();
    Vec2 b = Vec2::Zero();
    double detection_rate = 0.7;

    void validate() const {
        if ((a - b).norm() < 1e-9) throw std::invalid_argument("Segment: degenerate endpoints");
        if (detection_rate < 0.0 || detection_rate > 1.0)
            throw std::invalid_argument("Segment: detection_rate must be in [0,1]");
    }
};

/// Moving target: an oriented rectangle under constant velocity.
struct DynamicBox {
    Vec2 center = Vec2::Zero();   // at t = 0
    Vec2 half_extent = Vec2(1.0, 1.0);
    double heading = 0.0;
    Vec2 velocity = Vec2::Zero();
    double detection_rate = 0.7;

    Vec2 center_at(double t) const { return center + t * velocity; }
    std::array<Vec2, 4> corners_at(double t) const;
};

struct TrajectoryPoint {
    double t = 0.0;
    Vec2 position = Vec2::Zero();
    double heading = 0.0;
};

struct WorldModel {
    std::vector<Segment> segments;
    std::vector<DynamicBox> boxes;
    std::vector<TrajectoryPoint> trajectory;  // time-monotone

    void validate() const;
};

/// Piecewise-linear pose interpolation along the trajectory; velocity is the
/// active segment's slope.
EgoPose trajectory_pose(const WorldModel& world, double t);

struct ClutterBurst {
    double t_start = 0.0;
    double t_end = 0.0;
    double rate = 0.0;  // mean clutter detections per sensor per scan while active
};

struct SimParams {
    double point_spacing = 1.0;      // m between candidate reflection points
    double point_jitter = 1.0;       // per-scan wander of sample points, as a fraction of the spacing
    double sigma_range = 0.5;        // m
    double sigma_azimuth = 0.01;     // rad
    double sigma_range_rate = 0.5;   // m/s
    bool noise = true;
    int alias_position_bound = 1;    // k of the injected binomial range/azimuth shifts (0 = off)
    int alias_range_rate_bound = 1;  // same for range rate
    double delta_range = 15.0;       // m
    double delta_azimuth = 0.35;     // rad
    double delta_range_rate = 12.5;  // m/s
    double clutter_rate = 2.0;       // mean false detections per sensor per scan
    double clutter_range_rate_max = 20.0;  // m/s, uniform clutter range rate span
    std::vector<ClutterBurst> clutter_bursts;
    std::uint64_t seed = 1;

    double clutter_rate_at(double t) const {
        double rate = clutter_rate;
        for (const ClutterBurst& b : clutter_bursts)
            if (t >= b.t_start && t <= b.t_end) rate = b.rate;
        return rate;
    }
};

/// One radar scan: visibility-tested sampling of the world geometry with
/// Gaussian noise, binomially drawn ambiguity shifts, and Poisson clutter.
std::vector<Detection> simulate_scan(const WorldModel& world, double t,
                                     std::span<const SensorMount> mounts, const EgoPose& pose,
                                     const SimParams& sim, SplitMix64& rng);

struct GroundTruthObject {
    Vec2 center = Vec2::Zero();
    Vec2 half_extent = Vec2::Zero();
    double heading = 0.0;
    Vec2 velocity = Vec2::Zero();
};

struct GroundTruth {
    std::vector<CellIndex> occupied_cells;  // cells with positive-area geometry overlap
    std::vector<GroundTruthObject> objects;
};

/// World-frame truth snapshot for scoring, rasterized on the given lattice.
GroundTruth ground_truth(const WorldModel& world, double t, const GridSpec& spec);

/// Cells crossed by a segment (supercover traversal on the spec lattice).
std::vector<CellIndex> rasterize_segment(const Segment& seg, const GridSpec& spec);

/// Cells with positive-area overlap with an oriented rectangle.
std::vector<CellIndex> rasterize_box(const Vec2& center, const Vec2& half_extent, double heading,
                                     const GridSpec& spec);

}  // namespace dogm
