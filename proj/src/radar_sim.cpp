#include "dogm/radar_sim.hpp"

#include "dogm/frames.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace dogm {

std::array<Vec2, 4> DynamicBox::corners_at(double t) const {
    const Vec2 c = center_at(t);
    const Mat2 r = rotation2d(heading);
    const Vec2 ex = r * Vec2(half_extent.x(), 0.0);
    const Vec2 ey = r * Vec2(0.0, half_extent.y());
    return {c + ex + ey, c - ex + ey, c - ex - ey, c + ex - ey};
}

void WorldModel::validate() const {
    for (const Segment& s : segments) s.validate();
    for (const DynamicBox& b : boxes)
        if (b.half_extent.x() <= 0.0 || b.half_extent.y() <= 0.0)
            throw std::invalid_argument("DynamicBox: half extents must be > 0");
    if (trajectory.empty()) throw std::invalid_argument("WorldModel: trajectory must not be empty");
    for (std::size_t i = 1; i < trajectory.size(); ++i)
        if (trajectory[i].t <= trajectory[i - 1].t)
            throw std::invalid_argument("WorldModel: trajectory must be strictly time-monotone");
}

EgoPose trajectory_pose(const WorldModel& world, double t) {
    const auto& tr = world.trajectory;
    if (tr.empty()) throw std::invalid_argument("trajectory_pose: empty trajectory");
    EgoPose pose;
    pose.timestamp = t;
    if (tr.size() == 1 || t <= tr.front().t) {
        pose.position = tr.front().position;
        pose.heading = tr.front().heading;
        if (tr.size() > 1) {
            const double dt = tr[1].t - tr[0].t;
            pose.velocity = (tr[1].position - tr[0].position) / dt;
        }
        return pose;
    }
    if (t >= tr.back().t) {
        pose.position = tr.back().position;
        pose.heading = tr.back().heading;
        const std::size_t n = tr.size();
        const double dt = tr[n - 1].t - tr[n - 2].t;
        pose.velocity = (tr[n - 1].position - tr[n - 2].position) / dt;
        return pose;
    }
    std::size_t hi = 1;
    while (tr[hi].t < t) ++hi;
    const TrajectoryPoint& p0 = tr[hi - 1];
    const TrajectoryPoint& p1 = tr[hi];
    const double u = (t - p0.t) / (p1.t - p0.t);
    pose.position = p0.position + u * (p1.position - p0.position);
    pose.heading = wrap_angle(p0.heading + u * wrap_angle(p1.heading - p0.heading));
    pose.velocity = (p1.position - p0.position) / (p1.t - p0.t);
    return pose;
}

namespace {

struct Reflector {
    Vec2 point;
    Vec2 velocity;
    double detection_rate;
};

// Ray/segment intersection: returns the ray parameter (distance along the
// unit direction) or a negative value when there is no hit.
double ray_segment_distance(const Vec2& origin, const Vec2& dir, const Segment& seg) {
    const Vec2 e = seg.b - seg.a;
    const double denom = dir.x() * e.y() - dir.y() * e.x();
    if (std::abs(denom) < 1e-12) return -1.0;
    const Vec2 ao = seg.a - origin;
    const double t = (ao.x() * e.y() - ao.y() * e.x()) / denom;       // along the ray
    const double s = (ao.x() * dir.y() - ao.y() * dir.x()) / denom;  // along the segment
    if (t < 0.0 || s < 0.0 || s > 1.0) return -1.0;
    return t;
}

void sample_segment(const Vec2& a, const Vec2& b, double spacing, double jitter, double rate,
                    const Vec2& vel, std::vector<Reflector>& out, SplitMix64& rng) {
    const double len = (b - a).norm();
    const int n = std::max(1, static_cast<int>(std::floor(len / spacing)));
    for (int q = 0; q < n; ++q) {
        // Reflection points wander along the surface from scan to scan.
        const double u = (q + 0.5 + jitter * rng.uniform(-0.5, 0.5)) / n;
        out.push_back(Reflector{a + u * (b - a), vel, rate});
    }
}

}  // namespace

std::vector<Detection> simulate_scan(const WorldModel& world, double t,
                                     std::span<const SensorMount> mounts, const EgoPose& pose,
                                     const SimParams& sim, SplitMix64& rng) {
    // Occluder set: static segments plus box edges at time t.
    std::vector<Segment> occluders(world.segments.begin(), world.segments.end());
    for (const DynamicBox& box : world.boxes) {
        const auto corners = box.corners_at(t);
        for (int e = 0; e < 4; ++e)
            occluders.push_back(Segment{corners[static_cast<std::size_t>(e)],
                                        corners[static_cast<std::size_t>((e + 1) % 4)], box.detection_rate});
    }

    // Candidate reflection points, anchored to the geometry (stable per scan).
    std::vector<Reflector> reflectors;
    for (const Segment& seg : world.segments)
        sample_segment(seg.a, seg.b, sim.point_spacing, sim.point_jitter, seg.detection_rate,
                       Vec2::Zero(), reflectors, rng);
    for (const DynamicBox& box : world.boxes) {
        const auto corners = box.corners_at(t);
        for (int e = 0; e < 4; ++e)
            sample_segment(corners[static_cast<std::size_t>(e)], corners[static_cast<std::size_t>((e + 1) % 4)],
                           sim.point_spacing, sim.point_jitter, box.detection_rate, box.velocity,
                           reflectors, rng);
    }

    const ShiftWeights* pos_alias = nullptr;
    const ShiftWeights* rr_alias = nullptr;
    if (sim.alias_position_bound > 0) pos_alias = &shift_weights_cached(sim.alias_position_bound);
    if (sim.alias_range_rate_bound > 0) rr_alias = &shift_weights_cached(sim.alias_range_rate_bound);
    const auto draw_shift = [&rng](const ShiftWeights& w) {
        double u = rng.uniform01();
        int idx = -w.bound();
        for (; idx < w.bound(); ++idx) {
            u -= w.at(idx);
            if (u <= 0.0) break;
        }
        return idx;
    };

    std::vector<Detection> scan;
    for (const SensorMount& mount : mounts) {
        const Vec2 s_pos = sensor_position_world(mount, pose);
        const Vec2 s_vel = sensor_velocity_world(mount, pose);

        for (const Reflector& ref : reflectors) {
            const Vec2 rel = ref.point - s_pos;
            const double dist = rel.norm();
            if (dist < 1e-6 || dist > mount.max_range) continue;
            const PolarPoint polar = world_to_sensor_polar(ref.point, mount, pose);
            if (std::abs(polar.azimuth) > mount.fov_half_angle) continue;

            // Nearest-hit occlusion: anything strictly closer blocks the point.
            const Vec2 dir = rel / dist;
            bool blocked = false;
            for (const Segment& occ : occluders) {
                const double hit = ray_segment_distance(s_pos, dir, occ);
                if (hit >= 0.0 && hit < dist - 1e-6) {
                    blocked = true;
                    break;
                }
            }
            if (blocked) continue;
            if (rng.uniform01() >= ref.detection_rate) continue;

            Detection d;
            d.sensor_id = mount.sensor_id;
            d.timestamp = t;
            d.range = dist;
            d.azimuth = polar.azimuth;
            d.range_rate = dir.dot(ref.velocity - s_vel);
            d.sigma_range = sim.sigma_range;
            d.sigma_azimuth = sim.sigma_azimuth;
            d.sigma_range_rate = sim.sigma_range_rate;
            if (sim.noise) {
                d.range += sim.sigma_range * rng.normal();
                d.azimuth += sim.sigma_azimuth * rng.normal();
                d.range_rate += sim.sigma_range_rate * rng.normal();
            }
            if (pos_alias) {
                d.range += draw_shift(*pos_alias) * sim.delta_range;
                d.azimuth += draw_shift(*pos_alias) * sim.delta_azimuth;
            }
            if (rr_alias) d.range_rate += draw_shift(*rr_alias) * sim.delta_range_rate;
            d.range = std::max(d.range, 0.0);
            d.azimuth = wrap_angle(d.azimuth);
            scan.push_back(d);
        }

        // Poisson clutter, uniform in the field of view.
        const int n_clutter = rng.poisson(sim.clutter_rate_at(t));
        for (int q = 0; q < n_clutter; ++q) {
            Detection d;
            d.sensor_id = mount.sensor_id;
            d.timestamp = t;
            d.range = rng.uniform(1.0, mount.max_range);
            d.azimuth = rng.uniform(-mount.fov_half_angle, mount.fov_half_angle);
            d.range_rate = rng.uniform(-sim.clutter_range_rate_max, sim.clutter_range_rate_max);
            d.sigma_range = sim.sigma_range;
            d.sigma_azimuth = sim.sigma_azimuth;
            d.sigma_range_rate = sim.sigma_range_rate;
            scan.push_back(d);
        }
    }
    return scan;
}

std::vector<CellIndex> rasterize_segment(const Segment& seg, const GridSpec& spec) {
    std::vector<CellIndex> out;
    const double cs = spec.cell_size;
    const Vec2 a = (seg.a - spec.origin) / cs;
    const Vec2 b = (seg.b - spec.origin) / cs;

    // Amanatides-Woo traversal over the unbounded lattice.
    int x = static_cast<int>(std::floor(a.x()));
    int y = static_cast<int>(std::floor(a.y()));
    const int xe = static_cast<int>(std::floor(b.x()));
    const int ye = static_cast<int>(std::floor(b.y()));
    const Vec2 d = b - a;
    const int sx = d.x() > 0 ? 1 : -1;
    const int sy = d.y() > 0 ? 1 : -1;
    const double inf = std::numeric_limits<double>::infinity();
    double t_max_x = inf, t_max_y = inf, t_dx = inf, t_dy = inf;
    if (std::abs(d.x()) > 1e-12) {
        t_dx = 1.0 / std::abs(d.x());
        const double bound = sx > 0 ? std::floor(a.x()) + 1.0 : std::floor(a.x());
        t_max_x = (bound - a.x()) / d.x();
    }
    if (std::abs(d.y()) > 1e-12) {
        t_dy = 1.0 / std::abs(d.y());
        const double bound = sy > 0 ? std::floor(a.y()) + 1.0 : std::floor(a.y());
        t_max_y = (bound - a.y()) / d.y();
    }
    out.push_back(CellIndex{x, y});
    int guard = 4 * (std::abs(xe - x) + std::abs(ye - y)) + 8;
    while ((x != xe || y != ye) && guard-- > 0) {
        if (t_max_x < t_max_y) {
            x += sx;
            t_max_x += t_dx;
        } else {
            y += sy;
            t_max_y += t_dy;
        }
        out.push_back(CellIndex{x, y});
    }
    return out;
}

std::vector<CellIndex> rasterize_box(const Vec2& center, const Vec2& half_extent, double heading,
                                     const GridSpec& spec) {
    std::vector<CellIndex> out;
    const Mat2 rot = rotation2d(heading);
    const Mat2 inv = rotation2d(-heading);
    const Vec2 ex = rot * Vec2(half_extent.x(), 0.0);
    const Vec2 ey = rot * Vec2(0.0, half_extent.y());
    const double rx = std::abs(ex.x()) + std::abs(ey.x());
    const double ry = std::abs(ex.y()) + std::abs(ey.y());
    const double cs = spec.cell_size;

    const int x_lo = static_cast<int>(std::floor((center.x() - rx - spec.origin.x()) / cs));
    const int x_hi = static_cast<int>(std::floor((center.x() + rx - spec.origin.x()) / cs));
    const int y_lo = static_cast<int>(std::floor((center.y() - ry - spec.origin.y()) / cs));
    const int y_hi = static_cast<int>(std::floor((center.y() + ry - spec.origin.y()) / cs));

    const double half_cell = 0.5 * cs;
    for (int gy = y_lo; gy <= y_hi; ++gy) {
        for (int gx = x_lo; gx <= x_hi; ++gx) {
            const Vec2 cell_center = spec.origin + cs * Vec2(gx + 0.5, gy + 0.5);
            // SAT on the box frame: positive-area overlap only.
            const Vec2 local = inv * (cell_center - center);
            const double cos_h = std::abs(std::cos(heading)), sin_h = std::abs(std::sin(heading));
            const double cell_r_on_box_axis = half_cell * (cos_h + sin_h);
            if (std::abs(local.x()) >= half_extent.x() + cell_r_on_box_axis) continue;
            if (std::abs(local.y()) >= half_extent.y() + cell_r_on_box_axis) continue;
            // Cell axes.
            const Vec2 rel = cell_center - center;
            const double box_r_x = std::abs(ex.x()) + std::abs(ey.x());
            const double box_r_y = std::abs(ex.y()) + std::abs(ey.y());
            if (std::abs(rel.x()) >= half_cell + box_r_x) continue;
            if (std::abs(rel.y()) >= half_cell + box_r_y) continue;
            out.push_back(CellIndex{gx, gy});
        }
    }
    return out;
}

GroundTruth ground_truth(const WorldModel& world, double t, const GridSpec& spec) {
    GroundTruth out;
    std::vector<CellIndex> cells;
    for (const Segment& seg : world.segments) {
        const auto r = rasterize_segment(seg, spec);
        cells.insert(cells.end(), r.begin(), r.end());
    }
    for (const DynamicBox& box : world.boxes) {
        const auto r = rasterize_box(box.center_at(t), box.half_extent, box.heading, spec);
        cells.insert(cells.end(), r.begin(), r.end());
        out.objects.push_back(GroundTruthObject{box.center_at(t), box.half_extent, box.heading, box.velocity});
    }
    std::sort(cells.begin(), cells.end(),
              [](const CellIndex& a, const CellIndex& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    out.occupied_cells = std::move(cells);
    return out;
}

}  // namespace dogm
