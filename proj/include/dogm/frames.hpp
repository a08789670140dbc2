#pragma once

#include "dogm/types.hpp"

namespace dogm {

struct PolarPoint {
    double range = 0.0;
    double azimuth = 0.0;  // rad, (-pi, pi]
};

/// World position of a mounted sensor.
inline Vec2 sensor_position_world(const SensorMount& mount, const EgoPose& pose) {
    return pose.position + rotation2d(pose.heading) * mount.offset;
}

/// World velocity of a mounted sensor. The pose stream carries no yaw rate,
/// so the lever-arm term is omitted: the mount moves with the platform.
inline Vec2 sensor_velocity_world(const SensorMount& /*mount*/, const EgoPose& pose) {
    return pose.velocity;
}

/// Sensor-frame polar detection -> world Cartesian point.
/// Composition: sensor polar -> platform frame -> world frame.
inline Vec2 polar_to_world(const Detection& d, const SensorMount& mount, const EgoPose& pose) {
    const double ang = mount.yaw + d.azimuth;
    const Vec2 in_platform = mount.offset + d.range * Vec2(std::cos(ang), std::sin(ang));
    return pose.position + rotation2d(pose.heading) * in_platform;
}

/// World point -> polar coordinates in the given sensor's frame.
inline PolarPoint world_to_sensor_polar(const Vec2& p, const SensorMount& mount, const EgoPose& pose) {
    const Vec2 rel = rotation2d(-pose.heading) * (p - pose.position) - mount.offset;
    PolarPoint out;
    out.range = rel.norm();
    out.azimuth = wrap_angle(std::atan2(rel.y(), rel.x()) - mount.yaw);
    return out;
}

/// Floor binning onto the half-open lattice cells; nullopt when the point
/// falls outside the window [origin, origin + extents).
inline std::optional<CellIndex> world_to_cell(const Vec2& p, const GridSpec& spec) {
    const double fx = std::floor((p.x() - spec.origin.x()) / spec.cell_size);
    const double fy = std::floor((p.y() - spec.origin.y()) / spec.cell_size);
    if (fx < 0 || fy < 0 || fx >= spec.cells_x() || fy >= spec.cells_y()) return std::nullopt;
    return CellIndex{static_cast<int>(fx), static_cast<int>(fy)};
}

inline Vec2 cell_center(const CellIndex& c, const GridSpec& spec) {
    return spec.origin + spec.cell_size * Vec2(c.x + 0.5, c.y + 0.5);
}

/// Polar coordinates of a cell's center in the given sensor's frame.
inline PolarPoint cell_center_polar(const CellIndex& c, const GridSpec& spec,
                                    const SensorMount& mount, const EgoPose& pose) {
    return world_to_sensor_polar(cell_center(c, spec), mount, pose);
}

}  // namespace dogm
