#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

namespace dogm {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

constexpr double kPi = 3.141592653589793238462643383279502884;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

inline Mat2 rotation2d(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Mat2 r;
    r << c, -s, s, c;
    return r;
}

/// Sensor-platform pose in the world frame.
struct EgoPose {
    Vec2 position = Vec2::Zero();   // m
    double heading = 0.0;           // rad, (-pi, pi]
    Vec2 velocity = Vec2::Zero();   // m/s, world frame
    double timestamp = 0.0;         // s
};

/// Radar mounting relative to the sensor platform.
struct SensorMount {
    int sensor_id = 0;
    Vec2 offset = Vec2::Zero();     // m, platform frame
    double yaw = 0.0;               // rad, platform frame
    double fov_half_angle = kPi / 2;  // rad, half opening angle
    double max_range = 100.0;       // m

    void validate() const {
        if (max_range <= 0.0) throw std::invalid_argument("SensorMount: max_range must be > 0");
        if (fov_half_angle <= 0.0 || fov_half_angle > kPi)
            throw std::invalid_argument("SensorMount: fov_half_angle must be in (0, pi]");
    }
};

/// One radar return: polar position, range rate and their noises, sensor frame.
struct Detection {
    int sensor_id = 0;
    double timestamp = 0.0;     // s
    double range = 0.0;         // m
    double azimuth = 0.0;       // rad, sensor frame
    double range_rate = 0.0;    // m/s, receding positive
    double sigma_range = 0.5;   // m
    double sigma_azimuth = 0.01;    // rad
    double sigma_range_rate = 0.5;  // m/s

    void validate() const {
        if (range < 0.0) throw std::invalid_argument("Detection: range must be >= 0");
        if (sigma_range <= 0.0 || sigma_azimuth <= 0.0 || sigma_range_rate <= 0.0)
            throw std::invalid_argument("Detection: all noise sigmas must be > 0");
    }
};

/// Integer cell coordinates on the global lattice anchored at GridSpec::origin.
struct CellIndex {
    int x = 0;
    int y = 0;
    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Window geometry of one grid layer. Cells are half-open squares
/// [low, low + cell_size) on a lattice anchored at `origin`.
struct GridSpec {
    double cell_size = 0.5;         // m
    double extent_forward = 75.0;   // m, +x
    double extent_backward = 75.0;  // m, -x
    double extent_lateral = 150.0;  // m, each side in y
    Vec2 origin = Vec2::Zero();     // world coords of the lattice anchor (cell (0,0) corner)

    int cells_x() const { return static_cast<int>(std::llround((extent_forward + extent_backward) / cell_size)); }
    int cells_y() const { return static_cast<int>(std::llround(2.0 * extent_lateral / cell_size)); }

    void validate() const {
        if (cell_size <= 0.0) throw std::invalid_argument("GridSpec: cell_size must be > 0");
        for (double e : {extent_forward, extent_backward, extent_lateral}) {
            if (e <= 0.0) throw std::invalid_argument("GridSpec: extents must be > 0");
            const double k = e / cell_size;
            if (std::abs(k - std::llround(k)) > 1e-9)
                throw std::invalid_argument("GridSpec: extents must be integer multiples of cell_size");
        }
    }
};

/// Ambiguity intervals, index-set bounds and scale constants of the
/// inverse radar sensor models.
struct SensorModelParams {
    double delta_range = 15.0;       // m, range ambiguity interval
    double delta_azimuth = 0.35;     // rad, azimuth ambiguity interval
    double delta_range_rate = 12.5;  // m/s, range-rate ambiguity interval
    int pos_index_bound = 1;         // k: position shift indices run over {-k..k}
    int rr_index_bound = 1;          // m: range-rate shift indices run over {-m..m}
    double rho0 = 0.3;               // base range/azimuth correlation, in (0,1)
    double gamma = 0.5;              // free-space range-spread factor
    double eta_occupied = 0.021;     // likelihood scale, occupied model
    double eta_free = 0.719;         // likelihood scale, free-space model
    double eta_velocity = 1.2533;    // likelihood scale, velocity model

    void validate() const {
        if (delta_range <= 0.0 || delta_azimuth <= 0.0 || delta_range_rate <= 0.0)
            throw std::invalid_argument("SensorModelParams: ambiguity intervals must be > 0");
        if (pos_index_bound < 0 || rr_index_bound < 0)
            throw std::invalid_argument("SensorModelParams: index bounds must be >= 0");
        if (!(rho0 >= 0.0 && rho0 < 1.0))
            throw std::invalid_argument("SensorModelParams: rho0 must be in [0,1)");
        if (gamma <= 0.0) throw std::invalid_argument("SensorModelParams: gamma must be > 0");
        if (eta_occupied <= 0.0 || eta_free <= 0.0 || eta_velocity <= 0.0)
            throw std::invalid_argument("SensorModelParams: eta constants must be > 0");
    }
};

/// Scale constant making the peak single-term likelihood of the occupied
/// model equal `peak` at the given reference noise.
inline double eta_for_position_peak(double peak, double sigma_r, double sigma_phi, double rho0) {
    return peak * 2.0 * kPi * sigma_r * sigma_phi * std::sqrt(1.0 - rho0 * rho0);
}

/// Same for the 1-D velocity model.
inline double eta_for_velocity_peak(double peak, double sigma_rr) {
    return peak * std::sqrt(2.0 * kPi) * sigma_rr;
}

}  // namespace dogm
