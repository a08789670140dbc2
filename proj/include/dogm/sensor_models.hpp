#pragma once

#include "dogm/frames.hpp"
#include "dogm/types.hpp"

#include <vector>

namespace dogm {

/// Discrete shift probabilities of one ambiguity axis: index i in {-k..k}
/// weighted by a Binomial(2k, 1/2) pmf. Joint position weights factor as
/// the product of two independent axes.
class ShiftWeights {
public:
    static ShiftWeights binomial(int bound);

    int bound() const { return bound_; }
    int size() const { return 2 * bound_ + 1; }
    double at(int index) const { return weights_[static_cast<std::size_t>(index + bound_)]; }
    const std::vector<double>& values() const { return weights_; }

private:
    ShiftWeights(int bound, std::vector<double> w) : bound_(bound), weights_(std::move(w)) {}
    int bound_;
    std::vector<double> weights_;
};

/// Shared, lazily built table of binomial shift weights for small bounds.
const ShiftWeights& shift_weights_cached(int bound);

/// Mixture likelihood that the cell at (range, azimuth) in the sensor frame
/// generated the detection, accounting for integer range/azimuth shifts.
double occupancy_likelihood(const PolarPoint& cell, const Detection& z, const SensorModelParams& params);

/// Mixture likelihood that the cell is free space given the detection.
/// A shift hypothesis contributes only while its shifted cell range lies
/// between the sensor and the measured range; everything at or past the
/// target, or at negative shifted range, is gated to zero.
double free_space_likelihood(const PolarPoint& cell, const Detection& z, const SensorModelParams& params);

/// Occupied/free likelihood pair with bounded support for grid updates:
/// azimuth shift terms whose residual exceeds margin_sigmas standard
/// deviations are dropped, occupied range terms likewise. Inputs are assumed
/// validated (hot path).
struct PositionLikelihoods {
    double occupied = 0.0;
    double free = 0.0;
};
PositionLikelihoods position_likelihoods_gated(const PolarPoint& cell, const Detection& z,
                                               const SensorModelParams& params, double margin_sigmas);

/// Range-rate mixture likelihood from a precomputed Doppler prediction
/// (no input validation; hot path).
double velocity_likelihood_from_prediction(double predicted_rr, const Detection& z,
                                           const SensorModelParams& params);

/// Occupancy probability from occupied/free evidence masses, clamped to [0,1].
inline double occupancy_probability(double mass_occupied, double mass_free) {
    const double p = 0.5 * (1.0 + mass_occupied - mass_free);
    return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

/// Converts raw likelihoods to per-detection evidence masses: each capped at
/// one, then rescaled so the pair sums to at most one.
inline void detection_masses(double lambda_occupied, double lambda_free,
                             double& mass_occupied, double& mass_free) {
    mass_occupied = lambda_occupied < 1.0 ? lambda_occupied : 1.0;
    mass_free = lambda_free < 1.0 ? lambda_free : 1.0;
    const double sum = mass_occupied + mass_free;
    if (sum > 1.0) {
        mass_occupied /= sum;
        mass_free /= sum;
    }
}

constexpr double kSensorSingularityEps = 1e-6;  // m

/// Radial component of the relative velocity between a point target and the
/// sensor; receding positive. Throws std::domain_error within
/// kSensorSingularityEps of the sensor position.
double doppler_range_rate(const Vec2& position, const Vec2& velocity,
                          const Vec2& sensor_position, const Vec2& sensor_velocity);

inline double doppler_range_rate(const Vec2& position, const Vec2& velocity,
                                 const SensorMount& mount, const EgoPose& pose) {
    return doppler_range_rate(position, velocity, sensor_position_world(mount, pose),
                              sensor_velocity_world(mount, pose));
}

/// Range-rate mixture likelihood with the alias shift applied to the
/// measurement: modes at rr - l*delta_rr for l in {-m..m}.
double velocity_likelihood(const Vec2& position, const Vec2& velocity, const Detection& z,
                           const SensorMount& mount, const EgoPose& pose,
                           const SensorModelParams& params);

/// Factored particle likelihood: occupied-position term at the particle's
/// location times the range-rate term.
double combined_particle_likelihood(const Vec2& position, const Vec2& velocity, const Detection& z,
                                    const SensorMount& mount, const EgoPose& pose,
                                    const SensorModelParams& params);

// ---------------------------------------------------------------------------
// Likelihood surfaces (rendering / inspection)
// ---------------------------------------------------------------------------

struct LikelihoodSurface {
    GridSpec spec;           // lattice the surface was evaluated on
    Eigen::MatrixXd values;  // values(ix, iy), indexed like CellIndex
};

enum class SurfaceModel { Occupied, Free, Velocity };

/// Evaluates the occupied or free model at every cell center of `spec`.
LikelihoodSurface evaluate_position_surface(SurfaceModel model, const Detection& z,
                                            const SensorMount& mount, const EgoPose& pose,
                                            const SensorModelParams& params, const GridSpec& spec);

/// Evaluates the velocity model over a (vx, vy) lattice for a fixed target
/// position; `spec` axes are read as velocity components.
LikelihoodSurface evaluate_velocity_surface(const Vec2& target_position, const Detection& z,
                                            const SensorMount& mount, const EgoPose& pose,
                                            const SensorModelParams& params, const GridSpec& spec);

}  // namespace dogm
