#include "dogm/sensor_models.hpp"

#include <cmath>
#include <stdexcept>

namespace dogm {

ShiftWeights ShiftWeights::binomial(int bound) {
    if (bound < 0) throw std::invalid_argument("ShiftWeights: bound must be >= 0");
    const int n = 2 * bound;
    std::vector<double> w(static_cast<std::size_t>(n + 1));
    // Binomial(2k, 1/2) pmf: C(2k, i+k) / 2^(2k).
    double coeff = 1.0;
    const double scale = std::ldexp(1.0, -n);
    for (int j = 0; j <= n; ++j) {
        w[static_cast<std::size_t>(j)] = coeff * scale;
        coeff = coeff * (n - j) / (j + 1);
    }
    return ShiftWeights(bound, std::move(w));
}

const ShiftWeights& shift_weights_cached(int bound) {
    constexpr int kMaxCached = 8;
    static const std::vector<ShiftWeights> table = [] {
        std::vector<ShiftWeights> t;
        t.reserve(kMaxCached + 1);
        for (int b = 0; b <= kMaxCached; ++b) t.push_back(ShiftWeights::binomial(b));
        return t;
    }();
    if (bound < 0 || bound > kMaxCached)
        throw std::invalid_argument("shift_weights_cached: bound out of cached range");
    return table[static_cast<std::size_t>(bound)];
}

namespace {

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Bivariate normal density at residual (dx, dy) with standard deviations
// (sx, sy) and correlation rho.
inline double bivariate_normal(double dx, double dy, double sx, double sy, double rho) {
    const double one_minus_r2 = 1.0 - rho * rho;
    if (one_minus_r2 <= 0.0) throw std::invalid_argument("bivariate_normal: |rho| must be < 1");
    const double zx = dx / sx;
    const double zy = dy / sy;
    const double q = (zx * zx - 2.0 * rho * zx * zy + zy * zy) / one_minus_r2;
    return std::exp(-0.5 * q) / (2.0 * kPi * sx * sy * std::sqrt(one_minus_r2));
}

}  // namespace

double occupancy_likelihood(const PolarPoint& cell, const Detection& z, const SensorModelParams& params) {
    z.validate();
    params.validate();
    const ShiftWeights& w = shift_weights_cached(params.pos_index_bound);
    const int k = w.bound();
    double sum = 0.0;
    for (int j = -k; j <= k; ++j) {
        const double az = wrap_angle(cell.azimuth + j * params.delta_azimuth);
        const double rho = sign_of(az) * params.rho0;
        const double daz = wrap_angle(az - z.azimuth);
        for (int i = -k; i <= k; ++i) {
            const double dr = cell.range + i * params.delta_range - z.range;
            sum += w.at(i) * w.at(j) * bivariate_normal(dr, daz, z.sigma_range, z.sigma_azimuth, rho);
        }
    }
    return params.eta_occupied * sum;
}

double free_space_likelihood(const PolarPoint& cell, const Detection& z, const SensorModelParams& params) {
    z.validate();
    params.validate();
    const ShiftWeights& w = shift_weights_cached(params.pos_index_bound);
    const int k = w.bound();
    const double spread = params.gamma * z.range;  // range std of the free-space model
    if (spread <= 0.0) return 0.0;
    double sum = 0.0;
    for (int j = -k; j <= k; ++j) {
        const double az = wrap_angle(cell.azimuth + j * params.delta_azimuth);
        const double rho = sign_of(az) * params.rho0;
        const double daz = wrap_angle(az - z.azimuth);
        for (int i = -k; i <= k; ++i) {
            // Free evidence lies between sensor and hypothetical target only.
            const double shifted_range = cell.range + i * params.delta_range;
            if (shifted_range < 0.0 || shifted_range >= z.range) continue;
            sum += w.at(i) * w.at(j) * bivariate_normal(shifted_range, daz, spread, z.sigma_azimuth, rho);
        }
    }
    return params.eta_free * sum;
}

PositionLikelihoods position_likelihoods_gated(const PolarPoint& cell, const Detection& z,
                                               const SensorModelParams& params, double margin_sigmas) {
    const ShiftWeights& w = shift_weights_cached(params.pos_index_bound);
    const int k = w.bound();
    const double az_gate = margin_sigmas * z.sigma_azimuth;
    const double r_gate = margin_sigmas * z.sigma_range;
    const double spread = params.gamma * z.range;
    PositionLikelihoods out;
    for (int j = -k; j <= k; ++j) {
        const double az = wrap_angle(cell.azimuth + j * params.delta_azimuth);
        const double daz = wrap_angle(az - z.azimuth);
        if (std::abs(daz) > az_gate) continue;
        const double rho = sign_of(az) * params.rho0;
        const double wj = w.at(j);
        for (int i = -k; i <= k; ++i) {
            const double shifted_range = cell.range + i * params.delta_range;
            const double wij = w.at(i) * wj;
            const double dr = shifted_range - z.range;
            if (std::abs(dr) <= r_gate)
                out.occupied += wij * bivariate_normal(dr, daz, z.sigma_range, z.sigma_azimuth, rho);
            if (shifted_range >= 0.0 && shifted_range < z.range && spread > 0.0)
                out.free += wij * bivariate_normal(shifted_range, daz, spread, z.sigma_azimuth, rho);
        }
    }
    out.occupied *= params.eta_occupied;
    out.free *= params.eta_free;
    return out;
}

double velocity_likelihood_from_prediction(double predicted_rr, const Detection& z,
                                           const SensorModelParams& params) {
    const ShiftWeights& w = shift_weights_cached(params.rr_index_bound);
    const int m = w.bound();
    const double inv_norm = 1.0 / (std::sqrt(2.0 * kPi) * z.sigma_range_rate);
    double sum = 0.0;
    for (int l = -m; l <= m; ++l) {
        const double d = (z.range_rate - l * params.delta_range_rate - predicted_rr) / z.sigma_range_rate;
        sum += w.at(l) * inv_norm * std::exp(-0.5 * d * d);
    }
    return params.eta_velocity * sum;
}

double doppler_range_rate(const Vec2& position, const Vec2& velocity,
                          const Vec2& sensor_position, const Vec2& sensor_velocity) {
    const Vec2 rel = position - sensor_position;
    const double dist = rel.norm();
    if (dist < kSensorSingularityEps)
        throw std::domain_error("doppler_range_rate: target coincides with sensor position");
    return rel.dot(velocity - sensor_velocity) / dist;
}

double velocity_likelihood(const Vec2& position, const Vec2& velocity, const Detection& z,
                           const SensorMount& mount, const EgoPose& pose,
                           const SensorModelParams& params) {
    z.validate();
    params.validate();
    const double predicted = doppler_range_rate(position, velocity, mount, pose);
    return velocity_likelihood_from_prediction(predicted, z, params);
}

double combined_particle_likelihood(const Vec2& position, const Vec2& velocity, const Detection& z,
                                    const SensorMount& mount, const EgoPose& pose,
                                    const SensorModelParams& params) {
    const PolarPoint polar = world_to_sensor_polar(position, mount, pose);
    return occupancy_likelihood(polar, z, params) *
           velocity_likelihood(position, velocity, z, mount, pose, params);
}

LikelihoodSurface evaluate_position_surface(SurfaceModel model, const Detection& z,
                                            const SensorMount& mount, const EgoPose& pose,
                                            const SensorModelParams& params, const GridSpec& spec) {
    if (model == SurfaceModel::Velocity)
        throw std::invalid_argument("evaluate_position_surface: velocity model needs a velocity lattice");
    spec.validate();
    LikelihoodSurface out;
    out.spec = spec;
    out.values.resize(spec.cells_x(), spec.cells_y());
    const int nx = spec.cells_x(), ny = spec.cells_y();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int ix = 0; ix < nx; ++ix) {
        for (int iy = 0; iy < ny; ++iy) {
            const PolarPoint cell = cell_center_polar(CellIndex{ix, iy}, spec, mount, pose);
            out.values(ix, iy) = model == SurfaceModel::Occupied
                                     ? occupancy_likelihood(cell, z, params)
                                     : free_space_likelihood(cell, z, params);
        }
    }
    return out;
}

LikelihoodSurface evaluate_velocity_surface(const Vec2& target_position, const Detection& z,
                                            const SensorMount& mount, const EgoPose& pose,
                                            const SensorModelParams& params, const GridSpec& spec) {
    spec.validate();
    LikelihoodSurface out;
    out.spec = spec;
    out.values.resize(spec.cells_x(), spec.cells_y());
    const int nx = spec.cells_x(), ny = spec.cells_y();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int ix = 0; ix < nx; ++ix) {
        for (int iy = 0; iy < ny; ++iy) {
            const Vec2 vel = cell_center(CellIndex{ix, iy}, spec);
            out.values(ix, iy) = velocity_likelihood(target_position, vel, z, mount, pose, params);
        }
    }
    return out;
}

}  // namespace dogm
