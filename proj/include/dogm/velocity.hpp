#pragma once

#include "dogm/grid_window.hpp"
#include "dogm/occupancy.hpp"
#include "dogm/rng.hpp"
#include "dogm/sensor_models.hpp"
#include "dogm/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dogm {

/// One velocity-layer particle. Between phases each particle belongs to
/// exactly one velocity cell (the one containing its position).
struct Particle {
    Vec2 position = Vec2::Zero();  // m, world frame
    Vec2 velocity = Vec2::Zero();  // m/s, world frame
    double weight = 0.0;
};

/// Constant-velocity motion model with additive Gaussian system noise.
struct MotionParams {
    double sigma_pos = 0.1;  // m per step
    double sigma_vel = 0.4;  // m/s per step
    double dt = 0.1;         // s

    void validate() const {
        if (sigma_pos < 0.0 || sigma_vel < 0.0)
            throw std::invalid_argument("MotionParams: noise stds must be >= 0");
        if (dt <= 0.0) throw std::invalid_argument("MotionParams: dt must be > 0");
    }
};

/// Weighted first and second moments of a cell's particle velocities.
struct CellVelocityStats {
    Vec2 mean = Vec2::Zero();
    Mat2 covariance = Mat2::Zero();
    int particle_count = 0;
    double weight_sum = 0.0;
    bool valid = false;
};

/// Per-cell particle-count bounds and the resampling growth response.
struct ResampleParams {
    int n_min = 2;
    int n_max = 30;
    double growth_min = 0.5;
    double growth_max = 2.0;

    void validate() const {
        if (n_min <= 0 || n_min > n_max)
            throw std::invalid_argument("ResampleParams: need 0 < n_min <= n_max");
        if (growth_min <= 0.0 || growth_min > growth_max)
            throw std::invalid_argument("ResampleParams: need 0 < growth_min <= growth_max");
    }
};

/// Spawning of fast particles from clustered dynamic detections.
struct HypothesesParams {
    double dynamic_threshold = 1.0;    // m/s on ego-motion-compensated range rate
    double cluster_radius = 2.0;       // m, single-link clustering distance
    int min_cluster_size = 1;
    double assoc_radius = 2.0;         // m, cells within this distance of a cluster
    double cross_velocity_span = 5.0;  // m/s, uniform span orthogonal to the ray
    int spawn_per_cell = 10;
    double init_speed_range = 2.0;     // m/s, fresh-cell initialization disk
};

/// Mounted radars and their per-sensor model parameters.
struct SensorTable {
    std::vector<SensorMount> mounts;
    std::vector<SensorModelParams> params;

    int index_of(int sensor_id) const {
        for (std::size_t i = 0; i < mounts.size(); ++i)
            if (mounts[i].sensor_id == sensor_id) return static_cast<int>(i);
        return -1;
    }
    void validate() const {
        if (mounts.size() != params.size())
            throw std::invalid_argument("SensorTable: mounts/params size mismatch");
        for (const auto& m : mounts) m.validate();
        for (const auto& p : params) p.validate();
    }
};

inline std::uint64_t cell_key(const CellIndex& c) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.x)) << 32) |
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.y));
}

// ---------------------------------------------------------------------------
// Per-cell primitives
// ---------------------------------------------------------------------------

/// Appends `count` particles uniform in the cell square, velocities uniform
/// in the disk of radius `speed_range`, uniform weights (1/count each).
void init_cell_particles(std::vector<Particle>& out, const Vec2& cell_low, double cell_size,
                         int count, double speed_range, SplitMix64& rng);

/// Constant-velocity propagation with per-particle noise streams derived
/// from `stream_seed`; weights unchanged.
void predict_particles(std::span<Particle> particles, const MotionParams& mp, std::uint64_t stream_seed);

/// Weighted mean and covariance of the cell's particle velocities.
/// Zero total weight yields an invalid (never NaN) result.
CellVelocityStats cell_statistics(std::span<const Particle> cell_particles);

/// Systematic resampling with the count law
///   n' = clamp(round(n_old * clamp(mean_w / w_ref, growth_min, growth_max)), n_min, n_max)
/// where w_ref = 1/n_old. Output weights are uniform at 1/n'. All-zero
/// weights resample uniformly over the input set.
std::vector<Particle> resample_cell(std::span<const Particle> in, const ResampleParams& rp, SplitMix64& rng);

// ---------------------------------------------------------------------------
// Particle store
// ---------------------------------------------------------------------------

/// Scrolling particle store binned by velocity cell. The backing array is
/// kept sorted by ring-buffer cell slot (CSR layout) between phases.
class VelocityGrid {
public:
    VelocityGrid(const GridSpec& spec, int init_count, double init_speed_range, std::uint64_t seed);

    const GridWindow& window() const { return window_; }
    std::size_t particle_count() const { return particles_.size(); }
    std::span<Particle> particles() { return particles_; }
    std::span<const Particle> particles() const { return particles_; }

    bool binned() const { return binned_; }
    std::span<const std::uint32_t> offsets() const { return offsets_; }
    std::span<Particle> cell_slice(std::size_t buffer_cell);
    std::span<const Particle> cell_slice(std::size_t buffer_cell) const;

    /// Appends particles (invalidates the binning until rebin()).
    void append(std::span<const Particle> extra);

    /// Rebuilds the CSR binning from current positions; particles outside
    /// the window are dropped. Stable: within a cell, storage order follows
    /// the pre-rebin order.
    void rebin();

    /// Replaces the whole store with an already-binned array.
    void adopt_binned(std::vector<Particle>&& particles, std::vector<std::uint32_t>&& offsets);

    /// Scrolls the window; particles of dropped cells disappear and newly
    /// exposed cells receive a fresh uniform population.
    void scroll_to(const CellIndex& new_origin, std::uint64_t seed_stream);

    int init_count() const { return init_count_; }
    double init_speed_range() const { return init_speed_range_; }

private:
    void init_cell(const CellIndex& global, std::uint64_t seed_stream, std::vector<Particle>& out);

    GridWindow window_;
    int init_count_;
    double init_speed_range_;
    std::vector<Particle> particles_;
    std::vector<std::uint32_t> offsets_;
    bool binned_ = false;
};

// ---------------------------------------------------------------------------
// Grid-level phases
// ---------------------------------------------------------------------------

/// n-closest measurement association: for every cell and every sensor, the
/// n gated detections nearest the cell center, merged per cell (CSR over
/// buffer cells; values are detection indices into the scan).
struct Association {
    std::vector<std::uint32_t> offsets;
    std::vector<std::uint32_t> candidates;

    std::span<const std::uint32_t> cell_candidates(std::size_t buffer_cell) const {
        return std::span<const std::uint32_t>(candidates)
            .subspan(offsets[buffer_cell], offsets[buffer_cell + 1] - offsets[buffer_cell]);
    }
};

Association associate_measurements(const GridWindow& window, std::span<const Detection> scan,
                                   const SensorTable& sensors, const EgoPose& pose,
                                   int n_closest, double gate_radius);

/// Particle weight update: per particle, the best candidate under the
/// factored likelihood (occupied term at the particle's cell center, range
/// rate term at the particle) scales the weight by
/// (lambda_floor + likelihood_gain * best). Cells without candidates keep
/// their weights.
void update_weights(VelocityGrid& grid, const Association& assoc, std::span<const Detection> scan,
                    const SensorTable& sensors, const EgoPose& pose, double lambda_floor,
                    double likelihood_gain, double margin_sigmas);

/// Per-cell statistics for all buffer cells.
std::vector<CellVelocityStats> compute_statistics(const VelocityGrid& grid);

/// Whole-grid resampling; empty cells get a fresh uniform population.
void resample_grid(VelocityGrid& grid, const ResampleParams& rp, std::uint64_t seed_stream);

/// Hypotheses manager: clusters dynamic detections and spawns alias-aware,
/// Doppler-consistent particles into nearby cells. Returns spawn count.
std::size_t spawn_hypotheses(VelocityGrid& grid, std::span<const Detection> scan,
                             const SensorTable& sensors, const EgoPose& pose,
                             const HypothesesParams& hp, const ResampleParams& rp,
                             std::uint64_t seed_stream);

/// Emits occupied-evidence transfers for particles whose occupancy-lattice
/// cell changed between `before` and `after`. The fraction of particle i is
/// gain * w_i / (sum of weights of before-cell mates). Entries are
/// aggregated per (from, to) pair and sorted.
std::vector<MassTransfer> emit_mass_transfers(std::span<const Vec2> before, std::span<const Vec2> after,
                                              std::span<const double> weights,
                                              const GridSpec& occupancy_lattice, double gain);

}  // namespace dogm
