#pragma once

#include "dogm/occupancy.hpp"
#include "dogm/velocity.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dogm {

enum class LayerMode { Full, OccupancyOnly, VelocityOnly };

struct ManagerConfig {
    GridSpec occupancy_spec{0.5, 75.0, 75.0, 150.0, Vec2::Zero()};
    GridSpec velocity_spec{1.0, 75.0, 75.0, 150.0, Vec2::Zero()};
    OccupancyModel model = OccupancyModel::BinaryBayes;
    LayerMode mode = LayerMode::Full;

    double log_odds_limit = kDefaultLogOddsLimit;
    double decay_alpha = 0.999;        // occupancy prediction decay per cycle
    double transfer_gain = 0.5;        // global mass-transfer gain
    double lambda_floor = 1e-3;        // weight-update survival floor
    double likelihood_gain = 45.0;     // scales the likelihood in the weight update
    int n_closest = 3;                 // candidates per cell per sensor
    double association_gate = 25.0;    // m
    double margin_sigmas = 4.0;        // bounded-support margin of grid updates
    double scroll_threshold_cells = 1.0;

    MotionParams motion;               // dt is taken from the pose stream
    ResampleParams resample;
    HypothesesParams hypotheses;
    SensorTable sensors;
    std::uint64_t seed = 1;

    void validate() const;
};

struct PhaseTimings {
    double scroll_ms = 0.0;
    double occupancy_predict_ms = 0.0;
    double velocity_predict_ms = 0.0;
    double mass_transfer_ms = 0.0;
    double occupancy_update_ms = 0.0;
    double associate_ms = 0.0;
    double weight_update_ms = 0.0;
    double statistics_ms = 0.0;
    double resample_ms = 0.0;
    double spawn_ms = 0.0;

    double total_ms() const {
        return scroll_ms + occupancy_predict_ms + velocity_predict_ms + mass_transfer_ms +
               occupancy_update_ms + associate_ms + weight_update_ms + statistics_ms +
               resample_ms + spawn_ms;
    }
};

struct CycleReport {
    long cycle = 0;
    double timestamp = 0.0;
    PhaseTimings timings;
    std::size_t detection_count = 0;
    std::size_t particle_count = 0;
    std::size_t transfer_count = 0;
    std::size_t spawned_count = 0;
};

/// Owns both layers and runs the per-scan cycle:
/// scroll -> predict (both layers) -> mass transfer -> occupancy update ->
/// associate -> weight update -> statistics -> resample -> spawn.
/// Layers can also run individually (occupancy-only / velocity-only).
class DynamicGridMap {
public:
    DynamicGridMap(const ManagerConfig& cfg, const EgoPose& initial_pose);

    /// Runs one cycle. Rejects out-of-order timestamps.
    CycleReport step(const EgoPose& pose, std::span<const Detection> scan);

    /// Scrolls both windows toward the platform once it has moved at least
    /// the scroll threshold from the last anchor. Heading changes alone
    /// never touch the grids.
    bool maybe_scroll(const EgoPose& pose);

    const ManagerConfig& config() const { return cfg_; }
    const OccupancyGrid& occupancy() const { return occupancy_; }
    OccupancyGrid& occupancy() { return occupancy_; }
    const VelocityGrid& velocity() const { return velocity_; }
    VelocityGrid& velocity() { return velocity_; }
    /// Per-buffer-cell statistics of the most recent cycle.
    const std::vector<CellVelocityStats>& statistics() const { return stats_; }
    long cycle() const { return cycle_; }

private:
    void place_windows(const EgoPose& pose);
    std::size_t occupancy_measurement_update(std::span<const Detection> scan, const EgoPose& pose);

    ManagerConfig cfg_;
    OccupancyGrid occupancy_;
    VelocityGrid velocity_;
    std::vector<CellVelocityStats> stats_;

    EgoPose last_pose_;
    bool has_pose_ = false;
    Vec2 scroll_anchor_ = Vec2::Zero();
    long cycle_ = 0;

    // Scratch reused across cycles.
    struct Contribution {
        std::uint32_t cell;
        double mass_occupied;
        double mass_free;
    };
    std::vector<std::vector<Contribution>> contrib_scratch_;
    std::vector<std::vector<std::uint64_t>> stamp_scratch_;
    std::uint64_t stamp_epoch_ = 0;
    std::vector<Vec2> before_positions_;
    std::vector<double> before_weights_;
};

}  // namespace dogm
