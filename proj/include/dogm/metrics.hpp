#pragma once

#include "dogm/grid_manager.hpp"
#include "dogm/radar_sim.hpp"

#include <cstdint>
#include <vector>

namespace dogm {

/// Area under the ROC curve of cell probabilities against a truth mask
/// (rank-based, ties averaged). 0.5 means no discrimination.
double occupancy_auc(std::span<const double> probabilities, std::span<const std::uint8_t> truth);

/// AUC of the grid's window cells against rasterized truth geometry.
double occupancy_auc(const OccupancyGrid& grid, const WorldModel& truth_world, double t);

/// Weighted mean velocity over all particles of the cells intersecting an
/// object box; invalid when those cells carry no weight.
struct RegionVelocity {
    Vec2 mean = Vec2::Zero();
    double weight_sum = 0.0;
    bool valid = false;
};
RegionVelocity region_velocity(const VelocityGrid& grid, std::span<const CellVelocityStats> stats,
                               const GroundTruthObject& object, double pad = 0.0);

}  // namespace dogm
