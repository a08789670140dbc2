#pragma once

#include "dogm/occupancy.hpp"
#include "dogm/velocity.hpp"

#include <string>

namespace dogm {

// Binary snapshot layouts (little-endian):
//   grid:      "DOGM" u32=1 u8 model(0=BB,1=DS) i32 w h  i32 origin_x origin_y
//              f64 cell_size f64 anchor_x anchor_y, then w*h f64 occupied
//              values (log-odds or occupied mass) in global row order
//              (y outer, x inner), then w*h f64 free masses for DS.
//   particles: "DOGP" u32=1 u64 count, then per particle f64 x y vx vy w.

void write_grid_snapshot(const std::string& path, const OccupancyGrid& grid);

struct GridSnapshot {
    OccupancyModel model = OccupancyModel::BinaryBayes;
    int width = 0, height = 0;
    CellIndex origin;          // global cell coords of the window corner
    double cell_size = 0.0;
    Vec2 anchor = Vec2::Zero();  // world coords of the lattice anchor
    std::vector<double> occupied;  // row order: y outer, x inner
    std::vector<double> free;
};

GridSnapshot read_grid_snapshot(const std::string& path);

void write_particle_dump(const std::string& path, const VelocityGrid& grid);
std::vector<Particle> read_particle_dump(const std::string& path);

/// Per-cell statistics CSV:
///   cell_x,cell_y,mean_vx,mean_vy,cov_trace,particle_count,weight_sum
void write_statistics_csv(const std::string& path, const VelocityGrid& grid,
                          std::span<const CellVelocityStats> stats);

}  // namespace dogm
