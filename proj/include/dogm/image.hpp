#pragma once

#include "dogm/occupancy.hpp"
#include "dogm/velocity.hpp"

#include <Eigen/Dense>

#include <string>

namespace dogm {

/// 8-bit binary PGM. values are clamped to [0,1]; row 0 of the image is the
/// grid's highest y (map-style orientation), columns follow x.
void write_pgm(const std::string& path, const Eigen::MatrixXd& values);

/// 8-bit binary PPM from per-channel matrices, same layout as write_pgm.
void write_ppm(const std::string& path, const Eigen::MatrixXd& r, const Eigen::MatrixXd& g,
               const Eigen::MatrixXd& b);

/// Raw matrix dump: one CSV row per x index, 17 significant digits.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& values);

/// Occupancy probability per cell, indexed (x, y) relative to the window
/// origin.
Eigen::MatrixXd probability_matrix(const OccupancyGrid& grid);

/// Dempster-Shafer masses as two matrices (occupied, free).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> ds_mass_matrices(const OccupancyGrid& grid);

/// Occupancy image with particles overlaid, colored by speed (blue slow,
/// red at/above speed_scale m/s).
void write_particle_overlay(const std::string& path, const OccupancyGrid& grid,
                            const VelocityGrid& particles, double speed_scale);

/// Normalizes a surface to its maximum (if positive) and writes a PGM.
void write_surface_pgm(const std::string& path, const Eigen::MatrixXd& values);

}  // namespace dogm
