#include "dogm/image.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace dogm {

namespace {

std::ofstream open_binary(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    return out;
}

inline unsigned char to_byte(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(v * 255.0));
}

}  // namespace

void write_pgm(const std::string& path, const Eigen::MatrixXd& values) {
    auto out = open_binary(path);
    const int nx = static_cast<int>(values.rows());
    const int ny = static_cast<int>(values.cols());
    out << "P5\n" << nx << " " << ny << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(nx));
    for (int iy = ny - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < nx; ++ix) row[static_cast<std::size_t>(ix)] = to_byte(values(ix, iy));
        out.write(reinterpret_cast<const char*>(row.data()), nx);
    }
}

void write_ppm(const std::string& path, const Eigen::MatrixXd& r, const Eigen::MatrixXd& g,
               const Eigen::MatrixXd& b) {
    if (r.rows() != g.rows() || r.rows() != b.rows() || r.cols() != g.cols() || r.cols() != b.cols())
        throw std::invalid_argument("write_ppm: channel shapes differ");
    auto out = open_binary(path);
    const int nx = static_cast<int>(r.rows());
    const int ny = static_cast<int>(r.cols());
    out << "P6\n" << nx << " " << ny << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(nx) * 3);
    for (int iy = ny - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < nx; ++ix) {
            row[static_cast<std::size_t>(ix) * 3 + 0] = to_byte(r(ix, iy));
            row[static_cast<std::size_t>(ix) * 3 + 1] = to_byte(g(ix, iy));
            row[static_cast<std::size_t>(ix) * 3 + 2] = to_byte(b(ix, iy));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& values) {
    auto out = open_binary(path);
    char buf[32];
    for (Eigen::Index ix = 0; ix < values.rows(); ++ix) {
        for (Eigen::Index iy = 0; iy < values.cols(); ++iy) {
            std::snprintf(buf, sizeof buf, "%.17g", values(ix, iy));
            if (iy) out << ',';
            out << buf;
        }
        out << '\n';
    }
}

Eigen::MatrixXd probability_matrix(const OccupancyGrid& grid) {
    const GridWindow& win = grid.window();
    Eigen::MatrixXd m(win.width(), win.height());
    const CellIndex o = win.origin();
    for (int iy = 0; iy < win.height(); ++iy)
        for (int ix = 0; ix < win.width(); ++ix)
            m(ix, iy) = grid.probability(CellIndex{o.x + ix, o.y + iy});
    return m;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> ds_mass_matrices(const OccupancyGrid& grid) {
    const GridWindow& win = grid.window();
    Eigen::MatrixXd occ(win.width(), win.height());
    Eigen::MatrixXd fre(win.width(), win.height());
    const CellIndex o = win.origin();
    for (int iy = 0; iy < win.height(); ++iy)
        for (int ix = 0; ix < win.width(); ++ix) {
            const DSCell c = grid.ds_cell(CellIndex{o.x + ix, o.y + iy});
            occ(ix, iy) = c.mass_occupied;
            fre(ix, iy) = c.mass_free;
        }
    return {occ, fre};
}

void write_particle_overlay(const std::string& path, const OccupancyGrid& grid,
                            const VelocityGrid& particles, double speed_scale) {
    const Eigen::MatrixXd base = probability_matrix(grid);
    Eigen::MatrixXd r = 1.0 - base.array();
    Eigen::MatrixXd g = r, b = r;
    const GridWindow& win = grid.window();
    for (const Particle& p : particles.particles()) {
        const auto cell = win.cell_at(p.position);
        if (!cell) continue;
        const CellIndex o = win.origin();
        const int ix = cell->x - o.x, iy = cell->y - o.y;
        const double s = std::clamp(p.velocity.norm() / std::max(speed_scale, 1e-9), 0.0, 1.0);
        r(ix, iy) = s;
        g(ix, iy) = 0.2;
        b(ix, iy) = 1.0 - s;
    }
    write_ppm(path, r, g, b);
}

void write_surface_pgm(const std::string& path, const Eigen::MatrixXd& values) {
    const double peak = values.maxCoeff();
    if (peak > 0.0)
        write_pgm(path, values / peak);
    else
        write_pgm(path, values);
}

}  // namespace dogm
