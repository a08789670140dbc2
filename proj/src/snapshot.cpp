#include "dogm/snapshot.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dogm {

namespace {

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("snapshot: truncated file");
    return v;
}

}  // namespace

void write_grid_snapshot(const std::string& path, const OccupancyGrid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.write("DOGM", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint8_t>(out, grid.model() == OccupancyModel::BinaryBayes ? 0 : 1);
    const GridWindow& win = grid.window();
    put<std::int32_t>(out, win.width());
    put<std::int32_t>(out, win.height());
    put<std::int32_t>(out, win.origin().x);
    put<std::int32_t>(out, win.origin().y);
    put<double>(out, win.spec().cell_size);
    put<double>(out, win.spec().origin.x());
    put<double>(out, win.spec().origin.y());
    const CellIndex o = win.origin();
    for (int iy = 0; iy < win.height(); ++iy)
        for (int ix = 0; ix < win.width(); ++ix) {
            if (grid.model() == OccupancyModel::BinaryBayes)
                put<double>(out, grid.bb_cell(CellIndex{o.x + ix, o.y + iy}).log_odds);
            else
                put<double>(out, grid.ds_cell(CellIndex{o.x + ix, o.y + iy}).mass_occupied);
        }
    if (grid.model() == OccupancyModel::DempsterShafer)
        for (int iy = 0; iy < win.height(); ++iy)
            for (int ix = 0; ix < win.width(); ++ix)
                put<double>(out, grid.ds_cell(CellIndex{o.x + ix, o.y + iy}).mass_free);
}

GridSnapshot read_grid_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DOGM", 4) != 0) throw std::runtime_error("snapshot: bad magic");
    if (take<std::uint32_t>(in) != 1) throw std::runtime_error("snapshot: unsupported version");
    GridSnapshot snap;
    snap.model = take<std::uint8_t>(in) == 0 ? OccupancyModel::BinaryBayes : OccupancyModel::DempsterShafer;
    snap.width = take<std::int32_t>(in);
    snap.height = take<std::int32_t>(in);
    snap.origin.x = take<std::int32_t>(in);
    snap.origin.y = take<std::int32_t>(in);
    snap.cell_size = take<double>(in);
    snap.anchor.x() = take<double>(in);
    snap.anchor.y() = take<double>(in);
    const std::size_t n = static_cast<std::size_t>(snap.width) * static_cast<std::size_t>(snap.height);
    snap.occupied.resize(n);
    for (double& v : snap.occupied) v = take<double>(in);
    if (snap.model == OccupancyModel::DempsterShafer) {
        snap.free.resize(n);
        for (double& v : snap.free) v = take<double>(in);
    }
    return snap;
}

void write_particle_dump(const std::string& path, const VelocityGrid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.write("DOGP", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint64_t>(out, grid.particle_count());
    for (const Particle& p : grid.particles()) {
        put<double>(out, p.position.x());
        put<double>(out, p.position.y());
        put<double>(out, p.velocity.x());
        put<double>(out, p.velocity.y());
        put<double>(out, p.weight);
    }
}

std::vector<Particle> read_particle_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DOGP", 4) != 0) throw std::runtime_error("particle dump: bad magic");
    if (take<std::uint32_t>(in) != 1) throw std::runtime_error("particle dump: unsupported version");
    const std::uint64_t count = take<std::uint64_t>(in);
    std::vector<Particle> out(count);
    for (Particle& p : out) {
        p.position.x() = take<double>(in);
        p.position.y() = take<double>(in);
        p.velocity.x() = take<double>(in);
        p.velocity.y() = take<double>(in);
        p.weight = take<double>(in);
    }
    return out;
}

void write_statistics_csv(const std::string& path, const VelocityGrid& grid,
                          std::span<const CellVelocityStats> stats) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "cell_x,cell_y,mean_vx,mean_vy,cov_trace,particle_count,weight_sum\n";
    char buf[160];
    const GridWindow& win = grid.window();
    for (std::size_t bi = 0; bi < stats.size(); ++bi) {
        if (!stats[bi].valid) continue;
        const CellIndex c = win.global_of(bi);
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%d,%.17g\n", c.x, c.y,
                      stats[bi].mean.x(), stats[bi].mean.y(), stats[bi].covariance.trace(),
                      stats[bi].particle_count, stats[bi].weight_sum);
        out << buf;
    }
}

}  // namespace dogm
