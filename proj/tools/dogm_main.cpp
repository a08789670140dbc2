// Command-line front end: simulate scan logs, run the grid on a log,
// evaluate sensor-model surfaces, and render snapshots.

#include "dogm/config.hpp"
#include "dogm/grid_manager.hpp"
#include "dogm/image.hpp"
#include "dogm/metrics.hpp"
#include "dogm/radar_sim.hpp"
#include "dogm/scan_log.hpp"
#include "dogm/snapshot.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace dogm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitRuntimeError = 3;

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string sidecar_path_for(const std::string& log_path) { return log_path + ".truth.json"; }

int cmd_simulate(const std::string& scenario_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed_override) {
    Scenario scenario;
    try {
        scenario = load_scenario_file(scenario_path);
    } catch (const std::exception& e) {
        throw InputError(std::string("scenario: ") + e.what());
    }
    if (seed_override) scenario.sim.seed = *seed_override;

    std::vector<Scan> scans;
    scans.reserve(static_cast<std::size_t>(scenario.num_scans));
    for (int i = 0; i < scenario.num_scans; ++i) {
        const double t = i * scenario.dt;
        Scan scan;
        scan.pose = trajectory_pose(scenario.world, t);
        SplitMix64 rng(mix_seed(scenario.sim.seed, static_cast<std::uint64_t>(i)));
        scan.detections = simulate_scan(scenario.world, t, scenario.mounts, scan.pose, scenario.sim, rng);
        scans.push_back(std::move(scan));
    }
    write_scan_log(out_path, scans);

    std::ofstream truth(sidecar_path_for(out_path), std::ios::binary);
    if (!truth) throw std::runtime_error("cannot open " + sidecar_path_for(out_path));
    truth << truth_sidecar_json(scenario.world, scenario.dt, scenario.num_scans);

    std::size_t detections = 0;
    for (const Scan& s : scans) detections += s.detections.size();
    std::cout << "simulate: " << scans.size() << " scans, " << detections << " detections -> "
              << out_path << "\n";
    return kExitOk;
}

void write_report_csv(const std::string& path, std::span<const CycleReport> reports) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "cycle,t,detections,particles,transfers,spawned,scroll_ms,occupancy_predict_ms,"
           "velocity_predict_ms,mass_transfer_ms,occupancy_update_ms,associate_ms,weight_update_ms,"
           "statistics_ms,resample_ms,spawn_ms,total_ms\n";
    char buf[512];
    for (const CycleReport& r : reports) {
        std::snprintf(buf, sizeof buf,
                      "%ld,%.6f,%zu,%zu,%zu,%zu,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f\n",
                      r.cycle, r.timestamp, r.detection_count, r.particle_count, r.transfer_count,
                      r.spawned_count, r.timings.scroll_ms, r.timings.occupancy_predict_ms,
                      r.timings.velocity_predict_ms, r.timings.mass_transfer_ms,
                      r.timings.occupancy_update_ms, r.timings.associate_ms, r.timings.weight_update_ms,
                      r.timings.statistics_ms, r.timings.resample_ms, r.timings.spawn_ms,
                      r.timings.total_ms());
        out << buf;
    }
}

void write_snapshot_set(const fs::path& dir, long cycle, const DynamicGridMap& map, bool with_particles) {
    char tag[32];
    std::snprintf(tag, sizeof tag, "%06ld", cycle);
    const OccupancyGrid& grid = map.occupancy();
    write_grid_snapshot((dir / (std::string("grid_") + tag + ".bin")).string(), grid);
    write_pgm((dir / (std::string("grid_") + tag + ".pgm")).string(), probability_matrix(grid));
    if (grid.model() == OccupancyModel::DempsterShafer) {
        const auto [occ, fre] = ds_mass_matrices(grid);
        write_ppm((dir / (std::string("grid_ds_") + tag + ".ppm")).string(), occ, fre,
                  Eigen::MatrixXd::Zero(occ.rows(), occ.cols()));
    }
    if (with_particles) {
        write_particle_dump((dir / (std::string("particles_") + tag + ".bin")).string(), map.velocity());
        write_statistics_csv((dir / (std::string("stats_") + tag + ".csv")).string(), map.velocity(),
                             map.statistics());
    }
}

int cmd_run(const std::string& log_path, const std::string& config_path, const std::string& out_dir,
            const std::string& mode, const std::string& model, int snapshot_every,
            std::optional<std::uint64_t> seed_override, std::optional<double> transfer_gain_override,
            bool render) {
    ManagerConfig cfg;
    try {
        cfg = config_path.empty() ? ManagerConfig{} : load_manager_config_file(config_path);
        if (config_path.empty()) cfg.sensors = default_sensor_table();
        if (!mode.empty()) {
            if (mode == "full") cfg.mode = LayerMode::Full;
            else if (mode == "occupancy-only") cfg.mode = LayerMode::OccupancyOnly;
            else if (mode == "velocity-only") cfg.mode = LayerMode::VelocityOnly;
            else throw ConfigError("--mode must be full, occupancy-only or velocity-only");
        }
        if (!model.empty()) {
            if (model == "bb") cfg.model = OccupancyModel::BinaryBayes;
            else if (model == "ds") cfg.model = OccupancyModel::DempsterShafer;
            else throw ConfigError("--model must be bb or ds");
        }
        if (seed_override) cfg.seed = *seed_override;
        if (transfer_gain_override) cfg.transfer_gain = *transfer_gain_override;
        cfg.validate();
    } catch (const std::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }

    std::vector<Scan> scans;
    try {
        scans = read_scan_log_file(log_path);
    } catch (const std::exception& e) {
        throw InputError(std::string("log: ") + e.what());
    }

    std::optional<TruthSidecar> truth;
    if (fs::exists(sidecar_path_for(log_path))) {
        try {
            truth = load_truth_sidecar_file(sidecar_path_for(log_path));
        } catch (const std::exception& e) {
            throw InputError(std::string("truth sidecar: ") + e.what());
        }
    }

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    if (scans.empty()) {
        write_report_csv((dir / "report.csv").string(), {});
        std::ofstream metrics((dir / "metrics.csv").string(), std::ios::binary);
        metrics << "metric,name,value\n";
        std::cout << "run: empty log, 0 cycles\n";
        return kExitOk;
    }

    DynamicGridMap map(cfg, scans.front().pose);
    std::vector<CycleReport> reports;
    reports.reserve(scans.size());

    struct ObjectError {
        double sum_sq = 0.0;
        int count = 0;
    };
    std::vector<ObjectError> object_errors;

    for (const Scan& scan : scans) {
        reports.push_back(map.step(scan.pose, scan.detections));
        if (truth && !truth->world.boxes.empty() && cfg.mode != LayerMode::OccupancyOnly) {
            const GroundTruth gt = ground_truth(truth->world, scan.pose.timestamp,
                                                map.velocity().window().spec());
            object_errors.resize(std::max(object_errors.size(), gt.objects.size()));
            for (std::size_t o = 0; o < gt.objects.size(); ++o) {
                const RegionVelocity rv = region_velocity(map.velocity(), map.statistics(), gt.objects[o]);
                if (rv.valid) {
                    object_errors[o].sum_sq += (rv.mean - gt.objects[o].velocity).squaredNorm();
                    object_errors[o].count += 1;
                }
            }
        }
        if (render && snapshot_every > 0 && map.cycle() % snapshot_every == 0)
            write_snapshot_set(dir, map.cycle() - 1, map, cfg.mode != LayerMode::OccupancyOnly);
    }

    write_report_csv((dir / "report.csv").string(), reports);
    if (render) write_snapshot_set(dir, map.cycle() - 1, map, cfg.mode != LayerMode::OccupancyOnly);
    write_grid_snapshot((dir / "grid_final.bin").string(), map.occupancy());

    std::ofstream metrics((dir / "metrics.csv").string(), std::ios::binary);
    if (!metrics) throw std::runtime_error("cannot open metrics.csv");
    metrics << "metric,name,value\n";
    char buf[128];
    double mean_cycle_ms = 0.0;
    for (const CycleReport& r : reports) mean_cycle_ms += r.timings.total_ms();
    mean_cycle_ms /= static_cast<double>(reports.size());
    std::snprintf(buf, sizeof buf, "mean_cycle_ms,,%.3f\n", mean_cycle_ms);
    metrics << buf;
    if (truth) {
        const double auc =
            occupancy_auc(map.occupancy(), truth->world, scans.back().pose.timestamp);
        std::snprintf(buf, sizeof buf, "occupancy_auc,,%.6f\n", auc);
        metrics << buf;
        for (std::size_t o = 0; o < object_errors.size(); ++o) {
            if (object_errors[o].count == 0) continue;
            std::snprintf(buf, sizeof buf, "velocity_rmse,object_%zu,%.6f\n", o,
                          std::sqrt(object_errors[o].sum_sq / object_errors[o].count));
            metrics << buf;
        }
    }

    std::cout << "run: " << reports.size() << " cycles, mean cycle " << mean_cycle_ms << " ms -> "
              << out_dir << "\n";
    return kExitOk;
}

int cmd_surface(const std::string& model, double range, double azimuth, double range_rate,
                const std::string& config_path, const std::string& out_prefix, double cell_size,
                double extent) {
    SensorModelParams params;
    SensorMount mount;
    mount.fov_half_angle = kPi;
    mount.max_range = 1e6;
    if (!config_path.empty()) {
        try {
            const ManagerConfig cfg = load_manager_config_file(config_path);
            if (!cfg.sensors.params.empty()) params = cfg.sensors.params.front();
        } catch (const std::exception& e) {
            throw InputError(std::string("config: ") + e.what());
        }
    }
    EgoPose pose;  // sensor at the origin
    Detection z;
    z.range = range;
    z.azimuth = azimuth;
    z.range_rate = range_rate;

    LikelihoodSurface surface;
    if (model == "occ" || model == "free") {
        GridSpec spec;
        spec.cell_size = cell_size;
        spec.extent_backward = 0.0 + cell_size;  // keep the apex in view
        spec.extent_forward = extent;
        spec.extent_lateral = extent / 2.0;
        spec.origin = Vec2(-cell_size, 0.0);
        // validate() wants positive integer extents; rebuild cleanly:
        spec.extent_backward = cell_size;
        surface = evaluate_position_surface(model == "occ" ? SurfaceModel::Occupied : SurfaceModel::Free,
                                            z, mount, pose, params, spec);
    } else if (model == "vel") {
        GridSpec spec;
        spec.cell_size = cell_size;
        spec.extent_forward = extent / 2.0;
        spec.extent_backward = extent / 2.0;
        spec.extent_lateral = extent / 2.0;
        spec.origin = Vec2(0.0, 0.0);
        const Vec2 target = pose.position + range * Vec2(std::cos(azimuth), std::sin(azimuth));
        surface = evaluate_velocity_surface(target, z, mount, pose, params, spec);
    } else {
        throw InputError("--model must be occ, free or vel");
    }

    write_surface_pgm(out_prefix + ".pgm", surface.values);
    write_matrix_csv(out_prefix + ".csv", surface.values);
    std::cout << "surface: " << model << " peak " << surface.values.maxCoeff() << " -> " << out_prefix
              << ".pgm/.csv\n";
    return kExitOk;
}

int cmd_render(const std::string& grid_path, const std::string& particles_path,
               const std::string& out_path, double speed_scale) {
    const GridSnapshot snap = read_grid_snapshot(grid_path);

    GridSpec spec;
    spec.cell_size = snap.cell_size;
    spec.origin = snap.anchor;
    spec.extent_forward = snap.width * snap.cell_size / 2.0;
    spec.extent_backward = snap.width * snap.cell_size - spec.extent_forward;
    spec.extent_lateral = snap.height * snap.cell_size / 2.0;

    Eigen::MatrixXd prob(snap.width, snap.height);
    for (int iy = 0; iy < snap.height; ++iy)
        for (int ix = 0; ix < snap.width; ++ix) {
            const std::size_t i = static_cast<std::size_t>(iy) * snap.width + ix;
            prob(ix, iy) = snap.model == OccupancyModel::BinaryBayes
                               ? bb_probability(BBCell{snap.occupied[i]})
                               : ds_probability(DSCell{snap.occupied[i], snap.free[i]});
        }

    if (snap.model == OccupancyModel::DempsterShafer && particles_path.empty()) {
        Eigen::MatrixXd occ(snap.width, snap.height), fre(snap.width, snap.height);
        for (int iy = 0; iy < snap.height; ++iy)
            for (int ix = 0; ix < snap.width; ++ix) {
                const std::size_t i = static_cast<std::size_t>(iy) * snap.width + ix;
                occ(ix, iy) = snap.occupied[i];
                fre(ix, iy) = snap.free[i];
            }
        write_ppm(out_path, occ, fre, Eigen::MatrixXd::Zero(snap.width, snap.height));
    } else if (!particles_path.empty()) {
        // Overlay: grayscale occupancy with particle speed coloring.
        const std::vector<Particle> particles = read_particle_dump(particles_path);
        Eigen::MatrixXd r = 1.0 - prob.array(), g = r, b = r;
        for (const Particle& p : particles) {
            const int ix = static_cast<int>(std::floor((p.position.x() - snap.anchor.x()) / snap.cell_size)) -
                           snap.origin.x;
            const int iy = static_cast<int>(std::floor((p.position.y() - snap.anchor.y()) / snap.cell_size)) -
                           snap.origin.y;
            if (ix < 0 || iy < 0 || ix >= snap.width || iy >= snap.height) continue;
            const double s = std::clamp(p.velocity.norm() / std::max(speed_scale, 1e-9), 0.0, 1.0);
            r(ix, iy) = s;
            g(ix, iy) = 0.2;
            b(ix, iy) = 1.0 - s;
        }
        write_ppm(out_path, r, g, b);
    } else {
        write_pgm(out_path, prob);
    }
    std::cout << "render: -> " << out_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic radar occupancy grid"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--seed", seed, "override the configured RNG seed")
        ->each([&](const std::string&) { seed_set = true; });

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a scan log from a scenario");
    std::string scenario_path, sim_out = "scan.log";
    sim->add_option("scenario", scenario_path, "scenario JSON")->required();
    sim->add_option("-o,--out", sim_out, "output scan log path");

    // run
    auto* run = app.add_subcommand("run", "run the grid on a scan log");
    std::string log_path, config_path, out_dir = "out", mode, model;
    int snapshot_every = 0;
    double transfer_gain = -1.0;
    bool no_render = false;
    run->add_option("log", log_path, "scan log")->required();
    run->add_option("-c,--config", config_path, "run configuration JSON");
    run->add_option("-o,--out", out_dir, "output directory");
    run->add_option("--mode", mode, "full | occupancy-only | velocity-only");
    run->add_option("--model", model, "bb | ds");
    run->add_option("--snapshot-every", snapshot_every, "write snapshots every N cycles");
    run->add_option("--transfer-gain", transfer_gain, "override the mass-transfer gain");
    run->add_flag("--no-render", no_render, "skip image/snapshot output (metrics only)");

    // surface
    auto* surf = app.add_subcommand("surface", "evaluate a sensor-model surface");
    std::string surf_model = "occ", surf_out = "surface", surf_config;
    double z_r = 80.0, z_phi = 0.0, z_rr = 15.0, surf_cell = 0.5, surf_extent = 120.0;
    surf->add_option("--model", surf_model, "occ | free | vel")->required();
    surf->add_option("--range", z_r, "measured range (m)");
    surf->add_option("--azimuth", z_phi, "measured azimuth (rad)");
    surf->add_option("--range-rate", z_rr, "measured range rate (m/s)");
    surf->add_option("-c,--config", surf_config, "run configuration JSON (sensor model source)");
    surf->add_option("-o,--out", surf_out, "output path prefix");
    surf->add_option("--cell-size", surf_cell, "surface lattice step");
    surf->add_option("--extent", surf_extent, "surface extent (m or m/s)");

    // render
    auto* ren = app.add_subcommand("render", "render a grid snapshot to an image");
    std::string ren_grid, ren_particles, ren_out = "render.pgm";
    double ren_speed_scale = 15.0;
    ren->add_option("grid", ren_grid, "grid snapshot (.bin)")->required();
    ren->add_option("--particles", ren_particles, "particle dump for the overlay");
    ren->add_option("-o,--out", ren_out, "output image path");
    ren->add_option("--speed-scale", ren_speed_scale, "speed mapped to full red (m/s)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInputError;
    }

    const std::optional<std::uint64_t> seed_opt =
        seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt;
    try {
        if (sim->parsed()) return cmd_simulate(scenario_path, sim_out, seed_opt);
        if (run->parsed())
            return cmd_run(log_path, config_path, out_dir, mode, model, snapshot_every, seed_opt,
                           transfer_gain < 0.0 ? std::nullopt : std::optional<double>(transfer_gain),
                           !no_render);
        if (surf->parsed())
            return cmd_surface(surf_model, z_r, z_phi, z_rr, surf_config, surf_out, surf_cell, surf_extent);
        if (ren->parsed()) return cmd_render(ren_grid, ren_particles, ren_out, ren_speed_scale);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntimeError;
    }
    return kExitOk;
}
