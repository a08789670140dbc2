#include "dogm/grid_manager.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dogm {

namespace {

constexpr std::uint64_t kPhasePredict = 1;
constexpr std::uint64_t kPhaseScrollInit = 2;
constexpr std::uint64_t kPhaseResample = 3;
constexpr std::uint64_t kPhaseSpawn = 4;

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double lap_ms() {
        const auto now = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
        start_ = now;
        return ms;
    }

private:
    std::chrono::steady_clock::time_point start_;
};

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

int thread_rank() {
#ifdef _OPENMP
    return omp_get_thread_num();
#else
    return 0;
#endif
}

}  // namespace

void ManagerConfig::validate() const {
    occupancy_spec.validate();
    velocity_spec.validate();
    sensors.validate();
    resample.validate();
    if (!(decay_alpha > 0.0 && decay_alpha <= 1.0))
        throw std::invalid_argument("ManagerConfig: decay_alpha must be in (0,1]");
    if (transfer_gain < 0.0 || transfer_gain > 1.0)
        throw std::invalid_argument("ManagerConfig: transfer_gain must be in [0,1]");
    if (lambda_floor < 0.0) throw std::invalid_argument("ManagerConfig: lambda_floor must be >= 0");
    if (likelihood_gain <= 0.0) throw std::invalid_argument("ManagerConfig: likelihood_gain must be > 0");
    if (n_closest < 1 || n_closest > 16)
        throw std::invalid_argument("ManagerConfig: n_closest must lie in [1,16]");
    if (association_gate <= 0.0) throw std::invalid_argument("ManagerConfig: association_gate must be > 0");
    if (margin_sigmas < 2.0) throw std::invalid_argument("ManagerConfig: margin_sigmas must be >= 2");
    if (scroll_threshold_cells <= 0.0)
        throw std::invalid_argument("ManagerConfig: scroll_threshold_cells must be > 0");
    if (motion.sigma_pos < 0.0 || motion.sigma_vel < 0.0)
        throw std::invalid_argument("ManagerConfig: motion noise must be >= 0");
}

DynamicGridMap::DynamicGridMap(const ManagerConfig& cfg, const EgoPose& initial_pose)
    : cfg_(cfg),
      occupancy_(cfg.occupancy_spec, cfg.model, cfg.log_odds_limit),
      velocity_(cfg.velocity_spec, cfg.resample.n_min, cfg.hypotheses.init_speed_range,
                mix_seed(cfg.seed, kPhaseScrollInit, 0)) {
    cfg_.validate();
    place_windows(initial_pose);
    scroll_anchor_ = initial_pose.position;
    stats_.assign(velocity_.window().cell_count(), CellVelocityStats{});
}

void DynamicGridMap::place_windows(const EgoPose& pose) {
    const auto desired_origin = [&pose](const GridSpec& spec) {
        const Vec2 corner = pose.position - Vec2(spec.extent_backward, spec.extent_lateral);
        return CellIndex{static_cast<int>(std::floor((corner.x() - spec.origin.x()) / spec.cell_size)),
                         static_cast<int>(std::floor((corner.y() - spec.origin.y()) / spec.cell_size))};
    };
    occupancy_.scroll_to(desired_origin(cfg_.occupancy_spec));
    velocity_.scroll_to(desired_origin(cfg_.velocity_spec),
                        mix_seed(cfg_.seed, kPhaseScrollInit, static_cast<std::uint64_t>(cycle_) + 1));
}

bool DynamicGridMap::maybe_scroll(const EgoPose& pose) {
    const double threshold = cfg_.scroll_threshold_cells * cfg_.occupancy_spec.cell_size;
    const Vec2 displacement = pose.position - scroll_anchor_;
    if (displacement.cwiseAbs().maxCoeff() < threshold) return false;
    place_windows(pose);
    scroll_anchor_ = pose.position;
    return true;
}

CycleReport DynamicGridMap::step(const EgoPose& pose, std::span<const Detection> scan) {
    if (has_pose_ && pose.timestamp < last_pose_.timestamp)
        throw std::invalid_argument("step: out-of-order pose timestamp");
    const double dt = has_pose_ ? pose.timestamp - last_pose_.timestamp : 0.0;

    CycleReport report;
    report.cycle = cycle_;
    report.timestamp = pose.timestamp;
    report.detection_count = scan.size();

    const bool run_occupancy = cfg_.mode != LayerMode::VelocityOnly;
    const bool run_velocity = cfg_.mode != LayerMode::OccupancyOnly;

    Stopwatch watch;

    // 1. Grid adjustment.
    maybe_scroll(pose);
    report.timings.scroll_ms = watch.lap_ms();

    // 2. Occupancy prediction: decay toward unknown.
    if (run_occupancy) occupancy_.decay(cfg_.decay_alpha);
    report.timings.occupancy_predict_ms = watch.lap_ms();

    // 3. Velocity prediction, with border crossings recorded for the mass
    //    transfer step.
    std::vector<MassTransfer> transfers;
    if (run_velocity && dt > 0.0) {
        const bool want_transfers = cfg_.mode == LayerMode::Full && cfg_.transfer_gain > 0.0;
        auto particles = velocity_.particles();
        if (want_transfers) {
            before_positions_.resize(particles.size());
            before_weights_.resize(particles.size());
            for (std::size_t i = 0; i < particles.size(); ++i) {
                before_positions_[i] = particles[i].position;
                before_weights_[i] = particles[i].weight;
            }
        }
        MotionParams mp = cfg_.motion;
        mp.dt = dt;
        predict_particles(particles, mp, mix_seed(cfg_.seed, kPhasePredict, static_cast<std::uint64_t>(cycle_)));
        report.timings.velocity_predict_ms = watch.lap_ms();

        if (want_transfers) {
            std::vector<Vec2> after(particles.size());
            for (std::size_t i = 0; i < particles.size(); ++i) after[i] = particles[i].position;
            transfers = emit_mass_transfers(before_positions_, after, before_weights_,
                                            cfg_.occupancy_spec, cfg_.transfer_gain);
        }
        velocity_.rebin();
        report.timings.mass_transfer_ms = watch.lap_ms();
    } else {
        report.timings.velocity_predict_ms = watch.lap_ms();
    }

    // 4. The single coupling point: particles move occupied evidence.
    if (run_occupancy && !transfers.empty()) occupancy_.apply_mass_transfer(transfers);
    report.transfer_count = transfers.size();
    report.timings.mass_transfer_ms += watch.lap_ms();

    // 5. Occupancy measurement update.
    if (run_occupancy && !scan.empty()) occupancy_measurement_update(scan, pose);
    report.timings.occupancy_update_ms = watch.lap_ms();

    if (run_velocity) {
        // 6. Association and weight update.
        const Association assoc = associate_measurements(velocity_.window(), scan, cfg_.sensors, pose,
                                                         cfg_.n_closest, cfg_.association_gate);
        report.timings.associate_ms = watch.lap_ms();

        update_weights(velocity_, assoc, scan, cfg_.sensors, pose, cfg_.lambda_floor,
                       cfg_.likelihood_gain, cfg_.margin_sigmas);
        report.timings.weight_update_ms = watch.lap_ms();

        // 7. Per-cell statistics.
        stats_ = compute_statistics(velocity_);
        report.timings.statistics_ms = watch.lap_ms();

        // 8. Bounded resampling.
        resample_grid(velocity_, cfg_.resample, mix_seed(cfg_.seed, kPhaseResample, static_cast<std::uint64_t>(cycle_)));
        report.timings.resample_ms = watch.lap_ms();

        // 9. Hypotheses manager.
        report.spawned_count = spawn_hypotheses(velocity_, scan, cfg_.sensors, pose, cfg_.hypotheses,
                                                cfg_.resample,
                                                mix_seed(cfg_.seed, kPhaseSpawn, static_cast<std::uint64_t>(cycle_)));
        report.timings.spawn_ms = watch.lap_ms();
    }

    report.particle_count = velocity_.particle_count();
    last_pose_ = pose;
    has_pose_ = true;
    ++cycle_;
    return report;
}

std::size_t DynamicGridMap::occupancy_measurement_update(std::span<const Detection> scan,
                                                         const EgoPose& pose) {
    const GridWindow& window = occupancy_.window();
    const std::size_t cells = window.cell_count();
    const double cell_size = window.spec().cell_size;

    contrib_scratch_.resize(scan.size());
    const int n_threads = thread_count();
    if (static_cast<int>(stamp_scratch_.size()) < n_threads) stamp_scratch_.resize(n_threads);
    for (auto& s : stamp_scratch_)
        if (s.size() != cells) s.assign(cells, 0);

    const std::uint64_t epoch = stamp_epoch_;
    stamp_epoch_ += scan.size() + 1;

    // Phase A: every detection walks its ambiguity slivers and collects
    // per-cell evidence. Parallel over detections; purely local work.
    const std::int64_t n_scan = static_cast<std::int64_t>(scan.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
    for (std::int64_t d = 0; d < n_scan; ++d) {
        auto& contributions = contrib_scratch_[static_cast<std::size_t>(d)];
        contributions.clear();
        const Detection& z = scan[static_cast<std::size_t>(d)];
        const int si = cfg_.sensors.index_of(z.sensor_id);
        if (si < 0) continue;
        const SensorMount& mount = cfg_.sensors.mounts[static_cast<std::size_t>(si)];
        const SensorModelParams& params = cfg_.sensors.params[static_cast<std::size_t>(si)];

        const int k = params.pos_index_bound;
        const double az_half = cfg_.margin_sigmas * z.sigma_azimuth;
        const double r_hi = std::min(z.range, mount.max_range) + k * params.delta_range +
                            cfg_.margin_sigmas * z.sigma_range;

        // Azimuth slivers (cell azimuths each shift hypothesis responds to),
        // merged where they overlap.
        struct Interval {
            double lo, hi;
        };
        Interval slivers[16];
        int n_slivers = 0;
        for (int j = -k; j <= k; ++j) {
            const double c = z.azimuth - j * params.delta_azimuth;
            slivers[n_slivers++] = Interval{c - az_half, c + az_half};
        }
        std::sort(slivers, slivers + n_slivers, [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
        int merged = 0;
        for (int q = 1; q < n_slivers; ++q) {
            if (slivers[q].lo <= slivers[merged].hi)
                slivers[merged].hi = std::max(slivers[merged].hi, slivers[q].hi);
            else
                slivers[++merged] = slivers[q];
        }
        n_slivers = merged + 1;

        auto& stamps = stamp_scratch_[static_cast<std::size_t>(thread_rank())];
        const std::uint64_t stamp = epoch + static_cast<std::uint64_t>(d) + 1;
        const Vec2 s_pos = sensor_position_world(mount, pose);
        const double base_angle = pose.heading + mount.yaw;
        const double step = 0.5 * cell_size;

        for (int q = 0; q < n_slivers; ++q) {
            const double mid = 0.5 * (slivers[q].lo + slivers[q].hi) + base_angle;
            const double half_angle = 0.5 * (slivers[q].hi - slivers[q].lo);
            const Vec2 dir(std::cos(mid), std::sin(mid));
            const Vec2 perp(-dir.y(), dir.x());
            const double tan_half = std::tan(std::min(half_angle, 1.2));

            for (double t = 0.5 * step; t <= r_hi; t += step) {
                const double half_width = t * tan_half + cell_size;
                for (double u = -half_width; u <= half_width; u += step) {
                    const Vec2 p = s_pos + t * dir + u * perp;
                    const auto cell = window.cell_at(p);
                    if (!cell) continue;
                    const std::size_t bi = window.buffer_index(*cell);
                    if (stamps[bi] == stamp) continue;
                    stamps[bi] = stamp;
                    const PolarPoint polar = world_to_sensor_polar(window.center_of(*cell), mount, pose);
                    const PositionLikelihoods pl =
                        position_likelihoods_gated(polar, z, params, cfg_.margin_sigmas);
                    double mo, mf;
                    detection_masses(pl.occupied, pl.free, mo, mf);
                    if (mo + mf > 1e-12)
                        contributions.push_back(Contribution{static_cast<std::uint32_t>(bi), mo, mf});
                }
            }
        }
    }

    // Phase B: group by cell (stable in detection order), then fuse each
    // cell's contributions; cells are independent, so this parallelizes
    // without reordering any cell's update sequence.
    std::size_t total = 0;
    for (const auto& c : contrib_scratch_) total += c.size();
    if (total == 0) return 0;

    std::vector<std::uint32_t> counts(cells + 1, 0);
    for (const auto& list : contrib_scratch_)
        for (const Contribution& c : list) ++counts[c.cell + 1];
    for (std::size_t i = 1; i <= cells; ++i) counts[i] += counts[i - 1];
    std::vector<Contribution> ordered(total);
    std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
    for (const auto& list : contrib_scratch_)
        for (const Contribution& c : list) ordered[cursor[c.cell]++] = c;

    const std::int64_t n_cells = static_cast<std::int64_t>(cells);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1024)
#endif
    for (std::int64_t bc = 0; bc < n_cells; ++bc) {
        const std::size_t c = static_cast<std::size_t>(bc);
        for (std::uint32_t idx = counts[c]; idx < counts[c + 1]; ++idx)
            occupancy_.update_buffer_cell(ordered[idx].cell, ordered[idx].mass_occupied,
                                          ordered[idx].mass_free);
    }
    return total;
}

}  // namespace dogm
