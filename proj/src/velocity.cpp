#include "dogm/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace dogm {

namespace {
constexpr std::uint64_t kStreamInit = 0x11;
constexpr std::uint64_t kStreamPredict = 0x22;
constexpr std::uint64_t kStreamResample = 0x33;
constexpr std::uint64_t kStreamSpawn = 0x44;
}  // namespace

void init_cell_particles(std::vector<Particle>& out, const Vec2& cell_low, double cell_size,
                         int count, double speed_range, SplitMix64& rng) {
    if (count <= 0) return;
    out.reserve(out.size() + static_cast<std::size_t>(count));
    const double w = 1.0 / count;
    for (int i = 0; i < count; ++i) {
        Particle p;
        p.position = cell_low + cell_size * Vec2(rng.uniform01(), rng.uniform01());
        // Uniform in the speed disk.
        const double radius = speed_range * std::sqrt(rng.uniform01());
        const double angle = rng.uniform(-kPi, kPi);
        p.velocity = radius * Vec2(std::cos(angle), std::sin(angle));
        p.weight = w;
        out.push_back(p);
    }
}

void predict_particles(std::span<Particle> particles, const MotionParams& mp, std::uint64_t stream_seed) {
    mp.validate();
    const std::int64_t n = static_cast<std::int64_t>(particles.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) {
        Particle& p = particles[static_cast<std::size_t>(i)];
        SplitMix64 rng(mix_seed(stream_seed, kStreamPredict, static_cast<std::uint64_t>(i)));
        p.position += p.velocity * mp.dt;
        if (mp.sigma_pos > 0.0) {
            p.position.x() += mp.sigma_pos * rng.normal();
            p.position.y() += mp.sigma_pos * rng.normal();
        }
        if (mp.sigma_vel > 0.0) {
            p.velocity.x() += mp.sigma_vel * rng.normal();
            p.velocity.y() += mp.sigma_vel * rng.normal();
        }
    }
}

CellVelocityStats cell_statistics(std::span<const Particle> cell_particles) {
    CellVelocityStats out;
    out.particle_count = static_cast<int>(cell_particles.size());
    if (cell_particles.empty()) return out;

    // Single pass, pivot-shifted for numerical stability.
    const Vec2 pivot = cell_particles.front().velocity;
    double sw = 0.0;
    Vec2 sv = Vec2::Zero();
    Mat2 svv = Mat2::Zero();
    for (const Particle& p : cell_particles) {
        const Vec2 d = p.velocity - pivot;
        sw += p.weight;
        sv += p.weight * d;
        svv += p.weight * (d * d.transpose());
    }
    out.weight_sum = sw;
    if (!(sw > 0.0)) return out;  // invalid, never NaN

    const Vec2 mean_d = sv / sw;
    out.mean = pivot + mean_d;
    Mat2 cov = svv / sw - mean_d * mean_d.transpose();
    out.covariance = 0.5 * (cov + cov.transpose());
    out.valid = true;
    return out;
}

std::vector<Particle> resample_cell(std::span<const Particle> in, const ResampleParams& rp, SplitMix64& rng) {
    rp.validate();
    if (in.empty()) throw std::invalid_argument("resample_cell: empty cell");

    const int n_old = static_cast<int>(in.size());
    double weight_sum = 0.0;
    for (const Particle& p : in) weight_sum += p.weight;

    const double mean_w = weight_sum / n_old;
    const double w_ref = 1.0 / n_old;
    const double growth = std::clamp(mean_w / w_ref, rp.growth_min, rp.growth_max);
    const int n_new = std::clamp(static_cast<int>(std::llround(n_old * growth)), rp.n_min, rp.n_max);

    std::vector<Particle> out;
    out.reserve(static_cast<std::size_t>(n_new));
    const double out_w = 1.0 / n_new;

    if (weight_sum <= 0.0) {
        // Degenerate weights: draw uniformly over the existing set.
        const double step = static_cast<double>(n_old) / n_new;
        double u = rng.uniform01() * step;
        for (int m = 0; m < n_new; ++m) {
            int idx = static_cast<int>(u + m * step);
            if (idx >= n_old) idx = n_old - 1;
            Particle p = in[static_cast<std::size_t>(idx)];
            p.weight = out_w;
            out.push_back(p);
        }
        return out;
    }

    // Systematic resampling.
    const double step = weight_sum / n_new;
    double target = rng.uniform01() * step;
    double cum = 0.0;
    int idx = 0;
    for (int m = 0; m < n_new; ++m) {
        while (idx < n_old - 1 && cum + in[static_cast<std::size_t>(idx)].weight < target) {
            cum += in[static_cast<std::size_t>(idx)].weight;
            ++idx;
        }
        Particle p = in[static_cast<std::size_t>(idx)];
        p.weight = out_w;
        out.push_back(p);
        target += step;
    }
    return out;
}

// ---------------------------------------------------------------------------
// VelocityGrid
// ---------------------------------------------------------------------------

VelocityGrid::VelocityGrid(const GridSpec& spec, int init_count, double init_speed_range, std::uint64_t seed)
    : window_(spec), init_count_(init_count), init_speed_range_(init_speed_range) {
    if (init_count <= 0) throw std::invalid_argument("VelocityGrid: init_count must be > 0");
    std::vector<Particle> fresh;
    fresh.reserve(window_.cell_count() * static_cast<std::size_t>(init_count));
    const CellIndex o = window_.origin();
    for (int gy = o.y; gy < o.y + window_.height(); ++gy)
        for (int gx = o.x; gx < o.x + window_.width(); ++gx)
            init_cell(CellIndex{gx, gy}, seed, fresh);
    particles_ = std::move(fresh);
    rebin();
}

void VelocityGrid::init_cell(const CellIndex& global, std::uint64_t seed_stream, std::vector<Particle>& out) {
    SplitMix64 rng(mix_seed(seed_stream, kStreamInit, cell_key(global)));
    const Vec2 low = window_.spec().origin + window_.spec().cell_size * Vec2(global.x, global.y);
    init_cell_particles(out, low, window_.spec().cell_size, init_count_, init_speed_range_, rng);
}

std::span<Particle> VelocityGrid::cell_slice(std::size_t buffer_cell) {
    return std::span<Particle>(particles_).subspan(offsets_[buffer_cell],
                                                   offsets_[buffer_cell + 1] - offsets_[buffer_cell]);
}

std::span<const Particle> VelocityGrid::cell_slice(std::size_t buffer_cell) const {
    return std::span<const Particle>(particles_).subspan(offsets_[buffer_cell],
                                                         offsets_[buffer_cell + 1] - offsets_[buffer_cell]);
}

void VelocityGrid::append(std::span<const Particle> extra) {
    particles_.insert(particles_.end(), extra.begin(), extra.end());
    binned_ = false;
}

void VelocityGrid::rebin() {
    const std::size_t cells = window_.cell_count();
    std::vector<std::uint32_t> counts(cells + 1, 0);

    // Pass 1: bin indices (out-of-window particles are dropped).
    std::vector<std::uint32_t> bin(particles_.size());
    std::size_t kept = 0;
    for (std::size_t i = 0; i < particles_.size(); ++i) {
        const auto cell = window_.cell_at(particles_[i].position);
        if (!cell) {
            bin[i] = UINT32_MAX;
            continue;
        }
        bin[i] = static_cast<std::uint32_t>(window_.buffer_index(*cell));
        ++counts[bin[i] + 1];
        ++kept;
    }
    for (std::size_t c = 1; c <= cells; ++c) counts[c] += counts[c - 1];
    offsets_ = counts;

    // Pass 2: stable scatter.
    std::vector<Particle> sorted(kept);
    std::vector<std::uint32_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t i = 0; i < particles_.size(); ++i) {
        if (bin[i] == UINT32_MAX) continue;
        sorted[cursor[bin[i]]++] = particles_[i];
    }
    particles_ = std::move(sorted);
    binned_ = true;
}

void VelocityGrid::adopt_binned(std::vector<Particle>&& particles, std::vector<std::uint32_t>&& offsets) {
    particles_ = std::move(particles);
    offsets_ = std::move(offsets);
    binned_ = true;
}

void VelocityGrid::scroll_to(const CellIndex& new_origin, std::uint64_t seed_stream) {
    const CellIndex old = window_.origin();
    if (new_origin == old) return;
    const int w = window_.width(), h = window_.height();

    // Collect the cells that enter the window.
    std::vector<Particle> fresh;
    const auto in_old = [&](int gx, int gy) {
        return gx >= old.x && gx < old.x + w && gy >= old.y && gy < old.y + h;
    };
    for (int gy = new_origin.y; gy < new_origin.y + h; ++gy)
        for (int gx = new_origin.x; gx < new_origin.x + w; ++gx)
            if (!in_old(gx, gy)) init_cell(CellIndex{gx, gy}, seed_stream, fresh);

    window_.set_origin(new_origin);
    append(fresh);
    rebin();  // drops particles of cells that left the window
}

// ---------------------------------------------------------------------------
// Association
// ---------------------------------------------------------------------------

Association associate_measurements(const GridWindow& window, std::span<const Detection> scan,
                                   const SensorTable& sensors, const EgoPose& pose,
                                   int n_closest, double gate_radius) {
    if (n_closest < 1 || n_closest > 16)
        throw std::invalid_argument("associate_measurements: n_closest must lie in [1,16]");
    if (gate_radius <= 0.0) throw std::invalid_argument("associate_measurements: gate_radius must be > 0");

    const std::size_t cells = window.cell_count();
    Association out;
    out.offsets.assign(cells + 1, 0);
    if (scan.empty()) return out;

    // Detection world positions, grouped per sensor.
    struct SensorDetections {
        std::vector<std::uint32_t> index;
        std::vector<Vec2> position;
    };
    std::vector<SensorDetections> per_sensor(sensors.mounts.size());
    for (std::uint32_t di = 0; di < scan.size(); ++di) {
        const int si = sensors.index_of(scan[di].sensor_id);
        if (si < 0) continue;
        per_sensor[static_cast<std::size_t>(si)].index.push_back(di);
        per_sensor[static_cast<std::size_t>(si)].position.push_back(
            polar_to_world(scan[di], sensors.mounts[static_cast<std::size_t>(si)], pose));
    }

    const std::size_t stride =
        static_cast<std::size_t>(n_closest) * std::max<std::size_t>(sensors.mounts.size(), 1);
    std::vector<std::uint32_t> slots(cells * stride);
    std::vector<std::uint32_t> slot_count(cells, 0);

    const double gate2 = gate_radius * gate_radius;
    const std::int64_t n_cells = static_cast<std::int64_t>(cells);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t bc = 0; bc < n_cells; ++bc) {
        const Vec2 center = window.center_of(window.global_of(static_cast<std::size_t>(bc)));
        std::uint32_t& count = slot_count[static_cast<std::size_t>(bc)];
        std::uint32_t* cell_slots = slots.data() + static_cast<std::size_t>(bc) * stride;
        // (dist2, index) pairs per sensor, n smallest, ties by index.
        std::pair<double, std::uint32_t> best[16];
        for (const SensorDetections& sd : per_sensor) {
            int found = 0;
            const int cap = std::min(n_closest, 16);
            for (std::size_t m = 0; m < sd.index.size(); ++m) {
                const double d2 = (sd.position[m] - center).squaredNorm();
                if (d2 > gate2) continue;
                const std::pair<double, std::uint32_t> cand{d2, sd.index[m]};
                if (found < cap) {
                    best[found++] = cand;
                    std::push_heap(best, best + found);
                } else if (cand < best[0]) {
                    std::pop_heap(best, best + found);
                    best[found - 1] = cand;
                    std::push_heap(best, best + found);
                }
            }
            std::sort_heap(best, best + found);
            for (int q = 0; q < found; ++q) cell_slots[count++] = best[q].second;
        }
    }

    for (std::size_t c = 0; c < cells; ++c) out.offsets[c + 1] = out.offsets[c] + slot_count[c];
    out.candidates.resize(out.offsets.back());
    for (std::size_t c = 0; c < cells; ++c)
        std::copy_n(slots.data() + c * stride, slot_count[c], out.candidates.data() + out.offsets[c]);
    return out;
}

// ---------------------------------------------------------------------------
// Weight update
// ---------------------------------------------------------------------------

void update_weights(VelocityGrid& grid, const Association& assoc, std::span<const Detection> scan,
                    const SensorTable& sensors, const EgoPose& pose, double lambda_floor,
                    double likelihood_gain, double margin_sigmas) {
    if (!grid.binned()) throw std::logic_error("update_weights: grid must be rebinned first");
    const GridWindow& window = grid.window();
    const std::size_t cells = window.cell_count();

    std::vector<Vec2> sensor_pos(sensors.mounts.size());
    std::vector<Vec2> sensor_vel(sensors.mounts.size());
    for (std::size_t s = 0; s < sensors.mounts.size(); ++s) {
        sensor_pos[s] = sensor_position_world(sensors.mounts[s], pose);
        sensor_vel[s] = sensor_velocity_world(sensors.mounts[s], pose);
    }

    const std::int64_t n_cells = static_cast<std::int64_t>(cells);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 256)
#endif
    for (std::int64_t bc = 0; bc < n_cells; ++bc) {
        const auto cand = assoc.cell_candidates(static_cast<std::size_t>(bc));
        if (cand.empty()) continue;
        auto slice = grid.cell_slice(static_cast<std::size_t>(bc));
        if (slice.empty()) continue;

        const CellIndex global = window.global_of(static_cast<std::size_t>(bc));
        const Vec2 center = window.center_of(global);

        // Occupied-position term per candidate, evaluated once per cell.
        double occ_term[64];
        int sensor_idx[64];
        const int m = static_cast<int>(std::min<std::size_t>(cand.size(), 64));
        for (int c = 0; c < m; ++c) {
            const Detection& z = scan[cand[static_cast<std::size_t>(c)]];
            const int si = sensors.index_of(z.sensor_id);
            sensor_idx[c] = si;
            if (si < 0) {
                occ_term[c] = 0.0;
                continue;
            }
            const PolarPoint cp = world_to_sensor_polar(center, sensors.mounts[static_cast<std::size_t>(si)], pose);
            occ_term[c] =
                position_likelihoods_gated(cp, z, sensors.params[static_cast<std::size_t>(si)], margin_sigmas)
                    .occupied;
        }

        for (Particle& p : slice) {
            double best = 0.0;
            for (int c = 0; c < m; ++c) {
                if (occ_term[c] <= 0.0 || sensor_idx[c] < 0) continue;
                const std::size_t si = static_cast<std::size_t>(sensor_idx[c]);
                const Vec2 rel = p.position - sensor_pos[si];
                const double dist = rel.norm();
                if (dist < kSensorSingularityEps) continue;
                const double predicted = rel.dot(p.velocity - sensor_vel[si]) / dist;
                const double lv = velocity_likelihood_from_prediction(
                    predicted, scan[cand[static_cast<std::size_t>(c)]], sensors.params[si]);
                const double combined = occ_term[c] * lv;
                if (combined > best) best = combined;
            }
            p.weight *= lambda_floor + likelihood_gain * best;
        }
    }
}

std::vector<CellVelocityStats> compute_statistics(const VelocityGrid& grid) {
    if (!grid.binned()) throw std::logic_error("compute_statistics: grid must be rebinned first");
    const std::size_t cells = grid.window().cell_count();
    std::vector<CellVelocityStats> out(cells);
    const std::int64_t n_cells = static_cast<std::int64_t>(cells);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t bc = 0; bc < n_cells; ++bc)
        out[static_cast<std::size_t>(bc)] = cell_statistics(grid.cell_slice(static_cast<std::size_t>(bc)));
    return out;
}

void resample_grid(VelocityGrid& grid, const ResampleParams& rp, std::uint64_t seed_stream) {
    if (!grid.binned()) throw std::logic_error("resample_grid: grid must be rebinned first");
    const GridWindow& window = grid.window();
    const std::size_t cells = window.cell_count();

    // Counts first, so the output can be laid out in parallel.
    std::vector<std::uint32_t> new_counts(cells, 0);
    const std::int64_t n_cells = static_cast<std::int64_t>(cells);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t bc = 0; bc < n_cells; ++bc) {
        const auto slice = grid.cell_slice(static_cast<std::size_t>(bc));
        if (slice.empty()) {
            new_counts[static_cast<std::size_t>(bc)] = static_cast<std::uint32_t>(grid.init_count());
            continue;
        }
        const int n_old = static_cast<int>(slice.size());
        double sum = 0.0;
        for (const Particle& p : slice) sum += p.weight;
        const double growth = std::clamp(sum, rp.growth_min, rp.growth_max);  // mean_w / (1/n_old)
        new_counts[static_cast<std::size_t>(bc)] =
            static_cast<std::uint32_t>(std::clamp(static_cast<int>(std::llround(n_old * growth)),
                                                  rp.n_min, rp.n_max));
    }

    std::vector<std::uint32_t> new_offsets(cells + 1, 0);
    for (std::size_t c = 0; c < cells; ++c) new_offsets[c + 1] = new_offsets[c] + new_counts[c];
    std::vector<Particle> next(new_offsets.back());

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t bc = 0; bc < n_cells; ++bc) {
        const std::size_t c = static_cast<std::size_t>(bc);
        const CellIndex global = window.global_of(c);
        SplitMix64 rng(mix_seed(seed_stream, kStreamResample, cell_key(global)));
        const auto slice = grid.cell_slice(c);
        std::vector<Particle> res;
        if (slice.empty()) {
            const Vec2 low = window.spec().origin + window.spec().cell_size * Vec2(global.x, global.y);
            init_cell_particles(res, low, window.spec().cell_size, grid.init_count(),
                                grid.init_speed_range(), rng);
        } else {
            ResampleParams cell_rp = rp;
            cell_rp.n_min = cell_rp.n_max = static_cast<int>(new_counts[c]);  // count fixed above
            res = resample_cell(slice, cell_rp, rng);
        }
        std::copy(res.begin(), res.end(), next.begin() + new_offsets[c]);
    }

    grid.adopt_binned(std::move(next), std::move(new_offsets));
}

// ---------------------------------------------------------------------------
// Hypotheses manager
// ---------------------------------------------------------------------------

std::size_t spawn_hypotheses(VelocityGrid& grid, std::span<const Detection> scan,
                             const SensorTable& sensors, const EgoPose& pose,
                             const HypothesesParams& hp, const ResampleParams& rp,
                             std::uint64_t seed_stream) {
    if (!grid.binned()) throw std::logic_error("spawn_hypotheses: grid must be rebinned first");
    if (scan.empty()) return 0;

    struct Dyn {
        Vec2 position;
        double compensated_rr;
        int sensor_index;
    };
    std::vector<Dyn> dyn;
    for (const Detection& z : scan) {
        const int si = sensors.index_of(z.sensor_id);
        if (si < 0) continue;
        const SensorMount& mount = sensors.mounts[static_cast<std::size_t>(si)];
        const Vec2 p = polar_to_world(z, mount, pose);
        const Vec2 s = sensor_position_world(mount, pose);
        const Vec2 rel = p - s;
        const double dist = rel.norm();
        if (dist < kSensorSingularityEps) continue;
        // World radial velocity of the reflecting point, ego motion removed.
        const double compensated = z.range_rate + rel.dot(sensor_velocity_world(mount, pose)) / dist;
        if (std::abs(compensated) > hp.dynamic_threshold) dyn.push_back(Dyn{p, compensated, si});
    }
    if (dyn.empty()) return 0;

    // Single-link clustering by spatial proximity.
    std::vector<int> parent(dyn.size());
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](int a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    };
    const double link2 = hp.cluster_radius * hp.cluster_radius;
    for (std::size_t a = 0; a < dyn.size(); ++a)
        for (std::size_t b = a + 1; b < dyn.size(); ++b)
            if ((dyn[a].position - dyn[b].position).squaredNorm() <= link2) {
                const int ra = find(static_cast<int>(a)), rb = find(static_cast<int>(b));
                if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
            }

    std::unordered_map<int, std::vector<std::uint32_t>> clusters;
    for (std::size_t i = 0; i < dyn.size(); ++i)
        clusters[find(static_cast<int>(i))].push_back(static_cast<std::uint32_t>(i));

    // Deterministic cluster order: by root index.
    std::vector<int> roots;
    roots.reserve(clusters.size());
    for (const auto& [root, members] : clusters) roots.push_back(root);
    std::sort(roots.begin(), roots.end());

    const GridWindow& window = grid.window();
    std::vector<Particle> spawned;
    std::size_t cluster_no = 0;
    for (int root : roots) {
        const std::vector<std::uint32_t>& members = clusters[root];
        ++cluster_no;
        if (static_cast<int>(members.size()) < hp.min_cluster_size) continue;

        double mean_rr = 0.0;
        Vec2 mean_pos = Vec2::Zero();
        for (std::uint32_t m : members) {
            mean_rr += dyn[m].compensated_rr;
            mean_pos += dyn[m].position;
        }
        mean_rr /= static_cast<double>(members.size());
        mean_pos /= static_cast<double>(members.size());

        const int si = dyn[members.front()].sensor_index;
        const SensorModelParams& params = sensors.params[static_cast<std::size_t>(si)];
        const SensorMount& mount = sensors.mounts[static_cast<std::size_t>(si)];
        const Vec2 s_pos = sensor_position_world(mount, pose);
        const Vec2 s_vel = sensor_velocity_world(mount, pose);
        const ShiftWeights& alias = shift_weights_cached(params.rr_index_bound);

        // Cells within assoc_radius of any cluster member.
        std::vector<std::size_t> cells;
        {
            const double cs = window.spec().cell_size;
            const int pad = static_cast<int>(std::ceil(hp.assoc_radius / cs)) + 1;
            std::unordered_set<std::uint64_t> seen;
            for (std::uint32_t m : members) {
                const CellIndex base = window.lattice_cell(dyn[m].position);
                for (int dy = -pad; dy <= pad; ++dy)
                    for (int dx = -pad; dx <= pad; ++dx) {
                        const CellIndex c{base.x + dx, base.y + dy};
                        if (!window.contains(c)) continue;
                        double best = std::numeric_limits<double>::max();
                        const Vec2 center = window.center_of(c);
                        for (std::uint32_t mm : members)
                            best = std::min(best, (dyn[mm].position - center).squaredNorm());
                        if (best > hp.assoc_radius * hp.assoc_radius) continue;
                        if (seen.insert(cell_key(c)).second) cells.push_back(window.buffer_index(c));
                    }
            }
        }

        for (std::size_t bc : cells) {
            const auto slice = grid.cell_slice(bc);
            const int room = rp.n_max - static_cast<int>(slice.size());
            const int count = std::min(hp.spawn_per_cell, room);
            if (count <= 0) continue;

            double mean_weight = 0.0;
            if (!slice.empty()) {
                for (const Particle& p : slice) mean_weight += p.weight;
                mean_weight /= static_cast<double>(slice.size());
            }
            if (mean_weight <= 0.0) mean_weight = 1.0 / std::max(1, static_cast<int>(slice.size()) + count);

            const CellIndex global = window.global_of(bc);
            SplitMix64 rng(mix_seed(seed_stream, kStreamSpawn, cluster_no, cell_key(global)));
            const Vec2 low = window.spec().origin + window.spec().cell_size * Vec2(global.x, global.y);
            for (int q = 0; q < count; ++q) {
                Particle p;
                p.position = low + window.spec().cell_size * Vec2(rng.uniform01(), rng.uniform01());
                const Vec2 rel = p.position - s_pos;
                const double dist = rel.norm();
                if (dist < kSensorSingularityEps) continue;
                const Vec2 radial = rel / dist;
                const Vec2 cross(-radial.y(), radial.x());
                // Alias hypothesis index drawn by its shift weight.
                int l = -alias.bound();
                double u = rng.uniform01();
                for (; l < alias.bound(); ++l) {
                    u -= alias.at(l);
                    if (u <= 0.0) break;
                }
                const double radial_speed = mean_rr - l * params.delta_range_rate + radial.dot(s_vel);
                const double cross_speed = rng.uniform(-hp.cross_velocity_span, hp.cross_velocity_span);
                p.velocity = radial_speed * radial + cross_speed * cross;
                p.weight = mean_weight;
                spawned.push_back(p);
            }
        }
    }

    if (spawned.empty()) return 0;
    grid.append(spawned);
    grid.rebin();
    return spawned.size();
}

// ---------------------------------------------------------------------------
// Mass transfer emission
// ---------------------------------------------------------------------------

std::vector<MassTransfer> emit_mass_transfers(std::span<const Vec2> before, std::span<const Vec2> after,
                                              std::span<const double> weights,
                                              const GridSpec& occupancy_lattice, double gain) {
    if (before.size() != after.size() || before.size() != weights.size())
        throw std::invalid_argument("emit_mass_transfers: span size mismatch");
    if (gain < 0.0 || gain > 1.0)
        throw std::invalid_argument("emit_mass_transfers: gain must lie in [0,1]");

    const double cs = occupancy_lattice.cell_size;
    const Vec2 o = occupancy_lattice.origin;
    const auto cell_of = [&](const Vec2& p) {
        return CellIndex{static_cast<int>(std::floor((p.x() - o.x()) / cs)),
                         static_cast<int>(std::floor((p.y() - o.y()) / cs))};
    };

    // Weight sums over the pre-prediction source cells.
    std::unordered_map<std::uint64_t, double> source_weight;
    std::vector<CellIndex> from_cell(before.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        from_cell[i] = cell_of(before[i]);
        source_weight[cell_key(from_cell[i])] += weights[i];
    }

    std::map<std::pair<std::uint64_t, std::uint64_t>, MassTransfer> merged;
    for (std::size_t i = 0; i < before.size(); ++i) {
        const CellIndex to = cell_of(after[i]);
        if (to == from_cell[i]) continue;
        const double sum = source_weight[cell_key(from_cell[i])];
        if (!(sum > 0.0)) continue;
        const double fraction = gain * weights[i] / sum;
        if (fraction <= 0.0) continue;
        const auto key = std::make_pair(cell_key(from_cell[i]), cell_key(to));
        auto [it, inserted] = merged.try_emplace(key, MassTransfer{from_cell[i], to, 0.0});
        it->second.fraction += fraction;
    }

    std::vector<MassTransfer> out;
    out.reserve(merged.size());
    for (const auto& [key, t] : merged) out.push_back(t);
    return out;
}

}  // namespace dogm
