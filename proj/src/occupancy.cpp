#include "dogm/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace dogm {

BBCell bb_update(BBCell cell, double p_meas, double log_odds_limit) {
    if (!(p_meas > 0.0 && p_meas < 1.0))
        throw std::invalid_argument("bb_update: p_meas must lie strictly in (0,1)");
    cell.log_odds += std::log(p_meas / (1.0 - p_meas));
    cell.log_odds = std::clamp(cell.log_odds, -log_odds_limit, log_odds_limit);
    return cell;
}

DSCell ds_update(DSCell cell, double mass_occupied_meas, double mass_free_meas) {
    if (mass_occupied_meas < 0.0 || mass_free_meas < 0.0 ||
        mass_occupied_meas + mass_free_meas > 1.0 + 1e-12)
        throw std::invalid_argument("ds_update: measurement masses must be >= 0 and sum to <= 1");
    const double mo1 = cell.mass_occupied, mf1 = cell.mass_free;
    const double mu1 = 1.0 - mo1 - mf1;
    const double mo2 = mass_occupied_meas, mf2 = mass_free_meas;
    const double mu2 = 1.0 - mo2 - mf2;
    const double conflict = mo1 * mf2 + mf1 * mo2;
    if (conflict >= 1.0 - 1e-15) return DSCell{};  // total conflict: reset to unknown
    const double norm = 1.0 - conflict;
    DSCell out;
    out.mass_occupied = (mo1 * mo2 + mo1 * mu2 + mu1 * mo2) / norm;
    out.mass_free = (mf1 * mf2 + mf1 * mu2 + mu1 * mf2) / norm;
    return out;
}

OccupancyGrid::OccupancyGrid(const GridSpec& spec, OccupancyModel model, double log_odds_limit)
    : window_(spec), model_(model), log_odds_limit_(log_odds_limit) {
    occupied_.assign(window_.cell_count(), 0.0);
    if (model_ == OccupancyModel::DempsterShafer) free_.assign(window_.cell_count(), 0.0);
}

void OccupancyGrid::update_buffer_cell(std::size_t i, double mass_occupied, double mass_free) {
    if (model_ == OccupancyModel::BinaryBayes) {
        double p = 0.5 * (1.0 + mass_occupied - mass_free);
        p = std::clamp(p, 1e-6, 1.0 - 1e-6);
        occupied_[i] = bb_update(BBCell{occupied_[i]}, p, log_odds_limit_).log_odds;
    } else {
        const DSCell c = ds_update(DSCell{occupied_[i], free_[i]}, mass_occupied, mass_free);
        occupied_[i] = c.mass_occupied;
        free_[i] = c.mass_free;
    }
}

void OccupancyGrid::decay(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("decay: alpha must be in (0,1]");
    if (alpha == 1.0) return;
    for (double& v : occupied_) v *= alpha;
    for (double& v : free_) v *= alpha;
}

void OccupancyGrid::apply_mass_transfer(std::span<const MassTransfer> transfers) {
    if (transfers.empty()) return;

    std::unordered_map<std::size_t, double> per_source;
    for (const MassTransfer& t : transfers) {
        if (t.fraction < 0.0 || t.fraction > 1.0)
            throw std::invalid_argument("apply_mass_transfer: fraction must lie in [0,1]");
        if (!window_.contains(t.from) || !window_.contains(t.to)) continue;
        per_source[window_.buffer_index(t.from)] += t.fraction;
    }
    for (const auto& [idx, sum] : per_source)
        if (sum > 1.0 + 1e-12)
            throw std::invalid_argument("apply_mass_transfer: per-source fractions sum to > 1");

    // Amounts are drawn against pre-transfer source evidence, then applied
    // with destination capping; any capped remainder stays at the source.
    struct Move {
        std::size_t from, to;
        double amount;
    };
    std::vector<Move> moves;
    moves.reserve(transfers.size());
    for (const MassTransfer& t : transfers) {
        if (!window_.contains(t.from) || !window_.contains(t.to)) continue;
        const std::size_t from = window_.buffer_index(t.from);
        const std::size_t to = window_.buffer_index(t.to);
        if (from == to) continue;
        const double source_evidence = model_ == OccupancyModel::BinaryBayes
                                           ? std::max(occupied_[from], 0.0)
                                           : occupied_[from];
        const double amount = t.fraction * source_evidence;
        if (amount > 0.0) moves.push_back(Move{from, to, amount});
    }

    for (const Move& m : moves) {
        double amount = std::min(m.amount, model_ == OccupancyModel::BinaryBayes
                                               ? std::max(occupied_[m.from], 0.0)
                                               : occupied_[m.from]);
        const double headroom = model_ == OccupancyModel::BinaryBayes
                                    ? log_odds_limit_ - occupied_[m.to]
                                    : 1.0 - occupied_[m.to] - free_[m.to];
        amount = std::min(amount, std::max(headroom, 0.0));
        occupied_[m.from] -= amount;
        occupied_[m.to] += amount;
    }
}

double OccupancyGrid::total_occupied_evidence() const {
    double sum = 0.0;
    for (double v : occupied_) sum += v;
    return sum;
}

void OccupancyGrid::scroll_to(const CellIndex& new_origin) {
    const CellIndex old = window_.origin();
    const int dx = new_origin.x - old.x;
    const int dy = new_origin.y - old.y;
    if (dx == 0 && dy == 0) return;

    const int w = window_.width(), h = window_.height();
    if (std::abs(dx) >= w || std::abs(dy) >= h) {
        window_.set_origin(new_origin);
        for (std::size_t i = 0; i < occupied_.size(); ++i) reset_cell(i);
        return;
    }

    if (dx != 0) {
        const int lo = dx > 0 ? old.x : new_origin.x;
        for (int gx = lo; gx < lo + std::abs(dx); ++gx) {
            const int bx = GridWindow::positive_mod(gx, w);
            for (int by = 0; by < h; ++by)
                reset_cell(static_cast<std::size_t>(by) * w + static_cast<std::size_t>(bx));
        }
    }
    if (dy != 0) {
        const int lo = dy > 0 ? old.y : new_origin.y;
        for (int gy = lo; gy < lo + std::abs(dy); ++gy) {
            const int by = GridWindow::positive_mod(gy, h);
            for (int bx = 0; bx < w; ++bx)
                reset_cell(static_cast<std::size_t>(by) * w + static_cast<std::size_t>(bx));
        }
    }
    window_.set_origin(new_origin);
}

void OccupancyGrid::reset_cell(std::size_t idx) {
    occupied_[idx] = 0.0;
    if (!free_.empty()) free_[idx] = 0.0;
}

}  // namespace dogm
