#pragma once

#include "dogm/grid_window.hpp"
#include "dogm/types.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace dogm {

enum class OccupancyModel { BinaryBayes, DempsterShafer };

/// Binary Bayes cell: a single log-odds scalar.
struct BBCell {
    double log_odds = 0.0;
};

/// Dempster-Shafer cell: occupied and free belief masses; the unknown mass
/// is the implicit remainder 1 - m_occupied - m_free.
struct DSCell {
    double mass_occupied = 0.0;
    double mass_free = 0.0;

    double unknown() const { return 1.0 - mass_occupied - mass_free; }
};

constexpr double kDefaultLogOddsLimit = 12.0;

/// Additive log-odds fusion of one measured occupancy probability.
/// p_meas must lie strictly inside (0,1); callers clamp to [1e-6, 1-1e-6].
BBCell bb_update(BBCell cell, double p_meas, double log_odds_limit = kDefaultLogOddsLimit);

/// Dempster's rule of combination on the frame {occupied, free}. Total
/// conflict resolves to the full-unknown cell.
DSCell ds_update(DSCell cell, double mass_occupied_meas, double mass_free_meas);

inline BBCell bb_decay(BBCell cell, double alpha) {
    cell.log_odds *= alpha;
    return cell;
}

inline DSCell ds_decay(DSCell cell, double alpha) {
    cell.mass_occupied *= alpha;
    cell.mass_free *= alpha;
    return cell;
}

inline double bb_probability(const BBCell& cell) { return 1.0 / (1.0 + std::exp(-cell.log_odds)); }

inline double ds_probability(const DSCell& cell) {
    const double p = 0.5 * (1.0 + cell.mass_occupied - cell.mass_free);
    return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

/// One particle-driven move of occupied evidence between two cells,
/// addressed on the global cell lattice.
struct MassTransfer {
    CellIndex from;
    CellIndex to;
    double fraction = 0.0;  // share of the source cell's occupied evidence
};

/// Scrolling occupancy grid over a ring-buffered window of the global cell
/// lattice. The velocity layer feeds back exclusively through
/// apply_mass_transfer.
class OccupancyGrid {
public:
    OccupancyGrid(const GridSpec& spec, OccupancyModel model, double log_odds_limit = kDefaultLogOddsLimit);

    const GridWindow& window() const { return window_; }
    const GridSpec& spec() const { return window_.spec(); }
    OccupancyModel model() const { return model_; }
    double log_odds_limit() const { return log_odds_limit_; }
    std::size_t cell_count() const { return occupied_.size(); }

    BBCell bb_cell(const CellIndex& global) const { return BBCell{occupied_[window_.buffer_index(global)]}; }
    DSCell ds_cell(const CellIndex& global) const {
        const std::size_t i = window_.buffer_index(global);
        return DSCell{occupied_[i], free_[i]};
    }
    void set_bb_cell(const CellIndex& global, BBCell cell) {
        occupied_[window_.buffer_index(global)] = cell.log_odds;
    }
    void set_ds_cell(const CellIndex& global, DSCell cell) {
        const std::size_t i = window_.buffer_index(global);
        occupied_[i] = cell.mass_occupied;
        free_[i] = cell.mass_free;
    }

    double probability(const CellIndex& global) const {
        return probability_at_buffer(window_.buffer_index(global));
    }
    double probability_at_buffer(std::size_t i) const {
        if (model_ == OccupancyModel::BinaryBayes) return bb_probability(BBCell{occupied_[i]});
        return ds_probability(DSCell{occupied_[i], free_[i]});
    }

    /// Fuses one measured evidence pair into a cell (BB converts through the
    /// occupancy probability; DS combines masses).
    void update_cell(const CellIndex& global, double mass_occupied, double mass_free) {
        update_buffer_cell(window_.buffer_index(global), mass_occupied, mass_free);
    }
    void update_buffer_cell(std::size_t buffer_index, double mass_occupied, double mass_free);

    /// Per-cycle prediction: evidence decays toward unknown.
    void decay(double alpha);

    /// Applies particle-driven occupied-evidence moves. Requires per-source
    /// fraction sums <= 1. Moves are capped so that a destination never
    /// exceeds its representation limit; the capped remainder stays at the
    /// source, so total occupied evidence is conserved exactly.
    void apply_mass_transfer(std::span<const MassTransfer> transfers);

    /// Total occupied evidence: sum of log-odds (BB) or occupied mass (DS).
    double total_occupied_evidence() const;

    /// Shifts the window so its low corner sits at `new_origin` (global cell
    /// coordinates). Newly exposed cells reset to unknown; retained cells
    /// keep their buffer slots bit-exactly.
    void scroll_to(const CellIndex& new_origin);

    std::span<const double> occupied_store() const { return occupied_; }
    std::span<const double> free_store() const { return free_; }

private:
    void reset_cell(std::size_t idx);

    GridWindow window_;
    OccupancyModel model_;
    double log_odds_limit_;
    std::vector<double> occupied_;  // BB: log-odds; DS: occupied mass
    std::vector<double> free_;      // DS only: free mass
};

}  // namespace dogm
