#include "dogm/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace dogm {

double occupancy_auc(std::span<const double> probabilities, std::span<const std::uint8_t> truth) {
    if (probabilities.size() != truth.size() || probabilities.empty()) return 0.5;
    std::size_t positives = 0;
    for (std::uint8_t b : truth) positives += b ? 1 : 0;
    const std::size_t negatives = truth.size() - positives;
    if (positives == 0 || negatives == 0) return 0.5;

    std::vector<std::size_t> order(probabilities.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return probabilities[a] < probabilities[b]; });

    // Mann-Whitney: rank sum of positives with tied ranks averaged.
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && probabilities[order[j + 1]] == probabilities[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t q = i; q <= j; ++q)
            if (truth[order[q]]) rank_sum += avg_rank;
        i = j + 1;
    }
    return (rank_sum - 0.5 * positives * (positives + 1)) /
           (static_cast<double>(positives) * static_cast<double>(negatives));
}

double occupancy_auc(const OccupancyGrid& grid, const WorldModel& truth_world, double t) {
    const GridWindow& win = grid.window();
    const GroundTruth truth = ground_truth(truth_world, t, win.spec());

    std::vector<std::uint8_t> mask(win.cell_count(), 0);
    for (const CellIndex& c : truth.occupied_cells)
        if (win.contains(c)) mask[win.buffer_index(c)] = 1;

    std::vector<double> probs(win.cell_count());
    for (std::size_t i = 0; i < win.cell_count(); ++i) probs[i] = grid.probability_at_buffer(i);
    return occupancy_auc(probs, mask);
}

RegionVelocity region_velocity(const VelocityGrid& grid, std::span<const CellVelocityStats> stats,
                               const GroundTruthObject& object, double pad) {
    const GridWindow& win = grid.window();
    const auto cells = rasterize_box(object.center, object.half_extent + Vec2(pad, pad), object.heading,
                                     win.spec());
    RegionVelocity out;
    Vec2 sum = Vec2::Zero();
    for (const CellIndex& c : cells) {
        if (!win.contains(c)) continue;
        const std::size_t bi = win.buffer_index(c);
        if (bi >= stats.size() || !stats[bi].valid) continue;
        sum += stats[bi].weight_sum * stats[bi].mean;
        out.weight_sum += stats[bi].weight_sum;
    }
    if (out.weight_sum > 0.0) {
        out.mean = sum / out.weight_sum;
        out.valid = true;
    }
    return out;
}

}  // namespace dogm
