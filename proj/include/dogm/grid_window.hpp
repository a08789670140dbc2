#pragma once

#include "dogm/types.hpp"

namespace dogm {

/// Fixed-size window onto the global cell lattice with ring-buffer
/// addressing: scrolling moves the window origin by whole cells and never
/// relocates stored data.
class GridWindow {
public:
    explicit GridWindow(const GridSpec& spec) : spec_(spec) {
        spec_.validate();
        width_ = spec_.cells_x();
        height_ = spec_.cells_y();
    }

    const GridSpec& spec() const { return spec_; }
    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t cell_count() const {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }

    CellIndex origin() const { return CellIndex{x0_, y0_}; }
    void set_origin(const CellIndex& o) {
        x0_ = o.x;
        y0_ = o.y;
    }

    Vec2 origin_world() const { return spec_.origin + spec_.cell_size * Vec2(x0_, y0_); }

    bool contains(const CellIndex& global) const {
        return global.x >= x0_ && global.x < x0_ + width_ && global.y >= y0_ && global.y < y0_ + height_;
    }

    /// Global cell of a world point, or nullopt outside the window.
    std::optional<CellIndex> cell_at(const Vec2& p) const {
        const double fx = std::floor((p.x() - spec_.origin.x()) / spec_.cell_size);
        const double fy = std::floor((p.y() - spec_.origin.y()) / spec_.cell_size);
        if (fx < x0_ || fy < y0_ || fx >= x0_ + width_ || fy >= y0_ + height_) return std::nullopt;
        return CellIndex{static_cast<int>(fx), static_cast<int>(fy)};
    }

    /// Global cell of a world point on the unbounded lattice (no window test).
    CellIndex lattice_cell(const Vec2& p) const {
        return CellIndex{static_cast<int>(std::floor((p.x() - spec_.origin.x()) / spec_.cell_size)),
                         static_cast<int>(std::floor((p.y() - spec_.origin.y()) / spec_.cell_size))};
    }

    Vec2 center_of(const CellIndex& global) const {
        return spec_.origin + spec_.cell_size * Vec2(global.x + 0.5, global.y + 0.5);
    }

    std::size_t buffer_index(const CellIndex& global) const {
        const int bx = positive_mod(global.x, width_);
        const int by = positive_mod(global.y, height_);
        return static_cast<std::size_t>(by) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(bx);
    }

    CellIndex global_of(std::size_t buffer_index) const {
        const int bx = static_cast<int>(buffer_index % static_cast<std::size_t>(width_));
        const int by = static_cast<int>(buffer_index / static_cast<std::size_t>(width_));
        const int gx = x0_ + positive_mod(bx - positive_mod(x0_, width_), width_);
        const int gy = y0_ + positive_mod(by - positive_mod(y0_, height_), height_);
        return CellIndex{gx, gy};
    }

    static int positive_mod(int v, int m) {
        const int r = v % m;
        return r < 0 ? r + m : r;
    }

private:
    GridSpec spec_;
    int width_, height_;
    int x0_ = 0, y0_ = 0;
};

}  // namespace dogm
