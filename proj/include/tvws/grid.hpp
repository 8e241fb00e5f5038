#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "tvws/radio_model.hpp"

namespace tvws {

// Square-cell grid over the area of interest. Row i runs south to north,
// column j west to east; cell (i,j) center is origin + ((j+0.5)L, (i+0.5)L).
struct GridSpec {
    Location origin;        // south-west corner
    double cell_size_m = 80.0;
    int rows = 0;
    int cols = 0;

    double cell_km() const { return cell_size_m / 1000.0; }
    double side_x_km() const { return cols * cell_km(); }
    double side_y_km() const { return rows * cell_km(); }

    Location center(int i, int j) const {
        return {origin.x_km + (j + 0.5) * cell_km(), origin.y_km + (i + 0.5) * cell_km()};
    }

    std::optional<std::pair<int, int>> cell_of(const Location& loc) const {
        double fx = (loc.x_km - origin.x_km) / cell_km();
        double fy = (loc.y_km - origin.y_km) / cell_km();
        int j = static_cast<int>(std::floor(fx));
        int i = static_cast<int>(std::floor(fy));
        if (i < 0 || i >= rows || j < 0 || j >= cols) return std::nullopt;
        return std::make_pair(i, j);
    }
};

inline double cell_area_side_km(double r_cell_km, double r_int_km) {
    if (!(r_cell_km > 0.0) || !(r_int_km > 0.0))
        throw std::domain_error("cell_area_side_km: radii must be positive");
    return 2.0 * (r_cell_km + r_int_km);
}

// Grid covering a side_km x side_km square centered on bs.
inline GridSpec make_grid(const Location& bs, double side_km, double cell_size_m) {
    if (!(side_km > 0.0) || !(cell_size_m > 0.0))
        throw std::domain_error("make_grid: side and cell size must be positive");
    int n = std::max(2, static_cast<int>(std::ceil(side_km * 1000.0 / cell_size_m - 1e-9)));
    double half = 0.5 * n * cell_size_m / 1000.0;
    return GridSpec{{bs.x_km - half, bs.y_km - half}, cell_size_m, n, n};
}

// Per-grid covered/uncovered labels: -1 covered, +1 uncovered.
struct CoverageLabelGrid {
    Eigen::MatrixXi labels;

    int rows() const { return static_cast<int>(labels.rows()); }
    int cols() const { return static_cast<int>(labels.cols()); }
    bool covered(int i, int j) const { return labels(i, j) == -1; }
};

enum class SpaceClass : std::uint8_t { Black = 0, Gray = 1, White = 2, OutOfCell = 3 };

// Per-grid maximum permitted emission power. NaN in mpep_dbm is the
// no-transmission sentinel; NaN wcrp coordinates mean no binding receiver.
struct MpepMap {
    GridSpec grid;
    Eigen::MatrixXd mpep_dbm;
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> space_class;
    Eigen::MatrixXd wcrp_x;
    Eigen::MatrixXd wcrp_y;

    SpaceClass cls(int i, int j) const { return static_cast<SpaceClass>(space_class(i, j)); }
    bool no_tx(int i, int j) const { return std::isnan(mpep_dbm(i, j)); }
};

}  // namespace tvws
