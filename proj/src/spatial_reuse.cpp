#include "tvws/spatial_reuse.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace tvws {

CoverageLabelGrid covered_set(const BoundaryModel& model, const GridSpec& grid) {
    CoverageLabelGrid out;
    out.labels.resize(grid.rows, grid.cols);
    for (int i = 0; i < grid.rows; ++i)
        for (int j = 0; j < grid.cols; ++j)
            out.labels(i, j) = classify(model, grid.center(i, j));
    return out;
}

namespace {

struct ScanResult {
    bool found = false;
    double limit_dbm = std::numeric_limits<double>::infinity();
    Location rx;
};

// Minimum tolerable-power receiver among covered centers in range. The row
// window only skips cells that the distance test would reject anyway, so the
// result matches a full-grid scan exactly.
ScanResult scan_covered(const Location& dev, const CoverageLabelGrid& covered,
                        const GridSpec& grid, const InterferenceParams& ip, double range_km) {
    ScanResult res;
    auto own = grid.cell_of(dev);
    int w = static_cast<int>(std::ceil(range_km / grid.cell_km())) + 1;
    int i0 = 0, i1 = grid.rows - 1, j0 = 0, j1 = grid.cols - 1;
    if (own) {
        i0 = std::max(0, own->first - w);
        i1 = std::min(grid.rows - 1, own->first + w);
        j0 = std::max(0, own->second - w);
        j1 = std::min(grid.cols - 1, own->second + w);
    }
    for (int k = i0; k <= i1; ++k) {
        for (int l = j0; l <= j1; ++l) {
            if (!covered.covered(k, l)) continue;
            Location rx = grid.center(k, l);
            double d = distance_km(dev, rx);
            if (d > range_km) continue;
            double lim = interference_power_limit_dbm(dev, rx, ip);
            if (lim < res.limit_dbm) {
                res.limit_dbm = lim;
                res.rx = rx;
                res.found = true;
            }
        }
    }
    return res;
}

}  // namespace

std::optional<Location> wcrp_search(const Location& dev_loc, const CoverageLabelGrid& covered,
                                    const GridSpec& grid, const InterferenceParams& ip) {
    if (covered.rows() != grid.rows || covered.cols() != grid.cols)
        throw std::invalid_argument("wcrp_search: labels do not match the grid");
    ScanResult res = scan_covered(dev_loc, covered, grid, ip, worst_case_range_km(ip));
    if (!res.found) return std::nullopt;
    return res.rx;
}

MpepEntry compute_mpep(const Location& dev_loc, const CoverageLabelGrid& covered,
                       const GridSpec& grid, const InterferenceParams& ip,
                       const MpepOptions& opts) {
    if (covered.rows() != grid.rows || covered.cols() != grid.cols)
        throw std::invalid_argument("compute_mpep: labels do not match the grid");
    auto own = grid.cell_of(dev_loc);
    if (!own) throw std::invalid_argument("compute_mpep: device location outside the grid");

    MpepEntry entry;
    if (covered.covered(own->first, own->second)) {
        entry.mpep_dbm = std::numeric_limits<double>::quiet_NaN();
        entry.cls = SpaceClass::Black;
        return entry;
    }
    const double p_peak = ip.p_peak_dbm;
    ScanResult res = scan_covered(dev_loc, covered, grid, ip, worst_case_range_km(ip));
    if (!res.found || res.limit_dbm >= p_peak) {
        entry.mpep_dbm = p_peak;
        entry.cls = SpaceClass::White;
    } else if (res.limit_dbm <= opts.no_tx_floor_dbm) {
        entry.mpep_dbm = std::numeric_limits<double>::quiet_NaN();
        entry.cls = SpaceClass::Black;
    } else {
        entry.mpep_dbm = res.limit_dbm;
        entry.cls = SpaceClass::Gray;
        entry.wcrp = res.rx;
    }
    return entry;
}

MpepMap build_database(const Location& cell_bs, double r_cell_km,
                       const CoverageLabelGrid& covered, const GridSpec& grid,
                       const InterferenceParams& ip, const MpepOptions& opts) {
    if (covered.rows() != grid.rows || covered.cols() != grid.cols)
        throw std::invalid_argument("build_database: labels do not match the grid");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    MpepMap out;
    out.grid = grid;
    out.mpep_dbm = Eigen::MatrixXd::Constant(grid.rows, grid.cols, nan);
    out.space_class.setConstant(grid.rows, grid.cols, static_cast<std::uint8_t>(SpaceClass::Black));
    out.wcrp_x = Eigen::MatrixXd::Constant(grid.rows, grid.cols, nan);
    out.wcrp_y = Eigen::MatrixXd::Constant(grid.rows, grid.cols, nan);

    for (int i = 0; i < grid.rows; ++i) {
        for (int j = 0; j < grid.cols; ++j) {
            Location c = grid.center(i, j);
            if (distance_km(c, cell_bs) > r_cell_km) {
                out.space_class(i, j) = static_cast<std::uint8_t>(SpaceClass::OutOfCell);
                continue;
            }
            MpepEntry e = compute_mpep(c, covered, grid, ip, opts);
            out.mpep_dbm(i, j) = e.mpep_dbm;
            out.space_class(i, j) = static_cast<std::uint8_t>(e.cls);
            if (e.wcrp) {
                out.wcrp_x(i, j) = e.wcrp->x_km;
                out.wcrp_y(i, j) = e.wcrp->y_km;
            }
        }
    }
    return out;
}

MpepMap build_database(const Location& cell_bs, double r_cell_km, const BoundaryModel& model,
                       const GridSpec& grid, const InterferenceParams& ip,
                       const MpepOptions& opts) {
    return build_database(cell_bs, r_cell_km, covered_set(model, grid), grid, ip, opts);
}

void write_mpep_csv(const MpepMap& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "x_km,y_km,mpep_dbm,class,wcrp_x,wcrp_y\n";
    static const char* names[] = {"black", "gray", "white", "outofcell"};
    char buf[240];
    for (int i = 0; i < map.grid.rows; ++i) {
        for (int j = 0; j < map.grid.cols; ++j) {
            Location c = map.grid.center(i, j);
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,", c.x_km, c.y_km);
            out << buf;
            if (std::isnan(map.mpep_dbm(i, j))) {
                out << "NOTX";
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", map.mpep_dbm(i, j));
                out << buf;
            }
            out << ',' << names[map.space_class(i, j)] << ',';
            if (std::isnan(map.wcrp_x(i, j))) {
                out << ",";
            } else {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g", map.wcrp_x(i, j), map.wcrp_y(i, j));
                out << buf;
            }
            out << '\n';
        }
    }
}

}  // namespace tvws
