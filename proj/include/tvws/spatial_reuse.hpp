#pragma once

#include <optional>

#include "tvws/boundary.hpp"
#include "tvws/grid.hpp"

namespace tvws {

struct MpepOptions {
    double no_tx_floor_dbm = -60.0;  // gray entries below this degrade to black
};

// Classify every grid center with the trained boundary model.
CoverageLabelGrid covered_set(const BoundaryModel& model, const GridSpec& grid);

// Covered grid center within the worst-case interference range that tolerates
// the least transmit power from dev_loc; absent when none is in range.
std::optional<Location> wcrp_search(const Location& dev_loc, const CoverageLabelGrid& covered,
                                    const GridSpec& grid, const InterferenceParams& ip);

struct MpepEntry {
    double mpep_dbm = 0.0;  // NaN: no transmission
    SpaceClass cls = SpaceClass::White;
    std::optional<Location> wcrp;
};

MpepEntry compute_mpep(const Location& dev_loc, const CoverageLabelGrid& covered,
                       const GridSpec& grid, const InterferenceParams& ip,
                       const MpepOptions& opts = {});

MpepMap build_database(const Location& cell_bs, double r_cell_km,
                       const CoverageLabelGrid& covered, const GridSpec& grid,
                       const InterferenceParams& ip, const MpepOptions& opts = {});

MpepMap build_database(const Location& cell_bs, double r_cell_km, const BoundaryModel& model,
                       const GridSpec& grid, const InterferenceParams& ip,
                       const MpepOptions& opts = {});

void write_mpep_csv(const MpepMap& map, const std::string& path);

}  // namespace tvws
