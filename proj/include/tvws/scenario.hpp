#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tvws/boundary.hpp"
#include "tvws/completion.hpp"
#include "tvws/grid.hpp"
#include "tvws/radio_model.hpp"

namespace tvws {

// Extra mean path attenuation ramping linearly across an x-interval
// (obstruction band); constant along y.
struct BandZone {
    double x0_km = 0.0;
    double x1_km = 0.0;
    double a0_db = 0.0;  // attenuation at x0
    double a1_db = 0.0;  // attenuation at x1
};

struct ShadowFieldSpec {
    std::vector<BandZone> zones;
    double ripple_amp_db = 3.0;  // azimuthal wobble emulating irregular terrain
    double ripple_freq = 5.0;
    double ripple_phase = 0.0;
};

struct Config {
    int scenario = 1;  // 1: boundary crosses the cell; 2: shadowed cell near the tx
    DtvTransmitter tx;
    InterferenceParams interference;
    ShadowFieldSpec shadow;
    Location bs_loc;
    double r_cell_km = 2.0;
    double r_int_km = 2.0;  // nominal interference range fixing the area side
    double d_p_km = 134.2;  // protection radius used by the circular baseline
    GridSpec grid;

    double grid_size_m = 80.0;
    double sampling_rate = 0.5;
    int n_sam = 100;
    int min_count = 10;
    double n0_dbm = -95.2;
    double abnormal_rate = 0.0;
    double abnormal_magnitude_w = 0.0;
    double delta_p_db = 0.0;
    double no_tx_floor_dbm = -60.0;
    bool randomize_shadow = false;
    std::uint64_t seed = 1;
    int seeds = 20;
    double loc_error_max_m = 50.0;

    KernelSpec kernel;
    double svm_c = 10.0;
    int svm_subsample = 2000;
    FpcaConfig fpca;
};

double mean_shadow_at(const ShadowFieldSpec& spec, const Location& loc,
                      const Location& tx_loc);

// Recompute cfg.grid after changing bs_loc, radii or grid_size_m.
void rebuild_grid(Config& cfg);

// Distance at which the mean received power crosses the coverage threshold.
double coverage_contour_km(const DtvTransmitter& tx);

Config scenario_one();
Config scenario_two();

// Flat key=value config text; unknown keys rejected.
Config parse_config(const std::string& text);
Config load_config_file(const std::string& path);
std::string canonical_config_text(const Config& cfg);
std::uint64_t config_digest(const Config& cfg);

Eigen::MatrixXd ground_truth_matrix(const Config& cfg);
CoverageLabelGrid ground_truth_labels(const Eigen::MatrixXd& truth, double p_bar_min);

// Reference MPEP map: per grid center, brute force over every covered grid
// within the worst-case interference range.
MpepMap oracle_mpep(const Config& cfg, const CoverageLabelGrid& truth);

}  // namespace tvws
