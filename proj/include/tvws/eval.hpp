#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tvws/scenario.hpp"
#include "tvws/spatial_reuse.hpp"

namespace tvws {

struct BiasReport {
    std::vector<double> mpep_bias_db;  // derived minus oracle, finite-vs-finite grids
    std::vector<double> ip_bias;       // achieved interference probability minus the threshold
    std::size_t in_cell_grids = 0;
    std::size_t both_no_tx = 0;          // sentinel on both sides (bias 0)
    std::size_t conservative_no_tx = 0;  // derived sentinel where the oracle transmits
    std::size_t violating_tx = 0;        // derived transmits where the oracle does not
    std::size_t ip_compliant = 0;        // achieved interference probability within threshold
};

struct SeedOutcome {
    double rse_db = 0.0;
    double detection = 0.0;
    bool svm_bypassed = false;  // single-class labels skip the classifier
    BiasReport bias;
};

// Seed-independent reference side of the comparison, reusable across seeds.
struct GroundTruthRef {
    Eigen::MatrixXd field_dbm;
    CoverageLabelGrid labels;
    MpepMap oracle;
};

GroundTruthRef make_reference(const Config& cfg);

// Full pipeline for one seed: sense, complete, label, detect, build the
// database, compare with the ground-truth reference.
SeedOutcome run_pipeline(const Config& cfg, std::uint64_t seed);
SeedOutcome run_pipeline(const Config& cfg, std::uint64_t seed, const GroundTruthRef& ref);

// Circular protection-region rule with localization error, evaluated per grid.
double baseline_circular_mpep(const Location& dev_loc, double loc_error_max_m, double d_p_km,
                              const Location& tx_loc, const InterferenceParams& ip,
                              std::uint64_t seed);

MpepMap baseline_database(const Config& cfg, std::uint64_t seed);

// Achieved interference probability of a transmit-power map against the
// ground-truth covered set; sentinel entries score zero probability.
BiasReport evaluate_bias(const Config& cfg, const MpepMap& derived, const MpepMap& oracle,
                         const CoverageLabelGrid& truth);

struct RseSweepRow {
    double sampling_rate = 0.0;
    int n_sam = 0;
    double grid_size_m = 0.0;
    double mean_rse_db = 0.0;
    std::vector<double> per_seed;
};

std::vector<RseSweepRow> sweep_rse(const Config& base, const std::vector<double>& rates,
                                   const std::vector<int>& n_sams,
                                   const std::vector<double>& grid_sizes, int seeds);

struct DetectionSweepRow {
    std::string kernel;
    double sampling_rate = 0.0;
    double mean_detection = 0.0;
    std::vector<double> per_seed;
};

std::vector<DetectionSweepRow> sweep_detection(const Config& base,
                                               const std::vector<KernelSpec>& kernels,
                                               const std::vector<double>& rates, int seeds);

void write_rse_csv(const std::vector<RseSweepRow>& rows, const std::string& path);
void write_detection_csv(const std::vector<DetectionSweepRow>& rows, const std::string& path);
void write_cdf_csv(std::vector<double> values, const std::string& path);

}  // namespace tvws
