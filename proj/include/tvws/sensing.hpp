#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tvws/grid.hpp"

namespace tvws {

struct SensingReport {
    std::uint32_t device_id = 0;
    Location loc;
    double detector_watts = 0.0;  // energy-detector output (signal + noise)
    double abnormal_watts = 0.0;  // corruption component, 0 for normal reports
};

struct PartialSpectrumMatrix {
    Eigen::MatrixXd values;  // dBm, defined where known
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> known;

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
    std::size_t known_count() const {
        std::size_t n = 0;
        for (int i = 0; i < rows(); ++i)
            for (int j = 0; j < cols(); ++j)
                if (known(i, j)) ++n;
        return n;
    }
};

struct AbnormalSpec {
    double rate = 0.0;
    double magnitude_watts = 0.0;  // impulses drawn uniformly from [0, magnitude]
};

// Draw detector reports at the centers of randomly selected grids: each grid
// is picked with probability sampling_rate and contributes n_sam reports.
std::vector<SensingReport> synthesize_reports(const Eigen::MatrixXd& truth_dbm,
                                              const GridSpec& grid, int n_sam,
                                              double noise_floor_dbm, double sampling_rate,
                                              const AbnormalSpec& abnormal,
                                              std::uint64_t seed);

struct AggregateResult {
    PartialSpectrumMatrix matrix;
    std::size_t dropped = 0;  // reports outside the grid
};

AggregateResult aggregate_to_grid(const std::vector<SensingReport>& reports,
                                  const GridSpec& grid, int min_count,
                                  double noise_floor_dbm);

struct UplinkOverhead {
    double cell_bps = 0.0;
    double device_bps = 0.0;
};

UplinkOverhead uplink_overhead(std::size_t n_reports, double bits_per_report,
                               double period_s, std::size_t devices_per_cell);

void write_reports_csv(const std::vector<SensingReport>& reports, const std::string& path);
std::vector<SensingReport> read_reports_csv(const std::string& path);

}  // namespace tvws
