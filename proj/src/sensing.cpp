#include "tvws/sensing.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tvws {

std::vector<SensingReport> synthesize_reports(const Eigen::MatrixXd& truth_dbm,
                                              const GridSpec& grid, int n_sam,
                                              double noise_floor_dbm, double sampling_rate,
                                              const AbnormalSpec& abnormal,
                                              std::uint64_t seed) {
    if (truth_dbm.rows() != grid.rows || truth_dbm.cols() != grid.cols)
        throw std::invalid_argument("synthesize_reports: matrix does not match the grid");
    if (n_sam < 1) throw std::invalid_argument("synthesize_reports: n_sam must be at least 1");
    if (!(sampling_rate > 0.0 && sampling_rate <= 1.0))
        throw std::invalid_argument("synthesize_reports: sampling_rate must lie in (0,1]");

    std::mt19937_64 rng(seed);
    std::bernoulli_distribution pick(sampling_rate);
    std::bernoulli_distribution corrupt(abnormal.rate > 0.0 ? abnormal.rate : 0.5);
    std::uniform_real_distribution<double> impulse(0.0, abnormal.magnitude_watts);
    std::normal_distribution<double> unit;

    const double n0 = dbm_to_watt(noise_floor_dbm);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(n_sam));
    std::vector<SensingReport> out;
    std::uint32_t id = 0;
    for (int i = 0; i < grid.rows; ++i) {
        for (int j = 0; j < grid.cols; ++j) {
            if (!pick(rng)) continue;
            Location c = grid.center(i, j);
            double p = dbm_to_watt(truth_dbm(i, j));
            double sigma_v = (p + n0) * inv_sqrt;
            for (int s = 0; s < n_sam; ++s) {
                double v = n0 + sigma_v * unit(rng);
                double a = 0.0;
                if (abnormal.rate > 0.0 && corrupt(rng)) a = impulse(rng);
                out.push_back({id++, c, std::max(p + v, 0.0), a});
            }
        }
    }
    return out;
}

AggregateResult aggregate_to_grid(const std::vector<SensingReport>& reports,
                                  const GridSpec& grid, int min_count,
                                  double noise_floor_dbm) {
    if (min_count < 1) throw std::invalid_argument("aggregate_to_grid: min_count must be at least 1");
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(grid.rows, grid.cols);
    Eigen::MatrixXi count = Eigen::MatrixXi::Zero(grid.rows, grid.cols);

    AggregateResult res;
    for (const auto& r : reports) {
        auto cell = grid.cell_of(r.loc);
        if (!cell) {
            ++res.dropped;
            continue;
        }
        auto [i, j] = *cell;
        sum(i, j) += r.detector_watts + r.abnormal_watts;
        count(i, j) += 1;
    }

    const double n0 = dbm_to_watt(noise_floor_dbm);
    res.matrix.values = Eigen::MatrixXd::Zero(grid.rows, grid.cols);
    res.matrix.known.setZero(grid.rows, grid.cols);
    for (int i = 0; i < grid.rows; ++i) {
        for (int j = 0; j < grid.cols; ++j) {
            if (count(i, j) < min_count) continue;
            double mean = sum(i, j) / count(i, j);
            double signal = std::max(mean - n0, 1e-16);
            res.matrix.values(i, j) = watt_to_dbm(signal);
            res.matrix.known(i, j) = 1;
        }
    }
    return res;
}

UplinkOverhead uplink_overhead(std::size_t n_reports, double bits_per_report,
                               double period_s, std::size_t devices_per_cell) {
    if (n_reports == 0 || devices_per_cell == 0 || !(bits_per_report > 0.0) ||
        !(period_s > 0.0))
        throw std::invalid_argument("uplink_overhead: all inputs must be positive");
    double cell = static_cast<double>(n_reports) * bits_per_report / period_s;
    return {cell, cell / static_cast<double>(devices_per_cell)};
}

void write_reports_csv(const std::vector<SensingReport>& reports, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "device_id,x_km,y_km,detector_watts,abnormal_watts\n";
    char buf[160];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%u,%.17g,%.17g,%.17g,%.17g\n", r.device_id,
                      r.loc.x_km, r.loc.y_km, r.detector_watts, r.abnormal_watts);
        out << buf;
    }
}

std::vector<SensingReport> read_reports_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) ||
        line != "device_id,x_km,y_km,detector_watts,abnormal_watts")
        throw std::runtime_error("reports csv: missing or wrong header in " + path);
    std::vector<SensingReport> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        SensingReport r;
        unsigned long id = 0;
        if (std::sscanf(line.c_str(), "%lu,%lg,%lg,%lg,%lg", &id, &r.loc.x_km, &r.loc.y_km,
                        &r.detector_watts, &r.abnormal_watts) != 5)
            throw std::runtime_error("reports csv: bad row at line " + std::to_string(lineno));
        r.device_id = static_cast<std::uint32_t>(id);
        out.push_back(r);
    }
    return out;
}

}  // namespace tvws
