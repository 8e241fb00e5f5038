#include "tvws/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tvws {

GroundTruthRef make_reference(const Config& cfg) {
    GroundTruthRef ref;
    ref.field_dbm = ground_truth_matrix(cfg);
    ref.labels = ground_truth_labels(ref.field_dbm, coverage_threshold_dbm(cfg.tx));
    ref.oracle = oracle_mpep(cfg, ref.labels);
    return ref;
}

SeedOutcome run_pipeline(const Config& cfg, std::uint64_t seed) {
    return run_pipeline(cfg, seed, make_reference(cfg));
}

SeedOutcome run_pipeline(const Config& cfg, std::uint64_t seed, const GroundTruthRef& ref) {
    if (ref.labels.rows() != cfg.grid.rows || ref.labels.cols() != cfg.grid.cols)
        throw std::invalid_argument("run_pipeline: reference does not match the config grid");

    SeedOutcome out;
    AbnormalSpec abnormal{cfg.abnormal_rate, cfg.abnormal_magnitude_w};
    auto reports = synthesize_reports(ref.field_dbm, cfg.grid, cfg.n_sam, cfg.n0_dbm,
                                      cfg.sampling_rate, abnormal, seed);
    auto agg = aggregate_to_grid(reports, cfg.grid, cfg.min_count, cfg.n0_dbm);
    auto fpca = fpca_complete(agg.matrix, cfg.fpca);
    out.rse_db = rse_db(fpca.matrix, ref.field_dbm);

    double p_bar_min = coverage_threshold_dbm(cfg.tx);
    CoverageLabelGrid hyp = hypothesis_labels(fpca.matrix, p_bar_min, cfg.delta_p_db);
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < hyp.rows() && !(has_pos && has_neg); ++i)
        for (int j = 0; j < hyp.cols(); ++j)
            (hyp.labels(i, j) == 1 ? has_pos : has_neg) = true;

    CoverageLabelGrid detected;
    if (has_pos && has_neg) {
        SvmTrainOptions topts;
        topts.c_reg = cfg.svm_c;
        topts.subsample = cfg.svm_subsample;
        BoundaryModel model = train_svm(hyp, cfg.grid, cfg.kernel, topts);
        detected = covered_set(model, cfg.grid);
    } else {
        detected = hyp;  // one-sided labels, nothing for a classifier to separate
        out.svm_bypassed = true;
    }
    out.detection = detection_probability(detected, ref.labels);

    MpepOptions mopts;
    mopts.no_tx_floor_dbm = cfg.no_tx_floor_dbm;
    MpepMap derived =
        build_database(cfg.bs_loc, cfg.r_cell_km, detected, cfg.grid, cfg.interference, mopts);
    out.bias = evaluate_bias(cfg, derived, ref.oracle, ref.labels);
    return out;
}

namespace {

// Closest covered grid center to (i,j), by expanding square rings; a ring at
// index r cannot beat a hit closer than r cell sides.
std::optional<Location> nearest_covered(const CoverageLabelGrid& truth, const GridSpec& g,
                                        int i, int j) {
    const double cell = g.cell_km();
    const Location at = g.center(i, j);
    double best = std::numeric_limits<double>::infinity();
    Location best_loc;
    bool found = false;
    int max_ring = std::max(g.rows, g.cols);
    for (int r = 0; r <= max_ring; ++r) {
        if (found && r * cell > best) break;
        auto consider = [&](int k, int l) {
            if (k < 0 || k >= g.rows || l < 0 || l >= g.cols) return;
            if (!truth.covered(k, l)) return;
            Location c = g.center(k, l);
            double d = distance_km(at, c);
            if (d < best) {
                best = d;
                best_loc = c;
                found = true;
            }
        };
        if (r == 0) {
            consider(i, j);
            continue;
        }
        for (int l = j - r; l <= j + r; ++l) {
            consider(i - r, l);
            consider(i + r, l);
        }
        for (int k = i - r + 1; k <= i + r - 1; ++k) {
            consider(k, j - r);
            consider(k, j + r);
        }
    }
    if (!found) return std::nullopt;
    return best_loc;
}

}  // namespace

BiasReport evaluate_bias(const Config& cfg, const MpepMap& derived, const MpepMap& oracle,
                         const CoverageLabelGrid& truth) {
    const GridSpec& g = cfg.grid;
    if (derived.grid.rows != g.rows || derived.grid.cols != g.cols ||
        oracle.mpep_dbm.rows() != g.rows || oracle.mpep_dbm.cols() != g.cols ||
        truth.rows() != g.rows || truth.cols() != g.cols)
        throw std::invalid_argument("evaluate_bias: dimension mismatch");

    BiasReport rep;
    const double nu = cfg.interference.int_threshold;
    for (int i = 0; i < g.rows; ++i) {
        for (int j = 0; j < g.cols; ++j) {
            if (derived.cls(i, j) == SpaceClass::OutOfCell) continue;
            ++rep.in_cell_grids;
            bool d_silent = derived.no_tx(i, j);
            bool o_silent = oracle.no_tx(i, j);
            if (d_silent && o_silent) {
                ++rep.both_no_tx;
                rep.mpep_bias_db.push_back(0.0);
            } else if (d_silent) {
                ++rep.conservative_no_tx;
            } else if (o_silent) {
                ++rep.violating_tx;
            } else {
                rep.mpep_bias_db.push_back(derived.mpep_dbm(i, j) - oracle.mpep_dbm(i, j));
            }

            double ip = 0.0;
            if (!d_silent) {
                if (truth.covered(i, j)) {
                    ip = 1.0;  // transmitting inside real coverage
                } else if (auto rx = nearest_covered(truth, g, i, j)) {
                    ip = interference_probability(g.center(i, j), derived.mpep_dbm(i, j), *rx,
                                                  cfg.interference);
                }
            }
            rep.ip_bias.push_back(ip - nu);
            if (ip <= nu + 1e-9) ++rep.ip_compliant;
        }
    }
    return rep;
}

double baseline_circular_mpep(const Location& dev_loc, double loc_error_max_m, double d_p_km,
                              const Location& tx_loc, const InterferenceParams& ip,
                              std::uint64_t seed) {
    constexpr double kTwoPi = 6.283185307179586;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    std::uniform_real_distribution<double> radius(0.0, loc_error_max_m);
    double th = angle(rng);
    double err_km = radius(rng) / 1000.0;
    Location pert{dev_loc.x_km + err_km * std::cos(th), dev_loc.y_km + err_km * std::sin(th)};
    double d = distance_km(pert, tx_loc);
    if (d <= d_p_km) return std::numeric_limits<double>::quiet_NaN();
    return std::min(ip.p_peak_dbm, interference_power_limit_at_km(d - d_p_km, ip));
}

MpepMap baseline_database(const Config& cfg, std::uint64_t seed) {
    const GridSpec& g = cfg.grid;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    MpepMap out;
    out.grid = g;
    out.mpep_dbm = Eigen::MatrixXd::Constant(g.rows, g.cols, nan);
    out.space_class.setConstant(g.rows, g.cols, static_cast<std::uint8_t>(SpaceClass::Black));
    out.wcrp_x = Eigen::MatrixXd::Constant(g.rows, g.cols, nan);
    out.wcrp_y = Eigen::MatrixXd::Constant(g.rows, g.cols, nan);

    for (int i = 0; i < g.rows; ++i) {
        for (int j = 0; j < g.cols; ++j) {
            Location c = g.center(i, j);
            if (distance_km(c, cfg.bs_loc) > cfg.r_cell_km) {
                out.space_class(i, j) = static_cast<std::uint8_t>(SpaceClass::OutOfCell);
                continue;
            }
            std::uint64_t cell_seed =
                seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(i) * g.cols + j + 1));
            double mpep = baseline_circular_mpep(c, cfg.loc_error_max_m, cfg.d_p_km, cfg.tx.loc,
                                                 cfg.interference, cell_seed);
            if (std::isnan(mpep)) continue;
            out.mpep_dbm(i, j) = mpep;
            if (mpep >= cfg.interference.p_peak_dbm) {
                out.space_class(i, j) = static_cast<std::uint8_t>(SpaceClass::White);
            } else {
                out.space_class(i, j) = static_cast<std::uint8_t>(SpaceClass::Gray);
                // binding point of the circular keep-out around the transmitter
                double d = distance_km(c, cfg.tx.loc);
                if (d > 0.0) {
                    double f = cfg.d_p_km / d;
                    out.wcrp_x(i, j) = cfg.tx.loc.x_km + f * (c.x_km - cfg.tx.loc.x_km);
                    out.wcrp_y(i, j) = cfg.tx.loc.y_km + f * (c.y_km - cfg.tx.loc.y_km);
                }
            }
        }
    }
    return out;
}

std::vector<RseSweepRow> sweep_rse(const Config& base, const std::vector<double>& rates,
                                   const std::vector<int>& n_sams,
                                   const std::vector<double>& grid_sizes, int seeds) {
    if (seeds < 1) throw std::invalid_argument("sweep_rse: seeds must be >= 1");
    std::vector<RseSweepRow> rows;
    for (double gs : grid_sizes) {
        Config cfg = base;
        cfg.grid_size_m = gs;
        rebuild_grid(cfg);
        Eigen::MatrixXd truth = ground_truth_matrix(cfg);
        for (int ns : n_sams) {
            cfg.n_sam = ns;
            for (double rate : rates) {
                cfg.sampling_rate = rate;
                RseSweepRow row;
                row.sampling_rate = rate;
                row.n_sam = ns;
                row.grid_size_m = gs;
                for (int s = 0; s < seeds; ++s) {
                    AbnormalSpec abnormal{cfg.abnormal_rate, cfg.abnormal_magnitude_w};
                    auto reports = synthesize_reports(truth, cfg.grid, ns, cfg.n0_dbm, rate,
                                                      abnormal, cfg.seed + s);
                    auto agg = aggregate_to_grid(reports, cfg.grid, cfg.min_count, cfg.n0_dbm);
                    auto fpca = fpca_complete(agg.matrix, cfg.fpca);
                    row.per_seed.push_back(rse_db(fpca.matrix, truth));
                }
                row.mean_rse_db =
                    std::accumulate(row.per_seed.begin(), row.per_seed.end(), 0.0) / seeds;
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

namespace {

std::string kernel_tag(const KernelSpec& k) {
    switch (k.kind) {
        case KernelKind::Linear:
            return "linear";
        case KernelKind::Polynomial:
            return "poly" + std::to_string(k.poly_degree);
        case KernelKind::Rbf:
            return "rbf";
    }
    return "unknown";
}

}  // namespace

std::vector<DetectionSweepRow> sweep_detection(const Config& base,
                                               const std::vector<KernelSpec>& kernels,
                                               const std::vector<double>& rates, int seeds) {
    if (seeds < 1) throw std::invalid_argument("sweep_detection: seeds must be >= 1");
    Eigen::MatrixXd truth = ground_truth_matrix(base);
    double p_bar_min = coverage_threshold_dbm(base.tx);
    CoverageLabelGrid truth_labels = ground_truth_labels(truth, p_bar_min);

    std::vector<DetectionSweepRow> rows;
    for (const KernelSpec& kernel : kernels) {
        for (double rate : rates) {
            DetectionSweepRow row;
            row.kernel = kernel_tag(kernel);
            row.sampling_rate = rate;
            for (int s = 0; s < seeds; ++s) {
                AbnormalSpec abnormal{base.abnormal_rate, base.abnormal_magnitude_w};
                auto reports = synthesize_reports(truth, base.grid, base.n_sam, base.n0_dbm,
                                                  rate, abnormal, base.seed + s);
                auto agg = aggregate_to_grid(reports, base.grid, base.min_count, base.n0_dbm);
                auto fpca = fpca_complete(agg.matrix, base.fpca);
                CoverageLabelGrid hyp = hypothesis_labels(fpca.matrix, p_bar_min, base.delta_p_db);
                bool has_pos = false, has_neg = false;
                for (int i = 0; i < hyp.rows() && !(has_pos && has_neg); ++i)
                    for (int j = 0; j < hyp.cols(); ++j)
                        (hyp.labels(i, j) == 1 ? has_pos : has_neg) = true;
                CoverageLabelGrid detected;
                if (has_pos && has_neg) {
                    SvmTrainOptions topts;
                    topts.c_reg = base.svm_c;
                    topts.subsample = base.svm_subsample;
                    BoundaryModel model = train_svm(hyp, base.grid, kernel, topts);
                    detected = covered_set(model, base.grid);
                } else {
                    detected = hyp;
                }
                row.per_seed.push_back(detection_probability(detected, truth_labels));
            }
            row.mean_detection =
                std::accumulate(row.per_seed.begin(), row.per_seed.end(), 0.0) / seeds;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_rse_csv(const std::vector<RseSweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "sampling_rate,n_sam,grid_size_m,mean_rse_db\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.10g,%d,%.10g,%.10g\n", r.sampling_rate, r.n_sam,
                      r.grid_size_m, r.mean_rse_db);
        out << buf;
    }
}

void write_detection_csv(const std::vector<DetectionSweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "kernel,sampling_rate,mean_detection\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g\n", r.kernel.c_str(), r.sampling_rate,
                      r.mean_detection);
        out << buf;
    }
}

void write_cdf_csv(std::vector<double> values, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "bias,cdf\n";
    std::sort(values.begin(), values.end());
    char buf[96];
    for (std::size_t t = 0; t < values.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g\n", values[t],
                      static_cast<double>(t + 1) / values.size());
        out << buf;
    }
}

}  // namespace tvws
