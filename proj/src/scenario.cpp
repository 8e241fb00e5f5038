#include "tvws/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "tvws/digest.hpp"

namespace tvws {

double mean_shadow_at(const ShadowFieldSpec& spec, const Location& loc,
                      const Location& tx_loc) {
    double s = 0.0;
    for (const auto& z : spec.zones) {
        if (z.x1_km <= z.x0_km) continue;
        if (loc.x_km >= z.x0_km && loc.x_km <= z.x1_km) {
            double t = (loc.x_km - z.x0_km) / (z.x1_km - z.x0_km);
            s += z.a0_db + t * (z.a1_db - z.a0_db);
        }
    }
    if (spec.ripple_amp_db != 0.0) {
        double theta = std::atan2(loc.y_km - tx_loc.y_km, loc.x_km - tx_loc.x_km);
        s += spec.ripple_amp_db * std::sin(spec.ripple_freq * theta + spec.ripple_phase);
    }
    return s;
}

double coverage_contour_km(const DtvTransmitter& tx) {
    double thr = coverage_threshold_dbm(tx);
    double lo = 1e-3, hi = 1e6;
    if (mean_received_power_dbm(tx, {tx.loc.x_km + lo, tx.loc.y_km}, 0.0) < thr)
        throw std::domain_error("coverage_contour_km: transmitter below threshold everywhere");
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (mean_received_power_dbm(tx, {tx.loc.x_km + mid, tx.loc.y_km}, 0.0) > thr)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

void rebuild_grid(Config& cfg) {
    double side = cell_area_side_km(cfg.r_cell_km, cfg.r_int_km);
    cfg.grid = make_grid(cfg.bs_loc, side, cfg.grid_size_m);
}

Config scenario_one() {
    Config cfg;
    cfg.scenario = 1;
    cfg.bs_loc = {coverage_contour_km(cfg.tx), 0.0};
    rebuild_grid(cfg);
    return cfg;
}

Config scenario_two() {
    Config cfg;
    cfg.scenario = 2;
    cfg.shadow.zones.push_back({116.2, 120.2, 20.0, 0.0});
    cfg.bs_loc = {119.2, 0.0};
    rebuild_grid(cfg);
    return cfg;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0' || !std::isfinite(d))
        throw std::runtime_error("config: bad numeric value for '" + key + "': " + v);
    return d;
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw std::runtime_error("config: bad integer value for '" + key + "': " + v);
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw std::runtime_error("config: bad unsigned value for '" + key + "': " + v);
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw std::runtime_error("config: bad boolean value for '" + key + "': " + v);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

BandZone& first_zone(Config& cfg) {
    if (cfg.shadow.zones.empty()) cfg.shadow.zones.push_back({});
    return cfg.shadow.zones.front();
}

void validate(const Config& cfg) {
    auto fail = [](const std::string& why) { throw std::runtime_error("config: " + why); };
    if (cfg.scenario != 1 && cfg.scenario != 2) fail("scenario must be 1 or 2");
    if (!(cfg.tx.prop.freq_mhz > 0.0)) fail("f_mhz must be positive");
    if (!(cfg.tx.prop.alpha > 0.0) || !(cfg.interference.prop_d2d.alpha > 0.0))
        fail("path-loss exponents must be positive");
    if (!(cfg.tx.prop.sigma_shadow_db >= 0.0)) fail("sigma_db must be nonnegative");
    if (!(cfg.tx.cov_threshold > 0.0 && cfg.tx.cov_threshold < 1.0))
        fail("nu_cov must lie in (0,1)");
    if (!(cfg.interference.int_threshold > 0.0 && cfg.interference.int_threshold < 1.0))
        fail("nu_int must lie in (0,1)");
    if (!(cfg.r_cell_km > 0.0) || !(cfg.r_int_km > 0.0)) fail("radii must be positive");
    if (!(cfg.d_p_km > 0.0)) fail("d_p_km must be positive");
    if (!(cfg.grid_size_m > 0.0)) fail("grid_size_m must be positive");
    if (!(cfg.sampling_rate > 0.0 && cfg.sampling_rate <= 1.0))
        fail("sampling_rate must lie in (0,1]");
    if (cfg.n_sam < 1) fail("n_sam must be at least 1");
    if (cfg.min_count < 1) fail("min_count must be at least 1");
    if (!(cfg.abnormal_rate >= 0.0 && cfg.abnormal_rate <= 1.0))
        fail("abnormal_rate must lie in [0,1]");
    if (!(cfg.abnormal_magnitude_w >= 0.0)) fail("abnormal_magnitude_w must be nonnegative");
    if (!(cfg.shadow.ripple_amp_db >= 0.0)) fail("ripple_amp_db must be nonnegative");
    for (const auto& z : cfg.shadow.zones) {
        if (z.x1_km < z.x0_km) fail("shadow band must have x1 >= x0");
        if (z.a0_db < 0.0 || z.a1_db < 0.0) fail("shadow band attenuation must be nonnegative");
    }
    if (!(cfg.svm_c > 0.0)) fail("svm_c must be positive");
    if (cfg.svm_subsample < 4) fail("svm_subsample must be at least 4");
    if (cfg.kernel.poly_degree < 1) fail("poly_degree must be at least 1");
    if (!(cfg.kernel.poly_c >= 0.0)) fail("poly_c must be nonnegative");
    if (!(cfg.kernel.rbf_sigma >= 0.0)) fail("rbf_sigma must be nonnegative");
    if (!(cfg.fpca.tau_decay > 0.0 && cfg.fpca.tau_decay < 1.0))
        fail("fpca_tau_decay must lie in (0,1)");
    if (!(cfg.fpca.step_delta > 0.0 && cfg.fpca.step_delta < 2.0))
        fail("fpca_step_delta must lie in (0,2)");
    if (!(cfg.fpca.stop_beta > 0.0)) fail("fpca_stop_beta must be positive");
    if (cfg.fpca.max_iters_per_stage < 1) fail("fpca_max_iters must be at least 1");
    if (cfg.seeds < 1) fail("seeds must be at least 1");
    if (!(cfg.loc_error_max_m >= 0.0)) fail("loc_error_max_m must be nonnegative");
}

}  // namespace

Config parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno) +
                                     " is not key=value: " + t);
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key.empty()) throw std::runtime_error("config: empty key on line " + std::to_string(lineno));
        if (kv.count(key)) throw std::runtime_error("config: duplicate key '" + key + "'");
        kv[key] = val;
    }

    int scen = 1;
    if (auto it = kv.find("scenario"); it != kv.end()) {
        const std::string& v = it->second;
        if (v == "1" || v == "I" || v == "i")
            scen = 1;
        else if (v == "2" || v == "II" || v == "ii")
            scen = 2;
        else
            throw std::runtime_error("config: scenario must be 1/I or 2/II, got: " + v);
    }
    Config cfg = scen == 1 ? scenario_one() : scenario_two();

    bool bs_set = false;
    for (const auto& [key, val] : kv) {
        if (key == "scenario") {
        } else if (key == "seed") {
            cfg.seed = parse_u64(key, val);
        } else if (key == "seeds") {
            cfg.seeds = static_cast<int>(parse_int(key, val));
        } else if (key == "f_mhz") {
            double f = parse_double(key, val);
            cfg.tx.prop.freq_mhz = f;
            cfg.interference.prop_d2d.freq_mhz = f;
        } else if (key == "p_dtv_dbm") {
            cfg.tx.power_dbm = parse_double(key, val);
        } else if (key == "dtv_x_km") {
            cfg.tx.loc.x_km = parse_double(key, val);
        } else if (key == "dtv_y_km") {
            cfg.tx.loc.y_km = parse_double(key, val);
        } else if (key == "alpha_dtv") {
            cfg.tx.prop.alpha = parse_double(key, val);
        } else if (key == "alpha_d2d") {
            cfg.interference.prop_d2d.alpha = parse_double(key, val);
        } else if (key == "sigma_db") {
            double s = parse_double(key, val);
            cfg.tx.prop.sigma_shadow_db = s;
            cfg.interference.prop_d2d.sigma_shadow_db = s;
        } else if (key == "p_min_dbm") {
            cfg.tx.p_min_dbm = parse_double(key, val);
        } else if (key == "nu_cov") {
            cfg.tx.cov_threshold = parse_double(key, val);
        } else if (key == "i_max_dbm") {
            cfg.interference.i_max_dbm = parse_double(key, val);
        } else if (key == "nu_int") {
            cfg.interference.int_threshold = parse_double(key, val);
        } else if (key == "p_peak_dbm") {
            cfg.interference.p_peak_dbm = parse_double(key, val);
        } else if (key == "mean_shadow_d2d_db") {
            cfg.interference.mean_shadow_d2d_db = parse_double(key, val);
        } else if (key == "n0_dbm") {
            cfg.n0_dbm = parse_double(key, val);
        } else if (key == "d_p_km") {
            cfg.d_p_km = parse_double(key, val);
        } else if (key == "r_cell_km") {
            cfg.r_cell_km = parse_double(key, val);
        } else if (key == "r_int_km") {
            cfg.r_int_km = parse_double(key, val);
        } else if (key == "bs_x_km") {
            cfg.bs_loc.x_km = parse_double(key, val);
            bs_set = true;
        } else if (key == "bs_y_km") {
            cfg.bs_loc.y_km = parse_double(key, val);
            bs_set = true;
        } else if (key == "grid_size_m") {
            cfg.grid_size_m = parse_double(key, val);
        } else if (key == "sampling_rate") {
            cfg.sampling_rate = parse_double(key, val);
        } else if (key == "n_sam") {
            cfg.n_sam = static_cast<int>(parse_int(key, val));
        } else if (key == "min_count") {
            cfg.min_count = static_cast<int>(parse_int(key, val));
        } else if (key == "abnormal_rate") {
            cfg.abnormal_rate = parse_double(key, val);
        } else if (key == "abnormal_magnitude_w") {
            cfg.abnormal_magnitude_w = parse_double(key, val);
        } else if (key == "delta_p_db") {
            cfg.delta_p_db = parse_double(key, val);
        } else if (key == "no_tx_floor_dbm") {
            cfg.no_tx_floor_dbm = parse_double(key, val);
        } else if (key == "randomize_shadow") {
            cfg.randomize_shadow = parse_bool(key, val);
        } else if (key == "ripple_amp_db") {
            cfg.shadow.ripple_amp_db = parse_double(key, val);
        } else if (key == "ripple_freq") {
            cfg.shadow.ripple_freq = parse_double(key, val);
        } else if (key == "ripple_phase") {
            cfg.shadow.ripple_phase = parse_double(key, val);
        } else if (key == "shadow_band_x0_km") {
            first_zone(cfg).x0_km = parse_double(key, val);
        } else if (key == "shadow_band_x1_km") {
            first_zone(cfg).x1_km = parse_double(key, val);
        } else if (key == "shadow_band_a0_db") {
            first_zone(cfg).a0_db = parse_double(key, val);
        } else if (key == "shadow_band_a1_db") {
            first_zone(cfg).a1_db = parse_double(key, val);
        } else if (key == "kernel") {
            if (val == "linear")
                cfg.kernel.kind = KernelKind::Linear;
            else if (val == "poly")
                cfg.kernel.kind = KernelKind::Polynomial;
            else if (val == "rbf")
                cfg.kernel.kind = KernelKind::Rbf;
            else
                throw std::runtime_error("config: kernel must be linear, poly, or rbf: " + val);
        } else if (key == "svm_c") {
            cfg.svm_c = parse_double(key, val);
        } else if (key == "svm_subsample") {
            cfg.svm_subsample = static_cast<int>(parse_int(key, val));
        } else if (key == "poly_c") {
            cfg.kernel.poly_c = parse_double(key, val);
        } else if (key == "poly_degree") {
            cfg.kernel.poly_degree = static_cast<int>(parse_int(key, val));
        } else if (key == "rbf_sigma") {
            cfg.kernel.rbf_sigma = parse_double(key, val);
        } else if (key == "loc_error_max_m") {
            cfg.loc_error_max_m = parse_double(key, val);
        } else if (key == "fpca_tau_decay") {
            cfg.fpca.tau_decay = parse_double(key, val);
        } else if (key == "fpca_tau_init_factor") {
            cfg.fpca.tau_init_factor = parse_double(key, val);
        } else if (key == "fpca_tau_floor_factor") {
            cfg.fpca.tau_floor_factor = parse_double(key, val);
        } else if (key == "fpca_step_delta") {
            cfg.fpca.step_delta = parse_double(key, val);
        } else if (key == "fpca_stop_beta") {
            cfg.fpca.stop_beta = parse_double(key, val);
        } else if (key == "fpca_max_iters") {
            cfg.fpca.max_iters_per_stage = static_cast<int>(parse_int(key, val));
        } else if (key == "fpca_max_rank") {
            cfg.fpca.max_rank = static_cast<int>(parse_int(key, val));
        } else {
            throw std::runtime_error("config: unknown key '" + key + "'");
        }
    }

    if (!bs_set && cfg.scenario == 1) cfg.bs_loc = {coverage_contour_km(cfg.tx), 0.0};
    rebuild_grid(cfg);
    validate(cfg);
    return cfg;
}

Config load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string canonical_config_text(const Config& cfg) {
    BandZone z;
    if (!cfg.shadow.zones.empty()) z = cfg.shadow.zones.front();
    const char* kernel = cfg.kernel.kind == KernelKind::Linear       ? "linear"
                         : cfg.kernel.kind == KernelKind::Polynomial ? "poly"
                                                                     : "rbf";
    std::ostringstream o;
    o << "abnormal_magnitude_w=" << fmt(cfg.abnormal_magnitude_w) << '\n'
      << "abnormal_rate=" << fmt(cfg.abnormal_rate) << '\n'
      << "alpha_d2d=" << fmt(cfg.interference.prop_d2d.alpha) << '\n'
      << "alpha_dtv=" << fmt(cfg.tx.prop.alpha) << '\n'
      << "bs_x_km=" << fmt(cfg.bs_loc.x_km) << '\n'
      << "bs_y_km=" << fmt(cfg.bs_loc.y_km) << '\n'
      << "d_p_km=" << fmt(cfg.d_p_km) << '\n'
      << "delta_p_db=" << fmt(cfg.delta_p_db) << '\n'
      << "dtv_x_km=" << fmt(cfg.tx.loc.x_km) << '\n'
      << "dtv_y_km=" << fmt(cfg.tx.loc.y_km) << '\n'
      << "f_mhz=" << fmt(cfg.tx.prop.freq_mhz) << '\n'
      << "fpca_max_iters=" << cfg.fpca.max_iters_per_stage << '\n'
      << "fpca_max_rank=" << cfg.fpca.max_rank << '\n'
      << "fpca_step_delta=" << fmt(cfg.fpca.step_delta) << '\n'
      << "fpca_stop_beta=" << fmt(cfg.fpca.stop_beta) << '\n'
      << "fpca_tau_decay=" << fmt(cfg.fpca.tau_decay) << '\n'
      << "fpca_tau_floor_factor=" << fmt(cfg.fpca.tau_floor_factor) << '\n'
      << "fpca_tau_init_factor=" << fmt(cfg.fpca.tau_init_factor) << '\n'
      << "grid_size_m=" << fmt(cfg.grid_size_m) << '\n'
      << "i_max_dbm=" << fmt(cfg.interference.i_max_dbm) << '\n'
      << "kernel=" << kernel << '\n'
      << "loc_error_max_m=" << fmt(cfg.loc_error_max_m) << '\n'
      << "mean_shadow_d2d_db=" << fmt(cfg.interference.mean_shadow_d2d_db) << '\n'
      << "min_count=" << cfg.min_count << '\n'
      << "n0_dbm=" << fmt(cfg.n0_dbm) << '\n'
      << "n_sam=" << cfg.n_sam << '\n'
      << "no_tx_floor_dbm=" << fmt(cfg.no_tx_floor_dbm) << '\n'
      << "nu_cov=" << fmt(cfg.tx.cov_threshold) << '\n'
      << "nu_int=" << fmt(cfg.interference.int_threshold) << '\n'
      << "p_dtv_dbm=" << fmt(cfg.tx.power_dbm) << '\n'
      << "p_min_dbm=" << fmt(cfg.tx.p_min_dbm) << '\n'
      << "p_peak_dbm=" << fmt(cfg.interference.p_peak_dbm) << '\n'
      << "poly_c=" << fmt(cfg.kernel.poly_c) << '\n'
      << "poly_degree=" << cfg.kernel.poly_degree << '\n'
      << "r_cell_km=" << fmt(cfg.r_cell_km) << '\n'
      << "r_int_km=" << fmt(cfg.r_int_km) << '\n'
      << "randomize_shadow=" << (cfg.randomize_shadow ? 1 : 0) << '\n'
      << "rbf_sigma=" << fmt(cfg.kernel.rbf_sigma) << '\n'
      << "ripple_amp_db=" << fmt(cfg.shadow.ripple_amp_db) << '\n'
      << "ripple_freq=" << fmt(cfg.shadow.ripple_freq) << '\n'
      << "ripple_phase=" << fmt(cfg.shadow.ripple_phase) << '\n'
      << "sampling_rate=" << fmt(cfg.sampling_rate) << '\n'
      << "scenario=" << cfg.scenario << '\n'
      << "seed=" << cfg.seed << '\n'
      << "seeds=" << cfg.seeds << '\n'
      << "shadow_band_a0_db=" << fmt(z.a0_db) << '\n'
      << "shadow_band_a1_db=" << fmt(z.a1_db) << '\n'
      << "shadow_band_x0_km=" << fmt(z.x0_km) << '\n'
      << "shadow_band_x1_km=" << fmt(z.x1_km) << '\n'
      << "sigma_db=" << fmt(cfg.tx.prop.sigma_shadow_db) << '\n'
      << "svm_c=" << fmt(cfg.svm_c) << '\n'
      << "svm_subsample=" << cfg.svm_subsample << '\n';
    return o.str();
}

std::uint64_t config_digest(const Config& cfg) {
    std::string text = canonical_config_text(cfg);
    return fnv1a64(text.data(), text.size());
}

Eigen::MatrixXd ground_truth_matrix(const Config& cfg) {
    const GridSpec& g = cfg.grid;
    Eigen::MatrixXd out(g.rows, g.cols);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> draw(0.0, cfg.tx.prop.sigma_shadow_db);
    for (int i = 0; i < g.rows; ++i) {
        for (int j = 0; j < g.cols; ++j) {
            Location c = g.center(i, j);
            double shadow = mean_shadow_at(cfg.shadow, c, cfg.tx.loc);
            if (cfg.randomize_shadow) shadow += draw(rng);
            out(i, j) = mean_received_power_dbm(cfg.tx, c, shadow);
        }
    }
    return out;
}

CoverageLabelGrid ground_truth_labels(const Eigen::MatrixXd& truth, double p_bar_min) {
    CoverageLabelGrid out;
    out.labels.resize(truth.rows(), truth.cols());
    for (int i = 0; i < truth.rows(); ++i)
        for (int j = 0; j < truth.cols(); ++j)
            out.labels(i, j) = truth(i, j) >= p_bar_min ? -1 : 1;
    return out;
}

MpepMap oracle_mpep(const Config& cfg, const CoverageLabelGrid& truth) {
    const GridSpec& g = cfg.grid;
    if (truth.rows() != g.rows || truth.cols() != g.cols)
        throw std::invalid_argument("oracle_mpep: labels do not match the grid");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    MpepMap out;
    out.grid = g;
    out.mpep_dbm = Eigen::MatrixXd::Constant(g.rows, g.cols, nan);
    out.space_class.setConstant(g.rows, g.cols, static_cast<std::uint8_t>(SpaceClass::Black));
    out.wcrp_x = Eigen::MatrixXd::Constant(g.rows, g.cols, nan);
    out.wcrp_y = Eigen::MatrixXd::Constant(g.rows, g.cols, nan);

    const double range = worst_case_range_km(cfg.interference);
    const double p_peak = cfg.interference.p_peak_dbm;
    for (int i = 0; i < g.rows; ++i) {
        for (int j = 0; j < g.cols; ++j) {
            if (truth.covered(i, j)) continue;  // stays black
            Location dev = g.center(i, j);
            double best = std::numeric_limits<double>::infinity();
            Location best_loc;
            bool found = false;
            for (int k = 0; k < g.rows; ++k) {
                for (int l = 0; l < g.cols; ++l) {
                    if (!truth.covered(k, l)) continue;
                    Location rx = g.center(k, l);
                    double d = distance_km(dev, rx);
                    if (d > range) continue;
                    double lim = interference_power_limit_dbm(dev, rx, cfg.interference);
                    if (lim < best) {
                        best = lim;
                        best_loc = rx;
                        found = true;
                    }
                }
            }
            if (!found || best >= p_peak) {
                out.mpep_dbm(i, j) = p_peak;
                out.space_class(i, j) = static_cast<std::uint8_t>(SpaceClass::White);
            } else if (best <= cfg.no_tx_floor_dbm) {
                // stays black: the permitted power is uselessly small
            } else {
                out.mpep_dbm(i, j) = best;
                out.space_class(i, j) = static_cast<std::uint8_t>(SpaceClass::Gray);
                out.wcrp_x(i, j) = best_loc.x_km;
                out.wcrp_y(i, j) = best_loc.y_km;
            }
        }
    }
    return out;
}

}  // namespace tvws
