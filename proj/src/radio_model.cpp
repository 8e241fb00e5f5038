#include "tvws/radio_model.hpp"

#include <limits>
#include <stdexcept>

namespace tvws {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double gauss_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
}  // namespace

double path_loss_db(double d_km, const PropagationParams& prop) {
    if (!(d_km > 0.0))
        throw std::domain_error("path_loss_db: distance must be positive");
    return 10.0 * prop.alpha * std::log10(d_km) + 20.0 * std::log10(prop.freq_mhz) + 32.45;
}

double q_tail(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double q_tail_inverse(double p) {
    if (!(p > 0.0) || !(p < 1.0))
        throw std::domain_error("q_tail_inverse: p must lie in (0,1)");
    // hot path: grid scans solve for the same threshold over and over
    thread_local double memo_p = -1.0, memo_x = 0.0;
    if (p == memo_p) return memo_x;
    // Newton on q_tail with a bisection bracket as safeguard.
    double lo = -40.0, hi = 40.0;
    double x = 0.0;
    for (int it = 0; it < 200; ++it) {
        double q = q_tail(x);
        if (q > p)
            lo = x;
        else
            hi = x;
        double step = (q - p) / gauss_pdf(x);  // q' = -pdf
        double next = x + step;
        if (!(next > lo) || !(next < hi) || !std::isfinite(next))
            next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-15 * (1.0 + std::abs(x))) {
            x = next;
            break;
        }
        x = next;
    }
    memo_p = p;
    memo_x = x;
    return x;
}

double mean_received_power_dbm(const DtvTransmitter& tx, const Location& loc,
                               double mean_shadow_db) {
    double d = distance_km(tx.loc, loc);
    if (!(d > 0.0))
        throw std::domain_error("mean_received_power_dbm: zero distance to transmitter");
    return tx.power_dbm - path_loss_db(d, tx.prop) - mean_shadow_db;
}

double coverage_threshold_dbm(const DtvTransmitter& tx) {
    return tx.p_min_dbm - tx.prop.sigma_shadow_db * q_tail_inverse(tx.cov_threshold);
}

double coverage_probability(const DtvTransmitter& tx, const Location& loc,
                            double mean_shadow_db) {
    double pbar = mean_received_power_dbm(tx, loc, mean_shadow_db);
    double sigma = tx.prop.sigma_shadow_db;
    if (sigma == 0.0)
        return pbar >= tx.p_min_dbm ? 1.0 : 0.0;
    return q_tail((tx.p_min_dbm - pbar) / sigma);
}

double interference_power_limit_at_km(double d_km, const InterferenceParams& ip) {
    if (!(d_km > 0.0))
        throw std::domain_error("interference_power_limit_at_km: zero distance");
    return ip.i_max_dbm - ip.prop_d2d.sigma_shadow_db * q_tail_inverse(ip.int_threshold) +
           path_loss_db(d_km, ip.prop_d2d) + ip.mean_shadow_d2d_db;
}

double interference_power_limit_dbm(const Location& dev_loc, const Location& rx_loc,
                                    const InterferenceParams& ip) {
    return interference_power_limit_at_km(distance_km(dev_loc, rx_loc), ip);
}

double interference_probability_at_km(double d_km, double tx_power_dbm,
                                      const InterferenceParams& ip) {
    if (!(d_km > 0.0))
        throw std::domain_error("interference_probability_at_km: zero distance");
    double pbar = tx_power_dbm - path_loss_db(d_km, ip.prop_d2d) - ip.mean_shadow_d2d_db;
    double sigma = ip.prop_d2d.sigma_shadow_db;
    if (sigma == 0.0)
        return pbar > ip.i_max_dbm ? 1.0 : 0.0;
    return q_tail((ip.i_max_dbm - pbar) / sigma);
}

double interference_probability(const Location& dev_loc, double tx_power_dbm,
                                const Location& rx_loc, const InterferenceParams& ip) {
    return interference_probability_at_km(distance_km(dev_loc, rx_loc), tx_power_dbm, ip);
}

double worst_case_range_km(const InterferenceParams& ip) {
    // Solve interference_power_limit(d) = p_peak; the limit is linear in log10(d).
    double rhs = ip.p_peak_dbm - ip.i_max_dbm +
                 ip.prop_d2d.sigma_shadow_db * q_tail_inverse(ip.int_threshold) -
                 ip.mean_shadow_d2d_db - 20.0 * std::log10(ip.prop_d2d.freq_mhz) - 32.45;
    return std::pow(10.0, rhs / (10.0 * ip.prop_d2d.alpha));
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watt_to_dbm(double watt) {
    if (!(watt > 0.0))
        throw std::domain_error("watt_to_dbm: power must be positive");
    return 10.0 * std::log10(watt) + 30.0;
}

}  // namespace tvws
