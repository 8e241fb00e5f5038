#pragma once

#include <cmath>

namespace tvws {

struct Location {
    double x_km = 0.0;
    double y_km = 0.0;
};

inline double distance_km(const Location& a, const Location& b) {
    return std::hypot(a.x_km - b.x_km, a.y_km - b.y_km);
}

struct PropagationParams {
    double alpha = 4.0;            // path-loss exponent
    double freq_mhz = 615.0;
    double sigma_shadow_db = 5.5;  // shadowing spread around the local mean
};

struct DtvTransmitter {
    Location loc;
    double power_dbm = 90.0;
    double p_min_dbm = -92.2;      // minimum power a DTV receiver can decode
    double cov_threshold = 0.9;    // required coverage probability
    PropagationParams prop;
};

struct InterferenceParams {
    double i_max_dbm = -98.2;      // max tolerable interference at a DTV receiver
    double int_threshold = 0.1;    // allowed interference probability
    double p_peak_dbm = -10.0;
    PropagationParams prop_d2d{2.5, 615.0, 5.5};
    double mean_shadow_d2d_db = 0.0;
};

double path_loss_db(double d_km, const PropagationParams& prop);

// Gaussian tail probability and its inverse.
double q_tail(double x);
double q_tail_inverse(double p);

double mean_received_power_dbm(const DtvTransmitter& tx, const Location& loc,
                               double mean_shadow_db);
double coverage_threshold_dbm(const DtvTransmitter& tx);
double coverage_probability(const DtvTransmitter& tx, const Location& loc,
                            double mean_shadow_db);

// Largest transmit power at dev_loc keeping the interference probability at
// rx_loc within ip.int_threshold.
double interference_power_limit_dbm(const Location& dev_loc, const Location& rx_loc,
                                    const InterferenceParams& ip);
double interference_power_limit_at_km(double d_km, const InterferenceParams& ip);
double interference_probability(const Location& dev_loc, double tx_power_dbm,
                                const Location& rx_loc, const InterferenceParams& ip);
double interference_probability_at_km(double d_km, double tx_power_dbm,
                                      const InterferenceParams& ip);

// Distance at which the power limit reaches p_peak: beyond it a device at peak
// power cannot disturb any receiver.
double worst_case_range_km(const InterferenceParams& ip);

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);

}  // namespace tvws
