#include "tvws/completion.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <random>
#include <stdexcept>

namespace tvws {

namespace {

Eigen::MatrixXd shrink_full(const Eigen::MatrixXd& m, double nu) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd s = svd.singularValues();
    for (int i = 0; i < s.size(); ++i) s(i) = std::max(s(i) - nu, 0.0);
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

Eigen::MatrixXd shrink_truncated(const Eigen::MatrixXd& m, double nu, int r) {
    TruncatedSvd ts = truncated_svd(m, r);
    Eigen::VectorXd s = ts.sigma;
    for (int i = 0; i < s.size(); ++i) s(i) = std::max(s(i) - nu, 0.0);
    return ts.u * s.asDiagonal() * ts.v.transpose();
}

double nuclear_norm(const Eigen::MatrixXd& m) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues().sum();
}

}  // namespace

Eigen::MatrixXd shrink(const Eigen::MatrixXd& m, double nu) {
    if (!(nu >= 0.0)) throw std::domain_error("shrink: threshold must be nonnegative");
    return shrink_full(m, nu);
}

TruncatedSvd truncated_svd(const Eigen::MatrixXd& m, int r) {
    const int p = static_cast<int>(m.rows());
    const int n = static_cast<int>(m.cols());
    const int kmax = std::min(p, n);
    if (r < 1 || r > kmax) throw std::invalid_argument("truncated_svd: rank out of range");

    const int ell = std::min(kmax, r + 8);
    std::mt19937_64 rng(0x5eed1234ULL);  // fixed start block keeps results reproducible
    std::normal_distribution<double> unit;
    Eigen::MatrixXd omega(n, ell);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < ell; ++j) omega(i, j) = unit(rng);

    auto thin_q = [](const Eigen::MatrixXd& a) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        return Eigen::MatrixXd(qr.householderQ() *
                               Eigen::MatrixXd::Identity(a.rows(), std::min(a.rows(), a.cols())));
    };

    Eigen::MatrixXd q = thin_q(m * omega);
    for (int t = 0; t < 8; ++t) {
        Eigen::MatrixXd qz = thin_q(m.transpose() * q);
        q = thin_q(m * qz);
    }

    Eigen::MatrixXd b = q.transpose() * m;  // ell x n
    Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    TruncatedSvd out;
    out.u = (q * svd.matrixU()).leftCols(r);
    out.sigma = svd.singularValues().head(r);
    out.v = svd.matrixV().leftCols(r);
    return out;
}

FpcaResult fpca_complete(const PartialSpectrumMatrix& obs, const FpcaConfig& cfg) {
    const int p = obs.rows();
    const int n = obs.cols();
    if (p < 1 || n < 1) throw std::invalid_argument("fpca_complete: empty matrix");
    if (!(cfg.tau_decay > 0.0 && cfg.tau_decay < 1.0))
        throw std::invalid_argument("fpca_complete: tau_decay must lie in (0,1)");
    if (!(cfg.step_delta > 0.0 && cfg.step_delta < 2.0))
        throw std::invalid_argument("fpca_complete: step_delta must lie in (0,2)");
    if (!(cfg.stop_beta > 0.0)) throw std::invalid_argument("fpca_complete: stop_beta must be positive");

    double known_sum = 0.0;
    std::size_t known_n = 0;
    Eigen::MatrixXd zero_filled = Eigen::MatrixXd::Zero(p, n);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < n; ++j) {
            if (obs.known(i, j)) {
                known_sum += obs.values(i, j);
                zero_filled(i, j) = obs.values(i, j);
                ++known_n;
            }
        }
    }
    if (known_n == 0) throw std::invalid_argument("fpca_complete: no known entries");
    const double known_mean = known_sum / static_cast<double>(known_n);

    const bool truncated = std::min(p, n) >= 512;
    const int rank_cap = cfg.max_rank > 0 ? cfg.max_rank : std::max(1, std::min(p, n) / 4);
    auto apply_shrink = [&](const Eigen::MatrixXd& y, double nu) {
        return truncated ? shrink_truncated(y, nu, rank_cap) : shrink_full(y, nu);
    };

    double sigma_max;
    {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(zero_filled);
        sigma_max = svd.singularValues()(0);
    }
    const double tau1 = cfg.tau_init_factor * sigma_max;
    const double tau_floor = cfg.tau_floor_factor * tau1;

    Eigen::MatrixXd m(p, n);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = obs.known(i, j) ? obs.values(i, j) : known_mean;

    FpcaResult res;
    double tau = tau1;
    bool last_stage = false;
    while (!last_stage) {
        if (tau <= tau_floor) {
            tau = tau_floor;
            last_stage = true;
        }
        int it = 0;
        bool stage_done = false;
        for (; it < cfg.max_iters_per_stage; ++it) {
            Eigen::MatrixXd y = m;
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < n; ++j)
                    if (obs.known(i, j))
                        y(i, j) -= cfg.step_delta * (m(i, j) - obs.values(i, j));
            Eigen::MatrixXd next = apply_shrink(y, tau * cfg.step_delta);
            double rel = (next - m).norm() / std::max(1.0, m.norm());
            m = std::move(next);
            ++res.total_iterations;
            if (rel <= cfg.stop_beta) {
                ++it;
                stage_done = true;
                break;
            }
        }
        if (!stage_done) res.converged = false;
        if (cfg.record_stages) {
            double fit = 0.0;
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < n; ++j)
                    if (obs.known(i, j)) {
                        double d = m(i, j) - obs.values(i, j);
                        fit += d * d;
                    }
            res.stages.push_back({tau, it, tau * nuclear_norm(m) + 0.5 * fit});
        }
        tau *= cfg.tau_decay;
    }
    res.matrix = std::move(m);
    return res;
}

double rse_db(const Eigen::MatrixXd& recovered, const Eigen::MatrixXd& truth) {
    if (recovered.rows() != truth.rows() || recovered.cols() != truth.cols())
        throw std::invalid_argument("rse_db: dimension mismatch");
    double denom = truth.norm();
    if (!(denom > 0.0)) throw std::domain_error("rse_db: zero truth norm");
    double ratio = (recovered - truth).norm() / denom;
    if (ratio <= 1e-30) return -300.0;
    return std::max(10.0 * std::log10(ratio), -300.0);
}

}  // namespace tvws
