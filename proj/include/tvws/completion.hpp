#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tvws/sensing.hpp"

namespace tvws {

struct FpcaConfig {
    double tau_init_factor = 0.99;   // of the spectral norm of the zero-filled input
    double tau_decay = 0.25;         // per continuation stage
    double tau_floor_factor = 1e-8;  // of the initial tau
    double step_delta = 1.0;
    double stop_beta = 1e-6;
    int max_iters_per_stage = 300;
    int max_rank = 0;                // 0 means min(p,m)/4 when the truncated path kicks in
    bool record_stages = false;
};

struct FpcaStage {
    double tau = 0.0;
    int iterations = 0;
    double objective = 0.0;  // tau*||M||_* + 0.5*||P(M)-obs||_F^2 at the stage end
};

struct FpcaResult {
    Eigen::MatrixXd matrix;
    bool converged = true;  // false when some stage hit its iteration cap
    int total_iterations = 0;
    std::vector<FpcaStage> stages;  // filled when record_stages is set
};

// Soft-threshold all singular values of m by nu.
Eigen::MatrixXd shrink(const Eigen::MatrixXd& m, double nu);

// Top-r singular triplets via subspace iteration (deterministic start block).
struct TruncatedSvd {
    Eigen::MatrixXd u;
    Eigen::VectorXd sigma;
    Eigen::MatrixXd v;
};
TruncatedSvd truncated_svd(const Eigen::MatrixXd& m, int r);

FpcaResult fpca_complete(const PartialSpectrumMatrix& obs, const FpcaConfig& cfg = {});

// Recovery error in dB relative to the truth norm, floored at -300.
double rse_db(const Eigen::MatrixXd& recovered, const Eigen::MatrixXd& truth);

}  // namespace tvws
