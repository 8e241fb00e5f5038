#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tvws/grid.hpp"

namespace tvws {

enum class KernelKind { Linear, Polynomial, Rbf };

struct KernelSpec {
    KernelKind kind = KernelKind::Rbf;
    double poly_c = 1.0;
    int poly_degree = 2;
    double rbf_sigma = 0.0;  // 0: median pairwise distance over the training set
};

// Soft-margin SVM in normalized coordinates; support vectors are stored
// already normalized along with the transform that produced them.
struct BoundaryModel {
    KernelSpec kernel;
    Location norm_offset;    // location -> (loc - offset) * scale
    double norm_scale = 1.0;
    std::vector<Location> support_locs;
    std::vector<double> alphas;
    std::vector<int> labels;  // -1 covered, +1 uncovered
    double bias = 0.0;
    double c_reg = 10.0;
    bool converged = true;
};

struct SvmTrainOptions {
    double c_reg = 10.0;
    int subsample = 2000;
    double kkt_tol = 1e-3;
    long max_iters = 0;  // 0: scaled with the training-set size
};

// Threshold test on a completed matrix: -1 (covered) where the entry clears
// p_bar_min - delta_p.
CoverageLabelGrid hypothesis_labels(const Eigen::MatrixXd& recovered, double p_bar_min,
                                    double delta_p);

double kernel_eval(const Location& a, const Location& b, const KernelSpec& k);

BoundaryModel train_svm(const CoverageLabelGrid& labels, const GridSpec& grid,
                        const KernelSpec& kernel, const SvmTrainOptions& opts = {});

double classify_raw(const BoundaryModel& model, const Location& loc);
int classify(const BoundaryModel& model, const Location& loc);

double detection_probability(const CoverageLabelGrid& predicted,
                             const CoverageLabelGrid& truth);

void save_boundary_model(const BoundaryModel& model, const std::string& path);
BoundaryModel load_boundary_model(const std::string& path);

}  // namespace tvws
