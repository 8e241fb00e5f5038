#include "tvws/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace tvws {

CoverageLabelGrid hypothesis_labels(const Eigen::MatrixXd& recovered, double p_bar_min,
                                    double delta_p) {
    CoverageLabelGrid out;
    out.labels.resize(recovered.rows(), recovered.cols());
    const double thr = p_bar_min - delta_p;
    for (int i = 0; i < recovered.rows(); ++i)
        for (int j = 0; j < recovered.cols(); ++j)
            out.labels(i, j) = recovered(i, j) >= thr ? -1 : 1;
    return out;
}

double kernel_eval(const Location& a, const Location& b, const KernelSpec& k) {
    switch (k.kind) {
        case KernelKind::Linear:
            return a.x_km * b.x_km + a.y_km * b.y_km;
        case KernelKind::Polynomial: {
            double base = a.x_km * b.x_km + a.y_km * b.y_km + k.poly_c;
            double out = 1.0;
            for (int i = 0; i < k.poly_degree; ++i) out *= base;
            return out;
        }
        case KernelKind::Rbf: {
            if (!(k.rbf_sigma > 0.0))
                throw std::domain_error("kernel_eval: rbf sigma must be resolved and positive");
            double dx = a.x_km - b.x_km, dy = a.y_km - b.y_km;
            return std::exp(-(dx * dx + dy * dy) / (2.0 * k.rbf_sigma * k.rbf_sigma));
        }
    }
    throw std::logic_error("kernel_eval: unknown kernel");
}

namespace {

// Training points near a label transition carry the decision surface; pick
// them all (capped), then fill uniformly.
std::vector<int> select_training_cells(const CoverageLabelGrid& labels, int subsample) {
    const int p = labels.rows(), m = labels.cols();
    const int total = p * m;
    if (subsample >= total) {
        std::vector<int> all(total);
        for (int t = 0; t < total; ++t) all[t] = t;
        return all;
    }

    std::vector<char> near_edge(total, 0);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < m; ++j) {
            int lab = labels.labels(i, j);
            bool edge = false;
            for (int di = -3; di <= 3 && !edge; ++di) {
                int k = i + di;
                if (k < 0 || k >= p) continue;
                for (int dj = -3; dj <= 3; ++dj) {
                    int l = j + dj;
                    if (l < 0 || l >= m) continue;
                    if (labels.labels(k, l) != lab) {
                        edge = true;
                        break;
                    }
                }
            }
            near_edge[i * m + j] = edge ? 1 : 0;
        }
    }

    std::vector<int> edge_cells;
    for (int t = 0; t < total; ++t)
        if (near_edge[t]) edge_cells.push_back(t);

    std::vector<int> picked;
    picked.reserve(subsample);
    if (static_cast<int>(edge_cells.size()) >= subsample) {
        double step = static_cast<double>(edge_cells.size()) / subsample;
        int prev = -1;
        for (int t = 0; t < subsample; ++t) {
            int idx = std::min(static_cast<int>(t * step), static_cast<int>(edge_cells.size()) - 1);
            if (idx == prev) continue;
            picked.push_back(edge_cells[idx]);
            prev = idx;
        }
        return picked;
    }

    std::vector<char> taken(total, 0);
    for (int t : edge_cells) {
        picked.push_back(t);
        taken[t] = 1;
    }
    int need = subsample - static_cast<int>(picked.size());
    double step = static_cast<double>(total) / need;
    for (int t = 0; t < need; ++t) {
        int idx = std::min(static_cast<int>(t * step), total - 1);
        while (idx < total && taken[idx]) ++idx;
        if (idx >= total) continue;
        picked.push_back(idx);
        taken[idx] = 1;
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace

BoundaryModel train_svm(const CoverageLabelGrid& labels, const GridSpec& grid,
                        const KernelSpec& kernel, const SvmTrainOptions& opts) {
    if (labels.rows() != grid.rows || labels.cols() != grid.cols)
        throw std::invalid_argument("train_svm: labels do not match the grid");
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < labels.rows() && !(has_pos && has_neg); ++i)
        for (int j = 0; j < labels.cols(); ++j)
            (labels.labels(i, j) == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw std::invalid_argument("train_svm: both classes must be present");

    BoundaryModel model;
    model.kernel = kernel;
    model.c_reg = opts.c_reg;
    model.norm_offset = grid.origin;
    model.norm_scale = 1.0 / std::max(grid.side_x_km(), grid.side_y_km());

    std::vector<int> cells = select_training_cells(labels, opts.subsample);
    const int n = static_cast<int>(cells.size());
    std::vector<Location> pts(n);
    std::vector<int> h(n);
    for (int t = 0; t < n; ++t) {
        int i = cells[t] / grid.cols, j = cells[t] % grid.cols;
        Location c = grid.center(i, j);
        pts[t] = {(c.x_km - model.norm_offset.x_km) * model.norm_scale,
                  (c.y_km - model.norm_offset.y_km) * model.norm_scale};
        h[t] = labels.labels(i, j);
    }

    if (model.kernel.kind == KernelKind::Rbf && model.kernel.rbf_sigma == 0.0) {
        std::vector<double> dists;
        dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                dists.push_back(std::hypot(pts[a].x_km - pts[b].x_km,
                                           pts[a].y_km - pts[b].y_km));
        std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
        model.kernel.rbf_sigma = std::max(dists[dists.size() / 2], 1e-12);
    }

    Eigen::MatrixXd kmat(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = a; b < n; ++b) {
            double v = kernel_eval(pts[a], pts[b], model.kernel);
            kmat(a, b) = v;
            kmat(b, a) = v;
        }
    }

    const double c_reg = opts.c_reg;
    const double tol = opts.kkt_tol;
    std::vector<double> alpha(n, 0.0);
    Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);  // (Q a)_t - 1 at a = 0

    long max_iters = opts.max_iters > 0 ? opts.max_iters : std::max(200000L, 100L * n);
    bool converged = false;
    double m_val = 0.0, big_m_val = 0.0;
    for (long iter = 0; iter < max_iters; ++iter) {
        int i = -1, j = -1;
        m_val = -std::numeric_limits<double>::infinity();
        big_m_val = std::numeric_limits<double>::infinity();
        for (int t = 0; t < n; ++t) {
            double v = -h[t] * grad(t);
            bool in_up = (h[t] == 1 && alpha[t] < c_reg) || (h[t] == -1 && alpha[t] > 0.0);
            bool in_low = (h[t] == -1 && alpha[t] < c_reg) || (h[t] == 1 && alpha[t] > 0.0);
            if (in_up && v > m_val) {
                m_val = v;
                i = t;
            }
            if (in_low && v < big_m_val) {
                big_m_val = v;
                j = t;
            }
        }
        if (i < 0 || j < 0 || m_val - big_m_val <= tol) {
            converged = true;
            break;
        }

        double eta = kmat(i, i) + kmat(j, j) - 2.0 * kmat(i, j);
        if (eta < 1e-12) eta = 1e-12;
        double e_diff = h[i] * grad(i) - h[j] * grad(j);
        double step = h[j] * e_diff / eta;  // unconstrained move of alpha_j
        double ai = alpha[i] - h[i] * h[j] * step;
        double aj = alpha[j] + step;
        // joint clip that lands binding variables on exact bounds and keeps
        // h_i a_i + h_j a_j unchanged
        if (h[i] != h[j]) {
            double diff = alpha[i] - alpha[j];
            if (ai < 0.0) {
                ai = 0.0;
                aj = -diff;
            }
            if (aj < 0.0) {
                aj = 0.0;
                ai = diff;
            }
            if (ai > c_reg) {
                ai = c_reg;
                aj = c_reg - diff;
            }
            if (aj > c_reg) {
                aj = c_reg;
                ai = c_reg + diff;
            }
        } else {
            double sum = alpha[i] + alpha[j];
            if (ai < 0.0) {
                ai = 0.0;
                aj = sum;
            }
            if (aj < 0.0) {
                aj = 0.0;
                ai = sum;
            }
            if (ai > c_reg) {
                ai = c_reg;
                aj = sum - c_reg;
            }
            if (aj > c_reg) {
                aj = c_reg;
                ai = sum - c_reg;
            }
        }
        double di = ai - alpha[i];
        double dj = aj - alpha[j];
        if (std::abs(di) < 1e-14 && std::abs(dj) < 1e-14) {
            converged = false;  // selection says not optimal but no progress possible
            break;
        }
        alpha[i] = ai;
        alpha[j] = aj;
        for (int t = 0; t < n; ++t)
            grad(t) += h[t] * (h[i] * kmat(i, t) * di + h[j] * kmat(j, t) * dj);
    }
    model.converged = converged;

    int free_count = 0;
    double free_sum = 0.0;
    for (int t = 0; t < n; ++t) {
        if (alpha[t] > 1e-10 * c_reg && alpha[t] < c_reg * (1.0 - 1e-10)) {
            free_sum += -h[t] * grad(t);
            ++free_count;
        }
    }
    model.bias = free_count > 0 ? free_sum / free_count : 0.5 * (m_val + big_m_val);

    for (int t = 0; t < n; ++t) {
        if (alpha[t] > 0.0) {
            model.support_locs.push_back(pts[t]);
            model.alphas.push_back(alpha[t]);
            model.labels.push_back(h[t]);
        }
    }
    return model;
}

double classify_raw(const BoundaryModel& model, const Location& loc) {
    Location q{(loc.x_km - model.norm_offset.x_km) * model.norm_scale,
               (loc.y_km - model.norm_offset.y_km) * model.norm_scale};
    double f = model.bias;
    for (std::size_t t = 0; t < model.support_locs.size(); ++t)
        f += model.alphas[t] * model.labels[t] * kernel_eval(model.support_locs[t], q, model.kernel);
    return f;
}

int classify(const BoundaryModel& model, const Location& loc) {
    return classify_raw(model, loc) > 0.0 ? 1 : -1;
}

double detection_probability(const CoverageLabelGrid& predicted,
                             const CoverageLabelGrid& truth) {
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
        throw std::invalid_argument("detection_probability: dimension mismatch");
    long hits = 0;
    for (int i = 0; i < truth.rows(); ++i)
        for (int j = 0; j < truth.cols(); ++j)
            if (predicted.labels(i, j) == truth.labels(i, j)) ++hits;
    return static_cast<double>(hits) / (static_cast<double>(truth.rows()) * truth.cols());
}

void save_boundary_model(const BoundaryModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[200];
    out << "boundary-model v1\n";
    switch (model.kernel.kind) {
        case KernelKind::Linear:
            out << "kernel linear\n";
            break;
        case KernelKind::Polynomial:
            std::snprintf(buf, sizeof buf, "kernel poly %.17g %d\n", model.kernel.poly_c,
                          model.kernel.poly_degree);
            out << buf;
            break;
        case KernelKind::Rbf:
            std::snprintf(buf, sizeof buf, "kernel rbf %.17g\n", model.kernel.rbf_sigma);
            out << buf;
            break;
    }
    std::snprintf(buf, sizeof buf, "norm %.17g %.17g %.17g\n", model.norm_offset.x_km,
                  model.norm_offset.y_km, model.norm_scale);
    out << buf;
    out << "sv " << model.support_locs.size() << '\n';
    for (std::size_t t = 0; t < model.support_locs.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %d %.17g\n", model.support_locs[t].x_km,
                      model.support_locs[t].y_km, model.labels[t], model.alphas[t]);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "bias %.17g\n", model.bias);
    out << buf;
    std::snprintf(buf, sizeof buf, "c %.17g\n", model.c_reg);
    out << buf;
    out << "converged " << (model.converged ? 1 : 0) << '\n';
}

BoundaryModel load_boundary_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    auto bad = [&](const std::string& why) {
        return std::runtime_error("boundary model " + path + ": " + why);
    };
    std::string line;
    if (!std::getline(in, line) || line != "boundary-model v1") throw bad("bad header");

    BoundaryModel model;
    if (!std::getline(in, line)) throw bad("missing kernel line");
    {
        std::istringstream ls(line);
        std::string tag, kind;
        ls >> tag >> kind;
        if (tag != "kernel") throw bad("expected kernel line");
        if (kind == "linear") {
            model.kernel.kind = KernelKind::Linear;
        } else if (kind == "poly") {
            model.kernel.kind = KernelKind::Polynomial;
            if (!(ls >> model.kernel.poly_c >> model.kernel.poly_degree))
                throw bad("bad poly parameters");
        } else if (kind == "rbf") {
            model.kernel.kind = KernelKind::Rbf;
            if (!(ls >> model.kernel.rbf_sigma)) throw bad("bad rbf parameter");
        } else {
            throw bad("unknown kernel kind " + kind);
        }
    }
    if (!std::getline(in, line)) throw bad("missing norm line");
    {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag >> model.norm_offset.x_km >> model.norm_offset.y_km >>
              model.norm_scale) ||
            tag != "norm")
            throw bad("bad norm line");
    }
    std::size_t n = 0;
    if (!std::getline(in, line)) throw bad("missing sv count");
    {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag >> n) || tag != "sv") throw bad("bad sv count line");
    }
    for (std::size_t t = 0; t < n; ++t) {
        if (!std::getline(in, line)) throw bad("truncated support vectors");
        std::istringstream ls(line);
        Location loc;
        int lab;
        double a;
        if (!(ls >> loc.x_km >> loc.y_km >> lab >> a) || (lab != -1 && lab != 1))
            throw bad("bad support vector line");
        model.support_locs.push_back(loc);
        model.labels.push_back(lab);
        model.alphas.push_back(a);
    }
    if (!std::getline(in, line)) throw bad("missing bias");
    {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag >> model.bias) || tag != "bias") throw bad("bad bias line");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "c") {
            if (!(ls >> model.c_reg)) throw bad("bad c line");
        } else if (tag == "converged") {
            int v;
            if (!(ls >> v)) throw bad("bad converged line");
            model.converged = v != 0;
        } else {
            throw bad("unknown trailing line " + tag);
        }
    }
    return model;
}

}  // namespace tvws
