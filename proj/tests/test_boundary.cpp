#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cstdio>
#include <fstream>
#include <random>

#include "tvws/boundary.hpp"

using namespace tvws;

namespace {

// full KKT residual over the training grid: 0 ≤ alpha ≤ C cases
double kkt_residual(const BoundaryModel& model, const CoverageLabelGrid& labels,
                    const GridSpec& grid) {
    // recover which centers are stored support vectors
    auto normalized = [&](const Location& loc) {
        return Location{(loc.x_km - model.norm_offset.x_km) * model.norm_scale,
                        (loc.y_km - model.norm_offset.y_km) * model.norm_scale};
    };
    double worst = 0.0;
    for (int i = 0; i < grid.rows; ++i) {
        for (int j = 0; j < grid.cols; ++j) {
            Location c = grid.center(i, j);
            double alpha = 0.0;
            Location n = normalized(c);
            for (std::size_t s = 0; s < model.support_locs.size(); ++s)
                if (model.support_locs[s].x_km == n.x_km && model.support_locs[s].y_km == n.y_km)
                    alpha = model.alphas[s];
            double h = labels.labels(i, j);
            double margin = h * classify_raw(model, c);
            double r = 0.0;
            if (alpha <= 1e-9 * model.c_reg)
                r = std::max(0.0, 1.0 - margin);
            else if (alpha >= model.c_reg * (1.0 - 1e-9))
                r = std::max(0.0, margin - 1.0);
            else
                r = std::abs(margin - 1.0);
            worst = std::max(worst, r);
        }
    }
    return worst;
}

double dual_equality_gap(const BoundaryModel& model) {
    double s = 0.0;
    for (std::size_t i = 0; i < model.alphas.size(); ++i)
        s += model.alphas[i] * model.labels[i];
    return std::abs(s);
}

int training_errors(const BoundaryModel& model, const CoverageLabelGrid& labels,
                    const GridSpec& grid) {
    int wrong = 0;
    for (int i = 0; i < grid.rows; ++i)
        for (int j = 0; j < grid.cols; ++j)
            if (classify(model, grid.center(i, j)) != labels.labels(i, j)) ++wrong;
    return wrong;
}

// disc of radius r at the grid middle labeled covered, the rest uncovered
CoverageLabelGrid disc_labels(const GridSpec& grid, double radius_km) {
    Location mid{grid.origin.x_km + 0.5 * grid.side_x_km(),
                 grid.origin.y_km + 0.5 * grid.side_y_km()};
    CoverageLabelGrid l;
    l.labels.setConstant(grid.rows, grid.cols, 1);
    for (int i = 0; i < grid.rows; ++i)
        for (int j = 0; j < grid.cols; ++j)
            if (distance_km(grid.center(i, j), mid) <= radius_km) l.labels(i, j) = -1;
    return l;
}

}  // namespace

TEST_CASE("hypothesis labels threshold and offset") {
    Eigen::MatrixXd m(1, 3);
    m << -80.0, -90.0, -87.0;
    const double p_bar_min = -85.15;

    CoverageLabelGrid l0 = hypothesis_labels(m, p_bar_min, 0.0);
    CHECK(l0.labels(0, 0) == -1);
    CHECK(l0.labels(0, 1) == 1);
    CHECK(l0.labels(0, 2) == 1);

    CoverageLabelGrid l3 = hypothesis_labels(m, p_bar_min, 3.0);
    CHECK(l3.labels(0, 2) == -1);  // threshold moved to -88.15
    CHECK(l3.labels(0, 1) == 1);
}

TEST_CASE("kernel evaluations") {
    Location a{1.0, 2.0}, b{4.0, 6.0};  // distance 5

    KernelSpec rbf{KernelKind::Rbf, 1.0, 2, 1.0};
    CHECK(kernel_eval(a, a, rbf) == doctest::Approx(1.0).epsilon(1e-15));
    Location c{1.0, 3.0};  // distance 1 from a
    CHECK(kernel_eval(a, c, rbf) ==
          doctest::Approx(0.60653065971263342).epsilon(1e-12));

    KernelSpec lin{KernelKind::Linear, 0.0, 1, 0.0};
    CHECK(kernel_eval(a, b, lin) == doctest::Approx(1.0 * 4.0 + 2.0 * 6.0).epsilon(1e-15));

    KernelSpec poly1{KernelKind::Polynomial, 0.0, 1, 0.0};
    CHECK(kernel_eval(a, b, poly1) == doctest::Approx(kernel_eval(a, b, lin)).epsilon(1e-15));

    KernelSpec poly2{KernelKind::Polynomial, 1.0, 2, 0.0};
    CHECK(kernel_eval(a, b, poly2) == doctest::Approx(17.0 * 17.0).epsilon(1e-15));

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 20; ++t) {
        Location p{u(rng), u(rng)}, q{u(rng), u(rng)};
        CHECK(kernel_eval(p, q, rbf) == kernel_eval(q, p, rbf));
        CHECK(kernel_eval(p, q, poly2) == kernel_eval(q, p, poly2));
    }

    KernelSpec bad_rbf{KernelKind::Rbf, 0.0, 2, 0.0};
    CHECK_THROWS_AS(kernel_eval(a, b, bad_rbf), std::domain_error);
}

TEST_CASE("kernel matrices are positive semidefinite") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Location> pts(40);
    for (auto& p : pts) p = {u(rng), u(rng)};

    KernelSpec specs[] = {
        {KernelKind::Rbf, 0.0, 2, 0.3},
        {KernelKind::Polynomial, 1.0, 2, 0.0},
        {KernelKind::Polynomial, 0.0, 1, 0.0},
        {KernelKind::Polynomial, 2.0, 3, 0.0},
        {KernelKind::Linear, 0.0, 1, 0.0},
    };
    for (const auto& k : specs) {
        Eigen::MatrixXd km(40, 40);
        for (int i = 0; i < 40; ++i)
            for (int j = 0; j < 40; ++j) km(i, j) = kernel_eval(pts[i], pts[j], k);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(km);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
    }
}

TEST_CASE("linear split of four symmetric points") {
    GridSpec g{{-2.0, -2.0}, 2000.0, 2, 2};  // centers (+-1, +-1)
    CoverageLabelGrid l;
    l.labels.resize(2, 2);
    l.labels(0, 0) = -1;
    l.labels(1, 0) = -1;
    l.labels(0, 1) = 1;
    l.labels(1, 1) = 1;

    BoundaryModel m = train_svm(l, g, {KernelKind::Linear, 0.0, 1, 0.0});
    CHECK(m.converged);
    CHECK(training_errors(m, l, g) == 0);
    CHECK(dual_equality_gap(m) <= 1e-6);
    for (double a : m.alphas) {
        CHECK(a >= 0.0);
        CHECK(a <= m.c_reg);
    }

    // separating line sits near x = 0
    double lo = -1.0, hi = 1.0;
    REQUIRE(classify_raw(m, {lo, 0.0}) < 0.0);
    REQUIRE(classify_raw(m, {hi, 0.0}) > 0.0);
    for (int t = 0; t < 60; ++t) {
        double mid = 0.5 * (lo + hi);
        (classify_raw(m, {mid, 0.0}) < 0.0 ? lo : hi) = mid;
    }
    CHECK(std::abs(0.5 * (lo + hi)) < 0.1);

    CHECK(classify(m, {5.0, 0.0}) == 1);
    CHECK(kkt_residual(m, l, g) <= 1e-3);

    // free support vectors classify to their own label
    for (std::size_t s = 0; s < m.support_locs.size(); ++s) {
        if (m.alphas[s] >= m.c_reg * (1.0 - 1e-9)) continue;
        Location orig{m.norm_offset.x_km + m.support_locs[s].x_km / m.norm_scale,
                      m.norm_offset.y_km + m.support_locs[s].y_km / m.norm_scale};
        CHECK(classify(m, orig) == m.labels[s]);
    }
}

TEST_CASE("disc against surrounding area") {
    GridSpec g{{0.0, 0.0}, 150.0, 21, 21};  // 3.15 km square
    CoverageLabelGrid l = disc_labels(g, 1.25);

    BoundaryModel rbf = train_svm(l, g, {KernelKind::Rbf, 0.0, 2, 0.0});
    CHECK(rbf.converged);
    CHECK(training_errors(rbf, l, g) == 0);
    CHECK(dual_equality_gap(rbf) <= 1e-6);
    CHECK(kkt_residual(rbf, l, g) <= 1e-3);

    BoundaryModel lin = train_svm(l, g, {KernelKind::Linear, 0.0, 1, 0.0});
    CHECK(training_errors(lin, l, g) >= static_cast<int>(0.25 * 21 * 21));
    CHECK(dual_equality_gap(lin) <= 1e-6);
}

TEST_CASE("rbf classification is translation invariant") {
    GridSpec g{{0.0, 0.0}, 150.0, 15, 15};
    CoverageLabelGrid l = disc_labels(g, 0.8);
    BoundaryModel base = train_svm(l, g, {KernelKind::Rbf, 0.0, 2, 0.4});

    const double dx = 137.25, dy = -41.5;
    GridSpec shifted = g;
    shifted.origin = {g.origin.x_km + dx, g.origin.y_km + dy};
    BoundaryModel moved = train_svm(l, shifted, {KernelKind::Rbf, 0.0, 2, 0.4});

    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-0.5, 2.75);
    for (int t = 0; t < 200; ++t) {
        Location p{u(rng), u(rng)};
        Location q{p.x_km + dx, p.y_km + dy};
        double ra = classify_raw(base, p);
        double rb = classify_raw(moved, q);
        CHECK(ra == doctest::Approx(rb).epsilon(1e-9));
        if (std::abs(ra) > 1e-6) CHECK(classify(base, p) == classify(moved, q));
    }
}

TEST_CASE("training input validation") {
    GridSpec g{{0.0, 0.0}, 100.0, 4, 4};
    CoverageLabelGrid single;
    single.labels.setConstant(4, 4, -1);
    CHECK_THROWS_AS(train_svm(single, g, {KernelKind::Linear, 0.0, 1, 0.0}),
                    std::invalid_argument);

    CoverageLabelGrid wrong;
    wrong.labels.setConstant(3, 4, -1);
    CHECK_THROWS_AS(train_svm(wrong, g, {KernelKind::Linear, 0.0, 1, 0.0}),
                    std::invalid_argument);
}

TEST_CASE("iteration cap marks the model unconverged") {
    GridSpec g{{0.0, 0.0}, 150.0, 15, 15};
    CoverageLabelGrid l = disc_labels(g, 0.8);
    SvmTrainOptions opts;
    opts.max_iters = 1;
    BoundaryModel m = train_svm(l, g, {KernelKind::Rbf, 0.0, 2, 0.0}, opts);
    CHECK(!m.converged);
    CHECK(std::isfinite(classify_raw(m, g.center(7, 7))));
}

TEST_CASE("detection probability counting") {
    CoverageLabelGrid a, b;
    a.labels.setConstant(10, 10, -1);
    b.labels = a.labels;
    CHECK(detection_probability(a, b) == 1.0);

    b.labels.setConstant(10, 10, 1);
    CHECK(detection_probability(a, b) == 0.0);

    b.labels = a.labels;
    b.labels(3, 7) = 1;
    CHECK(detection_probability(b, a) == doctest::Approx(0.99).epsilon(1e-12));

    CoverageLabelGrid c;
    c.labels.setConstant(9, 10, -1);
    CHECK_THROWS_AS(detection_probability(a, c), std::invalid_argument);
}

TEST_CASE("model file roundtrip") {
    GridSpec g{{3.0, -1.0}, 150.0, 15, 15};
    CoverageLabelGrid l = disc_labels(g, 0.8);
    BoundaryModel m = train_svm(l, g, {KernelKind::Rbf, 0.0, 2, 0.0});

    const std::string path = "/tmp/tvws_test_model.txt";
    save_boundary_model(m, path);
    BoundaryModel back = load_boundary_model(path);

    CHECK(back.kernel.kind == m.kernel.kind);
    CHECK(back.kernel.rbf_sigma == m.kernel.rbf_sigma);
    CHECK(back.norm_offset.x_km == m.norm_offset.x_km);
    CHECK(back.norm_scale == m.norm_scale);
    CHECK(back.bias == m.bias);
    CHECK(back.c_reg == m.c_reg);
    CHECK(back.converged == m.converged);
    REQUIRE(back.alphas.size() == m.alphas.size());
    for (std::size_t i = 0; i < m.alphas.size(); ++i) {
        CHECK(back.alphas[i] == m.alphas[i]);
        CHECK(back.labels[i] == m.labels[i]);
        CHECK(back.support_locs[i].x_km == m.support_locs[i].x_km);
        CHECK(back.support_locs[i].y_km == m.support_locs[i].y_km);
    }

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(2.0, 6.0);
    for (int t = 0; t < 100; ++t) {
        Location p{u(rng), u(rng)};
        CHECK(classify_raw(back, p) == classify_raw(m, p));
    }

    std::ofstream bad(path);
    bad << "not-a-model v9\n";
    bad.close();
    CHECK_THROWS_AS(load_boundary_model(path), std::runtime_error);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_boundary_model(path), std::runtime_error);
}
