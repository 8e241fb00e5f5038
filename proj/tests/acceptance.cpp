#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "tvws/completion.hpp"
#include "tvws/db_service.hpp"
#include "tvws/eval.hpp"

using namespace tvws;

// Every case prints one verdict line so a transcript of this binary reads as
// a checklist; the CHECK after it is what fails the suite.
#define REPORT(pass, ...)                                 \
    do {                                                  \
        std::printf("[%s] ", (pass) ? "PASS" : "FAIL");   \
        std::printf(__VA_ARGS__);                         \
        std::printf("\n");                                \
        std::fflush(stdout);                              \
    } while (0)

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int paired_wins(const std::vector<double>& better, const std::vector<double>& worse) {
    int w = 0;
    for (std::size_t s = 0; s < better.size(); ++s)
        if (better[s] < worse[s]) ++w;
    return w;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// ---- classifier checks shared by C9 ----

double kkt_residual(const BoundaryModel& model, const CoverageLabelGrid& labels,
                    const GridSpec& grid) {
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
            double margin = labels.labels(i, j) * classify_raw(model, c);
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
    for (std::size_t i = 0; i < model.alphas.size(); ++i) s += model.alphas[i] * model.labels[i];
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

double nuclear_norm(const Eigen::MatrixXd& m) {
    return Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues().sum();
}

// ---- line-protocol client shared by C11 ----

struct Client {
    int fd = -1;

    explicit Client(std::uint16_t port) {
        fd = ::socket(AF_INET, SOCK_STREAM, 0);
        REQUIRE(fd >= 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        REQUIRE(::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr) == 1);
        REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    }
    ~Client() {
        if (fd >= 0) ::close(fd);
    }

    void send_all(const std::string& s) {
        std::size_t off = 0;
        while (off < s.size()) {
            ssize_t n = ::send(fd, s.data() + off, s.size() - off, 0);
            REQUIRE(n > 0);
            off += static_cast<std::size_t>(n);
        }
    }

    std::vector<std::string> read_lines(std::size_t count) {
        std::string buf;
        std::vector<std::string> lines;
        char chunk[4096];
        while (lines.size() < count) {
            ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
            REQUIRE(n > 0);
            buf.append(chunk, static_cast<std::size_t>(n));
            std::size_t pos;
            while (lines.size() < count && (pos = buf.find('\n')) != std::string::npos) {
                lines.push_back(buf.substr(0, pos));
                buf.erase(0, pos + 1);
            }
        }
        return lines;
    }
};

}  // namespace

TEST_CASE("C1 recovery error at moderate sampling rates") {
    Config cfg = scenario_one();
    bool pass = true;
    double means[3], times[3];
    const double rates[3] = {0.3, 0.4, 0.5};
    for (int r = 0; r < 3; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        auto rows = sweep_rse(cfg, {rates[r]}, {100}, {80.0}, 20);
        times[r] = seconds_since(t0);
        means[r] = rows[0].mean_rse_db;
        pass = pass && means[r] <= -18.0 && times[r] <= 120.0;
    }
    REPORT(pass,
           "C1: mean RSE %.1f/%.1f/%.1f dB at 30/40/50%% sampling (need <= -18), "
           "%.0f/%.0f/%.0f s per rate (need <= 120)",
           means[0], means[1], means[2], times[0], times[1], times[2]);
    CHECK(pass);
}

TEST_CASE("C2 recovery error trends with rate, reports and grid size") {
    Config cfg = scenario_one();
    auto rows = sweep_rse(cfg, {0.1, 0.5}, {10, 100}, {80.0}, 20);
    REQUIRE(rows.size() == 4);  // (n_sam, rate) = (10,.1) (10,.5) (100,.1) (100,.5)
    auto coarse = sweep_rse(cfg, {0.5}, {100}, {160.0}, 20);
    REQUIRE(coarse.size() == 1);

    int wins_rate = paired_wins(rows[3].per_seed, rows[2].per_seed);
    int wins_nsam = paired_wins(rows[3].per_seed, rows[1].per_seed);
    int wins_grid = paired_wins(rows[3].per_seed, coarse[0].per_seed);
    bool pass = rows[3].mean_rse_db < rows[2].mean_rse_db &&
                rows[3].mean_rse_db < rows[1].mean_rse_db &&
                rows[3].mean_rse_db < coarse[0].mean_rse_db && wins_rate >= 18 &&
                wins_nsam >= 18 && wins_grid >= 18;
    REPORT(pass,
           "C2: RSE improves 10%%->50%% rate (%d/20), 10->100 reports (%d/20), "
           "160->80 m grid (%d/20); need means strictly down and >= 18/20 each",
           wins_rate, wins_nsam, wins_grid);
    CHECK(pass);
}

TEST_CASE("C3 kernel comparison across sampling rates") {
    Config cfg = scenario_one();
    // short-period azimuthal ripple so the coverage edge curves inside the cell
    cfg.shadow.ripple_amp_db = 0.25;
    cfg.shadow.ripple_freq = 120.0;
    std::vector<KernelSpec> kernels{KernelSpec{KernelKind::Rbf, 1.0, 2, 0.0},
                                    KernelSpec{KernelKind::Polynomial, 1.0, 2, 0.0}};
    std::vector<double> rates{0.1, 0.2, 0.3, 0.4, 0.5};
    auto rows = sweep_detection(cfg, kernels, rates, 20);
    REQUIRE(rows.size() == 10);

    bool rbf_wins = true, monotone = true;
    for (std::size_t r = 0; r < rates.size(); ++r) {
        if (rows[r].mean_detection < rows[rates.size() + r].mean_detection) rbf_wins = false;
        if (r > 0 && rows[r].mean_detection < rows[r - 1].mean_detection - 0.01)
            monotone = false;
    }
    bool pass = rbf_wins && monotone;
    REPORT(pass,
           "C3: rbf detection %.3f..%.3f vs quadratic %.3f..%.3f over 10..50%% rates; "
           "rbf >= quadratic at every rate: %s, rbf non-decreasing within 0.01: %s",
           rows[0].mean_detection, rows[4].mean_detection, rows[5].mean_detection,
           rows[9].mean_detection, rbf_wins ? "yes" : "no", monotone ? "yes" : "no");
    CHECK(pass);
}

TEST_CASE("C4 interference compliance with an adjustable decision offset") {
    Config cfg = scenario_one();
    GroundTruthRef ref = make_reference(cfg);
    double found_offset = -1.0, found_frac = 0.0;
    for (double dp : {0.0, 3.0, 6.0}) {
        cfg.delta_p_db = dp;
        std::size_t compliant = 0, total = 0;
        for (int s = 0; s < cfg.seeds; ++s) {
            SeedOutcome out = run_pipeline(cfg, cfg.seed + s, ref);
            compliant += out.bias.ip_compliant;
            total += out.bias.in_cell_grids;
        }
        double frac = static_cast<double>(compliant) / total;
        if (frac >= 0.99) {
            found_offset = dp;
            found_frac = frac;
            break;
        }
        found_frac = frac;
    }
    bool pass = found_offset >= 0.0;
    REPORT(pass,
           "C4: interference probability within 0.1 at %.1f%% of in-cell grids (need >= 99%% "
           "at some offset in {0,3,6} dB; %s)",
           100.0 * found_frac,
           pass ? "reached" : "no offset reached it");
    if (pass) std::printf("      offset %.0f dB was sufficient\n", found_offset);
    CHECK(pass);
}

TEST_CASE("C5 enablement inside a shadowed cell against the keep-out baseline") {
    Config cfg = scenario_two();
    GroundTruthRef ref = make_reference(cfg);

    bool all_offsets = true;
    double worst_frac = 1.0;
    for (double dp : {0.0, 3.0, 6.0}) {
        cfg.delta_p_db = dp;
        std::size_t compliant = 0, total = 0;
        for (int s = 0; s < cfg.seeds; ++s) {
            SeedOutcome out = run_pipeline(cfg, cfg.seed + s, ref);
            compliant += out.bias.ip_compliant;
            total += out.bias.in_cell_grids;
        }
        double frac = static_cast<double>(compliant) / total;
        worst_frac = std::min(worst_frac, frac);
        if (frac <= 0.90) all_offsets = false;
    }

    bool baseline_silent = true;
    for (int s = 0; s < cfg.seeds; ++s) {
        MpepMap base = baseline_database(cfg, cfg.seed + s);
        for (int i = 0; i < base.grid.rows; ++i)
            for (int j = 0; j < base.grid.cols; ++j)
                if (base.cls(i, j) != SpaceClass::OutOfCell && !base.no_tx(i, j))
                    baseline_silent = false;
    }

    bool pass = all_offsets && baseline_silent;
    REPORT(pass,
           "C5: compliance >= %.1f%% of in-cell grids at every offset (need > 90%%), "
           "circular baseline silent everywhere in the cell: %s",
           100.0 * worst_frac, baseline_silent ? "yes" : "no");
    CHECK(pass);
}

TEST_CASE("C6 database from true labels equals the per-grid search") {
    bool pass = true;
    const double inf = std::numeric_limits<double>::infinity();
    for (int scen = 1; scen <= 2; ++scen) {
        Config cfg = scen == 1 ? scenario_one() : scenario_two();
        cfg.grid_size_m = 160.0;
        rebuild_grid(cfg);
        REQUIRE(cfg.grid.rows == 50);

        Eigen::MatrixXd field = ground_truth_matrix(cfg);
        CoverageLabelGrid labels = ground_truth_labels(field, coverage_threshold_dbm(cfg.tx));
        MpepMap oracle = oracle_mpep(cfg, labels);
        MpepOptions mo;
        mo.no_tx_floor_dbm = cfg.no_tx_floor_dbm;
        MpepMap derived = build_database(cfg.bs_loc, inf, labels, cfg.grid, cfg.interference, mo);

        for (int i = 0; i < 50 && pass; ++i)
            for (int j = 0; j < 50; ++j)
                if (!same_bits(derived.mpep_dbm(i, j), oracle.mpep_dbm(i, j)) ||
                    derived.space_class(i, j) != oracle.space_class(i, j) ||
                    !same_bits(derived.wcrp_x(i, j), oracle.wcrp_x(i, j)) ||
                    !same_bits(derived.wcrp_y(i, j), oracle.wcrp_y(i, j))) {
                    pass = false;
                    break;
                }
    }
    REPORT(pass, "C6: 50x50 emission maps from true labels match the exhaustive "
                 "per-grid search bit for bit in both scenarios");
    CHECK(pass);
}

TEST_CASE("C7 completion of a noiseless rank-1 matrix") {
    const int n = 100;
    Eigen::VectorXd u(n), v(n);
    for (int i = 0; i < n; ++i) {
        u(i) = 1.0 + 0.3 * std::sin(0.37 * i);
        v(i) = 2.0 + std::cos(0.19 * i);
    }
    Eigen::MatrixXd truth = u * v.transpose();

    PartialSpectrumMatrix obs;
    obs.values = Eigen::MatrixXd::Zero(n, n);
    obs.known.setConstant(n, n, 0);
    std::mt19937_64 rng(7);
    std::bernoulli_distribution keep(0.5);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (keep(rng)) {
                obs.values(i, j) = truth(i, j);
                obs.known(i, j) = 1;
            }

    auto t0 = std::chrono::steady_clock::now();
    FpcaResult res = fpca_complete(obs);
    double dt = seconds_since(t0);
    double rse = rse_db(res.matrix, truth);
    bool pass = rse <= -40.0 && dt <= 30.0;
    REPORT(pass, "C7: rank-1 100x100 at 50%% known recovered to RSE %.1f dB (need <= -40) "
                 "in %.1f s (need <= 30)",
           rse, dt);
    CHECK(pass);
}

TEST_CASE("C8 shrinkage operator properties") {
    const double tol = 1e-8;
    bool pass = true;

    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    Eigen::MatrixXd want = Eigen::MatrixXd::Zero(2, 2);
    want(0, 0) = 1.0;
    pass = pass && (shrink(d, 2.0) - want).cwiseAbs().maxCoeff() <= tol;

    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    auto random_matrix = [&](int r, int c) {
        Eigen::MatrixXd m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = gauss(rng);
        return m;
    };

    Eigen::MatrixXd m0 = random_matrix(9, 7);
    pass = pass && (shrink(m0, 0.0) - m0).cwiseAbs().maxCoeff() <= tol;

    double top = Eigen::BDCSVD<Eigen::MatrixXd>(m0).singularValues()(0);
    pass = pass && shrink(m0, top * (1.0 + 1e-12)).cwiseAbs().maxCoeff() <= tol;

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < 100 && pass; ++t) {
        Eigen::MatrixXd m = random_matrix(10, 8);
        double nu = unif(rng) * 1.5 * Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues()(0);
        pass = nuclear_norm(shrink(m, nu)) <= nuclear_norm(m) + tol;
    }

    REPORT(pass, "C8: diagonal case, zero-threshold identity, total annihilation and "
                 "nuclear-norm non-increase on 100 random matrices, all within 1e-8");
    CHECK(pass);
}

TEST_CASE("C9 classifier solver checks") {
    GridSpec grid{{0.0, 0.0}, 150.0, 21, 21};
    CoverageLabelGrid labels = disc_labels(grid, 1.25);
    SvmTrainOptions topts;

    BoundaryModel rbf = train_svm(labels, grid, KernelSpec{KernelKind::Rbf, 1.0, 2, 0.0}, topts);
    BoundaryModel lin =
        train_svm(labels, grid, KernelSpec{KernelKind::Linear, 1.0, 2, 0.0}, topts);

    bool kkt_ok = true, gap_ok = true;
    double worst_kkt = 0.0, worst_gap = 0.0;
    for (const BoundaryModel* m : {&rbf, &lin}) {
        if (!m->converged) continue;
        double k = kkt_residual(*m, labels, grid);
        double g = dual_equality_gap(*m);
        worst_kkt = std::max(worst_kkt, k);
        worst_gap = std::max(worst_gap, g);
        kkt_ok = kkt_ok && k <= 1e-3;
        gap_ok = gap_ok && g <= 1e-6;
    }
    int rbf_errors = training_errors(rbf, labels, grid);
    int lin_errors = training_errors(lin, labels, grid);
    int total = grid.rows * grid.cols;

    bool pass = rbf.converged && kkt_ok && gap_ok && rbf_errors == 0 &&
                lin_errors * 4 >= total;
    REPORT(pass,
           "C9: worst KKT residual %.2e (need <= 1e-3), worst dual-constraint gap %.2e "
           "(need <= 1e-6); concentric set: rbf %d errors (need 0), linear %d/%d "
           "(need >= 25%%)",
           worst_kkt, worst_gap, rbf_errors, lin_errors, total);
    CHECK(pass);
}

TEST_CASE("C10 derived radio constants") {
    InterferenceParams ip;
    DtvTransmitter tx;
    double range = worst_case_range_km(ip);
    double thr = coverage_threshold_dbm(tx);

    double worst_rt = 0.0;
    for (double x = -6.0; x <= 6.0; x += 0.01)
        worst_rt = std::max(worst_rt, std::abs(q_tail_inverse(q_tail(x)) - x));

    bool pass = std::abs(range - 1.909) <= 0.01 && std::abs(thr - (-85.15)) <= 0.01 &&
                worst_rt <= 1e-6;
    REPORT(pass,
           "C10: worst-case interference range %.4f km (need 1.909 +- 0.01), coverage "
           "threshold %.3f dBm (need -85.15 +- 0.01), tail-inverse roundtrip %.1e on "
           "[-6,6] (need <= 1e-6)",
           range, thr, worst_rt);
    CHECK(pass);
}

TEST_CASE("C11 persistence and concurrent service") {
    Config cfg = scenario_one();
    cfg.grid_size_m = 160.0;
    rebuild_grid(cfg);
    Eigen::MatrixXd field = ground_truth_matrix(cfg);
    CoverageLabelGrid labels = ground_truth_labels(field, coverage_threshold_dbm(cfg.tx));
    MpepOptions mo;
    mo.no_tx_floor_dbm = cfg.no_tx_floor_dbm;

    DatabaseHandle db;
    db.mpep = build_database(cfg.bs_loc, cfg.r_cell_km, labels, cfg.grid, cfg.interference, mo);
    db.scenario_id = "acceptance";
    db.build_timestamp = 20260819;
    db.param_digest = config_digest(cfg);
    db.cell_bs = cfg.bs_loc;
    db.r_cell_km = cfg.r_cell_km;

    const std::string path = "/tmp/tvws_acceptance_db.bin";
    save_database(db, path);
    DatabaseHandle back = load_database(path);
    std::remove(path.c_str());

    bool roundtrip = back.scenario_id == db.scenario_id &&
                     back.build_timestamp == db.build_timestamp &&
                     back.param_digest == db.param_digest && back.r_cell_km == db.r_cell_km;
    for (int i = 0; i < cfg.grid.rows && roundtrip; ++i)
        for (int j = 0; j < cfg.grid.cols; ++j)
            if (!same_bits(back.mpep.mpep_dbm(i, j), db.mpep.mpep_dbm(i, j)) ||
                back.mpep.space_class(i, j) != db.mpep.space_class(i, j) ||
                !same_bits(back.mpep.wcrp_x(i, j), db.mpep.wcrp_x(i, j)) ||
                !same_bits(back.mpep.wcrp_y(i, j), db.mpep.wcrp_y(i, j))) {
                roundtrip = false;
                break;
            }

    auto shared = std::make_shared<const DatabaseHandle>(std::move(back));
    DbServer server(shared, "127.0.0.1", 0);
    REQUIRE(server.port() != 0);

    // every in-cell grid, asked over the wire by 50 clients at once
    std::string request;
    std::vector<std::string> serial;
    for (int i = 0; i < cfg.grid.rows; ++i)
        for (int j = 0; j < cfg.grid.cols; ++j) {
            if (shared->mpep.cls(i, j) == SpaceClass::OutOfCell) continue;
            Location c = cfg.grid.center(i, j);
            char buf[96];
            std::snprintf(buf, sizeof buf, "QUERY %.6f %.6f", c.x_km, c.y_km);
            request += buf;
            request += '\n';
            serial.push_back(handle_request_line(*shared, buf));
        }
    REQUIRE(!serial.empty());

    const int n_clients = 50;
    std::vector<char> matches(n_clients, 0);
    {
        std::vector<std::thread> threads;
        threads.reserve(n_clients);
        for (int t = 0; t < n_clients; ++t)
            threads.emplace_back([&, t] {
                Client c(server.port());
                c.send_all(request);
                matches[t] = c.read_lines(serial.size()) == serial ? 1 : 0;
            });
        for (auto& th : threads) th.join();
    }
    bool concurrent_ok = true;
    for (char m : matches) concurrent_ok = concurrent_ok && m;

    // malformed traffic draws an error, not a hangup
    bool err_ok;
    {
        Client c(server.port());
        c.send_all("QUERY here there\nnonsense\nPING\n");
        auto lines = c.read_lines(3);
        err_ok = lines[0] == "ERR BADREQ" && lines[1] == "ERR BADREQ" && lines[2] == "PONG";
    }
    server.stop();

    bool pass = roundtrip && concurrent_ok && err_ok;
    REPORT(pass,
           "C11: stored map reloads bit for bit: %s; 50 concurrent clients x %zu in-cell "
           "queries all equal the serial answers: %s; malformed requests answered with "
           "ERR and the connection stays up: %s",
           roundtrip ? "yes" : "no", serial.size(), concurrent_ok ? "yes" : "no",
           err_ok ? "yes" : "no");
    CHECK(pass);
}
