#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include <CLI11.hpp>

#include "tvws/db_service.hpp"
#include "tvws/eval.hpp"
#include "tvws/matrix_io.hpp"

namespace fs = std::filesystem;
using namespace tvws;

namespace {

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop.store(true); }

Config load_cfg(const std::string& config_path, std::uint64_t seed_flag, bool seed_set) {
    Config cfg = config_path.empty() ? scenario_one() : load_config_file(config_path);
    if (seed_set) cfg.seed = seed_flag;
    return cfg;
}

fs::path ensure_out(const std::string& out) {
    fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
    fs::create_directories(dir);
    return dir;
}

std::string db_path_or_env(const std::string& flag_value) {
    if (const char* env = std::getenv("TVWS_DB_PATH"); env && *env) return env;
    return flag_value;
}

struct PipelineArtifacts {
    GroundTruthRef ref;
    PartialSpectrumMatrix aggregated;
    FpcaResult fpca;
    CoverageLabelGrid detected;
    bool svm_bypassed = false;
    BoundaryModel model;  // valid when !svm_bypassed
};

PipelineArtifacts run_through_detection(const Config& cfg) {
    PipelineArtifacts art;
    art.ref = make_reference(cfg);
    AbnormalSpec abnormal{cfg.abnormal_rate, cfg.abnormal_magnitude_w};
    auto reports = synthesize_reports(art.ref.field_dbm, cfg.grid, cfg.n_sam, cfg.n0_dbm,
                                      cfg.sampling_rate, abnormal, cfg.seed);
    art.aggregated = aggregate_to_grid(reports, cfg.grid, cfg.min_count, cfg.n0_dbm).matrix;
    art.fpca = fpca_complete(art.aggregated, cfg.fpca);

    double p_bar_min = coverage_threshold_dbm(cfg.tx);
    CoverageLabelGrid hyp = hypothesis_labels(art.fpca.matrix, p_bar_min, cfg.delta_p_db);
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < hyp.rows() && !(has_pos && has_neg); ++i)
        for (int j = 0; j < hyp.cols(); ++j)
            (hyp.labels(i, j) == 1 ? has_pos : has_neg) = true;
    if (has_pos && has_neg) {
        SvmTrainOptions topts;
        topts.c_reg = cfg.svm_c;
        topts.subsample = cfg.svm_subsample;
        art.model = train_svm(hyp, cfg.grid, cfg.kernel, topts);
        art.detected = covered_set(art.model, cfg.grid);
    } else {
        art.detected = hyp;
        art.svm_bypassed = true;
    }
    return art;
}

Eigen::MatrixXd labels_as_matrix(const CoverageLabelGrid& labels) {
    return labels.labels.cast<double>();
}

DatabaseHandle make_handle(const Config& cfg, const MpepMap& map) {
    DatabaseHandle db;
    db.mpep = map;
    db.scenario_id = "scenario-" + std::to_string(cfg.scenario);
    db.build_timestamp = static_cast<std::uint64_t>(std::time(nullptr));
    db.param_digest = config_digest(cfg);
    db.cell_bs = cfg.bs_loc;
    db.r_cell_km = cfg.r_cell_km;
    return db;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TV white space database toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, db_path = "tvws.db", listen = "127.0.0.1:4780";
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "flat key=value config file")->expected(1);
    app.add_option("--seed", seed_flag, "sensing seed override")
        ->expected(1)
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--out", out_dir, "output directory (default .)")->expected(1);
    app.fallthrough();

    auto* sim = app.add_subcommand("simulate", "ground truth field and sensing reports");
    auto* comp = app.add_subcommand("complete", "aggregate reports and recover the full matrix");
    auto* det = app.add_subcommand("detect", "recover, then learn the coverage boundary");
    auto* reuse = app.add_subcommand("reuse", "full pipeline to a per-grid power map (CSV)");
    auto* bdb = app.add_subcommand("builddb", "full pipeline to a binary lookup database");
    auto* srv = app.add_subcommand("serve", "answer lookup queries over TCP");
    auto* ev = app.add_subcommand("eval", "sweeps and bias reports against the reference");

    bdb->add_option("--db", db_path, "database file to write");
    srv->add_option("--db", db_path, "database file to load");
    srv->add_option("--listen", listen, "host:port (port 0 picks a free one)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            Config cfg = load_cfg(config_path, seed_flag, seed_set);
            fs::path dir = ensure_out(out_dir);
            Eigen::MatrixXd truth = ground_truth_matrix(cfg);
            write_matrix_text(full_matrix(truth), (dir / "truth.txt").string());
            AbnormalSpec abnormal{cfg.abnormal_rate, cfg.abnormal_magnitude_w};
            auto reports = synthesize_reports(truth, cfg.grid, cfg.n_sam, cfg.n0_dbm,
                                              cfg.sampling_rate, abnormal, cfg.seed);
            write_reports_csv(reports, (dir / "reports.csv").string());
            std::ofstream cfg_out(dir / "config.txt");
            cfg_out << canonical_config_text(cfg);
            std::cout << "wrote " << (dir / "truth.txt").string() << " ("
                      << cfg.grid.rows << "x" << cfg.grid.cols << ") and "
                      << (dir / "reports.csv").string() << " (" << reports.size()
                      << " reports)\n";
        } else if (comp->parsed()) {
            Config cfg = load_cfg(config_path, seed_flag, seed_set);
            fs::path dir = ensure_out(out_dir);
            PipelineArtifacts art = run_through_detection(cfg);
            write_matrix_text(full_matrix(art.fpca.matrix), (dir / "recovered.txt").string());
            std::printf("rse_db=%.4f converged=%d iterations=%d\n",
                        rse_db(art.fpca.matrix, art.ref.field_dbm), art.fpca.converged ? 1 : 0,
                        art.fpca.total_iterations);
            std::cout << "wrote " << (dir / "recovered.txt").string() << "\n";
        } else if (det->parsed()) {
            Config cfg = load_cfg(config_path, seed_flag, seed_set);
            fs::path dir = ensure_out(out_dir);
            PipelineArtifacts art = run_through_detection(cfg);
            write_matrix_text(full_matrix(labels_as_matrix(art.detected)),
                              (dir / "labels.txt").string());
            if (!art.svm_bypassed)
                save_boundary_model(art.model, (dir / "model.txt").string());
            std::printf("detection=%.4f svm_bypassed=%d\n",
                        detection_probability(art.detected, art.ref.labels),
                        art.svm_bypassed ? 1 : 0);
            std::cout << "wrote " << (dir / "labels.txt").string() << "\n";
        } else if (reuse->parsed()) {
            Config cfg = load_cfg(config_path, seed_flag, seed_set);
            fs::path dir = ensure_out(out_dir);
            PipelineArtifacts art = run_through_detection(cfg);
            MpepOptions mopts;
            mopts.no_tx_floor_dbm = cfg.no_tx_floor_dbm;
            MpepMap map = build_database(cfg.bs_loc, cfg.r_cell_km, art.detected, cfg.grid,
                                         cfg.interference, mopts);
            write_mpep_csv(map, (dir / "mpep.csv").string());
            std::cout << "wrote " << (dir / "mpep.csv").string() << "\n";
        } else if (bdb->parsed()) {
            Config cfg = load_cfg(config_path, seed_flag, seed_set);
            fs::path dir = ensure_out(out_dir);
            PipelineArtifacts art = run_through_detection(cfg);
            MpepOptions mopts;
            mopts.no_tx_floor_dbm = cfg.no_tx_floor_dbm;
            MpepMap map = build_database(cfg.bs_loc, cfg.r_cell_km, art.detected, cfg.grid,
                                         cfg.interference, mopts);
            std::string path = db_path_or_env(db_path);
            fs::path full = fs::path(path).is_absolute() ? fs::path(path) : dir / path;
            save_database(make_handle(cfg, map), full.string());
            std::cout << "wrote " << full.string() << "\n";
        } else if (srv->parsed()) {
            std::string path = db_path_or_env(db_path);
            auto handle = std::make_shared<DatabaseHandle>(load_database(path));
            auto colon = listen.rfind(':');
            if (colon == std::string::npos)
                throw std::runtime_error("--listen expects host:port");
            std::string host = listen.substr(0, colon);
            int port = std::stoi(listen.substr(colon + 1));
            if (port < 0 || port > 65535) throw std::runtime_error("port out of range");
            DbServer server(handle, host, static_cast<std::uint16_t>(port));
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "listening on " << host << ":" << server.port() << std::endl;
            while (!g_stop.load())
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server.stop();
        } else if (ev->parsed()) {
            Config cfg = load_cfg(config_path, seed_flag, seed_set);
            fs::path dir = ensure_out(out_dir);
            std::vector<double> rates{0.1, 0.2, 0.3, 0.4, 0.5};
            auto rse_rows = sweep_rse(cfg, rates, {cfg.n_sam}, {cfg.grid_size_m}, cfg.seeds);
            write_rse_csv(rse_rows, (dir / "rse_sweep.csv").string());

            KernelSpec rbf;
            rbf.kind = KernelKind::Rbf;
            KernelSpec quad;
            quad.kind = KernelKind::Polynomial;
            quad.poly_degree = 2;
            auto det_rows = sweep_detection(cfg, {rbf, quad}, rates, cfg.seeds);
            write_detection_csv(det_rows, (dir / "detection_sweep.csv").string());

            GroundTruthRef ref = make_reference(cfg);
            std::vector<double> mpep_bias, ip_bias;
            std::size_t compliant = 0, total = 0;
            for (int s = 0; s < cfg.seeds; ++s) {
                SeedOutcome o = run_pipeline(cfg, cfg.seed + s, ref);
                mpep_bias.insert(mpep_bias.end(), o.bias.mpep_bias_db.begin(),
                                 o.bias.mpep_bias_db.end());
                ip_bias.insert(ip_bias.end(), o.bias.ip_bias.begin(), o.bias.ip_bias.end());
                compliant += o.bias.ip_compliant;
                total += o.bias.in_cell_grids;
            }
            write_cdf_csv(mpep_bias, (dir / "mpep_bias_cdf.csv").string());
            write_cdf_csv(ip_bias, (dir / "ip_bias_cdf.csv").string());
            std::printf("ip_compliance=%.4f over %zu grid evaluations\n",
                        total ? static_cast<double>(compliant) / total : 0.0, total);
            std::cout << "wrote rse_sweep.csv detection_sweep.csv mpep_bias_cdf.csv "
                         "ip_bias_cdf.csv in "
                      << dir.string() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
