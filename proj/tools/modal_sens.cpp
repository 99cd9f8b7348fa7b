// Benchmark and analysis driver: builds the clamped plate, solves the modes,
// runs the selected sensitivity engines, and emits accuracy/timing tables.

#include "msens/bench.hpp"
#include "msens/verification.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::vector<msens::EngineKind> parse_engines(const std::string& list) {
    std::vector<msens::EngineKind> engines;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            engines.push_back(msens::engine_from_name(item));
        }
    }
    if (engines.empty()) {
        throw std::invalid_argument("engine list is empty");
    }
    return engines;
}

// Model config file: {"nx":..,"ny":..,"material":{...},"densities":{"default":..,"overrides":{"12":0.5}}}
void apply_model_config(msens::RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open model config '" + path + "'");
    }
    const nlohmann::json j = nlohmann::json::parse(in);
    cfg.nx = j.value("nx", cfg.nx);
    cfg.ny = j.value("ny", cfg.ny);
    if (j.contains("material")) {
        const auto& m = j.at("material");
        cfg.material.youngs_modulus = m.value("youngs_modulus", cfg.material.youngs_modulus);
        cfg.material.poisson_ratio = m.value("poisson_ratio", cfg.material.poisson_ratio);
        cfg.material.density = m.value("density", cfg.material.density);
        cfg.material.thickness = m.value("thickness", cfg.material.thickness);
    }
    if (j.contains("densities")) {
        const auto& dj = j.at("densities");
        const double fill = dj.value("default", 1.0);
        cfg.densities.assign(static_cast<std::size_t>(cfg.nx) * cfg.ny, fill);
        if (dj.contains("overrides")) {
            for (const auto& [key, value] : dj.at("overrides").items()) {
                const int e = std::stoi(key);
                if (e < 0 || e >= static_cast<int>(cfg.densities.size())) {
                    throw std::runtime_error("density override index out of range: " + key);
                }
                cfg.densities[static_cast<std::size_t>(e)] = value.get<double>();
            }
        }
    }
}

// Debug export of the assembled stiffness/mass matrices.
void dump_matrices(const msens::RunConfig& cfg, const std::string& prefix) {
    msens::PlateModel model = msens::build_plate(cfg.nx, cfg.ny, cfg.material);
    const msens::DesignVector d = cfg.densities.empty()
                                      ? msens::DesignVector::ones(model.element_count())
                                      : msens::DesignVector{cfg.densities};
    auto [k, m] = msens::assemble_global(model, d);
    for (const auto& [matrix, suffix] :
         {std::pair<const msens::SymSparseMatrix&, const char*>{k, ".K.mtx"},
          std::pair<const msens::SymSparseMatrix&, const char*>{m, ".M.mtx"}}) {
        const std::string path = prefix + suffix;
        std::ofstream out(path);
        if (!out) {
            throw std::runtime_error("cannot open matrix dump file '" + path + "'");
        }
        matrix.write_matrix_market(out);
    }
}

int run_and_emit(const msens::RunConfig& cfg, const std::string& out_path,
                 const std::string& format, bool append_csv) {
    msens::RunArtifacts artifacts;
    try {
        artifacts = msens::run(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error [run]: " << e.what() << '\n';
        return 1;
    }

    const msens::ReportFormat fmt =
        format == "json" ? msens::ReportFormat::Json : msens::ReportFormat::Csv;
    try {
        if (out_path.empty() || out_path == "-") {
            msens::emit(artifacts.report, fmt, std::cout);
        } else if (append_csv && fmt == msens::ReportFormat::Csv) {
            std::ofstream out(out_path, std::ios::app);
            if (!out) {
                throw std::runtime_error("cannot open output file '" + out_path + "'");
            }
            msens::emit(artifacts.report, fmt, out);
        } else {
            msens::emit(artifacts.report, fmt, out_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error [emit]: " << e.what() << '\n';
        return 1;
    }

    for (const auto& e : artifacts.report.engines) {
        std::printf("%-5s linf=% .8e at %-6d median=%.6gs solves=%d\n", e.name.c_str(),
                    e.linf_value, e.argmax_index, e.time_median_s, e.large_solves);
    }
    return msens::all_pairwise_errors_finite(artifacts.report) ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"modal characteristic sensitivity benchmark"};
    app.require_subcommand(1);

    // ---- run ----
    msens::RunConfig cfg;
    std::string char_name = "mf";
    std::string engine_list = "pm";
    std::string out_path;
    std::string format = "csv";
    std::string model_config;
    auto* run_cmd = app.add_subcommand("run", "single benchmark run");
    run_cmd->add_option("--nx", cfg.nx, "elements along X");
    run_cmd->add_option("--ny", cfg.ny, "elements along Y");
    run_cmd->add_option("--mode", cfg.mode, "mode number (1-based)");
    run_cmd->add_option("--char", char_name, "characteristic: mac, mse or mf");
    run_cmd->add_option("--element", cfg.element, "element index for mse");
    run_cmd->add_option("--ref-mode-source", cfg.ref_mode_source,
                        "mac reference: 'auto' or a vector file");
    run_cmd->add_option("--ref-j", cfg.ref_mode, "mac auto reference mode (default: --mode)");
    run_cmd->add_option("--engines", engine_list, "comma list of fn,fa,adne,adam,pm");
    run_cmd->add_option("--reps", cfg.repetitions, "timing repetitions");
    run_cmd->add_option("--mu", cfg.mu, "eigensolver shift");
    run_cmd->add_option("--tol", cfg.sqmr.tolerance, "iterative solver tolerance");
    run_cmd->add_option("--max-iter", cfg.sqmr.max_iterations, "iterative solver budget");
    run_cmd->add_option("--out", out_path, "output path ('-' = stdout)");
    run_cmd->add_option("--format", format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    run_cmd->add_option("--model-config", model_config, "JSON model description file");
    std::string dump_prefix;
    run_cmd->add_option("--dump-matrices", dump_prefix,
                        "write assembled K/M as <prefix>.K.mtx and <prefix>.M.mtx");

    // ---- sweep ----
    std::string grid_path;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a grid of mesh sizes");
    sweep_cmd->add_option("--grid", grid_path, "JSON sweep description")->required();

    // ---- verify ----
    int v_nx = 4, v_ny = 2, v_mode = 1, v_element = 0;
    std::string v_char = "mf";
    std::string v_engines = "fn,fa,adne,adam,pm";
    double v_tol_pct = 0.1;
    double v_step = 1e-6;
    double v_density = 0.9;
    auto* verify_cmd = app.add_subcommand("verify", "finite-difference oracle gate");
    verify_cmd->add_option("--nx", v_nx, "elements along X");
    verify_cmd->add_option("--ny", v_ny, "elements along Y");
    verify_cmd->add_option("--mode", v_mode, "mode number (1-based)");
    verify_cmd->add_option("--char", v_char, "characteristic: mac, mse or mf");
    verify_cmd->add_option("--element", v_element, "element index for mse");
    verify_cmd->add_option("--engines", v_engines, "engines to gate");
    verify_cmd->add_option("--tol-pct", v_tol_pct, "max allowed error vs the oracle, percent");
    verify_cmd->add_option("--step", v_step, "finite-difference step");
    verify_cmd->add_option("--density", v_density,
                           "uniform baseline pseudo-density (must leave room for +step)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            if (!model_config.empty()) {
                apply_model_config(cfg, model_config);
            }
            cfg.characteristic = msens::CharacteristicSpec::kind_from_name(char_name);
            cfg.engines = parse_engines(engine_list);
            if (!dump_prefix.empty()) {
                dump_matrices(cfg, dump_prefix);
            }
            return run_and_emit(cfg, out_path, format, /*append_csv=*/false);
        }

        if (*sweep_cmd) {
            std::ifstream in(grid_path);
            if (!in) {
                std::cerr << "error [sweep]: cannot open grid file '" << grid_path << "'\n";
                return 1;
            }
            const nlohmann::json j = nlohmann::json::parse(in);
            msens::RunConfig base;
            base.mode = j.value("mode", 1);
            base.repetitions = j.value("reps", 20);
            base.characteristic =
                msens::CharacteristicSpec::kind_from_name(j.value("char", std::string("mf")));
            base.element = j.value("element", 0);
            base.ref_mode = j.value("ref_j", 0);
            base.sqmr.tolerance = j.value("tol", 1e-5);
            base.engines = parse_engines(j.value("engines", std::string("pm")));
            const std::string sweep_out = j.value("out", std::string("-"));
            const std::string sweep_format = j.value("format", std::string("csv"));
            if (sweep_format == "csv" && !sweep_out.empty() && sweep_out != "-") {
                std::ofstream(sweep_out).close(); // truncate; runs append below
            }
            int rc = 0;
            bool first = true;
            for (const auto& entry : j.at("grid")) {
                msens::RunConfig c = base;
                c.nx = entry.at("nx").get<int>();
                c.ny = entry.at("ny").get<int>();
                if (entry.contains("engines")) {
                    c.engines = parse_engines(entry.at("engines").get<std::string>());
                }
                if (entry.contains("reps")) {
                    c.repetitions = entry.at("reps").get<int>();
                }
                std::fprintf(stderr, "sweep: %dx%d\n", c.nx, c.ny);
                rc |= run_and_emit(c, sweep_out, sweep_format, /*append_csv=*/!first);
                first = false;
            }
            return rc;
        }

        if (*verify_cmd) {
            msens::RunConfig vc;
            vc.nx = v_nx;
            vc.ny = v_ny;
            vc.mode = v_mode;
            vc.element = v_element;
            vc.characteristic = msens::CharacteristicSpec::kind_from_name(v_char);
            vc.engines = parse_engines(v_engines);
            vc.repetitions = 1;
            if (vc.characteristic == msens::CharacteristicSpec::Kind::Mac && vc.ref_mode == 0) {
                vc.ref_mode = v_mode + 1; // self-reference makes every sensitivity vanish
            }
            vc.densities.assign(static_cast<std::size_t>(v_nx) * v_ny, v_density);

            msens::RunArtifacts artifacts = msens::run(vc);

            msens::PlateModel model = msens::build_plate(vc.nx, vc.ny, vc.material);
            msens::DesignVector d{vc.densities};
            msens::CharacteristicSpec cspec;
            cspec.kind = vc.characteristic;
            cspec.element = vc.element;
            if (cspec.kind == msens::CharacteristicSpec::Kind::Mac) {
                auto [K, M] = msens::assemble_global(model, d);
                msens::ModalSolution sol = msens::solve_modes(K, M, vc.ref_mode);
                cspec.mac_reference = sol.pairs[vc.ref_mode - 1].phi;
            }
            msens::FdConfig fd_cfg;
            fd_cfg.step = v_step;
            const msens::Vector fd = msens::fd_sensitivity(
                model, d,
                [&cspec](const msens::PlateModel& m, const msens::DesignVector& dv) {
                    return cspec.make(m, dv);
                },
                vc.mode, fd_cfg);

            bool ok = true;
            for (std::size_t i = 0; i < artifacts.gradients.size(); ++i) {
                const double err_pct =
                    100.0 * msens::linf_normalized_error(artifacts.gradients[i], fd);
                const bool pass = err_pct <= v_tol_pct;
                ok = ok && pass;
                std::printf("%-5s vs fd: %.6f%%  [%s]\n",
                            artifacts.report.engines[i].name.c_str(), err_pct,
                            pass ? "ok" : "FAIL");
            }
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
