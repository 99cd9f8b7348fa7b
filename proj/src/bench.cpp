#include "msens/bench.hpp"

#include "msens/verification.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace msens {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x;
    }
    return acc / static_cast<double>(v.size());
}

Vector load_vector_file(const std::string& path, int expected_size) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open reference-mode file '" + path + "'");
    }
    std::vector<double> values;
    double x = 0.0;
    while (in >> x) {
        values.push_back(x);
    }
    if (static_cast<int>(values.size()) != expected_size) {
        throw std::runtime_error("reference-mode file '" + path + "' holds " +
                                 std::to_string(values.size()) + " values, expected " +
                                 std::to_string(expected_size));
    }
    Vector v(expected_size);
    for (int i = 0; i < expected_size; ++i) {
        v[i] = values[i];
    }
    return v;
}

} // namespace

void RunConfig::validate() const {
    if (engines.empty()) {
        throw std::invalid_argument("RunConfig: at least one engine required");
    }
    if (repetitions < 1) {
        throw std::invalid_argument("RunConfig: repetitions must be >= 1");
    }
    if (mode < 1) {
        throw std::invalid_argument("RunConfig: mode numbers start at 1");
    }
    if (ref_mode < 0) {
        throw std::invalid_argument("RunConfig: reference mode must be >= 1 (or 0 for default)");
    }
}

RunArtifacts run(const RunConfig& config) {
    config.validate();

    PlateModel model = build_plate(config.nx, config.ny, config.material);
    DesignVector d = config.densities.empty() ? DesignVector::ones(model.element_count())
                                              : DesignVector{config.densities};
    auto [K, M] = assemble_global(model, d);

    const bool mac = config.characteristic == CharacteristicSpec::Kind::Mac;
    const bool mac_auto = mac && config.ref_mode_source == "auto";
    const int ref_mode = config.ref_mode == 0 ? config.mode : config.ref_mode;
    const int n_modes = mac_auto ? std::max(config.mode, ref_mode) : config.mode;

    EigenSolveOptions eigen_opts = config.eigen;
    eigen_opts.mu = config.mu;
    const auto setup_start = Clock::now();
    ModalSolution modes = solve_modes(K, M, n_modes, eigen_opts);
    const double setup_seconds = seconds_since(setup_start);

    CharacteristicSpec cspec;
    cspec.kind = config.characteristic;
    cspec.element = config.element;
    if (mac) {
        cspec.mac_reference = mac_auto ? modes.pairs[ref_mode - 1].phi
                                       : load_vector_file(config.ref_mode_source, K.order());
    }
    auto characteristic = cspec.make(model, d);
    PlateDerivativeProvider provider(model, d);

    SensitivityProblem problem;
    problem.K = &K;
    problem.M = &M;
    problem.pair = modes.pairs[config.mode - 1];
    problem.shifted = &modes.shifted;
    problem.provider = &provider;
    problem.characteristic = characteristic.get();

    RunArtifacts artifacts;
    BenchReport& report = artifacts.report;
    report.nx = config.nx;
    report.ny = config.ny;
    report.dofs = K.order();
    report.q = provider.param_count();
    report.mode = config.mode;
    report.characteristic = CharacteristicSpec::name(config.characteristic);
    report.setup_seconds = setup_seconds;
    report.repetitions = config.repetitions;

    for (EngineKind kind : config.engines) {
        SensitivityResult result = run_engine(kind, problem, config.sqmr);
        std::vector<double> times;
        times.reserve(config.repetitions);
        for (int rep = 0; rep < config.repetitions; ++rep) {
            const auto start = Clock::now();
            run_engine(kind, problem, config.sqmr);
            times.push_back(seconds_since(start));
        }
        EngineReport er;
        er.name = engine_name(kind);
        const LinfEntry entry = linf_entry(result.gradient);
        er.linf_value = entry.value;
        er.argmax_index = entry.index;
        er.time_median_s = median(times);
        er.time_mean_s = mean(times);
        er.large_solves = result.stats.large_solves;
        er.factorizations = result.stats.factorizations;
        er.sqmr_iterations = result.stats.sqmr_iterations;
        er.rel_err_vs_ne_pct = kNaN;
        er.ratio_vs_pm = kNaN;
        report.engines.push_back(std::move(er));
        artifacts.gradients.push_back(std::move(result.gradient));
    }

    const auto find_engine = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < report.engines.size(); ++i) {
            if (report.engines[i].name == name) {
                return static_cast<int>(i);
            }
        }
        return -1;
    };
    const int ne_idx = find_engine("fn");
    const int pm_idx = find_engine("pm");

    const std::size_t n_engines = report.engines.size();
    report.pairwise_error_pct.assign(n_engines, std::vector<double>(n_engines, kNaN));
    for (std::size_t i = 0; i < n_engines; ++i) {
        for (std::size_t j = 0; j < n_engines; ++j) {
            if (i == j) {
                report.pairwise_error_pct[i][j] = 0.0;
                continue;
            }
            const double ref = report.engines[j].linf_value;
            if (ref != 0.0) {
                report.pairwise_error_pct[i][j] =
                    relative_error(report.engines[i].linf_value, ref);
            }
        }
        if (ne_idx >= 0 && static_cast<int>(i) != ne_idx) {
            report.engines[i].rel_err_vs_ne_pct = report.pairwise_error_pct[i][ne_idx];
        }
        if (pm_idx >= 0 && static_cast<int>(i) != pm_idx) {
            report.engines[i].ratio_vs_pm = efficiency_ratio(
                report.engines[i].time_median_s,
                std::max(report.engines[pm_idx].time_median_s,
                         std::numeric_limits<double>::min()));
        }
    }
    return artifacts;
}

namespace {

void write_csv_field(std::ostream& os, double v) {
    if (std::isnan(v)) {
        return; // empty field
    }
    std::ostringstream tmp;
    tmp.precision(17);
    tmp << v;
    os << tmp.str();
}

} // namespace

void emit(const BenchReport& report, ReportFormat format, std::ostream& os) {
    if (format == ReportFormat::Csv) {
        os << "engine,dofs,q,linf_sensitivity,argmax_index,time_median_s,"
              "rel_err_vs_ne_pct,ratio_vs_pm\n";
        for (const auto& e : report.engines) {
            os << e.name << ',' << report.dofs << ',' << report.q << ',';
            write_csv_field(os, e.linf_value);
            os << ',' << e.argmax_index << ',';
            write_csv_field(os, e.time_median_s);
            os << ',';
            write_csv_field(os, e.rel_err_vs_ne_pct);
            os << ',';
            write_csv_field(os, e.ratio_vs_pm);
            os << '\n';
        }
    } else {
        os << to_json_string(report) << '\n';
    }
}

void emit(const BenchReport& report, ReportFormat format, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("emit: cannot open output file '" + path + "'");
    }
    emit(report, format, out);
    if (!out) {
        throw std::runtime_error("emit: write to '" + path + "' failed");
    }
}

namespace {

nlohmann::json number_or_null(double v) {
    if (std::isnan(v)) {
        return nullptr;
    }
    return v;
}

double double_or_nan(const nlohmann::json& j) {
    return j.is_null() ? kNaN : j.get<double>();
}

} // namespace

std::string to_json_string(const BenchReport& report) {
    nlohmann::json j;
    j["nx"] = report.nx;
    j["ny"] = report.ny;
    j["dofs"] = report.dofs;
    j["q"] = report.q;
    j["mode"] = report.mode;
    j["characteristic"] = report.characteristic;
    j["setup_seconds"] = report.setup_seconds;
    j["repetitions"] = report.repetitions;
    j["engines"] = nlohmann::json::array();
    for (const auto& e : report.engines) {
        nlohmann::json je;
        je["name"] = e.name;
        je["linf_value"] = e.linf_value;
        je["argmax_index"] = e.argmax_index;
        je["time_median_s"] = e.time_median_s;
        je["time_mean_s"] = e.time_mean_s;
        je["large_solves"] = e.large_solves;
        je["factorizations"] = e.factorizations;
        je["sqmr_iterations"] = e.sqmr_iterations;
        je["rel_err_vs_ne_pct"] = number_or_null(e.rel_err_vs_ne_pct);
        je["ratio_vs_pm"] = number_or_null(e.ratio_vs_pm);
        j["engines"].push_back(std::move(je));
    }
    j["pairwise_error_pct"] = nlohmann::json::array();
    for (const auto& row : report.pairwise_error_pct) {
        nlohmann::json jrow = nlohmann::json::array();
        for (double v : row) {
            jrow.push_back(number_or_null(v));
        }
        j["pairwise_error_pct"].push_back(std::move(jrow));
    }
    return j.dump(2);
}

BenchReport bench_report_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    BenchReport report;
    report.nx = j.at("nx").get<int>();
    report.ny = j.at("ny").get<int>();
    report.dofs = j.at("dofs").get<int>();
    report.q = j.at("q").get<int>();
    report.mode = j.at("mode").get<int>();
    report.characteristic = j.at("characteristic").get<std::string>();
    report.setup_seconds = j.at("setup_seconds").get<double>();
    report.repetitions = j.at("repetitions").get<int>();
    for (const auto& je : j.at("engines")) {
        EngineReport e;
        e.name = je.at("name").get<std::string>();
        e.linf_value = je.at("linf_value").get<double>();
        e.argmax_index = je.at("argmax_index").get<int>();
        e.time_median_s = je.at("time_median_s").get<double>();
        e.time_mean_s = je.at("time_mean_s").get<double>();
        e.large_solves = je.at("large_solves").get<int>();
        e.factorizations = je.at("factorizations").get<int>();
        e.sqmr_iterations = je.at("sqmr_iterations").get<int>();
        e.rel_err_vs_ne_pct = double_or_nan(je.at("rel_err_vs_ne_pct"));
        e.ratio_vs_pm = double_or_nan(je.at("ratio_vs_pm"));
        report.engines.push_back(std::move(e));
    }
    for (const auto& jrow : j.at("pairwise_error_pct")) {
        std::vector<double> row;
        for (const auto& v : jrow) {
            row.push_back(double_or_nan(v));
        }
        report.pairwise_error_pct.push_back(std::move(row));
    }
    return report;
}

bool all_pairwise_errors_finite(const BenchReport& report) {
    for (std::size_t i = 0; i < report.pairwise_error_pct.size(); ++i) {
        for (std::size_t k = 0; k < report.pairwise_error_pct[i].size(); ++k) {
            if (i != k && !std::isfinite(report.pairwise_error_pct[i][k])) {
                return false;
            }
        }
    }
    return true;
}

} // namespace msens
