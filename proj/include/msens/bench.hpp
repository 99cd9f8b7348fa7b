#pragma once

#include "msens/characteristic.hpp"
#include "msens/engines.hpp"
#include "msens/plate.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace msens {

/// One benchmark run: build the plate, solve the modes once, execute every
/// requested engine with timing, and cross-compare the results.
struct RunConfig {
    int nx = 20;
    int ny = 10;
    Material material{};
    std::vector<double> densities; // empty = all ones
    int mode = 1;                  // 1-based
    CharacteristicSpec::Kind characteristic = CharacteristicSpec::Kind::Mf;
    int element = 0;               // MSE element index
    std::string ref_mode_source = "auto"; // MAC: "auto" or a whitespace-separated vector file
    int ref_mode = 0;              // MAC auto reference mode; 0 = same as `mode`
    std::vector<EngineKind> engines{EngineKind::Pm};
    SqmrConfig sqmr{};
    double mu = 0.0;
    int repetitions = 20;
    EigenSolveOptions eigen{};

    void validate() const;
};

struct EngineReport {
    std::string name;
    double linf_value = 0.0;
    int argmax_index = 0;
    double time_median_s = 0.0;
    double time_mean_s = 0.0;
    int large_solves = 0;
    int factorizations = 0;
    int sqmr_iterations = 0;
    double rel_err_vs_ne_pct = 0.0; // NaN when fn absent or incomparable
    double ratio_vs_pm = 0.0;       // NaN when pm absent
};

struct BenchReport {
    int nx = 0;
    int ny = 0;
    int dofs = 0;
    int q = 0;
    int mode = 0;
    std::string characteristic;
    double setup_seconds = 0.0; // eigensolve including the shared factorization
    int repetitions = 0;
    std::vector<EngineReport> engines;
    /// Pairwise percent errors between the engines' sup-norm entries,
    /// row = engine, column = reference engine. NaN where undefined.
    std::vector<std::vector<double>> pairwise_error_pct;
};

struct RunArtifacts {
    BenchReport report;
    std::vector<Vector> gradients; // aligned with report.engines
};

RunArtifacts run(const RunConfig& config);

enum class ReportFormat { Csv, Json };

void emit(const BenchReport& report, ReportFormat format, const std::string& path);
void emit(const BenchReport& report, ReportFormat format, std::ostream& os);

std::string to_json_string(const BenchReport& report);
BenchReport bench_report_from_json(const std::string& text);

/// True when every requested engine completed with finite cross errors; the
/// CLI exit code mirrors this.
bool all_pairwise_errors_finite(const BenchReport& report);

} // namespace msens
