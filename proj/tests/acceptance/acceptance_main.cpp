// End-to-end acceptance suite. Each check prints one pass/fail line; the
// process exits nonzero if any check fails. Run a subset with --only <id>.

#include "msens/bench.hpp"
#include "msens/engines.hpp"
#include "msens/verification.hpp"

#include "support/test_problems.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

using namespace msens;
using namespace msens::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass;
    std::string detail;
};

struct PlateProblem {
    PlateModel model;
    DesignVector d;
    SymSparseMatrix K;
    SymSparseMatrix M;
    ModalSolution modes;
    std::unique_ptr<PlateDerivativeProvider> provider;
};

PlateProblem make_plate_problem(int nx, int ny, int n_modes, const DesignVector* densities = nullptr) {
    PlateProblem p{build_plate(nx, ny), {}, {}, {}, {}, nullptr};
    p.d = densities ? *densities : DesignVector::ones(p.model.element_count());
    auto [k, m] = assemble_global(p.model, p.d);
    p.K = std::move(k);
    p.M = std::move(m);
    p.modes = solve_modes(p.K, p.M, n_modes);
    p.provider = std::make_unique<PlateDerivativeProvider>(p.model, p.d);
    return p;
}

SensitivityProblem problem_for(const PlateProblem& p, int mode, const Characteristic& c) {
    SensitivityProblem sp;
    sp.K = &p.K;
    sp.M = &p.M;
    sp.pair = p.modes.pairs[mode - 1];
    sp.shifted = &p.modes.shifted;
    sp.provider = p.provider.get();
    sp.characteristic = &c;
    return sp;
}

// Synthetic "measured" mode: the analyzed shape with a smooth deterministic
// distortion. Correlating against the model's own exact mode makes the MAC
// stationary (gradient identically zero), which is not what the metric is
// used for.
Vector measured_reference(const Vector& phi) {
    Vector ref = phi;
    for (int i = 0; i < ref.size(); ++i) {
        ref[i] *= 1.0 + 0.2 * std::sin(0.37 * i);
    }
    return ref;
}

std::vector<std::unique_ptr<Characteristic>> all_characteristics(const PlateProblem& p,
                                                                 int mse_element) {
    std::vector<std::unique_ptr<Characteristic>> cs;
    cs.push_back(std::make_unique<MacCharacteristic>(measured_reference(p.modes.pairs[0].phi)));
    cs.push_back(std::make_unique<MseCharacteristic>(p.model, p.d, mse_element));
    cs.push_back(std::make_unique<MfCharacteristic>());
    return cs;
}

const char* kCharNames[3] = {"mac", "mse", "mf"};

// ---------------------------------------------------------------------------
// 1. Cross-method accuracy on the 462-DOF plate.
// ---------------------------------------------------------------------------
Outcome criterion_cross_method() {
    const auto t0 = Clock::now();
    PlateProblem p = make_plate_problem(20, 10, 2);
    const int mse_element = 10 * p.model.nx() / 2 + p.model.nx() / 4; // interior element

    double worst = 0.0;
    std::ostringstream detail;
    for (int ci = 0; ci < 3; ++ci) {
        const auto cs = all_characteristics(p, mse_element);
        const SensitivityProblem sp = problem_for(p, 1, *cs[ci]);
        std::vector<Vector> gradients;
        for (EngineKind kind : {EngineKind::Pm, EngineKind::ForwardNelson,
                                EngineKind::ForwardAlgebraic, EngineKind::AdjointNelson,
                                EngineKind::AdjointAlgebraic}) {
            gradients.push_back(run_engine(kind, sp).gradient);
        }
        // Headline number: the single-solve engine against forward-Nelson.
        const double er =
            relative_error(linf_entry(gradients[0]).value, linf_entry(gradients[1]).value);
        detail << kCharNames[ci] << " er=" << er << "% ";
        worst = std::max(worst, er);
        // All engine pairs, sup-norm-normalized over the whole vector.
        for (std::size_t i = 0; i < gradients.size(); ++i) {
            for (std::size_t j = 0; j < gradients.size(); ++j) {
                if (i != j) {
                    worst = std::max(
                        worst, 100.0 * linf_normalized_error(gradients[i], gradients[j]));
                }
            }
        }
    }
    const double elapsed = seconds_since(t0);
    detail << "worst pairwise=" << worst << "% (limit 0.05%), " << elapsed
           << "s (limit 30s)";
    return {worst <= 0.05 && elapsed <= 30.0, detail.str()};
}

// ---------------------------------------------------------------------------
// 2. Closed-form chain values through every engine.
// ---------------------------------------------------------------------------
Outcome criterion_chain() {
    const SymSparseMatrix K = chain_stiffness();
    const SymSparseMatrix M = identity_matrix(2);
    const ModalSolution modes = solve_modes(K, M, 1);
    const EigenPair& pair = modes.pairs[0];

    std::vector<ParamDerivatives> derivs;
    derivs.push_back({SymSparseMatrix::assemble(2, {{0, 0, 1.0}}),
                      SymSparseMatrix::assemble(2, {{0, 0, 0.0}}), 0});
    MatrixDerivativeProvider provider(std::move(derivs));
    MfCharacteristic mf;

    SensitivityProblem sp;
    sp.K = &K;
    sp.M = &M;
    sp.pair = pair;
    sp.shifted = &modes.shifted;
    sp.provider = &provider;
    sp.characteristic = &mf;

    bool pass = true;
    std::ostringstream detail;
    auto expect = [&](const char* name, double got, double want) {
        const bool ok = std::abs(got - want) <= 1e-6;
        pass = pass && ok;
        if (!ok) {
            detail << name << "=" << got << " want " << want << "; ";
        }
    };
    expect("lambda1", pair.lambda, 0.381966);
    expect("phi1x", pair.phi[0], 0.525731);
    expect("phi1y", pair.phi[1], 0.850651);
    expect("dlambda1", eigenvalue_derivative(pair, provider.derivatives(0), M), 0.276393);

    for (EngineKind kind : {EngineKind::ForwardNelson, EngineKind::ForwardAlgebraic,
                            EngineKind::AdjointNelson, EngineKind::AdjointAlgebraic,
                            EngineKind::Pm}) {
        const double got = run_engine(kind, sp).gradient[0];
        expect(engine_name(kind).c_str(), got, -1.894427);
    }
    if (pass) {
        detail << "lambda1, phi1, dlambda1/dk1 and all five engine gradients within 1e-6";
    }
    return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 3. Finite-difference gate on the 4x2 plate.
// ---------------------------------------------------------------------------
Outcome criterion_fd_gate() {
    const auto t0 = Clock::now();
    const PlateModel model = build_plate(4, 2);
    const int q = model.element_count();
    DesignVector d;
    for (int e = 0; e < q; ++e) {
        d.densities.push_back(0.6 + 0.05 * (e % 6));
    }
    PlateProblem p = make_plate_problem(4, 2, 2, &d);
    const int mse_element = 3;

    double worst_pct = 0.0;
    std::string worst_at;
    for (int ci = 0; ci < 3; ++ci) {
        const auto cs = all_characteristics(p, mse_element);
        CharacteristicSpec spec;
        spec.kind = ci == 0 ? CharacteristicSpec::Kind::Mac
                            : (ci == 1 ? CharacteristicSpec::Kind::Mse
                                       : CharacteristicSpec::Kind::Mf);
        spec.element = mse_element;
        if (ci == 0) {
            spec.mac_reference = measured_reference(p.modes.pairs[0].phi);
        }
        const Vector fd = fd_sensitivity(
            p.model, p.d,
            [&spec](const PlateModel& m, const DesignVector& dv) { return spec.make(m, dv); },
            1);
        const double fd_scale = fd.cwiseAbs().maxCoeff();

        const SensitivityProblem sp = problem_for(p, 1, *cs[ci]);
        for (EngineKind kind : {EngineKind::ForwardNelson, EngineKind::ForwardAlgebraic,
                                EngineKind::AdjointNelson, EngineKind::AdjointAlgebraic,
                                EngineKind::Pm}) {
            const Vector g = run_engine(kind, sp).gradient;
            for (int k = 0; k < q; ++k) {
                // Per-parameter relative error with a floor keyed to the
                // vector scale, so near-zero entries compare absolutely.
                const double denom = std::max(std::abs(fd[k]), 1e-6 * fd_scale);
                const double pct = 100.0 * std::abs(g[k] - fd[k]) / denom;
                if (pct > worst_pct) {
                    worst_pct = pct;
                    worst_at = std::string(kCharNames[ci]) + "/" + engine_name(kind) +
                               "/k=" + std::to_string(k);
                }
            }
        }
    }
    const double elapsed = seconds_since(t0);
    std::ostringstream detail;
    detail << "worst " << worst_pct << "% at " << worst_at << " (limit 0.1%), " << elapsed
           << "s (limit 5s)";
    return {worst_pct <= 0.1 && elapsed <= 5.0, detail.str()};
}

// ---------------------------------------------------------------------------
// 4. Single-solve law on the 462-DOF plate.
// ---------------------------------------------------------------------------
Outcome criterion_single_solve() {
    PlateProblem p = make_plate_problem(20, 10, 2);
    const auto cs = all_characteristics(p, 42);
    const SensitivityProblem sp = problem_for(p, 1, *cs[0]);
    const int q = p.model.element_count();

    const int fn = forward_nelson(sp).stats.large_solves;
    const int fa = forward_algebraic(sp).stats.large_solves;
    const int adne = adjoint_nelson(sp).stats.large_solves;
    const int adam = adjoint_algebraic(sp).stats.large_solves;
    const int pm = pm_sensitivity(sp).stats.large_solves;

    std::ostringstream detail;
    detail << "q=" << q << " fn=" << fn << " fa=" << fa << " adne=" << adne
           << " adam=" << adam << " pm=" << pm;
    const bool pass = fn == q && fa == q && adne == 1 && adam == 1 && pm == 1;
    return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 5. Efficiency trend on the 24,442-DOF plate.
// ---------------------------------------------------------------------------
Outcome criterion_efficiency() {
    const auto t0 = Clock::now();
    PlateProblem p = make_plate_problem(120, 100, 1);
    MfCharacteristic mf;
    const SensitivityProblem sp = problem_for(p, 1, mf);

    auto time_engine = [&](EngineKind kind, int reps) {
        std::vector<double> times;
        for (int r = 0; r < reps; ++r) {
            const auto start = Clock::now();
            run_engine(kind, sp);
            times.push_back(seconds_since(start));
        }
        std::sort(times.begin(), times.end());
        return times[times.size() / 2];
    };

    const double t_pm = time_engine(EngineKind::Pm, 5);
    const double t_adne = time_engine(EngineKind::AdjointNelson, 5);
    const double t_adam = time_engine(EngineKind::AdjointAlgebraic, 3);
    const double t_ne = time_engine(EngineKind::ForwardNelson, 1);

    const double elapsed = seconds_since(t0);
    std::ostringstream detail;
    detail << "T_pm=" << t_pm << "s T_adne=" << t_adne << "s T_adam=" << t_adam
           << "s T_ne=" << t_ne << "s ratio ne/pm=" << t_ne / t_pm << " (need >= 10), "
           << elapsed << "s (limit 600s)";
    const bool pass =
        t_pm < t_adam && t_pm < t_adne && t_ne / t_pm >= 10.0 && elapsed <= 600.0;
    return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 6. Preconditioned iterative convergence across the mesh family.
// ---------------------------------------------------------------------------
Outcome criterion_sqmr_convergence() {
    const int meshes[7][2] = {{20, 10}, {40, 10}, {40, 30}, {60, 50},
                              {80, 70}, {100, 80}, {120, 100}};
    int worst_iters = 0;
    double worst_res = 0.0;
    std::string worst_at;
    for (const auto& mesh : meshes) {
        PlateProblem p = make_plate_problem(mesh[0], mesh[1], 2);
        const auto cs = all_characteristics(p, p.model.element_count() / 2);
        for (int ci = 0; ci < 3; ++ci) {
            const SensitivityProblem sp = problem_for(p, 1, *cs[ci]);
            const PmState st = pm_state(sp);

            // Recompute the achieved residual of G y = dF/dphi explicitly.
            const Vector g = cs[ci]->partial_phi(sp.pair.lambda, sp.pair.phi);
            const Vector mphi = p.M * sp.pair.phi;
            Vector gy = p.K * st.y;
            p.M.multiply_add(st.y, -sp.pair.lambda, gy);
            gy += mphi.dot(st.y) * mphi;
            const double res = (g - gy).norm() / g.norm();

            if (st.sqmr_iterations > worst_iters) {
                worst_iters = st.sqmr_iterations;
                worst_at = std::to_string(p.K.order()) + "dof/" + kCharNames[ci];
            }
            worst_res = std::max(worst_res, res);
            if (res > 1e-5 || st.sqmr_iterations > 50) {
                std::ostringstream detail;
                detail << "dofs=" << p.K.order() << " char=" << kCharNames[ci]
                       << " iters=" << st.sqmr_iterations << " res=" << res;
                return {false, detail.str()};
            }
        }
    }
    std::ostringstream detail;
    detail << "all meshes up to 24442 DOFs converged; worst iters=" << worst_iters << " ("
           << worst_at << ", limit 50), worst residual=" << worst_res << " (limit 1e-5)";
    return {true, detail.str()};
}

// ---------------------------------------------------------------------------
// 7. Projected-operator structure on dense problems.
// ---------------------------------------------------------------------------
Outcome criterion_projected_g() {
    double worst_struct = 0.0;
    double worst_solve = 0.0;
    for (const int n : {10, 30, 50}) {
        const SymSparseMatrix k = random_spd(n, 4, 7000 + static_cast<std::uint64_t>(n));
        const SymSparseMatrix m = random_spd(n, 3, 7100 + static_cast<std::uint64_t>(n));
        const auto pairs = dense_modes(k, m);
        const Eigen::MatrixXd kd = Eigen::MatrixXd(k.to_eigen_full());
        const Eigen::MatrixXd md = Eigen::MatrixXd(m.to_eigen_full());
        Eigen::MatrixXd phi(n, n);
        for (int i = 0; i < n; ++i) {
            phi.col(i) = pairs[i].phi;
        }
        for (const int mode : {0, n / 2, n - 1}) {
            const Eigen::VectorXd mphi = md * pairs[mode].phi;
            const Eigen::MatrixXd g =
                kd - pairs[mode].lambda * md + mphi * mphi.transpose();

            Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(n, n);
            for (int j = 0; j < n; ++j) {
                expected(j, j) = j == mode ? 1.0 : pairs[j].lambda - pairs[mode].lambda;
            }
            const Eigen::MatrixXd projected = phi.transpose() * g * phi;
            const double scale = std::max(1.0, std::abs(pairs[n - 1].lambda));
            worst_struct =
                std::max(worst_struct, (projected - expected).cwiseAbs().maxCoeff() / scale);

            const Vector b = random_vector(n, 7200 + static_cast<std::uint64_t>(mode));
            const Vector x = g.partialPivLu().solve(b);
            worst_solve = std::max(worst_solve, (g * x - b).norm() / b.norm());
        }
    }
    std::ostringstream detail;
    detail << "projected-structure deviation " << worst_struct
           << " (limit 1e-8), dense solve residual " << worst_solve << " (limit 1e-10)";
    return {worst_struct <= 1e-8 && worst_solve <= 1e-10, detail.str()};
}

// ---------------------------------------------------------------------------
// 8. Metric fidelity.
// ---------------------------------------------------------------------------
Outcome criterion_metrics() {
    const double er = relative_error(-0.843791, -0.843790);
    const double ratio = efficiency_ratio(2.0515, 0.5505);
    std::ostringstream detail;
    detail << "relative_error=" << er << "% (0.0001% at 4 decimals), ratio=" << ratio
           << " (3.7267 at 4 decimals)";
    const bool pass = std::abs(er - 0.0001) <= 1e-4 &&
                      std::abs(er - 1.1851287e-4) <= 1e-9 &&
                      std::abs(ratio - 3.7267) <= 1e-4;
    return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 9. Characteristic partials against finite differences, 100 random inputs.
// ---------------------------------------------------------------------------
Outcome criterion_partials() {
    const int n = 14;
    int checked = 0;
    double worst = 0.0;
    auto check_rel = [&](double analytic, double fd) {
        const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-9});
        worst = std::max(worst, std::abs(analytic - fd) / denom);
        ++checked;
    };

    for (int trial = 0; trial < 100; ++trial) {
        const std::uint64_t s = 9000 + static_cast<std::uint64_t>(trial) * 13;
        const Vector phi = random_vector(n, s);
        const Vector dir = random_vector(n, s + 1).normalized();
        const double lambda = 0.4 + 0.05 * trial;
        const double h = 1e-6;

        // MAC
        {
            MacCharacteristic mac(random_vector(n, s + 2));
            const double fd =
                (mac.value(lambda, phi + h * dir) - mac.value(lambda, phi - h * dir)) /
                (2.0 * h);
            check_rel(mac.partial_phi(lambda, phi).dot(dir), fd);
            check_rel(mac.partial_lambda(lambda, phi),
                      (mac.value(lambda + h, phi) - mac.value(lambda - h, phi)) / (2.0 * h));
        }
        // MSE, including the density partial.
        {
            std::vector<int> dofs{1, 4, 7, 11};
            Eigen::MatrixXd b(4, 4);
            for (int i = 0; i < 4; ++i) {
                const Vector row = random_vector(4, s + 3 + static_cast<std::uint64_t>(i));
                for (int j = 0; j < 4; ++j) {
                    b(i, j) = row[j];
                }
            }
            const Eigen::MatrixXd ke = b.transpose() * b;
            const double rho = 0.35 + 0.006 * trial;
            MseCharacteristic mse(dofs, ke, rho, 0);
            const double fd =
                (mse.value(lambda, phi + h * dir) - mse.value(lambda, phi - h * dir)) /
                (2.0 * h);
            check_rel(mse.partial_phi(lambda, phi).dot(dir), fd);

            MseCharacteristic plus(dofs, ke, rho + h, 0);
            MseCharacteristic minus(dofs, ke, rho - h, 0);
            const double fd_p = (plus.value(lambda, phi) - minus.value(lambda, phi)) / (2.0 * h);
            check_rel(mse.partial_p(0, lambda, phi), fd_p);
        }
        // MF
        {
            MfCharacteristic mf;
            const double fd =
                (mf.value(lambda, phi + h * dir) - mf.value(lambda, phi - h * dir)) /
                (2.0 * h);
            check_rel(mf.partial_phi(lambda, phi).dot(dir), fd);
            check_rel(mf.partial_lambda(lambda, phi),
                      (mf.value(lambda + h, phi) - mf.value(lambda - h, phi)) / (2.0 * h));
        }
    }
    std::ostringstream detail;
    detail << checked << " partial checks, worst relative deviation " << worst
           << " (limit 1e-6)";
    return {worst <= 1e-6, detail.str()};
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0) {
            only = std::atoi(argv[i + 1]);
        }
    }

    struct Criterion {
        int id;
        const char* title;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "cross-method accuracy, 20x10 plate", criterion_cross_method},
        {2, "closed-form two-DOF chain", criterion_chain},
        {3, "finite-difference gate, 4x2 plate", criterion_fd_gate},
        {4, "single-solve law", criterion_single_solve},
        {5, "efficiency trend, 120x100 plate", criterion_efficiency},
        {6, "preconditioned solver convergence", criterion_sqmr_convergence},
        {7, "projected-operator structure", criterion_projected_g},
        {8, "metric fidelity", criterion_metrics},
        {9, "characteristic partials", criterion_partials},
    };

    bool all_pass = true;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) {
            continue;
        }
        Outcome outcome{false, ""};
        try {
            outcome = c.fn();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        all_pass = all_pass && outcome.pass;
        std::printf("[%s] %d. %s: %s\n", outcome.pass ? "PASS" : "FAIL", c.id, c.title,
                    outcome.detail.c_str());
        std::fflush(stdout);
    }
    return all_pass ? 0 : 1;
}
