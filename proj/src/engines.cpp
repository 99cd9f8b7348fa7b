#include "msens/engines.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace msens {

namespace {

void validate_problem(const SensitivityProblem& p, bool needs_shifted) {
    if (!p.K || !p.M || !p.provider || !p.characteristic) {
        throw std::invalid_argument("SensitivityProblem: missing component");
    }
    const int n = p.K->order();
    if (p.M->order() != n || p.pair.phi.size() != n) {
        throw std::invalid_argument("SensitivityProblem: inconsistent orders");
    }
    if (needs_shifted && !p.shifted) {
        throw std::invalid_argument("SensitivityProblem: shifted factorization required");
    }
}

struct Common {
    int n;
    int q;
    double lambda;
    const Vector& phi;
    Vector mphi;       // M phi
    Vector grad_phi;   // dF/dphi
    double grad_lambda;
    double grad_phi_dot_phi;
};

Common make_common(const SensitivityProblem& p) {
    const Vector& phi = p.pair.phi;
    Vector mphi = (*p.M) * phi;
    Vector g = p.characteristic->partial_phi(p.pair.lambda, phi);
    const double gl = p.characteristic->partial_lambda(p.pair.lambda, phi);
    const double gp = g.dot(phi);
    return Common{p.K->order(), p.provider->param_count(), p.pair.lambda,
                  phi,          std::move(mphi),           std::move(g),
                  gl,           gp};
}

} // namespace

SqmrResult sqmr_solve(const LinearOperator& apply, const ShiftedFactorization& precond,
                      const Vector& rhs, const SqmrConfig& cfg) {
    const int n = static_cast<int>(rhs.size());
    SqmrResult result;
    const double bnorm = rhs.norm();
    if (bnorm == 0.0) {
        result.solution = Vector::Zero(n);
        return result;
    }

    Vector u;
    Vector r(n);
    if (cfg.initial_guess.size() == n && cfg.initial_guess.squaredNorm() != 0.0) {
        u = cfg.initial_guess;
        Vector gu(n);
        apply(u, gu);
        r = rhs - gu;
    } else {
        u = Vector::Zero(n);
        r = rhs;
    }
    if (r.norm() <= cfg.tolerance * bnorm) {
        result.solution = std::move(u);
        result.relative_residual = r.norm() / bnorm;
        return result;
    }

    Vector t = precond.factorization.solve(r);
    double tau = t.norm();
    Vector q = t;
    Vector d = Vector::Zero(n);
    double rho = r.dot(t);
    double theta_prev = 0.0;
    Vector gq(n);

    const double eps = cfg.tolerance;
    auto finish = [&](SqmrStatus status, int iters) {
        Vector gu(n);
        apply(u, gu);
        result.solution = std::move(u);
        result.iterations = iters;
        result.relative_residual = (rhs - gu).norm() / bnorm;
        result.status = status;
        return result;
    };

    for (int it = 1; it <= cfg.max_iterations; ++it) {
        apply(q, gq); // t = G q
        const double sigma = q.dot(gq);
        if (sigma == 0.0 || !std::isfinite(sigma)) {
            return finish(SqmrStatus::Breakdown, it);
        }
        const double alpha = rho / sigma;
        r -= alpha * gq;
        t = precond.factorization.solve(r);

        const double tnorm = t.norm();
        const double theta = tnorm / tau;
        const double c2 = 1.0 / (1.0 + theta * theta);
        tau = tau * theta * std::sqrt(c2);

        d = (c2 * theta_prev * theta_prev) * d + (c2 * alpha) * q;
        u += d;
        theta_prev = theta;

        if (tnorm == 0.0) {
            // Preconditioned residual vanished; the smoothed iterate is exact
            // up to round-off.
            return finish(SqmrStatus::Converged, it);
        }

        const double rnorm = r.norm();
        if (d.norm() <= eps * std::max(1.0, u.norm()) && rnorm <= eps * bnorm) {
            Vector gu(n);
            apply(u, gu);
            const double true_rel = (rhs - gu).norm() / bnorm;
            if (true_rel <= eps) {
                result.solution = std::move(u);
                result.iterations = it;
                result.relative_residual = true_rel;
                result.status = SqmrStatus::Converged;
                return result;
            }
        }
        if (rho == 0.0) {
            return finish(SqmrStatus::Breakdown, it);
        }
        const double rho_next = r.dot(t);
        const double beta = rho_next / rho;
        rho = rho_next;
        q = t + beta * q;
    }
    return finish(SqmrStatus::IterationLimit, cfg.max_iterations);
}

namespace {

// G x = (K - lambda M) x + (M phi)(M phi)' x, applied without forming G.
LinearOperator make_g_operator(const SensitivityProblem& p, const Vector& mphi) {
    const SymSparseMatrix* K = p.K;
    const SymSparseMatrix* M = p.M;
    const double lambda = p.pair.lambda;
    return [K, M, lambda, &mphi](const Vector& x, Vector& y) {
        y.setZero();
        K->multiply_add(x, 1.0, y);
        M->multiply_add(x, -lambda, y);
        y += mphi.dot(x) * mphi;
    };
}

} // namespace

PmState pm_state(const SensitivityProblem& problem, const SqmrConfig& cfg) {
    validate_problem(problem, true);
    Common c = make_common(problem);
    if (c.grad_phi.norm() == 0.0) {
        return PmState{Vector::Zero(c.n), 0};
    }
    const LinearOperator g_op = make_g_operator(problem, c.mphi);
    SqmrResult r = sqmr_solve(g_op, *problem.shifted, c.grad_phi, cfg);
    if (r.status == SqmrStatus::Breakdown) {
        throw ConvergenceError("pm_state: SQMR breakdown before convergence");
    }
    if (r.status == SqmrStatus::IterationLimit) {
        throw ConvergenceError("pm_state: SQMR iteration budget exhausted");
    }
    return PmState{std::move(r.solution), r.iterations};
}

SensitivityResult forward_nelson(const SensitivityProblem& problem) {
    validate_problem(problem, false);
    Common c = make_common(problem);
    SensitivityResult out;
    out.gradient = Vector::Zero(c.q);

    NelsonSolver nelson(*problem.K, *problem.M, problem.pair);
    out.stats.factorizations = 1;

    const DerivativeProvider& dp = *problem.provider;
    for (int k = 0; k < c.q; ++k) {
        const double mk = dp.mass_form(k, c.phi, c.phi);
        const double beta = dp.stiffness_form(k, c.phi, c.phi) - c.lambda * mk;
        // f = -(dK - beta M - lambda dM) phi
        Vector f = beta * c.mphi;
        dp.add_stiffness_product(k, c.phi, -1.0, f);
        dp.add_mass_product(k, c.phi, c.lambda, f);
        Vector eta = nelson.pinned_solve(std::move(f));
        out.stats.large_solves++;
        const double coeff = -c.mphi.dot(eta) - 0.5 * mk;
        out.gradient[k] = problem.characteristic->partial_p(k, c.lambda, c.phi) +
                          c.grad_lambda * beta + c.grad_phi.dot(eta) +
                          coeff * c.grad_phi_dot_phi;
    }
    return out;
}

SensitivityResult forward_algebraic(const SensitivityProblem& problem) {
    validate_problem(problem, false);
    Common c = make_common(problem);
    SensitivityResult out;
    out.gradient = Vector::Zero(c.q);

    BorderedSolver bordered(*problem.K, *problem.M, problem.pair);
    out.stats.factorizations = 1;

    const DerivativeProvider& dp = *problem.provider;
    Vector rhs(c.n);
    for (int k = 0; k < c.q; ++k) {
        const double mk = dp.mass_form(k, c.phi, c.phi);
        rhs.setZero();
        dp.add_stiffness_product(k, c.phi, -1.0, rhs);
        dp.add_mass_product(k, c.phi, c.lambda, rhs);
        auto [dphi, s] = bordered.solve(rhs, -0.5 * mk);
        out.stats.large_solves++;
        const double dlambda = -s;
        out.gradient[k] = problem.characteristic->partial_p(k, c.lambda, c.phi) +
                          c.grad_lambda * dlambda + c.grad_phi.dot(dphi);
    }
    return out;
}

namespace {

// Shared per-parameter accumulation of the adjoint total derivative.
void adjoint_accumulate(const SensitivityProblem& problem, const Common& c,
                        const AdjointState& state, Vector& gradient) {
    const DerivativeProvider& dp = *problem.provider;
    for (int k = 0; k < c.q; ++k) {
        const double vk = dp.stiffness_form(k, state.v, c.phi) -
                          c.lambda * dp.mass_form(k, state.v, c.phi);
        const double mk = dp.mass_form(k, c.phi, c.phi);
        gradient[k] = problem.characteristic->partial_p(k, c.lambda, c.phi) + vk +
                      0.5 * state.alpha * mk;
    }
}

} // namespace

AdjointState adjoint_state_nelson(const SensitivityProblem& problem) {
    validate_problem(problem, false);
    Common c = make_common(problem);
    const double alpha = -c.grad_phi_dot_phi;
    NelsonSolver nelson(*problem.K, *problem.M, problem.pair);
    Vector f = -(c.grad_phi + alpha * c.mphi);
    Vector v0 = nelson.pinned_solve(std::move(f));
    const double coeff = c.grad_lambda - c.mphi.dot(v0);
    return AdjointState{v0 + coeff * c.phi, alpha};
}

AdjointState adjoint_state_algebraic(const SensitivityProblem& problem) {
    validate_problem(problem, false);
    Common c = make_common(problem);
    BorderedSolver bordered(*problem.K, *problem.M, problem.pair);
    auto [v, alpha] = bordered.solve(-c.grad_phi, c.grad_lambda);
    return AdjointState{std::move(v), alpha};
}

SensitivityResult adjoint_nelson(const SensitivityProblem& problem) {
    validate_problem(problem, false);
    Common c = make_common(problem);
    SensitivityResult out;
    out.gradient = Vector::Zero(c.q);

    const double alpha = -c.grad_phi_dot_phi;
    NelsonSolver nelson(*problem.K, *problem.M, problem.pair);
    out.stats.factorizations = 1;
    Vector f = -(c.grad_phi + alpha * c.mphi);
    Vector v0 = nelson.pinned_solve(std::move(f));
    out.stats.large_solves = 1;
    const double coeff = c.grad_lambda - c.mphi.dot(v0);
    AdjointState state{v0 + coeff * c.phi, alpha};

    adjoint_accumulate(problem, c, state, out.gradient);
    return out;
}

SensitivityResult adjoint_algebraic(const SensitivityProblem& problem) {
    validate_problem(problem, false);
    Common c = make_common(problem);
    SensitivityResult out;
    out.gradient = Vector::Zero(c.q);

    BorderedSolver bordered(*problem.K, *problem.M, problem.pair);
    out.stats.factorizations = 1;
    auto [v, alpha] = bordered.solve(-c.grad_phi, c.grad_lambda);
    out.stats.large_solves = 1;
    AdjointState state{std::move(v), alpha};

    adjoint_accumulate(problem, c, state, out.gradient);
    return out;
}

SensitivityResult pm_sensitivity(const SensitivityProblem& problem, const SqmrConfig& cfg) {
    validate_problem(problem, true);
    Common c = make_common(problem);
    SensitivityResult out;
    out.gradient = Vector::Zero(c.q);

    PmState state;
    if (c.grad_phi.norm() == 0.0) {
        state.y = Vector::Zero(c.n);
    } else {
        const LinearOperator g_op = make_g_operator(problem, c.mphi);
        SqmrResult r = sqmr_solve(g_op, *problem.shifted, c.grad_phi, cfg);
        if (r.status != SqmrStatus::Converged) {
            throw ConvergenceError(r.status == SqmrStatus::Breakdown
                                       ? "pm_sensitivity: SQMR breakdown before convergence"
                                       : "pm_sensitivity: SQMR iteration budget exhausted");
        }
        state.y = std::move(r.solution);
        state.sqmr_iterations = r.iterations;
        out.stats.large_solves = 1;
        out.stats.sqmr_iterations = r.iterations;
    }

    const double s = state.y.dot(c.mphi); // y' M phi
    const DerivativeProvider& dp = *problem.provider;
    for (int k = 0; k < c.q; ++k) {
        const double mk = dp.mass_form(k, c.phi, c.phi);
        const double beta = dp.stiffness_form(k, c.phi, c.phi) - c.lambda * mk;
        // y' (-dF_matrix/dp_k - 1/2 M phi phi' dM/dp_k) phi expanded into
        // footprint-sized bilinear forms plus the precomputed scalar s.
        const double ak = dp.stiffness_form(k, state.y, c.phi);
        const double bk = dp.mass_form(k, state.y, c.phi);
        const double alpha_k = -ak + beta * s + c.lambda * bk - 0.5 * s * mk;
        out.gradient[k] = problem.characteristic->partial_p(k, c.lambda, c.phi) +
                          beta * c.grad_lambda + alpha_k;
    }
    return out;
}

EngineKind engine_from_name(const std::string& name) {
    if (name == "fn") {
        return EngineKind::ForwardNelson;
    }
    if (name == "fa") {
        return EngineKind::ForwardAlgebraic;
    }
    if (name == "adne") {
        return EngineKind::AdjointNelson;
    }
    if (name == "adam") {
        return EngineKind::AdjointAlgebraic;
    }
    if (name == "pm") {
        return EngineKind::Pm;
    }
    throw std::invalid_argument("unknown engine '" + name +
                                "' (expected fn, fa, adne, adam or pm)");
}

std::string engine_name(EngineKind kind) {
    switch (kind) {
    case EngineKind::ForwardNelson:
        return "fn";
    case EngineKind::ForwardAlgebraic:
        return "fa";
    case EngineKind::AdjointNelson:
        return "adne";
    case EngineKind::AdjointAlgebraic:
        return "adam";
    case EngineKind::Pm:
        return "pm";
    }
    return "?";
}

SensitivityResult run_engine(EngineKind kind, const SensitivityProblem& problem,
                             const SqmrConfig& cfg) {
    switch (kind) {
    case EngineKind::ForwardNelson:
        return forward_nelson(problem);
    case EngineKind::ForwardAlgebraic:
        return forward_algebraic(problem);
    case EngineKind::AdjointNelson:
        return adjoint_nelson(problem);
    case EngineKind::AdjointAlgebraic:
        return adjoint_algebraic(problem);
    case EngineKind::Pm:
        return pm_sensitivity(problem, cfg);
    }
    throw std::logic_error("run_engine: unknown engine");
}

GDiagnostic assert_g_nonsingular(const SensitivityProblem& problem,
                                 std::span<const EigenPair> all_pairs, const SqmrConfig& cfg) {
    validate_problem(problem, true);
    const int n = problem.K->order();
    const Vector mphi = (*problem.M) * problem.pair.phi;
    const LinearOperator g_op = make_g_operator(problem, mphi);

    std::mt19937_64 rng(0x6d5e4f);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector b(n);
    for (int i = 0; i < n; ++i) {
        b[i] = gauss(rng);
    }

    GDiagnostic diag;
    SqmrResult r = sqmr_solve(g_op, *problem.shifted, b, cfg);
    diag.relative_residual = r.relative_residual;
    diag.iterations = r.iterations;
    diag.nonsingular = r.status == SqmrStatus::Converged && r.relative_residual <= cfg.tolerance;

    double gap = std::numeric_limits<double>::infinity();
    for (const auto& p : all_pairs) {
        if (p.mode == problem.pair.mode) {
            continue;
        }
        gap = std::min(gap, std::abs(p.lambda - problem.pair.lambda));
    }
    if (std::isfinite(gap)) {
        diag.spectral_gap = gap;
    }
    return diag;
}

} // namespace msens
