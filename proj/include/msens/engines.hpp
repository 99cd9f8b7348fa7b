#pragma once

#include "msens/characteristic.hpp"
#include "msens/eigensolver.hpp"
#include "msens/modal_sensitivity.hpp"
#include "msens/sparse.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msens {

/// Everything a sensitivity method needs: the structural matrices, one
/// eigenpair, the shifted factorization for preconditioning, the parameter
/// derivative source, and the characteristic under study. All referenced
/// objects are immutable while a problem is in use.
struct SensitivityProblem {
    const SymSparseMatrix* K = nullptr;
    const SymSparseMatrix* M = nullptr;
    EigenPair pair;
    const ShiftedFactorization* shifted = nullptr; // required by pm
    const DerivativeProvider* provider = nullptr;
    const Characteristic* characteristic = nullptr;
};

struct SqmrConfig {
    double tolerance = 1e-5;
    int max_iterations = 500;
    Vector initial_guess; // empty = zero
};

enum class SqmrStatus { Converged, Breakdown, IterationLimit };

struct SqmrResult {
    Vector solution;
    int iterations = 0;
    double relative_residual = 0.0;
    SqmrStatus status = SqmrStatus::Converged;
};

/// y = A x for the implicitly applied operator.
using LinearOperator = std::function<void(const Vector&, Vector&)>;

/// Symmetric quasi-minimal-residual iteration for symmetric (possibly
/// indefinite) systems, preconditioned by the shifted factorization. Stops
/// when the iterate update falls below the tolerance and the true relative
/// residual, verified explicitly, is also below it.
SqmrResult sqmr_solve(const LinearOperator& apply, const ShiftedFactorization& precond,
                      const Vector& rhs, const SqmrConfig& cfg = {});

/// Counters for the cost model: large_solves counts full-size linear-system
/// solves (one triangular or Krylov solve per right-hand side).
struct EngineStats {
    int large_solves = 0;
    int factorizations = 0;
    int sqmr_iterations = 0;
};

struct SensitivityResult {
    Vector gradient; // dF/dp, length q
    EngineStats stats;
};

/// Adjoint variables of the augmented function: (K - lambda M) v + dF/dphi
/// + alpha M phi = 0 with phi' M v = dF/dlambda.
struct AdjointState {
    Vector v;
    double alpha = 0.0;
};

AdjointState adjoint_state_nelson(const SensitivityProblem& problem);
AdjointState adjoint_state_algebraic(const SensitivityProblem& problem);

/// Solution of G y = dF/dphi with G = K - lambda M + M phi phi' M applied
/// implicitly (two sparse matvecs plus a rank-1 update; G is never formed).
struct PmState {
    Vector y;
    int sqmr_iterations = 0;
};

PmState pm_state(const SensitivityProblem& problem, const SqmrConfig& cfg = {});

// The five end-to-end methods. Forward methods perform one large solve per
// parameter; the adjoint methods and the single-solve iterative method
// perform exactly one regardless of the parameter count.
SensitivityResult forward_nelson(const SensitivityProblem& problem);
SensitivityResult forward_algebraic(const SensitivityProblem& problem);
SensitivityResult adjoint_nelson(const SensitivityProblem& problem);
SensitivityResult adjoint_algebraic(const SensitivityProblem& problem);
SensitivityResult pm_sensitivity(const SensitivityProblem& problem, const SqmrConfig& cfg = {});

enum class EngineKind { ForwardNelson, ForwardAlgebraic, AdjointNelson, AdjointAlgebraic, Pm };

EngineKind engine_from_name(const std::string& name); // fn, fa, adne, adam, pm
std::string engine_name(EngineKind kind);

SensitivityResult run_engine(EngineKind kind, const SensitivityProblem& problem,
                             const SqmrConfig& cfg = {});

/// Probe of G's invertibility: solve G x = b for a fixed random b and report
/// the achieved residual plus the spectral gap to the nearest other mode
/// (when neighbouring eigenvalues are supplied).
struct GDiagnostic {
    bool nonsingular = false;
    double relative_residual = 0.0;
    int iterations = 0;
    std::optional<double> spectral_gap;
};

GDiagnostic assert_g_nonsingular(const SensitivityProblem& problem,
                                 std::span<const EigenPair> all_pairs = {},
                                 const SqmrConfig& cfg = {});

} // namespace msens
