#pragma once

#include "msens/eigensolver.hpp"
#include "msens/plate.hpp"
#include "msens/sparse.hpp"

#include <memory>
#include <vector>

namespace msens {

/// dK/dp_k and dM/dp_k for one parameter.
struct ParamDerivatives {
    SymSparseMatrix dK;
    SymSparseMatrix dM;
    int k = -1;
};

/// Source of parameter derivatives. The bilinear-form and product hooks let
/// implementations with local footprints (one element per parameter) keep the
/// per-parameter work independent of the matrix order; the defaults fall back
/// to the assembled global derivative matrices.
class DerivativeProvider {
public:
    virtual ~DerivativeProvider() = default;

    virtual int param_count() const = 0;
    virtual ParamDerivatives derivatives(int k) const = 0;

    /// u' (dK/dp_k) v
    virtual double stiffness_form(int k, const Vector& u, const Vector& v) const;
    /// u' (dM/dp_k) v
    virtual double mass_form(int k, const Vector& u, const Vector& v) const;
    /// out += scale * (dK/dp_k) x
    virtual void add_stiffness_product(int k, const Vector& x, double scale, Vector& out) const;
    /// out += scale * (dM/dp_k) x
    virtual void add_mass_product(int k, const Vector& x, double scale, Vector& out) const;
};

/// Provider over explicitly assembled derivative matrices.
class MatrixDerivativeProvider : public DerivativeProvider {
public:
    explicit MatrixDerivativeProvider(std::vector<ParamDerivatives> derivatives);

    int param_count() const override { return static_cast<int>(derivatives_.size()); }
    ParamDerivatives derivatives(int k) const override;
    double stiffness_form(int k, const Vector& u, const Vector& v) const override;
    double mass_form(int k, const Vector& u, const Vector& v) const override;
    void add_stiffness_product(int k, const Vector& x, double scale, Vector& out) const override;
    void add_mass_product(int k, const Vector& x, double scale, Vector& out) const override;

private:
    std::vector<ParamDerivatives> derivatives_;
};

/// Pseudo-density provider for the plate: parameter k is element k's density,
/// dK/drho_k = 3 rho_k^2 Ke and dM/drho_k = Me on an 8-DOF footprint.
class PlateDerivativeProvider : public DerivativeProvider {
public:
    PlateDerivativeProvider(const PlateModel& model, const DesignVector& d);

    int param_count() const override { return model_->element_count(); }
    ParamDerivatives derivatives(int k) const override;
    double stiffness_form(int k, const Vector& u, const Vector& v) const override;
    double mass_form(int k, const Vector& u, const Vector& v) const override;
    void add_stiffness_product(int k, const Vector& x, double scale, Vector& out) const override;
    void add_mass_product(int k, const Vector& x, double scale, Vector& out) const override;

private:
    const PlateModel* model_;
    DesignVector design_;
};

struct ModeDerivative {
    double dlambda = 0.0;
    Vector dphi;
};

/// dlambda_i/dp_k = phi' (dK/dp_k - lambda dM/dp_k) phi for an M-normalized pair.
double eigenvalue_derivative(const EigenPair& pair, const ParamDerivatives& pd,
                             const SymSparseMatrix& M);

/// Nelson's construction around a mode: A = K - lambda M with row/column j
/// (the largest eigenvector entry) zeroed except for the diagonal, which is
/// replaced by K_jj. The factorization is parameter-independent, so one
/// instance serves every right-hand side.
class NelsonSolver {
public:
    NelsonSolver(const SymSparseMatrix& K, const SymSparseMatrix& M, const EigenPair& pair);

    int pin_index() const { return pin_; }

    /// Particular solution of A_bar eta = f_bar, where f_bar is f with the
    /// pinned component zeroed. f is taken by value and modified.
    Vector pinned_solve(Vector f) const;

    /// Eigenvector derivative (particular + homogeneous parts) given the
    /// already-computed eigenvalue derivative.
    Vector eigvec_derivative(const DerivativeProvider& provider, int k, double dlambda) const;

private:
    const SymSparseMatrix* M_;
    EigenPair pair_;
    Vector mphi_;
    int pin_ = 0;
    LdltFactorization factorization_;
};

/// Bordered (N+1) system [[K - lambda M, M phi], [phi' M, 0]] solved with a
/// pivoting sparse LU; the leading block is singular by construction, so an
/// unpivoted symmetric factorization is not safe here. This is the baseline
/// path, not the recommended one, and no fill-in tuning is attempted.
class BorderedSolver {
public:
    BorderedSolver(const SymSparseMatrix& K, const SymSparseMatrix& M, const EigenPair& pair);
    ~BorderedSolver();
    BorderedSolver(BorderedSolver&&) noexcept;
    BorderedSolver& operator=(BorderedSolver&&) noexcept;

    /// Solve [[K - lambda M, M phi], [phi' M, 0]] (x, s) = (rhs, border_rhs).
    std::pair<Vector, double> solve(const Vector& rhs, double border_rhs) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// One-parameter eigenvector derivative by Nelson's method.
Vector nelson_eigvec_derivative(const SymSparseMatrix& K, const SymSparseMatrix& M,
                                const EigenPair& pair, const ParamDerivatives& pd,
                                double dlambda);

/// Simultaneous (dphi, dlambda) from the bordered system.
ModeDerivative algebraic_eigvec_derivative(const SymSparseMatrix& K, const SymSparseMatrix& M,
                                           const EigenPair& pair, const ParamDerivatives& pd);

} // namespace msens
