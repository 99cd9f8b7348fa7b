#include "msens/modal_sensitivity.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <stdexcept>

namespace msens {

double DerivativeProvider::stiffness_form(int k, const Vector& u, const Vector& v) const {
    return derivatives(k).dK.bilinear(u, v);
}

double DerivativeProvider::mass_form(int k, const Vector& u, const Vector& v) const {
    return derivatives(k).dM.bilinear(u, v);
}

void DerivativeProvider::add_stiffness_product(int k, const Vector& x, double scale,
                                               Vector& out) const {
    derivatives(k).dK.multiply_add(x, scale, out);
}

void DerivativeProvider::add_mass_product(int k, const Vector& x, double scale,
                                          Vector& out) const {
    derivatives(k).dM.multiply_add(x, scale, out);
}

MatrixDerivativeProvider::MatrixDerivativeProvider(std::vector<ParamDerivatives> derivatives)
    : derivatives_(std::move(derivatives)) {
    for (int k = 0; k < param_count(); ++k) {
        derivatives_[k].k = k;
        if (derivatives_[k].dK.order() != derivatives_[k].dM.order()) {
            throw std::invalid_argument("MatrixDerivativeProvider: dK/dM order mismatch");
        }
    }
}

ParamDerivatives MatrixDerivativeProvider::derivatives(int k) const {
    if (k < 0 || k >= param_count()) {
        throw std::invalid_argument("MatrixDerivativeProvider: parameter index out of range");
    }
    return derivatives_[k];
}

double MatrixDerivativeProvider::stiffness_form(int k, const Vector& u, const Vector& v) const {
    return derivatives_.at(k).dK.bilinear(u, v);
}

double MatrixDerivativeProvider::mass_form(int k, const Vector& u, const Vector& v) const {
    return derivatives_.at(k).dM.bilinear(u, v);
}

void MatrixDerivativeProvider::add_stiffness_product(int k, const Vector& x, double scale,
                                                     Vector& out) const {
    derivatives_.at(k).dK.multiply_add(x, scale, out);
}

void MatrixDerivativeProvider::add_mass_product(int k, const Vector& x, double scale,
                                                Vector& out) const {
    derivatives_.at(k).dM.multiply_add(x, scale, out);
}

PlateDerivativeProvider::PlateDerivativeProvider(const PlateModel& model, const DesignVector& d)
    : model_(&model), design_(d) {
    if (design_.size() != model.element_count()) {
        throw std::invalid_argument("PlateDerivativeProvider: design vector length mismatch");
    }
}

ParamDerivatives PlateDerivativeProvider::derivatives(int k) const {
    return ParamDerivatives{stiffness_derivative(*model_, design_, k),
                            mass_derivative(*model_, k), k};
}

namespace {

inline void check_param(int k, int q) {
    if (k < 0 || k >= q) {
        throw std::invalid_argument("PlateDerivativeProvider: parameter index out of range");
    }
}

} // namespace

double PlateDerivativeProvider::stiffness_form(int k, const Vector& u, const Vector& v) const {
    check_param(k, param_count());
    const auto& dofs = model_->element_dofs(k);
    const auto& ke = model_->element_matrices().ke;
    const double rho = design_.densities[k];
    double acc = 0.0;
    for (int a = 0; a < 8; ++a) {
        double row = 0.0;
        for (int b = 0; b < 8; ++b) {
            row += ke(a, b) * v[dofs[b]];
        }
        acc += u[dofs[a]] * row;
    }
    return 3.0 * rho * rho * acc;
}

double PlateDerivativeProvider::mass_form(int k, const Vector& u, const Vector& v) const {
    check_param(k, param_count());
    const auto& dofs = model_->element_dofs(k);
    const auto& me = model_->element_matrices().me;
    double acc = 0.0;
    for (int a = 0; a < 8; ++a) {
        double row = 0.0;
        for (int b = 0; b < 8; ++b) {
            row += me(a, b) * v[dofs[b]];
        }
        acc += u[dofs[a]] * row;
    }
    return acc;
}

void PlateDerivativeProvider::add_stiffness_product(int k, const Vector& x, double scale,
                                                    Vector& out) const {
    check_param(k, param_count());
    const auto& dofs = model_->element_dofs(k);
    const auto& ke = model_->element_matrices().ke;
    const double rho = design_.densities[k];
    const double s = scale * 3.0 * rho * rho;
    for (int a = 0; a < 8; ++a) {
        double row = 0.0;
        for (int b = 0; b < 8; ++b) {
            row += ke(a, b) * x[dofs[b]];
        }
        out[dofs[a]] += s * row;
    }
}

void PlateDerivativeProvider::add_mass_product(int k, const Vector& x, double scale,
                                               Vector& out) const {
    check_param(k, param_count());
    const auto& dofs = model_->element_dofs(k);
    const auto& me = model_->element_matrices().me;
    for (int a = 0; a < 8; ++a) {
        double row = 0.0;
        for (int b = 0; b < 8; ++b) {
            row += me(a, b) * x[dofs[b]];
        }
        out[dofs[a]] += scale * row;
    }
}

double eigenvalue_derivative(const EigenPair& pair, const ParamDerivatives& pd,
                             const SymSparseMatrix& M) {
    if (pd.dK.order() != pair.phi.size() || M.order() != pair.phi.size()) {
        throw std::invalid_argument("eigenvalue_derivative: dimension mismatch");
    }
    return pd.dK.bilinear(pair.phi, pair.phi) - pair.lambda * pd.dM.bilinear(pair.phi, pair.phi);
}

namespace {

// K - lambda M with row/column j dropped except the diagonal, which becomes K_jj.
SymSparseMatrix build_pinned_matrix(const SymSparseMatrix& K, const SymSparseMatrix& M,
                                    double lambda, int j) {
    SymSparseMatrix shifted = SymSparseMatrix::combine(1.0, K, -lambda, M);
    std::vector<Triplet> t;
    t.reserve(shifted.stored_nonzeros() + 1);
    const auto& offsets = shifted.row_offsets();
    const auto& cols = shifted.col_indices();
    const auto& vals = shifted.values();
    for (int r = 0; r < shifted.order(); ++r) {
        for (int p = offsets[r]; p < offsets[r + 1]; ++p) {
            const int c = cols[p];
            if (r == j || c == j) {
                continue;
            }
            t.push_back({r, c, vals[p]});
        }
    }
    t.push_back({j, j, K.coeff(j, j)});
    return SymSparseMatrix::assemble(shifted.order(), t);
}

} // namespace

NelsonSolver::NelsonSolver(const SymSparseMatrix& K, const SymSparseMatrix& M,
                           const EigenPair& pair)
    : M_(&M), pair_(pair) {
    if (K.order() != M.order() || pair.phi.size() != K.order()) {
        throw std::invalid_argument("NelsonSolver: dimension mismatch");
    }
    pin_ = max_component_index(pair.phi);
    mphi_ = M * pair.phi;
    try {
        factorization_ =
            LdltFactorization::factorize(build_pinned_matrix(K, M, pair.lambda, pin_));
    } catch (const ZeroPivotError&) {
        throw RepeatedEigenvalueError(
            "NelsonSolver: pinned matrix singular (repeated eigenvalue?)");
    }
}

Vector NelsonSolver::pinned_solve(Vector f) const {
    if (f.size() != factorization_.order()) {
        throw std::invalid_argument("NelsonSolver::pinned_solve: dimension mismatch");
    }
    f[pin_] = 0.0;
    factorization_.solve_in_place(f);
    return f;
}

Vector NelsonSolver::eigvec_derivative(const DerivativeProvider& provider, int k,
                                       double dlambda) const {
    const Vector& phi = pair_.phi;
    // f = -(dK - dlambda M - lambda dM) phi
    Vector f = dlambda * mphi_;
    provider.add_stiffness_product(k, phi, -1.0, f);
    provider.add_mass_product(k, phi, pair_.lambda, f);
    Vector eta = pinned_solve(std::move(f));
    const double c = -mphi_.dot(eta) - 0.5 * provider.mass_form(k, phi, phi);
    return eta + c * phi;
}

Vector nelson_eigvec_derivative(const SymSparseMatrix& K, const SymSparseMatrix& M,
                                const EigenPair& pair, const ParamDerivatives& pd,
                                double dlambda) {
    NelsonSolver solver(K, M, pair);
    MatrixDerivativeProvider provider({pd});
    return solver.eigvec_derivative(provider, 0, dlambda);
}

// ---------------------------------------------------------------------------
// Bordered system
// ---------------------------------------------------------------------------

struct BorderedSolver::Impl {
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    int n = 0;
};

BorderedSolver::BorderedSolver(const SymSparseMatrix& K, const SymSparseMatrix& M,
                               const EigenPair& pair)
    : impl_(std::make_unique<Impl>()) {
    const int n = K.order();
    if (M.order() != n || pair.phi.size() != n) {
        throw std::invalid_argument("BorderedSolver: dimension mismatch");
    }
    impl_->n = n;
    const Vector mphi = M * pair.phi;

    SymSparseMatrix shifted = SymSparseMatrix::combine(1.0, K, -pair.lambda, M);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(2 * shifted.stored_nonzeros() + 2 * n + 1);
    const auto& offsets = shifted.row_offsets();
    const auto& cols = shifted.col_indices();
    const auto& vals = shifted.values();
    for (int r = 0; r < n; ++r) {
        for (int p = offsets[r]; p < offsets[r + 1]; ++p) {
            const int c = cols[p];
            trips.emplace_back(r, c, vals[p]);
            if (c != r) {
                trips.emplace_back(c, r, vals[p]);
            }
        }
    }
    for (int r = 0; r < n; ++r) {
        trips.emplace_back(r, n, mphi[r]);
        trips.emplace_back(n, r, mphi[r]);
    }
    trips.emplace_back(n, n, 0.0);

    Eigen::SparseMatrix<double> b(n + 1, n + 1);
    b.setFromTriplets(trips.begin(), trips.end());
    b.makeCompressed();
    impl_->lu.compute(b);
    if (impl_->lu.info() != Eigen::Success) {
        throw RepeatedEigenvalueError(
            "BorderedSolver: bordered matrix singular (repeated eigenvalue?)");
    }
}

BorderedSolver::~BorderedSolver() = default;
BorderedSolver::BorderedSolver(BorderedSolver&&) noexcept = default;
BorderedSolver& BorderedSolver::operator=(BorderedSolver&&) noexcept = default;

std::pair<Vector, double> BorderedSolver::solve(const Vector& rhs, double border_rhs) const {
    const int n = impl_->n;
    if (rhs.size() != n) {
        throw std::invalid_argument("BorderedSolver::solve: dimension mismatch");
    }
    Vector full(n + 1);
    full.head(n) = rhs;
    full[n] = border_rhs;
    Vector x = impl_->lu.solve(full);
    if (impl_->lu.info() != Eigen::Success) {
        throw std::runtime_error("BorderedSolver::solve: solve failed");
    }
    return {x.head(n), x[n]};
}

ModeDerivative algebraic_eigvec_derivative(const SymSparseMatrix& K, const SymSparseMatrix& M,
                                           const EigenPair& pair, const ParamDerivatives& pd) {
    BorderedSolver solver(K, M, pair);
    // First block row of the right-hand side carries the full forcing from the
    // differentiated eigenproblem, -(dK - lambda dM) phi, with the eigenvalue
    // derivative moved to the unknown side: the border unknown s equals
    // -dlambda when the border column is +M phi.
    Vector rhs = Vector::Zero(K.order());
    pd.dK.multiply_add(pair.phi, -1.0, rhs);
    pd.dM.multiply_add(pair.phi, pair.lambda, rhs);
    const double border = -0.5 * pd.dM.bilinear(pair.phi, pair.phi);
    auto [dphi, s] = solver.solve(rhs, border);
    return ModeDerivative{-s, std::move(dphi)};
}

} // namespace msens
