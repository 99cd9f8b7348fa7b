#include "msens/plate.hpp"

#include <cmath>
#include <stdexcept>

namespace msens {

void Material::validate() const {
    if (youngs_modulus <= 0.0) {
        throw std::invalid_argument("Material: Young's modulus must be positive");
    }
    if (poisson_ratio < 0.0 || poisson_ratio >= 0.5) {
        throw std::invalid_argument("Material: Poisson ratio must lie in [0, 0.5)");
    }
    if (density <= 0.0) {
        throw std::invalid_argument("Material: density must be positive");
    }
    if (thickness <= 0.0) {
        throw std::invalid_argument("Material: thickness must be positive");
    }
}

void DesignVector::validate() const {
    for (double rho : densities) {
        if (!(rho > 0.0) || rho > 1.0) {
            throw std::invalid_argument("DesignVector: pseudo-density out of (0, 1]");
        }
    }
}

namespace {

// Bilinear quadrilateral on the unit square, plane stress, 2x2 Gauss.
ElementMatrices make_unit_square_element(const Material& mat) {
    ElementMatrices em;
    em.ke.setZero();
    em.me.setZero();

    const double e = mat.youngs_modulus;
    const double nu = mat.poisson_ratio;
    const double t = mat.thickness;
    Eigen::Matrix3d d;
    d << 1.0, nu, 0.0,
         nu, 1.0, 0.0,
         0.0, 0.0, (1.0 - nu) / 2.0;
    d *= e / (1.0 - nu * nu);

    // Parent coordinates of the 4 nodes (counter-clockwise).
    const double xi_n[4] = {-1.0, 1.0, 1.0, -1.0};
    const double eta_n[4] = {-1.0, -1.0, 1.0, 1.0};
    const double gp = 1.0 / std::sqrt(3.0);
    const double gauss[2] = {-gp, gp};

    // Unit square element: x = (xi+1)/2, so dxi/dx = 2 and |J| = 1/4.
    const double det_j = 0.25;

    for (double xi : gauss) {
        for (double eta : gauss) {
            Eigen::Matrix<double, 3, 8> b = Eigen::Matrix<double, 3, 8>::Zero();
            Eigen::Matrix<double, 2, 8> n = Eigen::Matrix<double, 2, 8>::Zero();
            for (int a = 0; a < 4; ++a) {
                const double shape = 0.25 * (1.0 + xi * xi_n[a]) * (1.0 + eta * eta_n[a]);
                const double dn_dx = 0.25 * xi_n[a] * (1.0 + eta * eta_n[a]) * 2.0;
                const double dn_dy = 0.25 * eta_n[a] * (1.0 + xi * xi_n[a]) * 2.0;
                b(0, 2 * a) = dn_dx;
                b(1, 2 * a + 1) = dn_dy;
                b(2, 2 * a) = dn_dy;
                b(2, 2 * a + 1) = dn_dx;
                n(0, 2 * a) = shape;
                n(1, 2 * a + 1) = shape;
            }
            em.ke += t * det_j * b.transpose() * d * b;
            em.me += mat.density * t * det_j * n.transpose() * n;
        }
    }
    return em;
}

} // namespace

PlateModel build_plate(int nx, int ny, const Material& material) {
    if (nx < 1 || ny < 1) {
        throw std::invalid_argument("build_plate: element counts must be >= 1");
    }
    material.validate();

    PlateModel model;
    model.nx_ = nx;
    model.ny_ = ny;
    model.material_ = material;
    model.elem_ = make_unit_square_element(material);

    auto node_id = [nx](int ix, int iy) { return iy * (nx + 1) + ix; };
    model.element_dofs_.reserve(static_cast<std::size_t>(nx) * ny);
    for (int ey = 0; ey < ny; ++ey) {
        for (int ex = 0; ex < nx; ++ex) {
            const int nodes[4] = {node_id(ex, ey), node_id(ex + 1, ey),
                                  node_id(ex + 1, ey + 1), node_id(ex, ey + 1)};
            std::array<int, 8> dofs{};
            for (int a = 0; a < 4; ++a) {
                dofs[2 * a] = 2 * nodes[a];
                dofs[2 * a + 1] = 2 * nodes[a] + 1;
            }
            model.element_dofs_.push_back(dofs);
        }
    }

    const int corners[4] = {node_id(0, 0), node_id(nx, 0), node_id(nx, ny), node_id(0, ny)};
    for (int c : corners) {
        model.clamped_dofs_.push_back(2 * c);
        model.clamped_dofs_.push_back(2 * c + 1);
    }

    // Penalty reference: largest stiffness diagonal of the unconstrained
    // assembly at unit densities. Fixing it at the rho = 1 baseline keeps the
    // penalty independent of the design vector, so dK/drho stays 3 rho^2 Ke.
    std::vector<double> diag(static_cast<std::size_t>(model.dof_count()), 0.0);
    for (const auto& dofs : model.element_dofs_) {
        for (int a = 0; a < 8; ++a) {
            diag[static_cast<std::size_t>(dofs[a])] += model.elem_.ke(a, a);
        }
    }
    double max_diag = 0.0;
    for (double v : diag) {
        max_diag = std::max(max_diag, v);
    }
    model.clamp_penalty_ = 1e8 * max_diag;
    return model;
}

std::pair<double, double> PlateModel::node_position(int node) const {
    const int ix = node % (nx_ + 1);
    const int iy = node / (nx_ + 1);
    return {static_cast<double>(ix), static_cast<double>(iy)};
}

std::pair<SymSparseMatrix, SymSparseMatrix>
assemble_global(const PlateModel& model, const DesignVector& d) {
    if (d.size() != model.element_count()) {
        throw std::invalid_argument("assemble_global: design vector length != element count");
    }
    d.validate();

    const auto& em = model.element_matrices();
    std::vector<Triplet> kt, mt;
    kt.reserve(static_cast<std::size_t>(model.element_count()) * 36 + model.clamped_dofs().size());
    mt.reserve(static_cast<std::size_t>(model.element_count()) * 36);

    for (int e = 0; e < model.element_count(); ++e) {
        const double rho = d.densities[e];
        const double ks = rho * rho * rho;
        const auto& dofs = model.element_dofs(e);
        for (int a = 0; a < 8; ++a) {
            for (int b = a; b < 8; ++b) {
                kt.push_back({dofs[a], dofs[b], ks * em.ke(a, b)});
                mt.push_back({dofs[a], dofs[b], rho * em.me(a, b)});
            }
        }
    }
    for (int dof : model.clamped_dofs()) {
        kt.push_back({dof, dof, model.clamp_penalty()});
    }
    const int n = model.dof_count();
    return {SymSparseMatrix::assemble(n, kt), SymSparseMatrix::assemble(n, mt)};
}

SymSparseMatrix stiffness_derivative(const PlateModel& model, const DesignVector& d, int k) {
    if (k < 0 || k >= model.element_count()) {
        throw std::invalid_argument("stiffness_derivative: element index out of range");
    }
    if (d.size() != model.element_count()) {
        throw std::invalid_argument("stiffness_derivative: design vector length mismatch");
    }
    const double rho = d.densities[k];
    const double scale = 3.0 * rho * rho;
    const auto& dofs = model.element_dofs(k);
    const auto& ke = model.element_matrices().ke;
    std::vector<Triplet> t;
    t.reserve(36);
    for (int a = 0; a < 8; ++a) {
        for (int b = a; b < 8; ++b) {
            t.push_back({dofs[a], dofs[b], scale * ke(a, b)});
        }
    }
    return SymSparseMatrix::assemble(model.dof_count(), t);
}

SymSparseMatrix mass_derivative(const PlateModel& model, int k) {
    if (k < 0 || k >= model.element_count()) {
        throw std::invalid_argument("mass_derivative: element index out of range");
    }
    const auto& dofs = model.element_dofs(k);
    const auto& me = model.element_matrices().me;
    std::vector<Triplet> t;
    t.reserve(36);
    for (int a = 0; a < 8; ++a) {
        for (int b = a; b < 8; ++b) {
            t.push_back({dofs[a], dofs[b], me(a, b)});
        }
    }
    return SymSparseMatrix::assemble(model.dof_count(), t);
}

} // namespace msens
