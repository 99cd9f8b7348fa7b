#pragma once

#include "msens/sparse.hpp"

#include <Eigen/Core>

#include <array>
#include <utility>
#include <vector>

namespace msens {

struct Material {
    double youngs_modulus = 2.0e11; // Pa
    double poisson_ratio = 0.3;
    double density = 7.8e3;         // kg/m^3
    double thickness = 1.0;         // m

    void validate() const;
};

/// Per-element pseudo-densities, one per element, each in (0, 1].
struct DesignVector {
    std::vector<double> densities;

    static DesignVector ones(int q) { return DesignVector{std::vector<double>(q, 1.0)}; }
    int size() const { return static_cast<int>(densities.size()); }
    void validate() const;
};

struct ElementMatrices {
    Eigen::Matrix<double, 8, 8> ke; // stiffness
    Eigen::Matrix<double, 8, 8> me; // consistent mass
};

/// Rectangular plate meshed with nx x ny unit-square 4-node plane-stress
/// quadrilaterals (2 DOF per node), clamped at the four corner nodes via a
/// stiffness penalty on the corner DOFs. Uniform mesh, so a single pair of
/// element matrices serves every element.
class PlateModel {
public:
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int node_count() const { return (nx_ + 1) * (ny_ + 1); }
    int dof_count() const { return 2 * node_count(); }
    int element_count() const { return nx_ * ny_; }
    const Material& material() const { return material_; }

    /// Global DOF indices of element e, in local order (u0,v0,...,u3,v3).
    const std::array<int, 8>& element_dofs(int e) const { return element_dofs_[e]; }
    const std::vector<int>& clamped_dofs() const { return clamped_dofs_; }
    std::pair<double, double> node_position(int node) const;

    const ElementMatrices& element_matrices() const { return elem_; }
    /// Penalty added to each clamped DOF diagonal of K (1e8 x the largest
    /// unconstrained stiffness diagonal at unit densities).
    double clamp_penalty() const { return clamp_penalty_; }

    friend PlateModel build_plate(int nx, int ny, const Material& material);

private:
    int nx_ = 0;
    int ny_ = 0;
    Material material_;
    ElementMatrices elem_;
    std::vector<std::array<int, 8>> element_dofs_;
    std::vector<int> clamped_dofs_;
    double clamp_penalty_ = 0.0;
};

PlateModel build_plate(int nx, int ny, const Material& material = {});

/// Global K = sum_e rho_e^3 Ke and M = sum_e rho_e Me, with the corner clamp
/// penalty added to K's diagonal. Matrix order stays at 2(nx+1)(ny+1).
std::pair<SymSparseMatrix, SymSparseMatrix>
assemble_global(const PlateModel& model, const DesignVector& d);

/// dK/drho_k = 3 rho_k^2 Ke scattered to the element's global footprint.
SymSparseMatrix stiffness_derivative(const PlateModel& model, const DesignVector& d, int k);

/// dM/drho_k = Me scattered to the element's global footprint (density-independent).
SymSparseMatrix mass_derivative(const PlateModel& model, int k);

} // namespace msens
