#pragma once

#include "msens/plate.hpp"
#include "msens/sparse.hpp"

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace msens {

/// A scalar modal characteristic F(p, lambda_i, phi_i). Engines consume only
/// this four-evaluation surface, so new characteristics plug in without
/// touching any engine. Implementations are immutable and the evaluations are
/// pure.
class Characteristic {
public:
    virtual ~Characteristic() = default;

    virtual double value(double lambda, const Vector& phi) const = 0;
    virtual double partial_lambda(double lambda, const Vector& phi) const = 0;
    virtual Vector partial_phi(double lambda, const Vector& phi) const = 0;
    virtual double partial_p(int k, double lambda, const Vector& phi) const {
        (void)k;
        (void)lambda;
        (void)phi;
        return 0.0;
    }
};

/// (ref' phi)^2 / ((ref' ref)(phi' phi)), plain Euclidean inner products.
double mac_value(const Vector& reference, const Vector& phi);
/// Gradient of mac_value with respect to phi.
Vector mac_phi_gradient(const Vector& reference, const Vector& phi);

/// Mode-shape correlation against a fixed reference vector (e.g. a measured
/// mode). The reference is constant with respect to the design, so the
/// explicit design and eigenvalue partials vanish.
class MacCharacteristic : public Characteristic {
public:
    explicit MacCharacteristic(Vector reference);

    double value(double, const Vector& phi) const override;
    double partial_lambda(double, const Vector&) const override { return 0.0; }
    Vector partial_phi(double, const Vector& phi) const override;

private:
    Vector reference_;
};

/// Strain energy of one element under the mode shape: 1/2 phi' Kr phi with
/// Kr = rho_r^3 Ke on the element footprint. The design partial follows the
/// cubic density scaling and is nonzero only for the element's own parameter.
class MseCharacteristic : public Characteristic {
public:
    MseCharacteristic(const PlateModel& model, const DesignVector& d, int element);
    /// Generic constructor: footprint DOFs, bare element stiffness, density,
    /// and the parameter index the element responds to.
    MseCharacteristic(std::vector<int> dofs, Eigen::MatrixXd ke, double density, int element);

    double value(double, const Vector& phi) const override;
    double partial_lambda(double, const Vector&) const override { return 0.0; }
    Vector partial_phi(double, const Vector& phi) const override;
    double partial_p(int k, double, const Vector& phi) const override;

    int element() const { return element_; }

private:
    Eigen::VectorXd local(const Vector& phi) const;

    std::vector<int> dofs_;
    Eigen::MatrixXd ke_;
    double density_ = 1.0;
    int element_ = 0;
};

/// phi' phi / lambda, one mode's contribution to the flexibility measure.
class MfCharacteristic : public Characteristic {
public:
    double value(double lambda, const Vector& phi) const override;
    double partial_lambda(double lambda, const Vector& phi) const override;
    Vector partial_phi(double lambda, const Vector& phi) const override;
};

double mf_value(double lambda, const Vector& phi);

/// Recipe for building a characteristic at a given design point; needed
/// wherever the structure is reassembled (finite differencing, CLI).
struct CharacteristicSpec {
    enum class Kind { Mac, Mse, Mf };

    Kind kind = Kind::Mf;
    int element = 0;      // MSE
    Vector mac_reference; // MAC, resolved to a concrete constant vector

    std::unique_ptr<Characteristic> make(const PlateModel& model, const DesignVector& d) const;

    static Kind kind_from_name(const std::string& name);
    static std::string name(Kind kind);
};

/// Factory used by the finite-difference driver; CharacteristicSpec provides
/// one, tests may substitute arbitrary synthetic characteristics.
using CharacteristicFactory =
    std::function<std::unique_ptr<Characteristic>(const PlateModel&, const DesignVector&)>;

} // namespace msens
