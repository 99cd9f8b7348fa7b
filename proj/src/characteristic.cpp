#include "msens/characteristic.hpp"

#include <cmath>
#include <stdexcept>

namespace msens {

double mac_value(const Vector& reference, const Vector& phi) {
    if (reference.size() != phi.size()) {
        throw std::invalid_argument("mac_value: dimension mismatch");
    }
    const double rr = reference.squaredNorm();
    const double pp = phi.squaredNorm();
    if (rr == 0.0 || pp == 0.0) {
        throw std::invalid_argument("mac_value: zero vector");
    }
    const double rp = reference.dot(phi);
    return (rp * rp) / (rr * pp);
}

Vector mac_phi_gradient(const Vector& reference, const Vector& phi) {
    if (reference.size() != phi.size()) {
        throw std::invalid_argument("mac_phi_gradient: dimension mismatch");
    }
    const double rr = reference.squaredNorm();
    const double pp = phi.squaredNorm();
    if (rr == 0.0 || pp == 0.0) {
        throw std::invalid_argument("mac_phi_gradient: zero vector");
    }
    const double rp = reference.dot(phi);
    return 2.0 * (rp / (rr * pp)) * reference - 2.0 * (rp * rp / (rr * pp * pp)) * phi;
}

MacCharacteristic::MacCharacteristic(Vector reference) : reference_(std::move(reference)) {
    if (reference_.size() == 0 || reference_.squaredNorm() == 0.0) {
        throw std::invalid_argument("MacCharacteristic: reference vector must be nonzero");
    }
}

double MacCharacteristic::value(double, const Vector& phi) const {
    return mac_value(reference_, phi);
}

Vector MacCharacteristic::partial_phi(double, const Vector& phi) const {
    return mac_phi_gradient(reference_, phi);
}

MseCharacteristic::MseCharacteristic(const PlateModel& model, const DesignVector& d, int element)
    : element_(element) {
    if (element < 0 || element >= model.element_count()) {
        throw std::invalid_argument("MseCharacteristic: element index out of range");
    }
    if (d.size() != model.element_count()) {
        throw std::invalid_argument("MseCharacteristic: design vector length mismatch");
    }
    const auto& dofs = model.element_dofs(element);
    dofs_.assign(dofs.begin(), dofs.end());
    ke_ = model.element_matrices().ke;
    density_ = d.densities[element];
}

MseCharacteristic::MseCharacteristic(std::vector<int> dofs, Eigen::MatrixXd ke, double density,
                                     int element)
    : dofs_(std::move(dofs)), ke_(std::move(ke)), density_(density), element_(element) {
    if (ke_.rows() != ke_.cols() || ke_.rows() != static_cast<Eigen::Index>(dofs_.size())) {
        throw std::invalid_argument("MseCharacteristic: footprint/stiffness size mismatch");
    }
    if (!(density_ > 0.0)) {
        throw std::invalid_argument("MseCharacteristic: density must be positive");
    }
}

Eigen::VectorXd MseCharacteristic::local(const Vector& phi) const {
    Eigen::VectorXd loc(dofs_.size());
    for (std::size_t a = 0; a < dofs_.size(); ++a) {
        loc[static_cast<Eigen::Index>(a)] = phi[dofs_[a]];
    }
    return loc;
}

double MseCharacteristic::value(double, const Vector& phi) const {
    const Eigen::VectorXd loc = local(phi);
    const double rho3 = density_ * density_ * density_;
    return 0.5 * rho3 * loc.dot(ke_ * loc);
}

Vector MseCharacteristic::partial_phi(double, const Vector& phi) const {
    const Eigen::VectorXd kloc = ke_ * local(phi);
    const double rho3 = density_ * density_ * density_;
    Vector out = Vector::Zero(phi.size());
    for (std::size_t a = 0; a < dofs_.size(); ++a) {
        out[dofs_[a]] = rho3 * kloc[static_cast<Eigen::Index>(a)];
    }
    return out;
}

double MseCharacteristic::partial_p(int k, double, const Vector& phi) const {
    if (k != element_) {
        return 0.0;
    }
    const Eigen::VectorXd loc = local(phi);
    return 0.5 * 3.0 * density_ * density_ * loc.dot(ke_ * loc);
}

double mf_value(double lambda, const Vector& phi) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("mf_value: eigenvalue must be positive (rigid-body mode?)");
    }
    return phi.squaredNorm() / lambda;
}

double MfCharacteristic::value(double lambda, const Vector& phi) const {
    return mf_value(lambda, phi);
}

double MfCharacteristic::partial_lambda(double lambda, const Vector& phi) const {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("MfCharacteristic: eigenvalue must be positive");
    }
    return -phi.squaredNorm() / (lambda * lambda);
}

Vector MfCharacteristic::partial_phi(double lambda, const Vector& phi) const {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("MfCharacteristic: eigenvalue must be positive");
    }
    return (2.0 / lambda) * phi;
}

std::unique_ptr<Characteristic> CharacteristicSpec::make(const PlateModel& model,
                                                         const DesignVector& d) const {
    switch (kind) {
    case Kind::Mac:
        return std::make_unique<MacCharacteristic>(mac_reference);
    case Kind::Mse:
        return std::make_unique<MseCharacteristic>(model, d, element);
    case Kind::Mf:
        return std::make_unique<MfCharacteristic>();
    }
    throw std::logic_error("CharacteristicSpec: unknown kind");
}

CharacteristicSpec::Kind CharacteristicSpec::kind_from_name(const std::string& name) {
    if (name == "mac") {
        return Kind::Mac;
    }
    if (name == "mse") {
        return Kind::Mse;
    }
    if (name == "mf") {
        return Kind::Mf;
    }
    throw std::invalid_argument("unknown characteristic '" + name + "' (expected mac, mse or mf)");
}

std::string CharacteristicSpec::name(Kind kind) {
    switch (kind) {
    case Kind::Mac:
        return "mac";
    case Kind::Mse:
        return "mse";
    case Kind::Mf:
        return "mf";
    }
    return "?";
}

} // namespace msens
