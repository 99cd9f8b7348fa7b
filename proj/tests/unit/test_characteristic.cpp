#include "msens/characteristic.hpp"

#include "support/test_problems.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace msens;
using namespace msens::testing;

namespace {

// Directional central difference of a characteristic's value in phi.
double fd_phi_directional(const Characteristic& c, double lambda, const Vector& phi,
                          const Vector& dir, double h) {
    return (c.value(lambda, phi + h * dir) - c.value(lambda, phi - h * dir)) / (2.0 * h);
}

double fd_lambda(const Characteristic& c, double lambda, const Vector& phi, double h) {
    return (c.value(lambda + h, phi) - c.value(lambda - h, phi)) / (2.0 * h);
}

Eigen::MatrixXd random_psd_dense(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd b(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            b(i, j) = gauss(rng);
        }
    }
    return b.transpose() * b;
}

} // namespace

TEST_CASE("mac value basics") {
    Vector a(3), b(3);
    a << 1.0, 2.0, -1.0;
    CHECK(mac_value(a, a) == doctest::Approx(1.0));

    b << 2.0, -1.0, 0.0; // orthogonal to a
    CHECK(mac_value(a, b) == doctest::Approx(0.0));

    Vector ref(2), phi(2);
    ref << 1.0, 0.0;
    phi << kChainPhi1x, kChainPhi1y;
    CHECK(mac_value(ref, phi) == doctest::Approx(0.2763932022500210).epsilon(1e-9));

    CHECK_THROWS_AS(mac_value(Vector::Zero(2), phi), std::invalid_argument);
    CHECK_THROWS_AS(mac_value(ref, Vector::Zero(2)), std::invalid_argument);
}

TEST_CASE("mac is scale invariant and bounded") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> scale(0.1, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector a = random_vector(12, 2000 + trial);
        const Vector b = random_vector(12, 3000 + trial);
        const double v = mac_value(a, b);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-15);
        const double sa = scale(rng) * (trial % 2 == 0 ? 1.0 : -1.0);
        const double sb = scale(rng);
        CHECK(std::abs(mac_value(sa * a, sb * b) - v) <= 1e-12);
    }
}

TEST_CASE("mac gradient vanishes at perfect correlation") {
    const Vector a = random_vector(8, 77);
    CHECK(mac_phi_gradient(a, a).norm() <= 1e-14);
}

TEST_CASE("mac gradient is orthogonal to phi") {
    for (int trial = 0; trial < 20; ++trial) {
        const Vector ref = random_vector(10, 4000 + trial);
        const Vector phi = random_vector(10, 5000 + trial);
        const Vector g = mac_phi_gradient(ref, phi);
        CHECK(std::abs(phi.dot(g)) <= 1e-12 * std::max(1.0, g.norm() * phi.norm()));
    }
}

TEST_CASE("mac gradient matches finite differences") {
    MacCharacteristic mac(random_vector(15, 6001));
    for (int trial = 0; trial < 10; ++trial) {
        const Vector phi = random_vector(15, 6100 + trial);
        const Vector dir = random_vector(15, 6200 + trial).normalized();
        const Vector g = mac.partial_phi(0.0, phi);
        const double fd = fd_phi_directional(mac, 0.0, phi, dir, 1e-6);
        CHECK(g.dot(dir) == doctest::Approx(fd).epsilon(1e-6));
    }
    CHECK(mac.partial_lambda(1.0, random_vector(15, 6300)) == 0.0);
    CHECK(mac.partial_p(3, 1.0, random_vector(15, 6301)) == 0.0);
}

TEST_CASE("mse value and partials") {
    const std::vector<int> dofs{1, 3, 4, 6};
    const Eigen::MatrixXd ke = random_psd_dense(4, 91);
    const double rho = 0.8;
    MseCharacteristic mse(dofs, ke, rho, 2);

    const Vector phi = random_vector(8, 92);
    Eigen::VectorXd loc(4);
    for (int i = 0; i < 4; ++i) {
        loc[i] = phi[dofs[static_cast<std::size_t>(i)]];
    }
    const double rho3 = rho * rho * rho;
    CHECK(mse.value(0.0, phi) == doctest::Approx(0.5 * rho3 * loc.dot(ke * loc)));
    CHECK(mse.partial_p(2, 0.0, phi) ==
          doctest::Approx(0.5 * 3.0 * rho * rho * loc.dot(ke * loc)));
    CHECK(mse.partial_p(1, 0.0, phi) == 0.0); // off-element parameter
    CHECK(mse.partial_lambda(0.0, phi) == 0.0);

    // Gradient against finite differences.
    const Vector dir = random_vector(8, 93).normalized();
    const Vector g = mse.partial_phi(0.0, phi);
    CHECK(g.dot(dir) == doctest::Approx(fd_phi_directional(mse, 0.0, phi, dir, 1e-6))
                            .epsilon(1e-6));

    // The gradient lives on the footprint.
    for (int i = 0; i < 8; ++i) {
        if (std::find(dofs.begin(), dofs.end(), i) == dofs.end()) {
            CHECK(g[i] == 0.0);
        }
    }
}

TEST_CASE("mse of a null-space shape is zero") {
    // ke from B'B with B annihilating the constant vector.
    Eigen::MatrixXd b(3, 4);
    b << 1, -1, 0, 0,
         0, 1, -1, 0,
         0, 0, 1, -1;
    const Eigen::MatrixXd ke = b.transpose() * b;
    MseCharacteristic mse({0, 1, 2, 3}, ke, 1.0, 0);
    Vector phi = Vector::Ones(4);
    CHECK(mse.value(0.0, phi) <= 1e-14);
    CHECK(mse.partial_phi(0.0, phi).norm() <= 1e-14);
}

TEST_CASE("mse is nonnegative") {
    const Eigen::MatrixXd ke = random_psd_dense(4, 95);
    MseCharacteristic mse({0, 2, 4, 5}, ke, 0.6, 0);
    for (int trial = 0; trial < 30; ++trial) {
        CHECK(mse.value(0.0, random_vector(6, 9600 + trial)) >= -1e-12);
    }
}

TEST_CASE("mf value and partials on the chain mode") {
    MfCharacteristic mf;
    Vector phi(2);
    phi << kChainPhi1x, kChainPhi1y; // unit Euclidean norm (M = I)
    CHECK(mf.value(kChainLambda1, phi) == doctest::Approx(2.618033988749895).epsilon(1e-9));
    CHECK(mf.partial_lambda(kChainLambda1, phi) ==
          doctest::Approx(-6.854101966249685).epsilon(1e-9));

    // Doubling lambda halves the value.
    CHECK(mf.value(2.0 * kChainLambda1, phi) ==
          doctest::Approx(0.5 * mf.value(kChainLambda1, phi)));

    CHECK_THROWS_AS(mf.value(0.0, phi), std::invalid_argument);
    CHECK_THROWS_AS(mf.value(-1.0, phi), std::invalid_argument);
}

TEST_CASE("mf partials match finite differences") {
    MfCharacteristic mf;
    for (int trial = 0; trial < 10; ++trial) {
        const Vector phi = random_vector(9, 9700 + trial);
        const double lambda = 0.5 + 0.3 * trial;
        const Vector dir = random_vector(9, 9800 + trial).normalized();
        CHECK(mf.partial_phi(lambda, phi).dot(dir) ==
              doctest::Approx(fd_phi_directional(mf, lambda, phi, dir, 1e-6)).epsilon(1e-6));
        CHECK(mf.partial_lambda(lambda, phi) ==
              doctest::Approx(fd_lambda(mf, lambda, phi, 1e-6)).epsilon(1e-6));
    }
}

TEST_CASE("characteristic spec factory") {
    CHECK(CharacteristicSpec::kind_from_name("mac") == CharacteristicSpec::Kind::Mac);
    CHECK(CharacteristicSpec::kind_from_name("mse") == CharacteristicSpec::Kind::Mse);
    CHECK(CharacteristicSpec::kind_from_name("mf") == CharacteristicSpec::Kind::Mf);
    CHECK_THROWS_AS(CharacteristicSpec::kind_from_name("nope"), std::invalid_argument);

    const PlateModel model = build_plate(2, 2);
    const DesignVector d = DesignVector::ones(model.element_count());
    CharacteristicSpec spec;
    spec.kind = CharacteristicSpec::Kind::Mse;
    spec.element = 1;
    auto c = spec.make(model, d);
    CHECK(c != nullptr);

    spec.kind = CharacteristicSpec::Kind::Mac;
    spec.mac_reference = random_vector(model.dof_count(), 11);
    CHECK(spec.make(model, d) != nullptr);
}
