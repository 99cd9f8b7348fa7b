#pragma once

#include "msens/characteristic.hpp"
#include "msens/eigensolver.hpp"
#include "msens/plate.hpp"

#include <stdexcept>

namespace msens {

class ModeCrossingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FdConfig {
    double step = 1e-6;          // relative perturbation; absolute step is step*max(1, rho_k)
    EigenSolveOptions eigen{};   // solver settings for the perturbed problems

    FdConfig() {
        // Differencing divides eigenpair noise by 2h, so the oracle asks for
        // tighter modes than the engines need. Attainable at oracle scale.
        eigen.residual_tol = 1e-12;
    }
};

/// Central-difference total derivative of the characteristic with respect to
/// every pseudo-density: reassemble, re-solve the eigenpair at rho_k +/- h,
/// track the mode by nearest eigenvalue, sign-align the perturbed
/// eigenvector against the baseline, and difference the values. Independent
/// of every analytic path, so it serves as the common oracle. Perturbed
/// evaluations parallelize over k (MODAL_SENS_THREADS caps the worker count).
Vector fd_sensitivity(const PlateModel& model, const DesignVector& d,
                      const CharacteristicFactory& characteristic, int mode,
                      const FdConfig& cfg = {});

struct ErrorReport {
    double s_p = 0.0;
    double s_n = 0.0;
    double e_r_pct = 0.0;
};

/// (|s_p - s_n| / |s_n|) * 100. Throws if the reference value is zero.
double relative_error(double s_p, double s_n);
ErrorReport compare_sensitivities(double s_p, double s_n);

/// T_A / T_B. Throws if T_B is not positive.
double efficiency_ratio(double t_a, double t_b);

/// max_k |a_k - b_k| / max_k |b_k| (element-wise difference normalized by the
/// reference's sup norm).
double linf_normalized_error(const Vector& a, const Vector& b);

struct LinfEntry {
    double value = 0.0; // signed entry of largest magnitude
    int index = 0;
};

LinfEntry linf_entry(const Vector& v);

/// Worker count for parallel finite differencing: hardware concurrency capped
/// by the MODAL_SENS_THREADS environment variable.
int fd_thread_count();

} // namespace msens
