#include "msens/verification.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace msens {

double relative_error(double s_p, double s_n) {
    if (s_n == 0.0) {
        throw std::invalid_argument("relative_error: reference sensitivity is zero");
    }
    return std::abs(s_p - s_n) / std::abs(s_n) * 100.0;
}

ErrorReport compare_sensitivities(double s_p, double s_n) {
    return ErrorReport{s_p, s_n, relative_error(s_p, s_n)};
}

double efficiency_ratio(double t_a, double t_b) {
    if (!(t_b > 0.0)) {
        throw std::invalid_argument("efficiency_ratio: reference time must be positive");
    }
    return t_a / t_b;
}

double linf_normalized_error(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("linf_normalized_error: dimension mismatch");
    }
    const double ref = b.cwiseAbs().maxCoeff();
    if (ref == 0.0) {
        throw std::invalid_argument("linf_normalized_error: reference vector is zero");
    }
    return (a - b).cwiseAbs().maxCoeff() / ref;
}

LinfEntry linf_entry(const Vector& v) {
    if (v.size() == 0) {
        throw std::invalid_argument("linf_entry: empty vector");
    }
    int best = 0;
    for (int i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[best])) {
            best = i;
        }
    }
    return LinfEntry{v[best], best};
}

int fd_thread_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) {
        n = 1;
    }
    if (const char* env = std::getenv("MODAL_SENS_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) {
            n = std::min(n, cap);
        }
    }
    return n;
}

namespace {

struct TrackedMode {
    double lambda;
    Vector phi;
    int position; // index in the ascending spectrum of the perturbed problem
};

// Solve the perturbed problem and pick the mode nearest the baseline
// eigenvalue, sign-aligned against the baseline shape.
TrackedMode perturbed_mode(const PlateModel& model, const DesignVector& d, int n_solve,
                           double base_lambda, const Vector& base_phi,
                           const EigenSolveOptions& opts) {
    auto [k, m] = assemble_global(model, d);
    ModalSolution sol = solve_modes(k, m, n_solve, opts);
    int nearest = 0;
    double best = std::abs(sol.pairs[0].lambda - base_lambda);
    for (int i = 1; i < static_cast<int>(sol.pairs.size()); ++i) {
        const double diff = std::abs(sol.pairs[i].lambda - base_lambda);
        if (diff < best) {
            best = diff;
            nearest = i;
        }
    }
    TrackedMode t{sol.pairs[nearest].lambda, std::move(sol.pairs[nearest].phi), nearest};
    if (m.bilinear(base_phi, t.phi) < 0.0) {
        t.phi = -t.phi;
    }
    return t;
}

} // namespace

Vector fd_sensitivity(const PlateModel& model, const DesignVector& d,
                      const CharacteristicFactory& characteristic, int mode,
                      const FdConfig& cfg) {
    if (!(cfg.step > 0.0)) {
        throw std::invalid_argument("fd_sensitivity: step must be positive");
    }
    if (mode < 1) {
        throw std::invalid_argument("fd_sensitivity: mode numbers start at 1");
    }
    d.validate();
    const int q = model.element_count();
    if (d.size() != q) {
        throw std::invalid_argument("fd_sensitivity: design vector length mismatch");
    }
    for (int k = 0; k < q; ++k) {
        const double h = cfg.step * std::max(1.0, d.densities[k]);
        if (d.densities[k] + h > 1.0 || d.densities[k] - h <= 0.0) {
            throw std::invalid_argument(
                "fd_sensitivity: perturbed density would leave (0, 1] at parameter " +
                std::to_string(k));
        }
    }

    // Baseline eigenvalue for mode tracking. One extra mode on each side keeps
    // the nearest-eigenvalue search honest when neighbours drift.
    const int n_solve = mode + 1;
    auto [k0, m0] = assemble_global(model, d);
    ModalSolution base = solve_modes(k0, m0, n_solve, cfg.eigen);
    const double base_lambda = base.pairs[mode - 1].lambda;
    const Vector base_phi = base.pairs[mode - 1].phi;

    Vector out(q);
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= q) {
                return;
            }
            try {
                const double h = cfg.step * std::max(1.0, d.densities[k]);
                DesignVector dp = d;
                dp.densities[k] += h;
                DesignVector dm = d;
                dm.densities[k] -= h;
                dp.validate();
                dm.validate();

                TrackedMode plus =
                    perturbed_mode(model, dp, n_solve, base_lambda, base_phi, cfg.eigen);
                TrackedMode minus =
                    perturbed_mode(model, dm, n_solve, base_lambda, base_phi, cfg.eigen);
                if (plus.position != minus.position) {
                    throw ModeCrossingError("fd_sensitivity: mode order swapped between "
                                            "perturbations at parameter " +
                                            std::to_string(k));
                }
                auto char_plus = characteristic(model, dp);
                auto char_minus = characteristic(model, dm);
                const double f_plus = char_plus->value(plus.lambda, plus.phi);
                const double f_minus = char_minus->value(minus.lambda, minus.phi);
                out[k] = (f_plus - f_minus) / (2.0 * h);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                next.store(q);
                return;
            }
        }
    };

    const int n_threads = std::min(fd_thread_count(), q);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
    return out;
}

} // namespace msens
