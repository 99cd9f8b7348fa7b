#include "msens/eigensolver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace msens {

int max_component_index(const Vector& phi) {
    if (phi.size() == 0) {
        throw std::invalid_argument("max_component_index: empty vector");
    }
    int best = 0;
    double best_abs = std::abs(phi[0]);
    for (int i = 1; i < phi.size(); ++i) {
        const double a = std::abs(phi[i]);
        if (a > best_abs) {
            best_abs = a;
            best = i;
        }
    }
    return best;
}

Vector m_normalize(const Vector& phi, const SymSparseMatrix& M) {
    const double mnorm2 = M.bilinear(phi, phi);
    if (!(mnorm2 > 0.0)) {
        throw std::invalid_argument("m_normalize: phi' M phi is not positive");
    }
    Vector out = phi / std::sqrt(mnorm2);
    if (out[max_component_index(out)] < 0.0) {
        out = -out;
    }
    return out;
}

namespace {

struct LanczosState {
    std::vector<Vector> v;  // M-orthonormal basis
    std::vector<Vector> mv; // M * v, cached
    std::vector<double> alpha;
    std::vector<double> beta; // beta[j] couples v[j] and v[j+1]
};

// Remove the components of w along every basis vector (M-inner product),
// two classical Gram-Schmidt passes.
void full_reorthogonalize(const LanczosState& s, Vector& w) {
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < s.v.size(); ++i) {
            const double h = s.mv[i].dot(w);
            w -= h * s.v[i];
        }
    }
}

struct RitzCandidate {
    double lambda;
    Vector x;
    double residual;
};

// Per-row diagonal and off-diagonal magnitude of a symmetric matrix.
struct RowStats {
    Vector diag;
    Vector offdiag_abs;
};

RowStats row_stats(const SymSparseMatrix& A) {
    RowStats st{Vector::Zero(A.order()), Vector::Zero(A.order())};
    const auto& offsets = A.row_offsets();
    for (int r = 0; r < A.order(); ++r) {
        for (int p = offsets[r]; p < offsets[r + 1]; ++p) {
            const int c = A.col_indices()[p];
            const double v = A.values()[p];
            if (c == r) {
                st.diag[r] = v;
            } else {
                st.offdiag_abs[r] += std::abs(v);
                st.offdiag_abs[c] += std::abs(v);
            }
        }
    }
    return st;
}

// Rows whose shifted diagonal outweighs everything else by many orders of
// magnitude (constraint-penalty rows) carry eigenvector components near the
// round-off floor; solving those rows exactly for their own component removes
// the penalty-amplified residual without touching the rest of the vector.
bool polish_dominant_rows(const RowStats& k_stats, const RowStats& m_stats, double lambda,
                          const Vector& kx, const Vector& mx, Vector& x) {
    bool changed = false;
    for (int j = 0; j < x.size(); ++j) {
        const double denom = k_stats.diag[j] - lambda * m_stats.diag[j];
        const double coupling =
            k_stats.offdiag_abs[j] + std::abs(lambda) * m_stats.offdiag_abs[j];
        if (std::abs(denom) >= 1e6 * coupling && coupling > 0.0) {
            x[j] -= (kx[j] - lambda * mx[j]) / denom;
            changed = true;
        }
    }
    return changed;
}

// Ritz extraction for the n_modes eigenvalues closest to the shift.
bool extract_ritz(const LanczosState& s, const SymSparseMatrix& K, const SymSparseMatrix& M,
                  const RowStats& k_stats, const RowStats& m_stats, double mu, int n_modes,
                  double tol, std::vector<RitzCandidate>& out) {
    const int m = static_cast<int>(s.alpha.size());
    if (m < n_modes) {
        return false;
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        t(i, i) = s.alpha[i];
        if (i + 1 < m) {
            t(i, i + 1) = s.beta[i];
            t(i + 1, i) = s.beta[i];
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    if (es.info() != Eigen::Success) {
        return false;
    }
    // theta = 1/(lambda - mu); the wanted modes are the largest theta > 0.
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return es.eigenvalues()[a] > es.eigenvalues()[b];
    });

    out.clear();
    for (int r = 0; r < n_modes; ++r) {
        const double theta = es.eigenvalues()[order[r]];
        if (!(theta > 0.0)) {
            out.clear();
            return false; // subspace does not yet resolve n_modes above the shift
        }
        Vector x = Vector::Zero(s.v[0].size());
        for (int i = 0; i < m; ++i) {
            x += es.eigenvectors()(i, order[r]) * s.v[i];
        }
        const double lambda = mu + 1.0 / theta;
        Vector kx = K * x;
        Vector mx = M * x;
        if (polish_dominant_rows(k_stats, m_stats, lambda, kx, mx, x)) {
            kx = K * x;
            mx = M * x;
        }
        const Vector res = kx - lambda * mx;
        const double denom = kx.norm();
        const double rel = denom > 0.0 ? res.norm() / denom : res.norm();
        out.push_back({lambda, std::move(x), rel});
    }
    for (const auto& c : out) {
        if (!(c.residual <= tol)) {
            out.clear();
            return false;
        }
    }
    std::sort(out.begin(), out.end(),
              [](const RitzCandidate& a, const RitzCandidate& b) { return a.lambda < b.lambda; });
    return true;
}

} // namespace

ModalSolution solve_modes(const SymSparseMatrix& K, const SymSparseMatrix& M,
                          int n_modes, const EigenSolveOptions& opts) {
    const int n = K.order();
    if (M.order() != n) {
        throw std::invalid_argument("solve_modes: K and M orders differ");
    }
    if (n_modes < 1 || n_modes > n) {
        throw std::invalid_argument("solve_modes: invalid mode count");
    }

    SymSparseMatrix shifted_matrix =
        opts.mu == 0.0 ? K : SymSparseMatrix::combine(1.0, K, -opts.mu, M);
    ShiftedFactorization shifted{opts.mu, LdltFactorization::factorize(shifted_matrix)};

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto random_vector = [&]() {
        Vector r(n);
        for (int i = 0; i < n; ++i) {
            r[i] = gauss(rng);
        }
        return r;
    };

    LanczosState s;
    {
        Vector v0 = random_vector();
        const double mn = std::sqrt(M.bilinear(v0, v0));
        if (!(mn > 0.0)) {
            throw std::invalid_argument("solve_modes: M is not positive definite");
        }
        v0 /= mn;
        s.mv.push_back(M * v0);
        s.v.push_back(std::move(v0));
    }

    const int m_max = std::min(n, opts.max_subspace);
    const int check_every = 5;
    const RowStats k_stats = row_stats(K);
    const RowStats m_stats = row_stats(M);
    std::vector<RitzCandidate> ritz;
    bool converged = false;

    for (int step = 0; step < m_max; ++step) {
        const std::size_t j = s.v.size() - 1;

        Vector w = shifted.factorization.solve(s.mv[j]); // (K - mu M)^{-1} M v_j
        const double a = s.mv[j].dot(w);
        s.alpha.push_back(a);
        w -= a * s.v[j];
        if (j > 0) {
            w -= s.beta[j - 1] * s.v[j - 1];
        }
        full_reorthogonalize(s, w);

        Vector mw = M * w;
        double b = std::sqrt(std::max(mw.dot(w), 0.0));

        const double scale = std::abs(a) + (j > 0 ? std::abs(s.beta[j - 1]) : 0.0) + 1e-300;
        if (b <= 1e-12 * scale) {
            // Invariant subspace reached: try to converge with what we have,
            // otherwise continue with a fresh random direction.
            if (static_cast<int>(s.alpha.size()) >= n_modes &&
                extract_ritz(s, K, M, k_stats, m_stats, opts.mu, n_modes,
                             opts.residual_tol, ritz)) {
                converged = true;
                break;
            }
            if (static_cast<int>(s.v.size()) >= n) {
                break;
            }
            w = random_vector();
            full_reorthogonalize(s, w);
            mw = M * w;
            b = std::sqrt(std::max(mw.dot(w), 0.0));
            if (b <= 0.0) {
                break;
            }
            s.beta.push_back(0.0);
        } else {
            s.beta.push_back(b);
        }
        w /= b;
        mw /= b;
        s.v.push_back(std::move(w));
        s.mv.push_back(std::move(mw));

        const int m = static_cast<int>(s.alpha.size());
        const bool last = step + 1 == m_max;
        if (m >= n_modes + 2 || m >= n) {
            if (m % check_every == 0 || last || m >= n) {
                if (extract_ritz(s, K, M, k_stats, m_stats, opts.mu, n_modes,
                                 opts.residual_tol, ritz)) {
                    converged = true;
                    break;
                }
            }
        }
    }

    if (!converged && !extract_ritz(s, K, M, k_stats, m_stats, opts.mu, n_modes,
                                    opts.residual_tol, ritz)) {
        throw ConvergenceError("solve_modes: Lanczos did not converge within the subspace budget");
    }

    ModalSolution sol;
    sol.shifted = std::move(shifted);
    sol.pairs.reserve(ritz.size());
    for (int i = 0; i < n_modes; ++i) {
        EigenPair p;
        p.mode = i + 1;
        p.lambda = ritz[i].lambda;
        p.phi = m_normalize(ritz[i].x, M);
        sol.pairs.push_back(std::move(p));
    }
    for (int i = 0; i + 1 < n_modes; ++i) {
        const double gap = std::abs(sol.pairs[i + 1].lambda - sol.pairs[i].lambda);
        const double ref = std::max(std::abs(sol.pairs[i].lambda), std::abs(sol.pairs[i + 1].lambda));
        if (gap <= opts.repeated_tol * ref) {
            throw RepeatedEigenvalueError("solve_modes: repeated eigenvalue among requested modes");
        }
    }
    return sol;
}

} // namespace msens
