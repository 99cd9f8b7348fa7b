#include "msens/sparse.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace msens {

SymSparseMatrix SymSparseMatrix::assemble(int order, const std::vector<Triplet>& entries) {
    if (order < 1) {
        throw std::invalid_argument("SymSparseMatrix: order must be >= 1");
    }
    struct Entry {
        int row, col;
        double value;
    };
    std::vector<Entry> folded;
    folded.reserve(entries.size());
    for (const auto& t : entries) {
        if (t.row < 0 || t.row >= order || t.col < 0 || t.col >= order) {
            throw std::invalid_argument("SymSparseMatrix: triplet index out of range");
        }
        // Fold onto the upper triangle.
        int r = std::min(t.row, t.col);
        int c = std::max(t.row, t.col);
        folded.push_back({r, c, t.value});
    }
    std::sort(folded.begin(), folded.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    SymSparseMatrix A;
    A.order_ = order;
    A.row_offsets_.assign(static_cast<std::size_t>(order) + 1, 0);
    A.col_indices_.reserve(folded.size());
    A.values_.reserve(folded.size());
    for (std::size_t i = 0; i < folded.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < folded.size() && folded[j].row == folded[i].row && folded[j].col == folded[i].col) {
            sum += folded[j].value;
            ++j;
        }
        A.col_indices_.push_back(folded[i].col);
        A.values_.push_back(sum);
        A.row_offsets_[static_cast<std::size_t>(folded[i].row) + 1]++;
        i = j;
    }
    for (int r = 0; r < order; ++r) {
        A.row_offsets_[static_cast<std::size_t>(r) + 1] += A.row_offsets_[r];
    }
    return A;
}

SymSparseMatrix SymSparseMatrix::combine(double a, const SymSparseMatrix& A,
                                         double b, const SymSparseMatrix& B) {
    if (A.order_ != B.order_) {
        throw std::invalid_argument("SymSparseMatrix::combine: order mismatch");
    }
    SymSparseMatrix C;
    C.order_ = A.order_;
    C.row_offsets_.assign(static_cast<std::size_t>(C.order_) + 1, 0);
    C.col_indices_.reserve(A.values_.size() + B.values_.size());
    C.values_.reserve(A.values_.size() + B.values_.size());
    for (int r = 0; r < C.order_; ++r) {
        int pa = A.row_offsets_[r], ea = A.row_offsets_[r + 1];
        int pb = B.row_offsets_[r], eb = B.row_offsets_[r + 1];
        while (pa < ea || pb < eb) {
            int ca = pa < ea ? A.col_indices_[pa] : C.order_;
            int cb = pb < eb ? B.col_indices_[pb] : C.order_;
            if (ca < cb) {
                C.col_indices_.push_back(ca);
                C.values_.push_back(a * A.values_[pa++]);
            } else if (cb < ca) {
                C.col_indices_.push_back(cb);
                C.values_.push_back(b * B.values_[pb++]);
            } else {
                C.col_indices_.push_back(ca);
                C.values_.push_back(a * A.values_[pa++] + b * B.values_[pb++]);
            }
        }
        C.row_offsets_[static_cast<std::size_t>(r) + 1] = static_cast<int>(C.values_.size());
    }
    return C;
}

double SymSparseMatrix::coeff(int r, int c) const {
    if (r < 0 || r >= order_ || c < 0 || c >= order_) {
        throw std::invalid_argument("SymSparseMatrix::coeff: index out of range");
    }
    int row = std::min(r, c);
    int col = std::max(r, c);
    auto first = col_indices_.begin() + row_offsets_[row];
    auto last = col_indices_.begin() + row_offsets_[row + 1];
    auto it = std::lower_bound(first, last, col);
    if (it != last && *it == col) {
        return values_[static_cast<std::size_t>(it - col_indices_.begin())];
    }
    return 0.0;
}

void SymSparseMatrix::multiply_add(const Vector& x, double scale, Vector& y) const {
    if (x.size() != order_ || y.size() != order_) {
        throw std::invalid_argument("SymSparseMatrix::multiply_add: dimension mismatch");
    }
    for (int i = 0; i < order_; ++i) {
        const double xi = x[i];
        double acc = 0.0;
        for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
            const int j = col_indices_[p];
            const double v = values_[p];
            acc += v * x[j];
            if (j != i) {
                y[j] += scale * v * xi;
            }
        }
        y[i] += scale * acc;
    }
}

Vector SymSparseMatrix::operator*(const Vector& x) const {
    Vector y = Vector::Zero(order_);
    multiply_add(x, 1.0, y);
    return y;
}

double SymSparseMatrix::bilinear(const Vector& u, const Vector& v) const {
    if (u.size() != order_ || v.size() != order_) {
        throw std::invalid_argument("SymSparseMatrix::bilinear: dimension mismatch");
    }
    double acc = 0.0;
    for (int i = 0; i < order_; ++i) {
        for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
            const int j = col_indices_[p];
            const double a = values_[p];
            if (j == i) {
                acc += a * u[i] * v[i];
            } else {
                acc += a * (u[i] * v[j] + u[j] * v[i]);
            }
        }
    }
    return acc;
}

double SymSparseMatrix::frobenius_norm() const {
    double acc = 0.0;
    for (int i = 0; i < order_; ++i) {
        for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
            const double a = values_[p] * values_[p];
            acc += col_indices_[p] == i ? a : 2.0 * a;
        }
    }
    return std::sqrt(acc);
}

Eigen::SparseMatrix<double> SymSparseMatrix::to_eigen_upper() const {
    Eigen::SparseMatrix<double> m(order_, order_);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(values_.size());
    for (int i = 0; i < order_; ++i) {
        for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
            trips.emplace_back(i, col_indices_[p], values_[p]);
        }
    }
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

Eigen::SparseMatrix<double> SymSparseMatrix::to_eigen_full() const {
    Eigen::SparseMatrix<double> m(order_, order_);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(2 * values_.size());
    for (int i = 0; i < order_; ++i) {
        for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
            const int j = col_indices_[p];
            trips.emplace_back(i, j, values_[p]);
            if (j != i) {
                trips.emplace_back(j, i, values_[p]);
            }
        }
    }
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

void SymSparseMatrix::write_matrix_market(std::ostream& os) const {
    // Matrix Market symmetric convention stores the lower triangle, so the
    // stored upper-triangle entries are emitted transposed.
    os << "%%MatrixMarket matrix coordinate real symmetric\n";
    os << order_ << ' ' << order_ << ' ' << values_.size() << '\n';
    std::ostringstream line;
    line.precision(17);
    for (int i = 0; i < order_; ++i) {
        for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
            line.str("");
            line << (col_indices_[p] + 1) << ' ' << (i + 1) << ' ' << values_[p] << '\n';
            os << line.str();
        }
    }
}

SymSparseMatrix SymSparseMatrix::read_matrix_market(std::istream& is) {
    std::string banner;
    if (!std::getline(is, banner) || banner.rfind("%%MatrixMarket", 0) != 0 ||
        banner.find("coordinate") == std::string::npos ||
        banner.find("real") == std::string::npos ||
        banner.find("symmetric") == std::string::npos) {
        throw std::invalid_argument("read_matrix_market: expected 'coordinate real symmetric' banner");
    }
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line[0] != '%') {
            break;
        }
    }
    std::istringstream header(line);
    int rows = 0, cols = 0;
    long long nnz = 0;
    if (!(header >> rows >> cols >> nnz) || rows != cols || rows < 1) {
        throw std::invalid_argument("read_matrix_market: bad size header");
    }
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(nnz));
    for (long long k = 0; k < nnz; ++k) {
        int r = 0, c = 0;
        double v = 0.0;
        if (!(is >> r >> c >> v)) {
            throw std::invalid_argument("read_matrix_market: truncated entry list");
        }
        trips.push_back({r - 1, c - 1, v});
    }
    return assemble(rows, trips);
}

// ---------------------------------------------------------------------------
// LDL' factorization, backed by Eigen's simplicial solver.
// ---------------------------------------------------------------------------

namespace {

using UpperSparse = Eigen::SparseMatrix<double>;
using LdltAmd = Eigen::SimplicialLDLT<UpperSparse, Eigen::Upper, Eigen::AMDOrdering<int>>;
using LdltNatural = Eigen::SimplicialLDLT<UpperSparse, Eigen::Upper, Eigen::NaturalOrdering<int>>;

constexpr double kZeroPivotRel = 1e-13;

template <class Solver>
void check_pivots(const Solver& solver) {
    if (solver.info() != Eigen::Success) {
        throw ZeroPivotError("ldlt_factorize: factorization failed (matrix numerically singular)");
    }
    const auto& d = solver.vectorD();
    double dmax = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (!std::isfinite(d[i])) {
            throw ZeroPivotError("ldlt_factorize: non-finite pivot");
        }
        dmax = std::max(dmax, std::abs(d[i]));
    }
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (std::abs(d[i]) <= kZeroPivotRel * dmax) {
            throw ZeroPivotError("ldlt_factorize: zero pivot (matrix numerically singular)");
        }
    }
}

} // namespace

struct LdltFactorization::Impl {
    Ordering ordering;
    int order = 0;
    std::unique_ptr<LdltAmd> amd;
    std::unique_ptr<LdltNatural> natural;

    void solve_in_place(Vector& x) const {
        if (amd) {
            x = amd->solve(x);
        } else {
            x = natural->solve(x);
        }
    }
};

LdltFactorization LdltFactorization::factorize(const SymSparseMatrix& A, Ordering ordering) {
    auto impl = std::make_shared<Impl>();
    impl->ordering = ordering;
    impl->order = A.order();
    const UpperSparse upper = A.to_eigen_upper();
    if (ordering == Ordering::Amd) {
        impl->amd = std::make_unique<LdltAmd>();
        impl->amd->compute(upper);
        check_pivots(*impl->amd);
    } else {
        impl->natural = std::make_unique<LdltNatural>();
        impl->natural->compute(upper);
        check_pivots(*impl->natural);
    }
    LdltFactorization f;
    f.impl_ = std::move(impl);
    return f;
}

Vector LdltFactorization::solve(const Vector& b) const {
    Vector x = b;
    solve_in_place(x);
    return x;
}

void LdltFactorization::solve_in_place(Vector& x) const {
    if (!impl_) {
        throw std::logic_error("LdltFactorization: not factorized");
    }
    if (x.size() != impl_->order) {
        throw std::invalid_argument("LdltFactorization::solve: dimension mismatch");
    }
    impl_->solve_in_place(x);
}

int LdltFactorization::order() const { return impl_ ? impl_->order : 0; }

Ordering LdltFactorization::ordering() const {
    return impl_ ? impl_->ordering : Ordering::Amd;
}

Vector LdltFactorization::diagonal() const {
    if (!impl_) {
        throw std::logic_error("LdltFactorization: not factorized");
    }
    return impl_->amd ? Vector(impl_->amd->vectorD()) : Vector(impl_->natural->vectorD());
}

Eigen::VectorXi LdltFactorization::permutation() const {
    if (!impl_) {
        throw std::logic_error("LdltFactorization: not factorized");
    }
    return impl_->amd ? impl_->amd->permutationP().indices()
                      : impl_->natural->permutationP().indices();
}

std::size_t LdltFactorization::factor_nonzeros() const {
    if (!impl_) {
        return 0;
    }
    return impl_->amd ? static_cast<std::size_t>(impl_->amd->matrixL().nestedExpression().nonZeros())
                      : static_cast<std::size_t>(impl_->natural->matrixL().nestedExpression().nonZeros());
}

} // namespace msens
