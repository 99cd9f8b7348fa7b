#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <vector>

namespace msens {

using Vector = Eigen::VectorXd;

/// Numerically singular matrix encountered during factorization. For shifted
/// matrices this usually means the shift collides with an eigenvalue.
class ZeroPivotError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Triplet {
    int row;
    int col;
    double value;
};

/// Symmetric sparse matrix. Only the upper triangle is stored (CSR, column
/// indices sorted within each row); the lower triangle is implied and the
/// matvec mirrors it on the fly. Immutable after assembly, so instances can
/// be shared freely across threads.
class SymSparseMatrix {
public:
    SymSparseMatrix() = default;

    /// Build from (row, col, value) triplets. Entries with row > col are
    /// folded onto the upper triangle, i.e. (r, c, v) with r > c contributes
    /// to (c, r). Duplicate locations are summed. Each symmetric off-diagonal
    /// pair must therefore be supplied once, in either orientation.
    static SymSparseMatrix assemble(int order, const std::vector<Triplet>& entries);

    /// aA + bB. The sparsity pattern is the union of both inputs.
    static SymSparseMatrix combine(double a, const SymSparseMatrix& A,
                                   double b, const SymSparseMatrix& B);

    int order() const { return order_; }
    std::size_t stored_nonzeros() const { return values_.size(); }
    const std::vector<int>& row_offsets() const { return row_offsets_; }
    const std::vector<int>& col_indices() const { return col_indices_; }
    const std::vector<double>& values() const { return values_; }

    /// Entry (r, c) of the full symmetric matrix; 0 if not stored.
    double coeff(int r, int c) const;

    /// y += scale * A x, using the full symmetric matrix.
    void multiply_add(const Vector& x, double scale, Vector& y) const;
    Vector operator*(const Vector& x) const;

    /// u' A v over the full symmetric matrix.
    double bilinear(const Vector& u, const Vector& v) const;

    /// Frobenius norm of the full symmetric matrix.
    double frobenius_norm() const;

    /// Upper triangle as an Eigen sparse matrix (for factorization backends).
    Eigen::SparseMatrix<double> to_eigen_upper() const;
    /// Fully mirrored symmetric matrix.
    Eigen::SparseMatrix<double> to_eigen_full() const;

    /// Matrix Market "coordinate real symmetric" I/O (debugging aid).
    void write_matrix_market(std::ostream& os) const;
    static SymSparseMatrix read_matrix_market(std::istream& is);

private:
    int order_ = 0;
    std::vector<int> row_offsets_{0};
    std::vector<int> col_indices_;
    std::vector<double> values_;
};

enum class Ordering { Amd, Natural };

/// Sparse LDL' factorization of a symmetric (possibly indefinite) matrix:
/// P A P' = L D L' with a fill-reducing permutation P. D may contain negative
/// entries; a zero pivot raises ZeroPivotError. Immutable once built; solves
/// are const and reentrant.
class LdltFactorization {
public:
    static LdltFactorization factorize(const SymSparseMatrix& A,
                                       Ordering ordering = Ordering::Amd);

    Vector solve(const Vector& b) const;
    void solve_in_place(Vector& x) const;

    int order() const;
    Ordering ordering() const;
    /// Diagonal of D, in permuted order.
    Vector diagonal() const;
    Eigen::VectorXi permutation() const;
    std::size_t factor_nonzeros() const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

} // namespace msens
