#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hps {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// Raised for any discretization or factorization failure the caller should see.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// LU factorization with partial pivoting, kept as raw factors so that it can be
/// persisted and restored bit-exactly.
class DenseLu {
public:
    DenseLu() = default;

    explicit DenseLu(const Matrix& a) {
        Eigen::PartialPivLU<Matrix> lu(a);
        factors_ = lu.matrixLU();
        const auto& ind = lu.permutationP().indices();
        perm_.assign(ind.data(), ind.data() + ind.size());
        rcond_ = lu.rcond();
    }

    DenseLu(Matrix factors, std::vector<int> perm, double rcond)
        : factors_(std::move(factors)), perm_(std::move(perm)), rcond_(rcond) {}

    [[nodiscard]] Index size() const { return factors_.rows(); }
    [[nodiscard]] double rcond() const { return rcond_; }
    [[nodiscard]] const Matrix& factors() const { return factors_; }
    [[nodiscard]] const std::vector<int>& permutation() const { return perm_; }

    /// Solves A X = B; same operation sequence as Eigen::PartialPivLU::solve.
    [[nodiscard]] Matrix solve(const Matrix& rhs) const {
        Matrix x(rhs.rows(), rhs.cols());
        for (Index i = 0; i < rhs.rows(); ++i) {
            x.row(perm_[static_cast<std::size_t>(i)]) = rhs.row(i);
        }
        factors_.triangularView<Eigen::UnitLower>().solveInPlace(x);
        factors_.triangularView<Eigen::Upper>().solveInPlace(x);
        return x;
    }

    [[nodiscard]] Vector solve(const Vector& rhs) const {
        Vector x(rhs.size());
        for (Index i = 0; i < rhs.size(); ++i) {
            x(perm_[static_cast<std::size_t>(i)]) = rhs(i);
        }
        factors_.triangularView<Eigen::UnitLower>().solveInPlace(x);
        factors_.triangularView<Eigen::Upper>().solveInPlace(x);
        return x;
    }

    [[nodiscard]] std::size_t element_count() const {
        return static_cast<std::size_t>(factors_.size());
    }

private:
    Matrix factors_;
    std::vector<int> perm_;
    double rcond_ = 0.0;
};

[[nodiscard]] inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

[[nodiscard]] inline IndexList iota_list(Index begin, Index count) {
    IndexList out(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = begin + i;
    return out;
}

}  // namespace hps
