#pragma once

#include <vector>

#include "bps/common.hpp"

extern "C" {
void zgbtrf_(const int* m, const int* n, const int* kl, const int* ku, std::complex<double>* ab,
             const int* ldab, int* ipiv, int* info);
void zgbtrs_(const char* trans, const int* n, const int* kl, const int* ku, const int* nrhs,
             const std::complex<double>* ab, const int* ldab, const int* ipiv,
             std::complex<double>* b, const int* ldb, int* info);
void zgbcon_(const char* norm, const int* n, const int* kl, const int* ku,
             const std::complex<double>* ab, const int* ldab, const int* ipiv,
             const double* anorm, double* rcond, std::complex<double>* work, double* rwork,
             int* info);
}

namespace bps {

struct Triplet {
  int row = 0, col = 0;
  cdouble val;
};

// Complex banded linear system assembled from coordinate entries; the
// bandwidths are derived from the sparsity pattern, factorized once with
// partial pivoting and reused for any number of right-hand sides.
class BandedSystem {
 public:
  BandedSystem(int n, std::vector<Triplet> entries) : n_(n), coo_(std::move(entries)) {
    if (n <= 0) throw SimError("banded: empty system");
    kl_ = ku_ = 0;
    for (const auto& e : coo_) {
      if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= n)
        throw SimError("banded: entry out of range");
      kl_ = std::max(kl_, e.row - e.col);
      ku_ = std::max(ku_, e.col - e.row);
    }
    ldab_ = 2 * kl_ + ku_ + 1;
    ab_.assign(static_cast<size_t>(ldab_) * n_, cdouble{});
    for (const auto& e : coo_) {
      // LAPACK band layout: AB(kl+ku+1+i-j, j) in 1-based indexing
      const int r = kl_ + ku_ + e.row - e.col;
      ab_[static_cast<size_t>(e.col) * ldab_ + r] += e.val;
    }
    // 1-norm of A for the condition estimate
    std::vector<double> colsum(static_cast<size_t>(n_), 0.0);
    for (const auto& e : coo_) colsum[static_cast<size_t>(e.col)] += std::abs(e.val);
    anorm_ = 0;
    for (double c : colsum) anorm_ = std::max(anorm_, c);

    ipiv_.assign(static_cast<size_t>(n_), 0);
    int info = 0;
    zgbtrf_(&n_, &n_, &kl_, &ku_, ab_.data(), &ldab_, ipiv_.data(), &info);
    if (info != 0) throw SimError("banded: factorization failed, info=" + std::to_string(info));
  }

  int size() const { return n_; }

  std::vector<cdouble> solve(std::vector<cdouble> rhs) const {
    if (static_cast<int>(rhs.size()) != n_) throw SimError("banded: rhs size mismatch");
    const char trans = 'N';
    const int nrhs = 1;
    int info = 0;
    zgbtrs_(&trans, &n_, &kl_, &ku_, &nrhs, ab_.data(), &ldab_, ipiv_.data(), rhs.data(), &n_,
            &info);
    if (info != 0) throw SimError("banded: solve failed");
    return rhs;
  }

  // 1-norm condition estimate from the factorization.
  double condition() const {
    double rcond = 0;
    std::vector<cdouble> work(static_cast<size_t>(2 * n_));
    std::vector<double> rwork(static_cast<size_t>(n_));
    const char norm = '1';
    int info = 0;
    zgbcon_(&norm, &n_, &kl_, &ku_, ab_.data(), &ldab_, ipiv_.data(), &anorm_, &rcond,
            work.data(), rwork.data(), &info);
    if (info != 0) throw SimError("banded: condition estimate failed");
    if (rcond <= 0) return std::numeric_limits<double>::infinity();
    return 1.0 / rcond;
  }

  // ||Ax - b||_inf / (||A||_1 ||x||_inf + ||b||_inf)
  double relative_residual(const std::vector<cdouble>& x, const std::vector<cdouble>& b) const {
    std::vector<cdouble> r(b);
    for (const auto& e : coo_) r[static_cast<size_t>(e.row)] -= e.val * x[static_cast<size_t>(e.col)];
    double rn = 0, xn = 0, bn = 0;
    for (int i = 0; i < n_; ++i) {
      rn = std::max(rn, std::abs(r[static_cast<size_t>(i)]));
      xn = std::max(xn, std::abs(x[static_cast<size_t>(i)]));
      bn = std::max(bn, std::abs(b[static_cast<size_t>(i)]));
    }
    const double den = anorm_ * xn + bn;
    return den > 0 ? rn / den : rn;
  }

  const std::vector<Triplet>& entries() const { return coo_; }

 private:
  int n_, kl_, ku_, ldab_;
  std::vector<Triplet> coo_;
  std::vector<cdouble> ab_;
  std::vector<int> ipiv_;
  double anorm_;
};

}  // namespace bps
