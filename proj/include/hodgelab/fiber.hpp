#pragma once

// Exact multilinear algebra on the exterior algebra of a metric fiber:
// wedge, interior product, Hodge star, musical isomorphisms, Clifford maps
// and the parity/duality grading involutions. Everything is dense over the
// 2^d multi-index basis, so the fiber dimension is capped at 8.

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace hodgelab::fiber {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

constexpr cplx kImaginaryUnit{0.0, 1.0};

// i^n for integer n (n may be negative).
inline cplx ipow(long n) {
    switch (((n % 4) + 4) % 4) {
        case 0: return {1, 0};
        case 1: return {0, 1};
        case 2: return {-1, 0};
        default: return {0, -1};
    }
}

namespace detail {

inline int popcount(std::uint32_t m) { return __builtin_popcount(m); }

// Indices (0-based) of the set bits of a mask, ascending.
inline std::vector<int> mask_indices(std::uint32_t m) {
    std::vector<int> out;
    for (int i = 0; m; ++i, m >>= 1)
        if (m & 1u) out.push_back(i);
    return out;
}

// Sign of e_I ^ e_J for disjoint masks: parity of the number of pairs
// (i, j) with i in I, j in J, i > j.
inline int merge_sign(std::uint32_t I, std::uint32_t J) {
    int inversions = 0;
    for (std::uint32_t j = J; j; j &= j - 1) {
        std::uint32_t bit = j & ~(j - 1);
        inversions += popcount(I & ~(bit | (bit - 1)));
    }
    return (inversions & 1) ? -1 : 1;
}

}  // namespace detail

// Exponent of the duality involution on degree-k forms when dim = 2*ell.
// Implemented as k(k-1)+ell; some texts use k(k+1)+ell instead, which
// differs by a factor (-1)^k on odd degrees.
constexpr long tau_exponent(long k, long ell) { return k * (k - 1) + ell; }

class FiberSpace {
public:
    FiberSpace(int dim, MatrixXd metric, int orientation = +1)
        : dim_(dim), metric_(std::move(metric)), orientation_(orientation) {
        if (dim_ < 1 || dim_ > 8)
            throw std::invalid_argument("FiberSpace: dim must be in [1, 8]");
        if (orientation_ != 1 && orientation_ != -1)
            throw std::invalid_argument("FiberSpace: orientation must be +-1");
        if (metric_.rows() != dim_ || metric_.cols() != dim_)
            throw std::invalid_argument("FiberSpace: metric shape mismatch");
        if ((metric_ - metric_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("FiberSpace: metric not symmetric");
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(metric_);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw std::invalid_argument("FiberSpace: metric not positive definite");
        metric_inv_ = metric_.inverse();
        build_basis();
        build_gram();
    }

    static FiberSpace euclidean(int dim, int orientation = +1) {
        return FiberSpace(dim, MatrixXd::Identity(dim, dim), orientation);
    }

    int dim() const { return dim_; }
    int orientation() const { return orientation_; }
    int size() const { return 1 << dim_; }
    const MatrixXd& metric() const { return metric_; }
    const MatrixXd& metric_inv() const { return metric_inv_; }

    // Basis of Lambda V: strictly increasing multi-indices ordered by degree,
    // lexicographically within each degree. basis_mask(i) is the bitmask of
    // the i-th basis element; basis_index(mask) is its position.
    std::uint32_t basis_mask(int i) const { return masks_[i]; }
    int basis_index(std::uint32_t mask) const { return index_of_mask_[mask]; }
    int degree_of(int i) const { return detail::popcount(masks_[i]); }
    int degree_offset(int k) const { return degree_offset_[k]; }
    int degree_count(int k) const {
        return degree_offset_[k + 1] - degree_offset_[k];
    }

    // Gram matrix of the full exterior algebra in the multi-index basis
    // (block diagonal by degree; each block is the compound of metric_inv).
    const MatrixXd& gram() const { return gram_; }
    const MatrixXd& gram_sqrt() const { return gram_sqrt_; }
    const MatrixXd& gram_sqrt_inv() const { return gram_sqrt_inv_; }

    double volume_coefficient() const {
        return orientation_ * std::sqrt(metric_.determinant());
    }

private:
    void build_basis() {
        const int n = size();
        masks_.resize(n);
        index_of_mask_.assign(n, -1);
        degree_offset_.assign(dim_ + 2, 0);
        std::vector<std::vector<std::uint32_t>> by_degree(dim_ + 1);
        for (std::uint32_t m = 0; m < static_cast<std::uint32_t>(n); ++m)
            by_degree[detail::popcount(m)].push_back(m);
        auto tuple_less = [](std::uint32_t a, std::uint32_t b) {
            auto ta = detail::mask_indices(a), tb = detail::mask_indices(b);
            return ta < tb;
        };
        int pos = 0;
        for (int k = 0; k <= dim_; ++k) {
            degree_offset_[k] = pos;
            std::sort(by_degree[k].begin(), by_degree[k].end(), tuple_less);
            for (auto m : by_degree[k]) {
                masks_[pos] = m;
                index_of_mask_[m] = pos;
                ++pos;
            }
        }
        degree_offset_[dim_ + 1] = pos;
    }

    void build_gram() {
        const int n = size();
        gram_ = MatrixXd::Zero(n, n);
        for (int a = 0; a < n; ++a) {
            auto I = detail::mask_indices(masks_[a]);
            for (int b = 0; b < n; ++b) {
                if (degree_of(a) != degree_of(b)) continue;
                auto J = detail::mask_indices(masks_[b]);
                const int k = static_cast<int>(I.size());
                if (k == 0) {
                    gram_(a, b) = 1.0;
                    continue;
                }
                MatrixXd minor(k, k);
                for (int r = 0; r < k; ++r)
                    for (int c = 0; c < k; ++c)
                        minor(r, c) = metric_inv_(I[r], J[c]);
                gram_(a, b) = minor.determinant();
            }
        }
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram_);
        VectorXd sq = es.eigenvalues().cwiseSqrt();
        gram_sqrt_ = es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().transpose();
        gram_sqrt_inv_ =
            es.eigenvectors() * sq.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    }

    int dim_;
    MatrixXd metric_, metric_inv_;
    int orientation_;
    std::vector<std::uint32_t> masks_;
    std::vector<int> index_of_mask_;
    std::vector<int> degree_offset_;
    MatrixXd gram_, gram_sqrt_, gram_sqrt_inv_;
};

// Element of the full exterior algebra over a fiber space.
struct ExteriorElement {
    const FiberSpace* fs = nullptr;
    VectorXcd coeffs;

    ExteriorElement() = default;
    explicit ExteriorElement(const FiberSpace& space)
        : fs(&space), coeffs(VectorXcd::Zero(space.size())) {}

    static ExteriorElement basis(const FiberSpace& space, std::uint32_t mask) {
        ExteriorElement e(space);
        e.coeffs[space.basis_index(mask)] = 1.0;
        return e;
    }
    static ExteriorElement scalar(const FiberSpace& space, cplx value) {
        ExteriorElement e(space);
        e.coeffs[0] = value;
        return e;
    }
    // 1-form with the given covector components.
    static ExteriorElement one_form(const FiberSpace& space, const VectorXd& alpha) {
        ExteriorElement e(space);
        for (int i = 0; i < space.dim(); ++i)
            e.coeffs[space.basis_index(1u << i)] = alpha[i];
        return e;
    }

    ExteriorElement degree_part(int k) const {
        ExteriorElement out(*fs);
        for (int i = fs->degree_offset(k); i < fs->degree_offset(k + 1); ++i)
            out.coeffs[i] = coeffs[i];
        return out;
    }
};

inline void check_same_space(const ExteriorElement& a, const ExteriorElement& b) {
    if (a.fs == nullptr || b.fs == nullptr || a.fs->dim() != b.fs->dim())
        throw std::invalid_argument("fiber dimension mismatch");
}

inline ExteriorElement operator+(const ExteriorElement& a, const ExteriorElement& b) {
    check_same_space(a, b);
    ExteriorElement out = a;
    out.coeffs += b.coeffs;
    return out;
}
inline ExteriorElement operator-(const ExteriorElement& a, const ExteriorElement& b) {
    check_same_space(a, b);
    ExteriorElement out = a;
    out.coeffs -= b.coeffs;
    return out;
}
inline ExteriorElement operator*(cplx s, const ExteriorElement& a) {
    ExteriorElement out = a;
    out.coeffs *= s;
    return out;
}

inline ExteriorElement wedge(const ExteriorElement& a, const ExteriorElement& b) {
    check_same_space(a, b);
    const FiberSpace& fs = *a.fs;
    ExteriorElement out(fs);
    const int n = fs.size();
    for (int i = 0; i < n; ++i) {
        if (a.coeffs[i] == cplx(0)) continue;
        std::uint32_t I = fs.basis_mask(i);
        for (int j = 0; j < n; ++j) {
            if (b.coeffs[j] == cplx(0)) continue;
            std::uint32_t J = fs.basis_mask(j);
            if (I & J) continue;
            int s = detail::merge_sign(I, J);
            out.coeffs[fs.basis_index(I | J)] += double(s) * a.coeffs[i] * b.coeffs[j];
        }
    }
    return out;
}

// Interior product with a tangent vector v: contraction in the first slot.
// Vanishes on degree 0.
inline ExteriorElement interior_product(const VectorXd& v, const ExteriorElement& omega) {
    if (omega.fs == nullptr || v.size() != omega.fs->dim())
        throw std::invalid_argument("fiber dimension mismatch");
    const FiberSpace& fs = *omega.fs;
    ExteriorElement out(fs);
    for (int i = 0; i < fs.size(); ++i) {
        if (omega.coeffs[i] == cplx(0)) continue;
        std::uint32_t I = fs.basis_mask(i);
        auto idx = detail::mask_indices(I);
        for (size_t a = 0; a < idx.size(); ++a) {
            double sign = (a % 2 == 0) ? 1.0 : -1.0;
            std::uint32_t rest = I & ~(1u << idx[a]);
            out.coeffs[fs.basis_index(rest)] += sign * v[idx[a]] * omega.coeffs[i];
        }
    }
    return out;
}

inline cplx inner(const ExteriorElement& a, const ExteriorElement& b) {
    check_same_space(a, b);
    return (b.coeffs.adjoint() * (a.fs->gram() * a.coeffs))(0, 0);
}

inline double metric_norm(const ExteriorElement& a) {
    return std::sqrt(std::max(0.0, inner(a, a).real()));
}

inline VectorXd sharp(const VectorXd& alpha, const FiberSpace& fs) {
    return fs.metric().ldlt().solve(alpha);
}
inline VectorXd flat(const VectorXd& v, const FiberSpace& fs) { return fs.metric() * v; }

// |alpha|_g for a covector: sqrt(alpha^T g^{-1} alpha).
inline double covector_norm(const VectorXd& alpha, const FiberSpace& fs) {
    return std::sqrt(alpha.dot(fs.metric_inv() * alpha));
}

struct FiberOperator {
    const FiberSpace* fs = nullptr;
    MatrixXcd mat;

    FiberOperator() = default;
    explicit FiberOperator(const FiberSpace& space)
        : fs(&space), mat(MatrixXcd::Zero(space.size(), space.size())) {}
    static FiberOperator identity(const FiberSpace& space) {
        FiberOperator op(space);
        op.mat.setIdentity();
        return op;
    }

    ExteriorElement apply(const ExteriorElement& x) const {
        ExteriorElement out(*fs);
        out.coeffs = mat * x.coeffs;
        return out;
    }

    // Largest singular value with respect to the metric norm on the fiber.
    double op_norm() const {
        MatrixXcd conj = fs->gram_sqrt() * mat * fs->gram_sqrt_inv();
        Eigen::JacobiSVD<MatrixXcd> svd(conj);
        return svd.singularValues()(0);
    }

    nlohmann::json debug_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (int r = 0; r < mat.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < mat.cols(); ++c)
                row.push_back({mat(r, c).real(), mat(r, c).imag()});
            rows.push_back(row);
        }
        return {{"dim", fs->dim()}, {"matrix", rows}};
    }
};

inline FiberOperator compose(const FiberOperator& a, const FiberOperator& b) {
    FiberOperator out(*a.fs);
    out.mat = a.mat * b.mat;
    return out;
}

// Matrix of left exterior multiplication by a 1-form alpha.
inline FiberOperator exterior_mult(const VectorXd& alpha, const FiberSpace& fs) {
    FiberOperator op(fs);
    ExteriorElement a = ExteriorElement::one_form(fs, alpha);
    for (int j = 0; j < fs.size(); ++j) {
        ExteriorElement ej = ExteriorElement::basis(fs, fs.basis_mask(j));
        op.mat.col(j) = wedge(a, ej).coeffs;
    }
    return op;
}

// Matrix of the interior product with a tangent vector v.
inline FiberOperator interior_mult(const VectorXd& v, const FiberSpace& fs) {
    FiberOperator op(fs);
    for (int j = 0; j < fs.size(); ++j) {
        ExteriorElement ej = ExteriorElement::basis(fs, fs.basis_mask(j));
        op.mat.col(j) = interior_product(v, ej).coeffs;
    }
    return op;
}

// Hodge star as a matrix: alpha ^ (star beta) = <alpha, beta> vol.
inline FiberOperator hodge_star_operator(const FiberSpace& fs) {
    FiberOperator op(fs);
    const int n = fs.size();
    const std::uint32_t full = static_cast<std::uint32_t>(n - 1);
    const double vg = fs.volume_coefficient();
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            if (fs.degree_of(i) != fs.degree_of(j)) continue;
            std::uint32_t I = fs.basis_mask(i);
            std::uint32_t K = full & ~I;
            int s = detail::merge_sign(I, K);
            op.mat(fs.basis_index(K), j) += double(s) * vg * fs.gram()(i, j);
        }
    }
    return op;
}

inline ExteriorElement hodge_star(const ExteriorElement& omega, const FiberSpace& fs) {
    ExteriorElement out(fs);
    out.coeffs = hodge_star_operator(fs).mat * omega.coeffs;
    return out;
}

// gamma_-(v) = E(v_flat) - I(v); squares to -g(v,v), skew-adjoint,
// with operator norm |v_flat|.
inline FiberOperator clifford_minus(const VectorXd& v, const FiberSpace& fs) {
    FiberOperator op(fs);
    op.mat = exterior_mult(flat(v, fs), fs).mat - interior_mult(v, fs).mat;
    return op;
}

inline FiberOperator clifford_plus(const VectorXd& v, const FiberSpace& fs) {
    FiberOperator op(fs);
    op.mat = exterior_mult(flat(v, fs), fs).mat + interior_mult(v, fs).mat;
    return op;
}

// omega -> (-1)^k omega on degree-k parts.
inline FiberOperator parity_grading(const FiberSpace& fs) {
    FiberOperator op(fs);
    for (int i = 0; i < fs.size(); ++i)
        op.mat(i, i) = (fs.degree_of(i) % 2 == 0) ? 1.0 : -1.0;
    return op;
}

// Duality involution for even fiber dimension d = 2*ell:
// omega_k -> i^{k(k-1)+ell} star(omega_k). Squares to the identity and is
// an isometry of the metric norm; equals star on middle degree when d = 4j.
inline FiberOperator tau_grading(const FiberSpace& fs) {
    if (fs.dim() % 2 != 0)
        throw std::invalid_argument("tau requires even dimension");
    const long ell = fs.dim() / 2;
    FiberOperator star = hodge_star_operator(fs);
    FiberOperator op(fs);
    for (int j = 0; j < fs.size(); ++j)
        op.mat.col(j) = ipow(tau_exponent(fs.degree_of(j), ell)) * star.mat.col(j);
    return op;
}

}  // namespace hodgelab::fiber
