#pragma once

// Discrete operators on cochains: coboundary d, Whitney mass matrices, the
// metric adjoint d*, the Hodge-Dirac operator D = d + d*, multiplication
// operators, commutators, and L^p cochain/operator norms.
//
// Three coexisting norm structures, used where each is meaningful:
//  * the Whitney mass inner product — all spectral statements and every
//    p = 2 operator norm;
//  * a vertex-collocated fiber norm (l^2 across degrees at each vertex,
//    weighted p-sum over vertices) — cochain L^p norms;
//  * a simplex-sites weighted l^p structure — operator norms at p != 2,
//    where weighted column/row sums are exact at p in {1, inf} and
//    Riesz-Thorin interpolation is valid.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <limits>
#include <memory>
#include <random>

#include "simplicial.hpp"

namespace hodgelab::calculus {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using simplicial::CochainBasisInfo;
using simplicial::SimplicialComplexData;

enum class DegreeShift { zero, up, down, mixed };

struct GradedOperator {
    CochainBasisInfo basis;
    DegreeShift shift = DegreeShift::mixed;
    MatrixXd mat;

    int degrees() const { return static_cast<int>(basis.offset.size()) - 2; }
    Eigen::Block<MatrixXd> block(int k_target, int k_source) {
        return mat.block(basis.offset[k_target], basis.offset[k_source],
                         basis.count(k_target), basis.count(k_source));
    }
    Eigen::Block<const MatrixXd> block(int k_target, int k_source) const {
        return mat.block(basis.offset[k_target], basis.offset[k_source],
                         basis.count(k_target), basis.count(k_source));
    }
};

struct Cochain {
    const SimplicialComplexData* complex = nullptr;
    VectorXcd values;

    Cochain(const SimplicialComplexData& cx, VectorXcd v) : complex(&cx), values(std::move(v)) {}
    explicit Cochain(const SimplicialComplexData& cx)
        : complex(&cx), values(VectorXcd::Zero(cx.basis_info().total())) {}
};

struct MetricStructure {
    const SimplicialComplexData* complex = nullptr;
    CochainBasisInfo basis;
    std::vector<Eigen::SparseMatrix<double>> mass;   // one SPD block per degree
    std::vector<std::vector<double>> volume;         // k-volume of each simplex
    std::vector<std::vector<double>> site_measure;   // top-volume share per simplex
    std::vector<double> vertex_weight;               // lumped vertex volumes

    MatrixXd mass_dense(int k) const { return MatrixXd(mass[k]); }

    Eigen::SparseMatrix<double> stacked_mass() const {
        std::vector<Eigen::Triplet<double>> trips;
        for (size_t k = 0; k < mass.size(); ++k)
            for (int outer = 0; outer < mass[k].outerSize(); ++outer)
                for (Eigen::SparseMatrix<double>::InnerIterator it(mass[k], outer); it; ++it)
                    trips.emplace_back(basis.offset[k] + int(it.row()),
                                       basis.offset[k] + int(it.col()), it.value());
        Eigen::SparseMatrix<double> m(basis.total(), basis.total());
        m.setFromTriplets(trips.begin(), trips.end());
        return m;
    }

    MatrixXd stacked_mass_dense() const { return MatrixXd(stacked_mass()); }

    double total_volume() const {
        double v = 0;
        for (double w : vertex_weight) v += w;
        return v;
    }

    // weighted l^p site structure: measure and pointwise scaling per simplex
    double site_mu(int k, int i) const { return site_measure[k][i]; }
    double site_scale(int k, int i) const { return k == 0 ? 1.0 : volume[k][i]; }
};

namespace detail {

// local geometry of one element: Gram matrix of barycentric gradients and
// the element volume, both from edge lengths alone
struct ElementGeometry {
    MatrixXd grad_gram;  // (d+1) x (d+1)
    double volume;
};

inline ElementGeometry element_geometry(const SimplicialComplexData& cx, int t) {
    const int d = cx.dim;
    MatrixXd B(d, d);
    for (int i = 1; i <= d; ++i)
        for (int j = 1; j <= d; ++j) {
            double l0i = cx.edge_length_between(t, 0, i);
            double l0j = cx.edge_length_between(t, 0, j);
            double lij = (i == j) ? 0.0 : cx.edge_length_between(t, i, j);
            B(i - 1, j - 1) = 0.5 * (l0i * l0i + l0j * l0j - lij * lij);
        }
    double det = B.determinant();
    double factorial = 1;
    for (int i = 2; i <= d; ++i) factorial *= i;
    ElementGeometry g;
    g.volume = det > 0 ? std::sqrt(det) / factorial : 0.0;
    if (!(g.volume > 1e-14))
        throw std::runtime_error("degenerate simplex " + std::to_string(t));
    MatrixXd H = B.inverse();
    g.grad_gram = MatrixXd::Zero(d + 1, d + 1);
    g.grad_gram.bottomRightCorner(d, d) = H;
    for (int j = 1; j <= d; ++j) {
        double s = -H.col(j - 1).sum();
        g.grad_gram(0, j) = s;
        g.grad_gram(j, 0) = s;
    }
    g.grad_gram(0, 0) = H.sum();
    return g;
}

inline double simplex_volume(const SimplicialComplexData& cx, int k, int id) {
    if (k == 0) return 1.0;
    MatrixXd B(k, k);
    auto edge_len = [&](int a, int b) {
        int e = cx.subface_id(k, id, {std::min(a, b), std::max(a, b)});
        return cx.edge_lengths[e];
    };
    for (int i = 1; i <= k; ++i)
        for (int j = 1; j <= k; ++j) {
            double l0i = edge_len(0, i);
            double l0j = edge_len(0, j);
            double lij = (i == j) ? 0.0 : edge_len(i, j);
            B(i - 1, j - 1) = 0.5 * (l0i * l0i + l0j * l0j - lij * lij);
        }
    double det = B.determinant();
    double factorial = 1;
    for (int i = 2; i <= k; ++i) factorial *= i;
    return det > 0 ? std::sqrt(det) / factorial : 0.0;
}

inline long binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// determinant of grad_gram restricted to rows I, cols J (|I| = |J| <= 4)
inline double gram_minor(const MatrixXd& G, const std::vector<int>& I,
                         const std::vector<int>& J) {
    const int k = static_cast<int>(I.size());
    if (k == 0) return 1.0;
    MatrixXd m(k, k);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) m(r, c) = G(I[r], J[c]);
    return m.determinant();
}

}  // namespace detail

// Galerkin mass matrices from lowest-order Whitney forms, one SPD block per
// degree, assembled element by element from edge lengths.
inline MetricStructure assemble_mass(const SimplicialComplexData& cx) {
    const int d = cx.dim;
    MetricStructure m;
    m.complex = &cx;
    m.basis = cx.basis_info();
    m.mass.resize(d + 1);
    m.volume.resize(d + 1);
    m.site_measure.resize(d + 1);
    m.vertex_weight.assign(cx.vertex_count(), 0.0);

    for (int k = 0; k <= d; ++k) {
        m.volume[k].resize(cx.simplex_count(k));
        m.site_measure[k].assign(cx.simplex_count(k), 0.0);
        for (int i = 0; i < cx.simplex_count(k); ++i)
            m.volume[k][i] = detail::simplex_volume(cx, k, i);
    }

    // local k-faces by ascending position subsets
    std::vector<std::vector<std::vector<int>>> local_faces(d + 1);
    for (std::uint32_t mask = 1; mask < (1u << (d + 1)); ++mask) {
        std::vector<int> pos;
        for (int i = 0; i <= d; ++i)
            if (mask & (1u << i)) pos.push_back(i);
        local_faces[pos.size() - 1].push_back(pos);
    }

    std::vector<std::vector<Eigen::Triplet<double>>> trips(d + 1);
    double fact[6] = {1, 1, 2, 6, 24, 120};
    for (int t = 0; t < cx.simplex_count(d); ++t) {
        auto geo = detail::element_geometry(cx, t);
        const double i2_scale = geo.volume / double((d + 1) * (d + 2));
        for (int v = 0; v <= d; ++v)
            m.vertex_weight[cx.tuples[d][t][v]] += geo.volume / double(d + 1);
        for (int k = 0; k <= d; ++k) {
            const auto& faces = local_faces[k];
            const double kfac2 = fact[k] * fact[k];
            std::vector<int> gid(faces.size());
            for (size_t fi = 0; fi < faces.size(); ++fi) {
                gid[fi] = cx.subface_id(d, t, faces[fi]);
                m.site_measure[k][gid[fi]] +=
                    geo.volume / double(detail::binom(d + 1, k + 1));
            }
            for (size_t fi = 0; fi < faces.size(); ++fi)
                for (size_t fj = 0; fj < faces.size(); ++fj) {
                    const auto& sig = faces[fi];
                    const auto& rho = faces[fj];
                    double acc = 0.0;
                    for (int a = 0; a <= k; ++a)
                        for (int b = 0; b <= k; ++b) {
                            std::vector<int> I, J;
                            for (int c = 0; c <= k; ++c) {
                                if (c != a) I.push_back(sig[c]);
                                if (c != b) J.push_back(rho[c]);
                            }
                            double i2 = i2_scale * (sig[a] == rho[b] ? 2.0 : 1.0);
                            double sgn = ((a + b) % 2 == 0) ? 1.0 : -1.0;
                            acc += sgn * i2 * detail::gram_minor(geo.grad_gram, I, J);
                        }
                    trips[k].emplace_back(gid[fi], gid[fj], kfac2 * acc);
                }
        }
    }
    for (int k = 0; k <= d; ++k) {
        m.mass[k].resize(cx.simplex_count(k), cx.simplex_count(k));
        m.mass[k].setFromTriplets(trips[k].begin(), trips[k].end());
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(m.mass[k]);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("mass matrix not SPD in degree " + std::to_string(k));
    }
    return m;
}

// Stacked coboundary as a graded operator (degree shift +1). Entries are
// exactly +-1, so d*d vanishes identically.
inline GradedOperator assemble_d(const SimplicialComplexData& cx) {
    GradedOperator d;
    d.basis = cx.basis_info();
    d.shift = DegreeShift::up;
    d.mat = MatrixXd::Zero(d.basis.total(), d.basis.total());
    for (int k = 0; k < cx.dim; ++k)
        d.block(k + 1, k) = MatrixXd(simplicial::coboundary_matrix(cx, k));
    return d;
}

// Metric adjoint blocks: dstar on (k+1)-cochains is mass[k]^{-1} d_k^T mass[k+1].
inline GradedOperator assemble_codifferential(const GradedOperator& d, const MetricStructure& m) {
    GradedOperator ds;
    ds.basis = d.basis;
    ds.shift = DegreeShift::down;
    ds.mat = MatrixXd::Zero(d.basis.total(), d.basis.total());
    const int degrees = d.degrees();
    for (int k = 0; k + 1 <= degrees; ++k) {
        MatrixXd rhs = d.block(k + 1, k).transpose() * m.mass_dense(k + 1);
        Eigen::LLT<MatrixXd> llt(m.mass_dense(k));
        if (llt.info() != Eigen::Success) throw std::runtime_error("singular mass block");
        ds.block(k, k + 1) = llt.solve(rhs);
    }
    return ds;
}

inline GradedOperator assemble_hodge_dirac(const GradedOperator& d, const GradedOperator& dstar) {
    GradedOperator D;
    D.basis = d.basis;
    D.shift = DegreeShift::mixed;
    D.mat = d.mat + dstar.mat;
    return D;
}

// ---------------------------------------------------------------------------
// Cochain L^p norm: fiber l^2 across degrees collocated at vertices, then a
// weighted p-sum over vertices. Each k-simplex spreads its pointwise
// magnitude |c|/vol over its k+1 vertices.

inline VectorXd vertex_fiber_norms(const Cochain& omega, const MetricStructure& m) {
    const SimplicialComplexData& cx = *omega.complex;
    VectorXd acc = VectorXd::Zero(cx.vertex_count());
    for (int k = 0; k <= cx.dim; ++k)
        for (int i = 0; i < cx.simplex_count(k); ++i) {
            double point = std::abs(omega.values[m.basis.offset[k] + i]) /
                           (k == 0 ? 1.0 : m.volume[k][i]);
            double share = point * point / double(k + 1);
            for (int v : cx.tuples[k][i]) acc[v] += share;
        }
    return acc.cwiseSqrt();
}

inline double lp_norm(const Cochain& omega, double p, const MetricStructure& m) {
    if (p < 1.0) throw std::invalid_argument("lp_norm: p must be >= 1");
    VectorXd fiber = vertex_fiber_norms(omega, m);
    if (std::isinf(p)) return fiber.size() ? fiber.maxCoeff() : 0.0;
    double acc = 0.0;
    for (int v = 0; v < fiber.size(); ++v)
        acc += m.vertex_weight[v] * std::pow(fiber[v], p);
    return std::pow(acc, 1.0 / p);
}

inline double lp_norm(const SimplicialComplexData& cx, const VectorXd& values, double p,
                      const MetricStructure& m) {
    return lp_norm(Cochain(cx, values.cast<std::complex<double>>()), p, m);
}

// ---------------------------------------------------------------------------
// Multiplication operator: each k-simplex coefficient is scaled by the
// average of f over the simplex's vertices (degree shift 0, diagonal).

inline GradedOperator multiplication_operator(const VectorXd& f_vertices,
                                              const SimplicialComplexData& cx) {
    GradedOperator op;
    op.basis = cx.basis_info();
    op.shift = DegreeShift::zero;
    op.mat = MatrixXd::Zero(op.basis.total(), op.basis.total());
    for (int k = 0; k <= cx.dim; ++k)
        for (int i = 0; i < cx.simplex_count(k); ++i) {
            double avg = 0;
            for (int v : cx.tuples[k][i]) avg += f_vertices[v];
            avg /= double(k + 1);
            op.mat(op.basis.offset[k] + i, op.basis.offset[k] + i) = avg;
        }
    return op;
}

// omega_k -> (-1)^k omega_k on stacked cochains.
inline GradedOperator parity_involution(const SimplicialComplexData& cx) {
    GradedOperator g;
    g.basis = cx.basis_info();
    g.shift = DegreeShift::zero;
    g.mat = MatrixXd::Zero(g.basis.total(), g.basis.total());
    for (int k = 0; k <= cx.dim; ++k) {
        double s = (k % 2 == 0) ? 1.0 : -1.0;
        for (int i = 0; i < cx.simplex_count(k); ++i)
            g.mat(g.basis.offset[k] + i, g.basis.offset[k] + i) = s;
    }
    return g;
}

inline GradedOperator commutator(const GradedOperator& a, const GradedOperator& b) {
    GradedOperator c;
    c.basis = a.basis;
    c.shift = DegreeShift::mixed;
    c.mat = a.mat * b.mat - b.mat * a.mat;
    return c;
}

// ---------------------------------------------------------------------------
// Operator norms

// Exact mass-norm (p = 2): largest singular value of L^T T L^{-T} where
// M = L L^T.
inline double opnorm2_mass(const MatrixXd& T, const MetricStructure& m) {
    Eigen::LLT<MatrixXd> llt(m.stacked_mass_dense());
    MatrixXd L = llt.matrixL();
    MatrixXd B = L.transpose() * T;
    B = L.transpose().triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(B);
    Eigen::BDCSVD<MatrixXd> svd(B);
    return svd.singularValues()(0);
}

inline double opnorm2_mass(const MatrixXcd& T, const MetricStructure& m) {
    Eigen::LLT<MatrixXd> llt(m.stacked_mass_dense());
    MatrixXd L = llt.matrixL();
    MatrixXcd Lt = L.transpose().cast<std::complex<double>>();
    MatrixXcd B = Lt * T;
    B = Lt.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(B);
    Eigen::BDCSVD<MatrixXcd> svd(B);
    return svd.singularValues()(0);
}

struct OpNormBounds {
    double lower = 0.0;
    double upper = 0.0;
    bool converged = true;
};

// Exact 2-norm in the simplex-sites structure (diagonal weights). This is
// the structure in which pointwise multiplication operators are exactly
// norm-bounded by sup |f|; the mass 2-norm does not have that property.
double opnorm2_sites(const MatrixXd& T, const MetricStructure& m);

namespace detail {

// diag(mu^{1/p} / scale) for the site structure, stacked over degrees
inline VectorXd site_weights(const MetricStructure& m, double p) {
    VectorXd w(m.basis.total());
    for (size_t k = 0; k < m.mass.size(); ++k)
        for (int i = 0; i < int(m.site_measure[k].size()); ++i) {
            double mu = m.site_mu(int(k), i);
            double s = m.site_scale(int(k), i);
            double e = std::isinf(p) ? 0.0 : 1.0 / p;
            w[m.basis.offset[k] + i] = std::pow(mu, e) / s;
        }
    return w;
}

template <typename Mat>
Mat conjugate_by_weights(const Mat& T, const VectorXd& w) {
    return w.asDiagonal() * T * w.cwiseInverse().asDiagonal();
}

template <typename Mat>
double column_sum_norm(const Mat& A) {  // exact p = 1
    double best = 0;
    for (int c = 0; c < A.cols(); ++c) best = std::max(best, A.col(c).cwiseAbs().sum());
    return best;
}

template <typename Mat>
double row_sum_norm(const Mat& A) {  // exact p = inf
    double best = 0;
    for (int r = 0; r < A.rows(); ++r) best = std::max(best, A.row(r).cwiseAbs().sum());
    return best;
}

inline double lp_vec_norm(const VectorXd& x, double p) {
    double acc = 0;
    for (int i = 0; i < x.size(); ++i) acc += std::pow(std::abs(x[i]), p);
    return std::pow(acc, 1.0 / p);
}

// Boyd/Higham power method for the plain l^p -> l^p norm; each iterate's
// quotient is a certified lower bound.
inline std::pair<double, bool> boyd_lower(const MatrixXd& A, double p, std::uint64_t seed,
                                          int restarts = 20, double tol = 1e-8,
                                          int max_iter = 500) {
    const double q = p / (p - 1.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    double best = 0.0;
    bool converged = false;
    auto dual_p = [&](const VectorXd& y, double pp) {
        VectorXd z(y.size());
        for (int i = 0; i < y.size(); ++i)
            z[i] = std::copysign(std::pow(std::abs(y[i]), pp - 1.0), y[i]);
        double n = lp_vec_norm(z, pp / (pp - 1.0));
        return n > 0 ? VectorXd(z / n) : z;
    };
    for (int r = 0; r < restarts; ++r) {
        VectorXd x(A.cols());
        if (r == 0)
            x.setOnes();
        else
            for (int i = 0; i < x.size(); ++i) x[i] = g(rng);
        x /= lp_vec_norm(x, p);
        double prev = 0.0;
        for (int it = 0; it < max_iter; ++it) {
            VectorXd y = A * x;
            double gamma = lp_vec_norm(y, p);
            best = std::max(best, gamma);
            VectorXd z = A.transpose() * dual_p(y, p);
            double zq = lp_vec_norm(z, q);
            if (zq <= z.dot(x) * (1.0 + tol)) {
                converged = true;
                break;
            }
            x = dual_p(z, q);
            if (std::abs(gamma - prev) <= tol * gamma) {
                converged = true;
                break;
            }
            prev = gamma;
        }
    }
    return {best, converged};
}

}  // namespace detail

inline double opnorm2_sites(const MatrixXd& T, const MetricStructure& m) {
    MatrixXd A = detail::conjugate_by_weights(T, detail::site_weights(m, 2.0));
    Eigen::BDCSVD<MatrixXd> svd(A);
    return svd.singularValues()(0);
}

// Operator p -> p norm bounds in the structures described at the top of the
// header. p = 2 is the exact mass norm; p in {1, inf} are exact weighted
// column/row sums; otherwise a Boyd lower bound and a Riesz-Thorin upper
// bound (interpolating the site structure's own 1, 2, inf norms).
inline OpNormBounds opnorm_p(const MatrixXd& T, double p, const MetricStructure& m,
                             std::uint64_t seed = 12345) {
    if (!(p == 1.0 || p > 1.0)) throw std::invalid_argument("opnorm_p: p out of range");
    OpNormBounds out;
    if (p == 2.0) {
        double v = opnorm2_mass(T, m);
        out.lower = out.upper = v;
        return out;
    }
    if (p == 1.0) {
        double v = detail::column_sum_norm(
            detail::conjugate_by_weights(T, detail::site_weights(m, 1.0)));
        out.lower = out.upper = v;
        return out;
    }
    if (std::isinf(p)) {
        double v = detail::row_sum_norm(
            detail::conjugate_by_weights(T, detail::site_weights(m,
                                                                 std::numeric_limits<double>::infinity())));
        out.lower = out.upper = v;
        return out;
    }
    MatrixXd Ap = detail::conjugate_by_weights(T, detail::site_weights(m, p));
    auto [lower, conv] = detail::boyd_lower(Ap, p, seed);
    double n1 = detail::column_sum_norm(detail::conjugate_by_weights(T, detail::site_weights(m, 1.0)));
    double ninf = detail::row_sum_norm(detail::conjugate_by_weights(
        T, detail::site_weights(m, std::numeric_limits<double>::infinity())));
    MatrixXd A2 = detail::conjugate_by_weights(T, detail::site_weights(m, 2.0));
    Eigen::BDCSVD<MatrixXd> svd(A2);
    double n2 = svd.singularValues()(0);
    double upper;
    if (p < 2.0) {
        double theta = 2.0 - 2.0 / p;  // 1/p = (1-theta)/1 + theta/2
        upper = std::pow(n1, 1.0 - theta) * std::pow(n2, theta);
    } else {
        double theta = 1.0 - 2.0 / p;  // 1/p = (1-theta)/2 + theta/inf
        upper = std::pow(n2, 1.0 - theta) * std::pow(ninf, theta);
    }
    out.lower = lower;
    out.upper = upper;
    out.converged = conv;
    return out;
}

// Complex-matrix variant (resolvents, functional calculus sweeps). The Boyd
// stage runs on |T| entrywise, which bounds the true norm from below by a
// vector with aligned phases; exact formulas are unchanged.
inline OpNormBounds opnorm_p(const MatrixXcd& T, double p, const MetricStructure& m,
                             std::uint64_t seed = 12345) {
    if (p == 2.0) {
        OpNormBounds out;
        out.lower = out.upper = opnorm2_mass(T, m);
        return out;
    }
    if (p == 1.0 || std::isinf(p)) {
        MatrixXcd A = detail::conjugate_by_weights(T, detail::site_weights(m, p));
        OpNormBounds out;
        double v = p == 1.0 ? detail::column_sum_norm(A) : detail::row_sum_norm(A);
        out.lower = out.upper = v;
        return out;
    }
    // entrywise |T| majorizes the norm; real and imaginary parts evaluated on
    // real vectors minorize it
    MatrixXd absT = T.cwiseAbs();
    OpNormBounds mag = opnorm_p(absT, p, m, seed);
    OpNormBounds reb = opnorm_p(MatrixXd(T.real()), p, m, seed);
    OpNormBounds imb = opnorm_p(MatrixXd(T.imag()), p, m, seed);
    OpNormBounds out;
    out.lower = std::max(reb.lower, imb.lower);
    out.upper = mag.upper;
    out.converged = mag.converged;
    return out;
}

// Mass-norm largest singular value by power iteration on T*T, matrix-free.
// apply/apply_adjoint act on stacked cochains; the adjoint is with respect
// to the mass inner product.
template <typename Apply, typename ApplyAdj>
double opnorm2_mass_power(const Apply& apply, const ApplyAdj& apply_adj, int n,
                          const Eigen::SparseMatrix<double>& mass, std::uint64_t seed = 99,
                          int restarts = 3, int max_iter = 400, double tol = 1e-10) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    double best = 0.0;
    for (int r = 0; r < restarts; ++r) {
        VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = g(rng);
        double prev = 0.0;
        for (int it = 0; it < max_iter; ++it) {
            double vnorm = std::sqrt(v.dot(mass * v));
            v /= vnorm;
            VectorXd tv = apply(v);
            double sigma2 = tv.dot(mass * tv);
            if (std::abs(sigma2 - prev) < tol * std::max(1.0, sigma2)) {
                best = std::max(best, std::sqrt(sigma2));
                break;
            }
            prev = sigma2;
            best = std::max(best, std::sqrt(sigma2));
            v = apply_adj(tv);
        }
    }
    return best;
}

// ||[D, M_f]|| in the mass 2-norm without forming dense operators; suitable
// for the refinement study on larger tori.
inline double commutator_opnorm2_sparse(const SimplicialComplexData& cx,
                                        const MetricStructure& m, const VectorXd& f) {
    const CochainBasisInfo basis = cx.basis_info();
    const int n = basis.total();
    Eigen::SparseMatrix<double> M = m.stacked_mass();
    std::vector<Eigen::SparseMatrix<double>> d(cx.dim);
    for (int k = 0; k < cx.dim; ++k) d[k] = simplicial::coboundary_matrix(cx, k);
    std::vector<std::shared_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>> llt(cx.dim + 1);
    for (int k = 0; k <= cx.dim; ++k) {
        llt[k] = std::make_shared<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>();
        llt[k]->compute(m.mass[k]);
    }
    VectorXd mf(n);
    for (int k = 0; k <= cx.dim; ++k)
        for (int i = 0; i < cx.simplex_count(k); ++i) {
            double avg = 0;
            for (int v : cx.tuples[k][i]) avg += f[v];
            mf[basis.offset[k] + i] = avg / double(k + 1);
        }
    auto seg = [&](VectorXd& x, int k) { return x.segment(basis.offset[k], basis.count(k)); };
    auto apply_D = [&](const VectorXd& x) {
        VectorXd y = VectorXd::Zero(n), xx = x;
        for (int k = 0; k < cx.dim; ++k) {
            y.segment(basis.offset[k + 1], basis.count(k + 1)) += d[k] * seg(xx, k);
            VectorXd rhs = d[k].transpose() * (m.mass[k + 1] * seg(xx, k + 1));
            y.segment(basis.offset[k], basis.count(k)) += llt[k]->solve(rhs);
        }
        return y;
    };
    auto apply_T = [&](const VectorXd& x) {
        VectorXd a = apply_D(mf.cwiseProduct(x));
        VectorXd b = mf.cwiseProduct(apply_D(x));
        return VectorXd(a - b);
    };
    // D is mass-selfadjoint, so [D, M_f]^* = M^{-1} [D, M_f]^T M with
    // [D,M_f]^T applied through the transposed blocks.
    auto apply_DT = [&](const VectorXd& x) {
        VectorXd y = VectorXd::Zero(n), xx = x;
        for (int k = 0; k < cx.dim; ++k) {
            y.segment(basis.offset[k], basis.count(k)) +=
                d[k].transpose() * seg(xx, k + 1);
            VectorXd sol = llt[k]->solve(seg(xx, k));
            y.segment(basis.offset[k + 1], basis.count(k + 1)) +=
                m.mass[k + 1] * (d[k] * sol);
        }
        return y;
    };
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> lltM(M);
    auto apply_T_adj = [&](const VectorXd& y) {
        VectorXd my = M * y;
        VectorXd t = mf.cwiseProduct(apply_DT(my)) - apply_DT(mf.cwiseProduct(my));
        return VectorXd(lltM.solve(t));
    };
    return opnorm2_mass_power(apply_T, apply_T_adj, n, M);
}

}  // namespace hodgelab::calculus
