#pragma once

// Dense symmetric eigen-analysis in the mass inner product, harmonic
// projection, the invertible |D| + P operator, heat semigroup and kernel
// diagnostics, approximation numbers and summability fits.

#include <Eigen/Dense>
#include <optional>
#include <queue>

#include "calculus.hpp"

namespace hodgelab::spectral {

using calculus::GradedOperator;
using calculus::MetricStructure;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using simplicial::SimplicialComplexData;

enum class OperatorTag { dirac, laplacian, other };

struct SpectralData {
    OperatorTag tag = OperatorTag::other;
    VectorXd eigenvalues;   // ascending
    MatrixXd eigenvectors;  // mass-orthonormal columns
    MatrixXd mass;          // the inner product the decomposition lives in

    // V f(Lambda) V^T M
    MatrixXd apply(const std::function<double(double)>& f) const {
        VectorXd fl(eigenvalues.size());
        for (int i = 0; i < fl.size(); ++i) fl[i] = f(eigenvalues[i]);
        return eigenvectors * fl.asDiagonal() * eigenvectors.transpose() * mass;
    }
};

// Generalized symmetric eigendecomposition of A in the inner product M.
// A must be M-symmetric; the ordering is ascending with a deterministic
// sign convention on eigenvectors.
inline SpectralData eigensolve_dense(const MatrixXd& A, const MatrixXd& M,
                                     OperatorTag tag = OperatorTag::other,
                                     double symmetry_tol = 1e-9) {
    MatrixXd MA = M * A;
    double scale = std::max(1.0, MA.cwiseAbs().maxCoeff());
    double asym = (MA - MA.transpose()).cwiseAbs().maxCoeff();
    if (asym > symmetry_tol * scale)
        throw std::runtime_error("operator is not mass-symmetric; max asymmetry " +
                                 std::to_string(asym));
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es((MA + MA.transpose()) / 2.0, M);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
    SpectralData sd;
    sd.tag = tag;
    sd.eigenvalues = es.eigenvalues();
    sd.eigenvectors = es.eigenvectors();
    sd.mass = M;
    for (int c = 0; c < sd.eigenvectors.cols(); ++c) {
        double lead = 0.0;
        double vmax = sd.eigenvectors.col(c).cwiseAbs().maxCoeff();
        for (int r = 0; r < sd.eigenvectors.rows(); ++r)
            if (std::abs(sd.eigenvectors(r, c)) > 1e-8 * vmax) {
                lead = sd.eigenvectors(r, c);
                break;
            }
        if (lead < 0) sd.eigenvectors.col(c) *= -1.0;
    }
    return sd;
}

inline SpectralData eigensolve(const GradedOperator& A, const MetricStructure& m,
                               OperatorTag tag = OperatorTag::other) {
    return eigensolve_dense(A.mat, m.stacked_mass_dense(), tag);
}

// Eigendecomposition of one degree block of a degree-preserving operator.
inline SpectralData eigensolve_block(const GradedOperator& A, const MetricStructure& m, int k,
                                     OperatorTag tag = OperatorTag::other) {
    return eigensolve_dense(A.block(k, k), m.mass_dense(k), tag);
}

struct HarmonicProjection {
    MatrixXd P;
    int rank = 0;
    double tol = 0.0;
};

// Default kernel-detection tolerance: scaled to the first nonzero eigenvalue
// with a guarded gap.
inline double default_harmonic_tol(const SpectralData& sd) {
    double lmax = sd.eigenvalues.cwiseAbs().maxCoeff();
    if (lmax == 0.0) return 1e-9;
    double first_nonzero = lmax;
    for (int i = 0; i < sd.eigenvalues.size(); ++i) {
        double a = std::abs(sd.eigenvalues[i]);
        if (a > 1e-8 * lmax) first_nonzero = std::min(first_nonzero, a);
    }
    return std::max(1e-9, 1e-6 * first_nonzero);
}

inline HarmonicProjection harmonic_projection(const SpectralData& sd, double tol) {
    double inside = 0.0;
    double outside = std::numeric_limits<double>::infinity();
    int rank = 0;
    for (int i = 0; i < sd.eigenvalues.size(); ++i) {
        double a = std::abs(sd.eigenvalues[i]);
        if (a <= tol) {
            inside = std::max(inside, a);
            ++rank;
        } else {
            outside = std::min(outside, a);
        }
    }
    if (inside > 0.0 && outside / inside < 10.0)
        throw std::runtime_error("tolerance splits a cluster");
    HarmonicProjection hp;
    hp.tol = tol;
    hp.rank = rank;
    hp.P = sd.apply([&](double l) { return std::abs(l) <= tol ? 1.0 : 0.0; });
    return hp;
}

inline HarmonicProjection harmonic_projection(const SpectralData& sd) {
    return harmonic_projection(sd, default_harmonic_tol(sd));
}

// sgn(D) from the eigendecomposition; vanishes on the kernel.
inline MatrixXd sign_oracle(const SpectralData& sd, double tol) {
    return sd.apply([&](double l) { return std::abs(l) <= tol ? 0.0 : (l > 0 ? 1.0 : -1.0); });
}

struct ScriptD {
    MatrixXd mat;
    double min_eigenvalue = 0.0;
    double condition = 0.0;
};

// |D| + P: an invertible even operator whose inverse undoes |D| off harmonics.
inline ScriptD script_d(const SpectralData& sd, const HarmonicProjection& hp) {
    ScriptD out;
    out.mat = sd.apply([&](double l) {
        return std::abs(l) + (std::abs(l) <= hp.tol ? 1.0 : 0.0);
    });
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int i = 0; i < sd.eigenvalues.size(); ++i) {
        double v = std::abs(sd.eigenvalues[i]) + (std::abs(sd.eigenvalues[i]) <= hp.tol ? 1.0 : 0.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    out.min_eigenvalue = lo;
    out.condition = hi / lo;
    return out;
}

inline MatrixXd heat_semigroup(const SpectralData& sd, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("heat_semigroup: t must be positive");
    if (sd.tag == OperatorTag::dirac)
        return sd.apply([&](double l) { return std::exp(-t * l * l); });
    return sd.apply([&](double l) { return std::exp(-t * l); });
}

// ---------------------------------------------------------------------------
// Kernels

// Integral-kernel view of a degree-preserving operator block: sites are the
// k-simplices with the top-volume share as measure, and K = H diag(1/mu).
struct HeatKernelSlice {
    double t = 0.0;
    std::vector<MatrixXd> kernel;  // one block per degree

    double max_entry(int k) const { return kernel[k].cwiseAbs().maxCoeff(); }
    double min_scalar() const { return kernel[0].minCoeff(); }
    // Galerkin heat kernels can dip mildly negative at small times; the
    // clamped view reports the positive part and records the violation.
    MatrixXd scalar_kernel_clamped() const { return kernel[0].cwiseMax(0.0); }
};

inline MatrixXd kernel_of_block(const MatrixXd& H_block, const MetricStructure& m, int k) {
    VectorXd inv_mu(m.site_measure[k].size());
    for (int i = 0; i < inv_mu.size(); ++i) inv_mu[i] = 1.0 / m.site_measure[k][i];
    return H_block * inv_mu.asDiagonal();
}

inline HeatKernelSlice kernel_extract(const MatrixXd& H, const MetricStructure& m, double t) {
    HeatKernelSlice slice;
    slice.t = t;
    const int degrees = static_cast<int>(m.mass.size());
    slice.kernel.resize(degrees);
    for (int k = 0; k < degrees; ++k) {
        MatrixXd block = H.block(m.basis.offset[k], m.basis.offset[k], m.basis.count(k),
                                 m.basis.count(k));
        slice.kernel[k] = kernel_of_block(block, m, k);
    }
    return slice;
}

// L^1(mu) -> L^infty operator norm of an integral kernel: exactly the
// largest kernel entry in modulus (finite-dimensional Dunford-Pettis).
inline double l1_to_linf_norm(const MatrixXd& kernel) {
    return kernel.cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Domination diagnostics on flat tori

struct DominationReport {
    std::vector<double> t_grid;
    std::vector<std::vector<double>> fitted_a;  // [degree][t index]
    double max_a = 0.0;
};

// Smallest a(t) with |K_t^k| <= e^{a t} p_t per simplex pair, where p_t is
// the scalar kernel compared through the max over vertex pairs.
inline DominationReport domination_check(const SimplicialComplexData& cx,
                                         const MetricStructure& m,
                                         const std::vector<SpectralData>& laplace_blocks,
                                         const std::vector<double>& t_grid) {
    DominationReport rep;
    rep.t_grid = t_grid;
    rep.fitted_a.assign(cx.dim + 1, {});
    for (double t : t_grid) {
        MatrixXd H0 = heat_semigroup(laplace_blocks[0], t);
        MatrixXd p = kernel_of_block(H0, m, 0);
        for (int k = 0; k <= cx.dim; ++k) {
            MatrixXd Hk = heat_semigroup(laplace_blocks[k], t);
            MatrixXd Kk = kernel_of_block(Hk, m, k);
            double a_needed = 0.0;
            for (int i = 0; i < Kk.rows(); ++i)
                for (int j = 0; j < Kk.cols(); ++j) {
                    double pmax = 0.0;
                    for (int x : cx.tuples[k][i])
                        for (int y : cx.tuples[k][j]) pmax = std::max(pmax, p(x, y));
                    double lhs = std::abs(Kk(i, j));
                    if (lhs > pmax && pmax > 0.0)
                        a_needed = std::max(a_needed, std::log(lhs / pmax) / t);
                }
            rep.fitted_a[k].push_back(a_needed);
            rep.max_a = std::max(rep.max_a, a_needed);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Gaussian kernel fit

struct GaussianFit {
    double C = 0.0;
    double c = 0.0;
    double r2 = 0.0;
    int pairs = 0;
};

// Pairwise vertex distances: exact periodic lattice metric on flat tori,
// Dijkstra over weighted edges otherwise.
inline MatrixXd vertex_distances(const SimplicialComplexData& cx) {
    const int nv = cx.vertex_count();
    MatrixXd dist(nv, nv);
    if (!cx.periodic_box.empty()) {
        for (int a = 0; a < nv; ++a)
            for (int b = 0; b < nv; ++b) {
                double s = 0.0;
                for (int c = 0; c < cx.vertex_coords[a].size(); ++c) {
                    double L = cx.periodic_box[c];
                    double d = std::abs(cx.vertex_coords[a][c] - cx.vertex_coords[b][c]);
                    d = std::min(d, L - d);
                    s += d * d;
                }
                dist(a, b) = std::sqrt(s);
            }
        return dist;
    }
    std::vector<std::vector<std::pair<int, double>>> adj(nv);
    for (int e = 0; e < cx.simplex_count(1); ++e) {
        int a = cx.tuples[1][e][0], b = cx.tuples[1][e][1];
        adj[a].push_back({b, cx.edge_lengths[e]});
        adj[b].push_back({a, cx.edge_lengths[e]});
    }
    dist.setConstant(std::numeric_limits<double>::infinity());
    for (int s = 0; s < nv; ++s) {
        std::priority_queue<std::pair<double, int>, std::vector<std::pair<double, int>>,
                            std::greater<>> pq;
        dist(s, s) = 0.0;
        pq.push({0.0, s});
        while (!pq.empty()) {
            auto [d0, u] = pq.top();
            pq.pop();
            if (d0 > dist(s, u)) continue;
            for (auto [v, w] : adj[u])
                if (d0 + w < dist(s, v)) {
                    dist(s, v) = d0 + w;
                    pq.push({dist(s, v), v});
                }
        }
    }
    return dist;
}

// Least squares of log|K_t(x,y)| + log V(x, sqrt t) against -dist^2 / t.
inline GaussianFit gaussian_fit(const HeatKernelSlice& slice, const SimplicialComplexData& cx,
                                const MetricStructure& m, int degree = 0,
                                double floor_ratio = 1e-8) {
    if (degree != 0)
        throw std::invalid_argument("gaussian_fit: vertex-site degree 0 only");
    const MatrixXd& K = slice.kernel[0];
    MatrixXd dist = vertex_distances(cx);
    const int nv = cx.vertex_count();
    VectorXd ball(nv);
    double rt = std::sqrt(slice.t);
    for (int x = 0; x < nv; ++x) {
        double v = 0.0;
        for (int y = 0; y < nv; ++y)
            if (dist(x, y) <= rt) v += m.vertex_weight[y];
        ball[x] = std::max(v, m.vertex_weight[x]);
    }
    double kmax = K.cwiseAbs().maxCoeff();
    // keep pairs above both the relative floor and the discretization noise
    // floor signalled by the most negative kernel entry
    double floor_value = std::max(floor_ratio * kmax, 3.0 * std::max(0.0, -K.minCoeff()));
    std::vector<double> xs, ys;
    for (int x = 0; x < nv; ++x)
        for (int y = 0; y < nv; ++y) {
            double val = K(x, y);
            if (!(val > floor_value)) continue;
            xs.push_back(dist(x, y) * dist(x, y) / slice.t);
            ys.push_back(std::log(val) + std::log(ball[x]));
        }
    GaussianFit fit;
    fit.pairs = static_cast<int>(xs.size());
    if (fit.pairs < 10) throw std::runtime_error("gaussian_fit: fewer than 10 usable pairs");
    double n = double(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
        syy += ys[i] * ys[i];
    }
    double denom = n * sxx - sx * sx;
    double slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    double intercept = (sy - slope * sx) / n;
    fit.c = -slope;
    fit.C = std::exp(intercept);
    double ss_res = 0.0, ss_tot = 0.0, ybar = sy / n;
    for (size_t i = 0; i < xs.size(); ++i) {
        double pred = intercept + slope * xs[i];
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - ybar) * (ys[i] - ybar);
    }
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

// ---------------------------------------------------------------------------
// Approximation numbers and summability

// a_n(T) in a Hilbertian norm M = L L^T: singular values of L^T T L^{-T},
// descending; a_1 is the operator norm.
inline VectorXd approximation_numbers(const MatrixXd& T, const MatrixXd& M) {
    Eigen::LLT<MatrixXd> llt(M);
    MatrixXd L = llt.matrixL();
    MatrixXd B = L.transpose() * T;
    B = L.transpose().triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(B);
    Eigen::BDCSVD<MatrixXd> svd(B);
    return svd.singularValues();
}

inline VectorXd approximation_numbers(const MatrixXd& T, const MetricStructure& m) {
    return approximation_numbers(T, m.stacked_mass_dense());
}

struct SlopeReport {
    double slope = 0.0;
    double r2 = 0.0;
    int window_lo = 0;
    int window_hi = 0;
};

// log-log fit of a descending sequence a_n over the window that drops the
// first 10% and the last 50% of indices.
inline SlopeReport loglog_slope(const VectorXd& a) {
    const int n = static_cast<int>(a.size());
    int lo = n / 10, hi = n / 2;
    if (hi - lo < 10) throw std::runtime_error("summability: window too small");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (int i = lo; i < hi; ++i) {
        if (!(a[i] > 0)) continue;
        double x = std::log(double(i + 1)), y = std::log(a[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++cnt;
    }
    if (cnt < 10) throw std::runtime_error("summability: window too small");
    SlopeReport rep;
    rep.window_lo = lo;
    rep.window_hi = hi;
    rep.slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    double ybar = sy / cnt, ss_res = 0, ss_tot = 0;
    double intercept = ybar - rep.slope * sx / cnt;
    for (int i = lo; i < hi; ++i) {
        if (!(a[i] > 0)) continue;
        double x = std::log(double(i + 1)), y = std::log(a[i]);
        double pred = intercept + rep.slope * x;
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - ybar) * (y - ybar);
    }
    rep.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return rep;
}

// Approximation numbers of the Dirac resolvent, a_n((D + i)^{-1}) =
// (1 + lambda_n^2)^{-1/2}, sorted descending, with the log-log decay slope.
inline SlopeReport summability_check(const SpectralData& sd) {
    if (sd.tag != OperatorTag::dirac)
        throw std::invalid_argument("summability_check expects Dirac spectral data");
    VectorXd a(sd.eigenvalues.size());
    for (int i = 0; i < a.size(); ++i)
        a[i] = 1.0 / std::sqrt(1.0 + sd.eigenvalues[i] * sd.eigenvalues[i]);
    std::sort(a.data(), a.data() + a.size(), std::greater<double>());
    return loglog_slope(a);
}

}  // namespace hodgelab::spectral
