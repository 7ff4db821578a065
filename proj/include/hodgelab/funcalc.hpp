#pragma once

// Resolvents and the holomorphic functional calculus of the discrete
// Hodge-Dirac operator by Cauchy integrals over (bi)sector boundaries,
// with bisectoriality sweeps and H-infinity ratio probes across p.

#include <Eigen/Dense>
#include <complex>
#include <functional>

#include "calculus.hpp"
#include "spectral.hpp"

namespace hodgelab::funcalc {

using calculus::GradedOperator;
using calculus::MetricStructure;
using calculus::OpNormBounds;
using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using spectral::SpectralData;

struct ContourSpec {
    enum class Kind { sector, bisector };
    Kind kind = Kind::bisector;
    double nu = 0.3;        // half angle
    double r_min = 0.0;     // truncation radii
    double r_max = 0.0;
    int nodes_per_ray = 64; // composite 8-point Gauss-Legendre in log radius

    void validate(double lambda_min_nonzero, double lambda_max) const {
        if (!(nu > 0.0 && nu < M_PI / 2.0))
            throw std::invalid_argument("contour: half-angle out of (0, pi/2)");
        if (!(r_min > 0.0) || !(r_min < lambda_min_nonzero / 10.0))
            throw std::invalid_argument("contour: r_min must sit below the spectrum");
        if (!(r_max > 10.0 * lambda_max))
            throw std::invalid_argument("contour: r_max must sit above the spectrum");
        if (nodes_per_ray < 8) throw std::invalid_argument("contour: too few nodes");
    }
};

struct HolomorphicSymbol {
    std::function<cplx(cplx)> eval;
    double decay_C = 1.0;  // |f(z)| <= C min(|z|^s, |z|^{-s}) on the contour
    double decay_s = 1.0;
};

// Built-in H^infty_0 family used by the CLI and tests.
inline HolomorphicSymbol symbol_by_name(const std::string& name) {
    if (name == "rational1")
        return {[](cplx z) { return z / (1.0 + z * z); }, 4.0, 1.0};
    if (name == "rational2")
        return {[](cplx z) { return (z * z) / ((1.0 + z * z) * (1.0 + z * z)); }, 16.0, 2.0};
    if (name == "impedance")
        return {[](cplx z) { return z / ((1.0 + z * z) * (2.0 + z)) * 2.0; }, 8.0, 1.0};
    throw std::invalid_argument("unknown symbol: " + name);
}

namespace detail {

// 8-point Gauss-Legendre on [-1, 1]
inline const std::array<double, 8>& gl8_nodes() {
    static const std::array<double, 8> x = {
        -0.9602898564975362, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
        0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975362};
    return x;
}
inline const std::array<double, 8>& gl8_weights() {
    static const std::array<double, 8> w = {
        0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
        0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
    return w;
}

struct RadialRule {
    std::vector<double> r, weight;  // weight includes the dr of the substitution
};

// composite Gauss-Legendre in log radius over [r_min, r_max]
inline RadialRule log_radial_rule(double r_min, double r_max, int nodes_per_ray) {
    int panels = (nodes_per_ray + 7) / 8;
    double a = std::log(r_min), b = std::log(r_max);
    double w_panel = (b - a) / panels;
    RadialRule rule;
    for (int p = 0; p < panels; ++p) {
        double lo = a + p * w_panel;
        for (int q = 0; q < 8; ++q) {
            double u = lo + 0.5 * w_panel * (gl8_nodes()[q] + 1.0);
            double r = std::exp(u);
            rule.r.push_back(r);
            rule.weight.push_back(0.5 * w_panel * gl8_weights()[q] * r);  // dr = r du
        }
    }
    return rule;
}

// Deterministic pairwise summation over the node index.
inline MatrixXcd pairwise_sum(std::vector<MatrixXcd>& terms) {
    if (terms.empty()) return MatrixXcd();
    size_t n = terms.size();
    for (size_t stride = 1; stride < n; stride *= 2)
        for (size_t i = 0; i + stride < n; i += 2 * stride) terms[i] += terms[i + stride];
    return terms[0];
}

}  // namespace detail

// (z - A)^{-1} with a residual guard; on failure reports the nearest
// eigenvalue of A.
inline MatrixXcd resolvent(const MatrixXd& A, cplx z) {
    const int n = static_cast<int>(A.rows());
    MatrixXcd zA = -A.cast<cplx>();
    zA.diagonal().array() += z;
    Eigen::PartialPivLU<MatrixXcd> lu(zA);
    MatrixXcd R = lu.solve(MatrixXcd::Identity(n, n));
    double resid = (zA * R - MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
    if (!(resid <= 1e-9)) {
        Eigen::EigenSolver<MatrixXd> es(A);
        double nearest = std::numeric_limits<double>::infinity();
        double best = 0.0;
        for (int i = 0; i < n; ++i) {
            cplx l = es.eigenvalues()(i);
            if (std::abs(l - z) < nearest) {
                nearest = std::abs(l - z);
                best = l.real();
            }
        }
        throw std::runtime_error("resolvent pole near eigenvalue " + std::to_string(best));
    }
    return R;
}

inline MatrixXcd resolvent(const GradedOperator& A, cplx z) { return resolvent(A.mat, z); }

// ---------------------------------------------------------------------------
// Cauchy integral calculus
//
// The boundary of the bisector, oriented with both sector interiors on the
// left, consists of four rays sharing one radial quadrature rule:
//   upper-right   incoming:  -e^{+i nu} f(r e^{+i nu}) R(r e^{+i nu})
//   lower-right   outgoing:  +e^{-i nu} f(r e^{-i nu}) R(r e^{-i nu})
//   lower-left    incoming:  +e^{+i nu} f(-r e^{+i nu}) R(-r e^{+i nu})
//   upper-left    outgoing:  -e^{-i nu} f(-r e^{-i nu}) R(-r e^{-i nu})
// The sector contour keeps the first two rays only. Sharing radial nodes
// across rays makes the summed integrand decay one order faster, which the
// sign regularization below relies on.

inline void validate_symbol(const HolomorphicSymbol& f, const ContourSpec& spec) {
    detail::RadialRule probe = detail::log_radial_rule(spec.r_min, spec.r_max, 200);
    auto check = [&](cplx z) {
        double bound =
            f.decay_C * std::min(std::pow(std::abs(z), f.decay_s),
                                 std::pow(std::abs(z), -f.decay_s));
        if (std::abs(f.eval(z)) > bound + 1e-12)
            throw std::invalid_argument("invalid decay certificate");
    };
    cplx up = std::polar(1.0, spec.nu), down = std::polar(1.0, -spec.nu);
    for (double r : probe.r) {
        check(r * up);
        check(r * down);
        if (spec.kind == ContourSpec::Kind::bisector) {
            check(-r * up);
            check(-r * down);
        }
    }
}

// Core quadrature shared by the H^infty_0 calculus and the sign
// regularization (which bypasses the decay certificate).
inline MatrixXcd contour_integral(const MatrixXd& A, const std::function<cplx(cplx)>& f,
                                  const ContourSpec& spec) {
    detail::RadialRule rule = detail::log_radial_rule(spec.r_min, spec.r_max, spec.nodes_per_ray);
    cplx up = std::polar(1.0, spec.nu), down = std::polar(1.0, -spec.nu);
    std::vector<MatrixXcd> terms;
    terms.reserve(rule.r.size());
    for (size_t i = 0; i < rule.r.size(); ++i) {
        double r = rule.r[i];
        MatrixXcd acc = -up * f(r * up) * resolvent(A, r * up);
        acc += down * f(r * down) * resolvent(A, r * down);
        if (spec.kind == ContourSpec::Kind::bisector) {
            acc += up * f(-r * up) * resolvent(A, -r * up);
            acc -= down * f(-r * down) * resolvent(A, -r * down);
        }
        terms.push_back(rule.weight[i] * acc);
    }
    MatrixXcd total = detail::pairwise_sum(terms);
    return total / (2.0 * M_PI * cplx(0.0, 1.0));
}

inline MatrixXcd cauchy_fcalc(const MatrixXd& A, const HolomorphicSymbol& f,
                              const ContourSpec& spec, double lambda_min_nonzero,
                              double lambda_max) {
    spec.validate(lambda_min_nonzero, lambda_max);
    validate_symbol(f, spec);
    return contour_integral(A, f.eval, spec);
}

// Eigendecomposition oracle: f applied on the spectrum.
inline MatrixXcd fcalc_oracle(const SpectralData& sd, const std::function<cplx(cplx)>& f) {
    MatrixXcd out = MatrixXcd::Zero(sd.eigenvectors.rows(), sd.eigenvectors.rows());
    VectorXcd fl(sd.eigenvalues.size());
    for (int i = 0; i < fl.size(); ++i) fl[i] = f(cplx(sd.eigenvalues[i], 0.0));
    out = sd.eigenvectors.cast<cplx>() * fl.asDiagonal() *
          (sd.eigenvectors.transpose() * sd.mass).cast<cplx>();
    return out;
}

// ---------------------------------------------------------------------------
// sgn(D)

// Regularized symbol z (z^2 + eps^2)^{-1/2}; with eps = 0 this is exactly
// the two-sided indicator 1_{Sigma} - 1_{-Sigma} on the bisector rays. Not
// in H^infty_0: the integral converges only through the radius pairing, and
// r_min must sit well below eps to resolve the kernel transition. The
// eps-bias on the spectrum is at most eps^2 / (2 lambda_min^2).
inline MatrixXd sign_operator_contour(const MatrixXd& A, double lambda_min_nonzero,
                                      double lambda_max, double eps = -1.0,
                                      int nodes_per_ray = 160) {
    if (eps < 0.0) eps = 1e-3 * lambda_min_nonzero;
    ContourSpec spec;
    spec.kind = ContourSpec::Kind::bisector;
    spec.nu = 0.3;
    spec.r_min = std::min(1e-5 * lambda_min_nonzero, eps > 0 ? 1e-2 * eps : 1e-5);
    spec.r_max = 1e7 * lambda_max;
    spec.nodes_per_ray = nodes_per_ray;
    auto f = [eps](cplx z) { return z / std::sqrt(z * z + eps * eps); };
    MatrixXcd S = contour_integral(A, f, spec);
    return S.real();
}

inline MatrixXd sign_operator_oracle(const SpectralData& sd, double kernel_tol) {
    return spectral::sign_oracle(sd, kernel_tol);
}

// ---------------------------------------------------------------------------
// Sweeps and probes

struct SweepReport {
    double p = 2.0;
    std::vector<double> grid;          // t or s values
    std::vector<double> lower, upper;  // norm bounds per grid point
    double sup_lower = 0.0, sup_upper = 0.0;
    std::string method;
    bool p2_bound_ok = true;  // at p = 2: sup <= 1 + 1e-10
};

inline std::vector<double> log_grid(double lo, double hi, int count) {
    std::vector<double> g(count);
    for (int i = 0; i < count; ++i)
        g[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / double(count - 1));
    return g;
}

// sup_t || t R(it, D) ||_{p -> p} over a log grid spanning the spectrum.
inline SweepReport bisectoriality_sweep(const GradedOperator& D, const MetricStructure& m,
                                        double p, double lambda_min_nonzero, double lambda_max,
                                        int grid_points = 25) {
    SweepReport rep;
    rep.p = p;
    rep.method = "tR(it,D) sweep";
    rep.grid = log_grid(lambda_min_nonzero / 100.0, 100.0 * lambda_max, grid_points);
    for (double t : rep.grid) {
        MatrixXcd tr = cplx(t, 0.0) * resolvent(D, cplx(0.0, t));
        OpNormBounds b = calculus::opnorm_p(tr, p, m);
        rep.lower.push_back(b.lower);
        rep.upper.push_back(b.upper);
        rep.sup_lower = std::max(rep.sup_lower, b.lower);
        rep.sup_upper = std::max(rep.sup_upper, b.upper);
    }
    if (p == 2.0) rep.p2_bound_ok = rep.sup_upper <= 1.0 + 1e-10;
    return rep;
}

// max_s ||f_s(D)||_p / sup_contour |f_s| for f_s(z) = z s / (z^2 + s^2).
inline SweepReport hinf_ratio_probe(const SpectralData& sd, const MetricStructure& m, double p,
                                    double lambda_min_nonzero, double lambda_max,
                                    double theta = 0.3, int grid_points = 15) {
    SweepReport rep;
    rep.p = p;
    rep.method = "hinf ratio probe";
    rep.grid = log_grid(lambda_min_nonzero / 10.0, 10.0 * lambda_max, grid_points);
    for (double s : rep.grid) {
        auto fs = [s](cplx z) { return z * s / (z * z + s * s); };
        // sup of |f_s| on the bisector boundary, by sampling
        double sup_f = 0.0;
        for (double r : log_grid(s * 1e-3, s * 1e3, 400)) {
            sup_f = std::max(sup_f, std::abs(fs(std::polar(r, theta))));
            sup_f = std::max(sup_f, std::abs(fs(-std::polar(r, -theta))));
        }
        MatrixXcd fsd = fcalc_oracle(sd, fs);
        OpNormBounds b = calculus::opnorm_p(fsd, p, m);
        rep.lower.push_back(b.lower / sup_f);
        rep.upper.push_back(b.upper / sup_f);
        rep.sup_lower = std::max(rep.sup_lower, b.lower / sup_f);
        rep.sup_upper = std::max(rep.sup_upper, b.upper / sup_f);
    }
    if (p == 2.0) rep.p2_bound_ok = rep.sup_upper <= 1.0 + 1e-9;
    return rep;
}

// Spectrum summary used to size contours and grids.
struct SpectrumBounds {
    double lambda_min_nonzero = 0.0;
    double lambda_max = 0.0;
};

inline SpectrumBounds spectrum_bounds(const SpectralData& sd, double kernel_tol) {
    SpectrumBounds b;
    b.lambda_max = sd.eigenvalues.cwiseAbs().maxCoeff();
    b.lambda_min_nonzero = b.lambda_max;
    for (int i = 0; i < sd.eigenvalues.size(); ++i) {
        double a = std::abs(sd.eigenvalues[i]);
        if (a > kernel_tol) b.lambda_min_nonzero = std::min(b.lambda_min_nonzero, a);
    }
    return b;
}

}  // namespace hodgelab::funcalc
