#include <doctest.h>

#include <hodgelab/fiber.hpp>

#include <algorithm>
#include <random>
#include <vector>

using namespace hodgelab::fiber;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::mt19937_64 rng(20240811);

MatrixXd random_spd(int d) {
    std::normal_distribution<double> g;
    MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = g(rng);
    return a * a.transpose() + 0.5 * MatrixXd::Identity(d, d);
}

VectorXd random_vec(int d) {
    std::normal_distribution<double> g;
    VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = g(rng);
    return v;
}

ExteriorElement random_element(const FiberSpace& fs) {
    std::normal_distribution<double> g;
    ExteriorElement e(fs);
    for (int i = 0; i < fs.size(); ++i) e.coeffs[i] = cplx(g(rng), g(rng));
    return e;
}

ExteriorElement random_homogeneous(const FiberSpace& fs, int k) {
    return random_element(fs).degree_part(k);
}

// Oracle: wedge of basis elements by explicit permutation sort. Concatenates
// the two index tuples and counts bubble-sort swaps; duplicate index => 0.
struct OracleTerm {
    std::vector<int> indices;
    int sign;  // 0 if degenerate
};
OracleTerm oracle_wedge_tuples(std::vector<int> a, const std::vector<int>& b) {
    a.insert(a.end(), b.begin(), b.end());
    int swaps = 0;
    for (size_t i = 0; i + 1 < a.size(); ++i)
        for (size_t j = 0; j + 1 < a.size() - i; ++j) {
            if (a[j] == a[j + 1]) return {{}, 0};
            if (a[j] > a[j + 1]) {
                std::swap(a[j], a[j + 1]);
                ++swaps;
            }
        }
    return {a, (swaps % 2 == 0) ? 1 : -1};
}

ExteriorElement oracle_wedge(const ExteriorElement& x, const ExteriorElement& y) {
    const FiberSpace& fs = *x.fs;
    ExteriorElement out(fs);
    for (int i = 0; i < fs.size(); ++i)
        for (int j = 0; j < fs.size(); ++j) {
            if (x.coeffs[i] == cplx(0) || y.coeffs[j] == cplx(0)) continue;
            auto t = oracle_wedge_tuples(detail::mask_indices(fs.basis_mask(i)),
                                         detail::mask_indices(fs.basis_mask(j)));
            if (t.sign == 0) continue;
            std::uint32_t m = 0;
            for (int ix : t.indices) m |= 1u << ix;
            out.coeffs[fs.basis_index(m)] += double(t.sign) * x.coeffs[i] * y.coeffs[j];
        }
    return out;
}

double diff_norm(const ExteriorElement& a, const ExteriorElement& b) {
    return (a.coeffs - b.coeffs).norm();
}

}  // namespace

TEST_CASE("wedge basics in d=2") {
    FiberSpace fs = FiberSpace::euclidean(2);
    auto dx = ExteriorElement::basis(fs, 0b01);
    auto dy = ExteriorElement::basis(fs, 0b10);
    auto dxdy = wedge(dx, dy);
    CHECK(dxdy.coeffs[fs.basis_index(0b11)] == cplx(1.0));
    CHECK(wedge(dx, dx).coeffs.norm() == 0.0);
    // (dx+dy) ^ dy = dx^dy, via the permutation-sign oracle
    auto lhs = wedge(dx + dy, dy);
    auto oracle = oracle_wedge(dx + dy, dy);
    CHECK(diff_norm(lhs, oracle) == 0.0);
    CHECK(lhs.coeffs[fs.basis_index(0b11)] == cplx(1.0));
}

TEST_CASE("wedge agrees with permutation oracle and is graded-commutative") {
    for (int d = 2; d <= 5; ++d) {
        FiberSpace fs = FiberSpace::euclidean(d);
        for (int rep = 0; rep < 10; ++rep) {
            auto a = random_element(fs);
            auto b = random_element(fs);
            CHECK(diff_norm(wedge(a, b), oracle_wedge(a, b)) < 1e-12);
            auto c = random_element(fs);
            CHECK(diff_norm(wedge(wedge(a, b), c), wedge(a, wedge(b, c))) < 1e-10);
            for (int p = 0; p <= d; ++p)
                for (int q = 0; q <= d; ++q) {
                    auto ap = a.degree_part(p), bq = b.degree_part(q);
                    double sign = (p * q % 2 == 0) ? 1.0 : -1.0;
                    CHECK(diff_norm(wedge(ap, bq), sign * wedge(bq, ap)) < 1e-10);
                }
        }
    }
}

TEST_CASE("wedge alternation on odd degrees") {
    for (int d = 2; d <= 6; ++d) {
        FiberSpace fs = FiberSpace::euclidean(d);
        for (int k = 1; k <= d; k += 2)
            for (int rep = 0; rep < 5; ++rep) {
                auto a = random_homogeneous(fs, k);
                CHECK(wedge(a, a).coeffs.norm() < 1e-12);
            }
    }
}

TEST_CASE("dimension mismatch is an error") {
    FiberSpace f2 = FiberSpace::euclidean(2), f3 = FiberSpace::euclidean(3);
    auto a = ExteriorElement::scalar(f2, 1.0);
    auto b = ExteriorElement::scalar(f3, 1.0);
    CHECK_THROWS(wedge(a, b));
}

TEST_CASE("interior product basics") {
    FiberSpace fs = FiberSpace::euclidean(2);
    VectorXd e1 = VectorXd::Unit(2, 0);
    auto dxdy = ExteriorElement::basis(fs, 0b11);
    auto res = interior_product(e1, dxdy);
    CHECK(std::abs(res.coeffs[fs.basis_index(0b10)] - cplx(1.0)) < 1e-15);
    // vanishes on functions
    auto f = ExteriorElement::scalar(fs, cplx(2.5, -1.0));
    CHECK(interior_product(e1, f).coeffs.norm() == 0.0);
    // i_v i_v = 0
    FiberSpace f4(4, random_spd(4));
    for (int rep = 0; rep < 10; ++rep) {
        auto w = random_element(f4);
        VectorXd v = random_vec(4);
        CHECK(interior_product(v, interior_product(v, w)).coeffs.norm() < 1e-10);
    }
}

TEST_CASE("wedge/interior adjointness via full Gram matrices") {
    FiberSpace fs(4, random_spd(4));
    for (int rep = 0; rep < 50; ++rep) {
        VectorXd alpha = random_vec(4);
        auto a1 = ExteriorElement::one_form(fs, alpha);
        auto eta = random_element(fs);
        auto omega = random_element(fs);
        cplx lhs = inner(wedge(a1, eta), omega);
        cplx rhs = inner(eta, interior_product(sharp(alpha, fs), omega));
        CHECK(std::abs(lhs - rhs) < 1e-10);
    }
}

TEST_CASE("hodge star in euclidean d=2") {
    FiberSpace fs = FiberSpace::euclidean(2);
    auto one = ExteriorElement::scalar(fs, 1.0);
    auto s1 = hodge_star(one, fs);
    CHECK(std::abs(s1.coeffs[fs.basis_index(0b11)] - cplx(1.0)) < 1e-14);
    auto dx = ExteriorElement::basis(fs, 0b01);
    auto dy = ExteriorElement::basis(fs, 0b10);
    CHECK(diff_norm(hodge_star(dx, fs), dy) < 1e-14);
    CHECK(diff_norm(hodge_star(dy, fs), cplx(-1.0) * dx) < 1e-14);
}

TEST_CASE("star-square sign law, all degrees, random metrics") {
    for (int d = 1; d <= 6; ++d) {
        FiberSpace fs(d, random_spd(d));
        auto star = hodge_star_operator(fs);
        for (int k = 0; k <= d; ++k)
            for (int rep = 0; rep < 5; ++rep) {
                auto w = random_homogeneous(fs, k);
                double sign = (k * (d - k)) % 2 == 0 ? 1.0 : -1.0;
                auto twice = star.apply(star.apply(w));
                CHECK(diff_norm(twice, sign * w) < 1e-10 * (1.0 + w.coeffs.norm()));
            }
    }
}

TEST_CASE("star preserves the metric norm") {
    for (int d = 2; d <= 5; ++d) {
        FiberSpace fs(d, random_spd(d));
        for (int rep = 0; rep < 10; ++rep) {
            auto w = random_element(fs);
            CHECK(metric_norm(hodge_star(w, fs)) ==
                  doctest::Approx(metric_norm(w)).epsilon(1e-9));
        }
    }
}

TEST_CASE("star(alpha ^ star omega) = (-1)^{d(k-1)} interior(sharp alpha) omega") {
    for (int d = 2; d <= 5; ++d) {
        FiberSpace fs(d, random_spd(d));
        for (int k = 1; k <= d; ++k)
            for (int rep = 0; rep < 10; ++rep) {
                VectorXd alpha = random_vec(d);
                auto a1 = ExteriorElement::one_form(fs, alpha);
                auto w = random_homogeneous(fs, k);
                auto lhs = hodge_star(wedge(a1, hodge_star(w, fs)), fs);
                double sign = (d * (k - 1)) % 2 == 0 ? 1.0 : -1.0;
                auto rhs = sign * interior_product(sharp(alpha, fs), w);
                CHECK(diff_norm(lhs, rhs) < 1e-10 * (1.0 + w.coeffs.norm()));
            }
    }
}

TEST_CASE("musical isomorphisms") {
    FiberSpace fs = FiberSpace::euclidean(2);
    VectorXd dx = VectorXd::Unit(2, 0);
    CHECK((sharp(dx, fs) - dx).norm() < 1e-14);

    MatrixXd g = MatrixXd::Zero(2, 2);
    g(0, 0) = 4.0;
    g(1, 1) = 1.0;
    FiberSpace fscaled(2, g);
    VectorXd expect(2);
    expect << 0.25, 0.0;
    CHECK((sharp(dx, fscaled) - expect).norm() < 1e-14);

    FiberSpace f5(5, random_spd(5));
    for (int rep = 0; rep < 20; ++rep) {
        VectorXd alpha = random_vec(5);
        CHECK((flat(sharp(alpha, f5), f5) - alpha).norm() < 1e-12);
    }
}

TEST_CASE("clifford operator norm equals covector norm") {
    FiberSpace fs = FiberSpace::euclidean(3);
    VectorXd v = 3.0 * VectorXd::Unit(3, 0);
    CHECK(clifford_minus(v, fs).op_norm() == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(clifford_minus(VectorXd::Zero(3), fs).mat.norm() == 0.0);

    // 100 random (alpha, metric) pairs across dimensions
    for (int rep = 0; rep < 100; ++rep) {
        int d = 2 + rep % 4;
        FiberSpace f(d, random_spd(d));
        VectorXd v2 = random_vec(d);
        double expect = covector_norm(flat(v2, f), f);
        CHECK(clifford_minus(v2, f).op_norm() == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("clifford relations for gamma_plus and gamma_minus") {
    FiberSpace fs(4, random_spd(4));
    for (int rep = 0; rep < 30; ++rep) {
        VectorXd v = random_vec(4), u = random_vec(4);
        double guv = v.dot(fs.metric() * u);
        auto cm_v = clifford_minus(v, fs), cm_u = clifford_minus(u, fs);
        MatrixXcd anti_m = cm_v.mat * cm_u.mat + cm_u.mat * cm_v.mat +
                           2.0 * guv * MatrixXcd::Identity(fs.size(), fs.size());
        CHECK(anti_m.cwiseAbs().maxCoeff() < 1e-10);
        auto cp_v = clifford_plus(v, fs), cp_u = clifford_plus(u, fs);
        MatrixXcd anti_p = cp_v.mat * cp_u.mat + cp_u.mat * cp_v.mat -
                           2.0 * guv * MatrixXcd::Identity(fs.size(), fs.size());
        CHECK(anti_p.cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("clifford square and skew-adjointness") {
    for (int rep = 0; rep < 20; ++rep) {
        int d = 2 + rep % 3;
        FiberSpace fs(d, random_spd(d));
        VectorXd v = random_vec(d);
        double gvv = v.dot(fs.metric() * v);
        auto c = clifford_minus(v, fs);
        MatrixXcd sq = c.mat * c.mat + gvv * MatrixXcd::Identity(fs.size(), fs.size());
        CHECK(sq.cwiseAbs().maxCoeff() < 1e-10);
        // skew-adjoint w.r.t. the Gram inner product: G C = -C^T G
        MatrixXcd skew = fs.gram() * c.mat + c.mat.transpose() * fs.gram();
        CHECK(skew.cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("parity grading") {
    FiberSpace fs = FiberSpace::euclidean(2);
    auto g = parity_grading(fs);
    auto dxdy = ExteriorElement::basis(fs, 0b11);
    CHECK(diff_norm(g.apply(dxdy), dxdy) == 0.0);
    auto dx = ExteriorElement::basis(fs, 0b01);
    CHECK(diff_norm(g.apply(dx), cplx(-1.0) * dx) == 0.0);

    FiberSpace f4(4, random_spd(4));
    auto g4 = parity_grading(f4);
    CHECK((g4.mat * g4.mat - MatrixXcd::Identity(f4.size(), f4.size())).norm() == 0.0);
    for (int rep = 0; rep < 20; ++rep) {
        VectorXd v = random_vec(4);
        auto c = clifford_minus(v, f4);
        MatrixXcd anti = g4.mat * c.mat + c.mat * g4.mat;
        CHECK(anti.cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("tau grading: direct evaluation in d=2") {
    // d=2 (ell=1), omega = 1 (k=0): tau(omega) = i^{0+1} * star(1) = i dx^dy.
    // Oracle: exponent arithmetic done independently of ipow.
    FiberSpace fs = FiberSpace::euclidean(2);
    auto tau = tau_grading(fs);
    auto one = ExteriorElement::scalar(fs, 1.0);
    auto t1 = tau.apply(one);
    long exponent = 0 * (0 - 1) + 1;
    cplx expect = std::pow(cplx(0, 1), double(exponent));
    CHECK(std::abs(t1.coeffs[fs.basis_index(0b11)] - expect) < 1e-14);
    CHECK(std::abs(t1.coeffs[fs.basis_index(0b11)] - cplx(0, 1)) < 1e-14);
}

TEST_CASE("tau is an involution and an isometry") {
    for (int d : {2, 4, 6}) {
        FiberSpace fs(d, random_spd(d));
        auto tau = tau_grading(fs);
        MatrixXcd sq = tau.mat * tau.mat;
        CHECK((sq - MatrixXcd::Identity(fs.size(), fs.size())).cwiseAbs().maxCoeff() < 1e-10);
        for (int rep = 0; rep < 10; ++rep) {
            auto w = random_element(fs);
            auto h = random_element(fs);
            CHECK(std::abs(inner(tau.apply(w), tau.apply(h)) - inner(w, h)) <
                  1e-10 * (1.0 + std::abs(inner(w, h))));
        }
    }
}

TEST_CASE("tau equals star on middle degree when d = 4j") {
    FiberSpace fs(4, random_spd(4));
    auto tau = tau_grading(fs);
    auto star = hodge_star_operator(fs);
    for (int rep = 0; rep < 10; ++rep) {
        auto w = random_homogeneous(fs, 2);
        CHECK(diff_norm(tau.apply(w), star.apply(w)) < 1e-12 * (1.0 + w.coeffs.norm()));
    }
}

TEST_CASE("tau requires even dimension") {
    FiberSpace fs = FiberSpace::euclidean(3);
    CHECK_THROWS_WITH(tau_grading(fs), "tau requires even dimension");
}

TEST_CASE("fiber operator debug dump") {
    FiberSpace fs = FiberSpace::euclidean(2);
    auto j = parity_grading(fs).debug_json();
    CHECK(j["dim"] == 2);
    CHECK(j["matrix"].size() == 4);
}

TEST_CASE("invalid fiber spaces are rejected") {
    CHECK_THROWS(FiberSpace(9, MatrixXd::Identity(9, 9)));
    MatrixXd bad = MatrixXd::Identity(3, 3);
    bad(0, 1) = 1e-6;  // asymmetric
    CHECK_THROWS(FiberSpace(3, bad));
    MatrixXd neg = -MatrixXd::Identity(2, 2);
    CHECK_THROWS(FiberSpace(2, neg));
}
