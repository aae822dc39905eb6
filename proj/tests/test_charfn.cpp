#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "charlab/charfn.hpp"

using namespace charlab;
using Cx = std::complex<double>;

namespace {

ComponentDist std_gauss(int d) {
    return {GaussianDist(Vector::Zero(d), Matrix::Identity(d, d))};
}

CfFunctionalField psi_field(const CfEngine& eng, int dim, double floor = 0.2,
                            double radius = 2.0) {
    CfFunctionalField::Term t{Selector::component(0),
                              Eigen::MatrixXd::Identity(dim, dim), -1.0};
    return CfFunctionalField(eng, {t}, dim, floor, radius);
}

} // namespace

TEST_CASE("fast_sincos matches libm") {
    SplitMix64 rng(2);
    std::vector<double> phi(2000);
    for (auto& x : phi) x = rng.next_uniform(-60, 60);
    std::vector<double> c(phi.size()), s(phi.size());
    fast_sincos(phi.data(), static_cast<long>(phi.size()), c.data(), s.data());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        CHECK(std::abs(c[i] - std::cos(phi[i])) <= 2e-9);
        CHECK(std::abs(s[i] - std::sin(phi[i])) <= 2e-9);
    }
}

TEST_CASE("ecf basics") {
    auto dist = ProductDist::iid(std_gauss(1), 1);
    SampleMatrix s = dist.sample(100000, 11);
    EmpiricalEngine eng(s);

    auto [v0, se0] = eng.ecf(Selector::component(0), Vector::Zero(1));
    CHECK(v0 == Cx(1, 0));
    CHECK(se0 <= 1e-12);

    auto [v1, se1] = eng.ecf(Selector::component(0), Vector::Constant(1, 1.0));
    CHECK(std::abs(v1 - std::exp(-0.5)) <= 4 * se1);
    CHECK(std::abs(v1) <= 1.0 + 3 * se1);

    // pre-transform realizing xi' = 2 xi
    LinearOp two(Matrix::Constant(1, 1, 2.0));
    auto [v2, se2] =
        eng.ecf(Selector::component(0), Vector::Constant(1, 1.0), &two);
    CHECK(std::abs(v2 - std::exp(-2.0)) <= 4 * se2);

    SampleMatrix empty;
    empty.n = 1;
    empty.d = 1;
    empty.data.resize(0, 1);
    CHECK_THROWS_AS(EmpiricalEngine(empty), Error);
}

TEST_CASE("ecf noise model calibration") {
    // fraction of probes outside 4 standard errors should stay below 5%
    auto dist = ProductDist::iid({ScalarFamily::uniform(-1, 1)}, 1);
    int total = 0, bad = 0;
    SplitMix64 dirs(19);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SampleMatrix s = dist.sample(20000, seed);
        EmpiricalEngine eng(s);
        for (int k = 0; k < 25; ++k) {
            Vector f = Vector::Constant(1, dirs.next_uniform(-3, 3));
            auto [v, se] = eng.ecf(Selector::component(0), f);
            ++total;
            if (std::abs(v - dist.comp(0).cf(f)) > 4 * se) ++bad;
        }
    }
    CHECK(bad <= total / 20);
}

TEST_CASE("log_cf_field on an exact gaussian") {
    Vector m(2);
    m << 1.0, -0.5;
    Matrix R(2, 2);
    R << 1.0, 0.3, 0.3, 2.0;
    auto dist = ProductDist::iid({GaussianDist(m, R)}, 1);
    ExactEngine eng(dist);
    StarGrid grid = StarGrid::make(2, 8, 12, 2.0, 99);
    LogCfField field = log_cf_field(eng, Selector::component(0), grid, 0.05);
    CHECK(field.branch_ok);
    int points = 0;
    for (const auto& ray : field.rays) {
        for (std::size_t k = 0; k < ray.t.size(); ++k) {
            Vector f = ray.t[k] * ray.u;
            Cx expect = Cx(0.5 * f.dot(R * f), -m.dot(f));
            CHECK(std::abs(ray.psi[k] - expect) <= 1e-10);
            ++points;
        }
    }
    CHECK(points > 40);
}

TEST_CASE("log_cf_field unwraps a winding argument") {
    // pure location shift: cf = exp(3 i t - t^2 / 2) winds past pi inside the
    // valid radius, so the principal branch alone would jump
    auto dist =
        ProductDist::iid({ScalarFamily::mixture(0.5, 3.0, 3.0, 1.0)}, 1);
    ExactEngine eng(dist);
    StarGrid grid = StarGrid::make(1, 2, 24, 1.7, 1);
    LogCfField field = log_cf_field(eng, Selector::component(0), grid, 0.2);
    REQUIRE(field.branch_ok);
    bool past_pi = false;
    for (const auto& ray : field.rays) {
        for (std::size_t k = 0; k < ray.t.size(); ++k) {
            double t = ray.t[k] * ray.u(0);
            Cx expect = Cx(0.5 * t * t, -3.0 * t);
            CHECK(std::abs(ray.psi[k] - expect) <= 1e-10);
            if (std::abs(3.0 * t) > 3.2) past_pi = true;
        }
    }
    CHECK(past_pi);

    // exp(-psi) reproduces the cf at every retained point
    for (const auto& ray : field.rays)
        for (std::size_t k = 0; k < ray.t.size(); ++k) {
            Vector f = ray.t[k] * ray.u;
            CHECK(std::abs(std::exp(-ray.psi[k]) - dist.comp(0).cf(f)) <=
                  1e-10 + 3 * ray.se[k]);
        }
}

TEST_CASE("log_cf_field of a point mass is zero") {
    auto dist =
        ProductDist::iid({GaussianDist(Vector::Zero(1), Matrix::Zero(1, 1))}, 1);
    ExactEngine eng(dist);
    StarGrid grid = StarGrid::make(1, 2, 6, 2.0, 5);
    LogCfField field = log_cf_field(eng, Selector::component(0), grid, 0.2);
    for (const auto& ray : field.rays) {
        CHECK(ray.t.size() == 6);
        for (auto& p : ray.psi) CHECK(std::abs(p) == 0.0);
    }
}

TEST_CASE("uniform ray truncates before the cf zero at pi") {
    auto dist = ProductDist::iid({ScalarFamily::uniform(-1, 1)}, 1);
    ExactEngine eng(dist);
    StarGrid grid = StarGrid::make(1, 2, 24, 4.0, 5);
    LogCfField field = log_cf_field(eng, Selector::component(0), grid, 0.2);
    for (const auto& ray : field.rays) {
        REQUIRE(!ray.t.empty());
        CHECK(ray.t.back() < 3.141592653589793);
        CHECK(ray.truncated_radius < 3.141592653589793);
    }
}

TEST_CASE("finite differences on callables") {
    auto sq = [](const Eigen::VectorXd& f) { return Cx(f(0) * f(0), 0); };
    Vector f0 = Vector::Constant(1, 0.4);
    Vector h = Vector::Constant(1, 1.0);
    CHECK(std::abs(finite_difference(sq, f0, h, 3)) <= 1e-14);
    CHECK(std::abs(finite_difference(sq, f0, h, 2) - Cx(2, 0)) <= 1e-14);

    auto c = [](const Eigen::VectorXd&) { return Cx(3.7, -1); };
    CHECK(std::abs(finite_difference(c, f0, h, 1)) == 0.0);

    // linearity
    auto cube = [](const Eigen::VectorXd& f) { return Cx(f(0) * f(0) * f(0), 0); };
    auto combo = [&](const Eigen::VectorXd& f) {
        return Cx(2.5, 0) * sq(f) + cube(f);
    };
    Cx lhs = finite_difference(combo, f0, h, 2);
    Cx rhs = Cx(2.5, 0) * finite_difference(sq, f0, h, 2) +
             finite_difference(cube, f0, h, 2);
    CHECK(std::abs(lhs - rhs) <= 1e-12);

    // commutativity of mixed shifts
    auto mixed = [](const Eigen::VectorXd& p) {
        return Cx(std::exp(p(0)) * std::sin(p(1)) + p(0) * p(1) * p(1), 0);
    };
    Vector p0(2), h1(2), h2(2);
    p0 << 0.2, -0.3;
    h1 << 0.5, 0.1;
    h2 << -0.2, 0.4;
    auto d_h1 = [&](const Eigen::VectorXd& p) {
        return finite_difference(mixed, p, h1, 1);
    };
    auto d_h2 = [&](const Eigen::VectorXd& p) {
        return finite_difference(mixed, p, h2, 1);
    };
    Cx ab = finite_difference(d_h2, p0, h1, 1);
    Cx ba = finite_difference(d_h1, p0, h2, 1);
    CHECK(std::abs(ab - ba) <= 1e-12);
}

TEST_CASE("engine finite difference reports the offending point") {
    auto dist = ProductDist::iid(std_gauss(1), 1);
    ExactEngine eng(dist);
    CHECK_THROWS_AS(delta_log_cf(eng, Selector::component(0),
                                 Vector::Constant(1, 1.5),
                                 Vector::Constant(1, 0.5), 3, 0.01, 2.0),
                    DomainError);
    // in range: delta^2 of the quadratic exponent is <R h, h> = h^2
    auto ev = delta_log_cf(eng, Selector::component(0), Vector::Constant(1, 0.1),
                           Vector::Constant(1, 0.3), 2, 0.01, 2.0);
    CHECK(std::abs(ev.value - Cx(0.09, 0)) <= 1e-12);
}

TEST_CASE("degree_test on exact gaussian exponents") {
    auto dist = ProductDist::iid(std_gauss(2), 1);
    ExactEngine eng(dist);
    auto field = psi_field(eng, 2, 0.05, 2.0);
    DegreeTestOptions opt;

    auto c2 = degree_test(field, 2, 31, opt);
    CHECK(c2.verdict == PolyDegreeCertificate::Verdict::polynomial);
    CHECK(c2.max_residual <= 1e-9);

    auto c1 = degree_test(field, 1, 31, opt);
    CHECK(c1.verdict == PolyDegreeCertificate::Verdict::not_polynomial);
}

TEST_CASE("degree_test rejects the uniform log cf at every degree") {
    auto dist = ProductDist::iid({ScalarFamily::uniform(-1, 1)}, 1);
    ExactEngine eng(dist);
    auto field = psi_field(eng, 1, 0.2, 2.0);
    DegreeTestOptions opt;
    for (int D = 0; D <= 4; ++D) {
        auto c = degree_test(field, D, 7, opt);
        CHECK(c.verdict == PolyDegreeCertificate::Verdict::not_polynomial);
    }
}

TEST_CASE("degree-kill on random exact polynomials") {
    SplitMix64 rng(12);
    DegreeTestOptions opt;
    opt.radius = 1.5;
    for (int it = 0; it < 50; ++it) {
        int dim = 1 + static_cast<int>(rng.next() % 2);
        int deg = 1 + static_cast<int>(rng.next() % 4);
        BlockShape s{{"f", dim}};
        PolyC p(s);
        int terms = 2 + static_cast<int>(rng.next() % 4);
        for (int t = 0; t < terms; ++t) {
            Monomial m(dim, 0);
            int td = static_cast<int>(rng.next() % deg);
            for (int k = 0; k < td; ++k) m[rng.next() % m.size()]++;
            p.add_term(m, Cx(rng.next_uniform(-2, 2), rng.next_uniform(-1, 1)));
        }
        Monomial top(dim, 0);
        top[0] = static_cast<std::uint8_t>(deg); // pure power, nonzero top
        p.add_term(top, Cx(1.0 + rng.next_unit(), 0));

        CallableField field(
            [&p](const Eigen::VectorXd& f) { return eval_poly(p, {f}); }, dim,
            opt.radius * 10);

        auto at = degree_test(field, deg, rng.next(), opt);
        CHECK(at.verdict == PolyDegreeCertificate::Verdict::polynomial);
        CHECK(at.max_residual <= 1e-9);
        auto below = degree_test(field, deg - 1, rng.next(), opt);
        CHECK(below.verdict == PolyDegreeCertificate::Verdict::not_polynomial);
    }
}

TEST_CASE("degree_test goes inconclusive when stencils cannot fit") {
    // floor so high that no stencil is valid away from the origin
    auto dist = ProductDist::iid(std_gauss(1), 1);
    ExactEngine eng(dist);
    auto field = psi_field(eng, 1, 0.99999, 2.0);
    DegreeTestOptions opt;
    auto c = degree_test(field, 2, 3, opt);
    CHECK(c.verdict == PolyDegreeCertificate::Verdict::inconclusive);
    CHECK(c.probe_count < opt.probes);
    CHECK_FALSE(c.diagnostic.empty());
}

TEST_CASE("empirical degree_test matches the exact verdicts") {
    // standard gaussian: quadratic log cf accepted at D=2, rejected at D=1
    auto dist = ProductDist::iid(std_gauss(1), 1);
    SampleMatrix s = dist.sample(100000, 4);
    EmpiricalEngine eng(s);
    auto field = psi_field(eng, 1, 0.2, 2.0);
    DegreeTestOptions opt;
    auto c2 = degree_test(field, 2, 8, opt);
    CHECK(c2.verdict == PolyDegreeCertificate::Verdict::polynomial);
    auto c1 = degree_test(field, 1, 8, opt);
    CHECK(c1.verdict == PolyDegreeCertificate::Verdict::not_polynomial);

    // uniform: log cf is not quadratic and the noise model must resolve it
    auto uni = ProductDist::iid({ScalarFamily::uniform(-1, 1)}, 1);
    SampleMatrix su = uni.sample(100000, 4);
    EmpiricalEngine engu(su);
    auto fieldu = psi_field(engu, 1, 0.2, 2.0);
    auto cu = degree_test(fieldu, 2, 8, opt);
    CHECK(cu.verdict == PolyDegreeCertificate::Verdict::not_polynomial);
}
