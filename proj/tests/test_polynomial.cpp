#include <catch2/catch_amalgamated.hpp>

#include "charlab/polynomial.hpp"
#include "charlab/rational.hpp"
#include "charlab/rng.hpp"

using namespace charlab;
using Cx = std::complex<double>;

namespace {

PolyC var(const BlockShape& s, int b, int i = 0) {
    return PolyC::variable(s, b, i);
}

/// Random polynomial of total degree exactly `deg` (top coefficient >= 0.5).
PolyC random_poly(const BlockShape& s, int deg, SplitMix64& g) {
    PolyC p(s);
    int terms = 3 + static_cast<int>(g.next() % 5);
    for (int t = 0; t < terms; ++t) {
        Monomial m(s.total(), 0);
        int td = static_cast<int>(g.next() % (deg + 1));
        for (int k = 0; k < td; ++k)
            m[g.next() % m.size()]++;
        p.add_term(m, Cx(g.next_uniform(-2, 2), g.next_uniform(-1, 1)));
    }
    Monomial top(s.total(), 0);
    for (int k = 0; k < deg; ++k) top[g.next() % top.size()]++;
    p.add_term(top, Cx(0.5 + g.next_unit(), 0));
    return p;
}

std::vector<std::vector<Cx>> shift1(const BlockShape& s, int block, double h) {
    std::vector<std::vector<Cx>> sh(s.count());
    sh[block] = {Cx(h, 0)};
    return sh;
}

} // namespace

TEST_CASE("compose_affine binomial examples") {
    BlockShape fg{{"f", 1}, {"g", 1}};
    PolyC f2 = var(fg, 0) * var(fg, 0);

    AffineMap<Cx> toSum;
    toSum.source = fg;
    toSum.target = fg;
    toSum.lin = {{{Cx(1, 0)}, {Cx(1, 0)}}, {{}, {Cx(1, 0)}}}; // f -> f + g, g -> g
    toSum.shift = {{}, {}};
    PolyC expanded = f2.compose_affine(toSum);

    PolyC expect = f2 + var(fg, 0).scaled(Cx(2, 0)) * var(fg, 1) +
                   var(fg, 1) * var(fg, 1);
    CHECK((expanded - expect).is_zero());

    AffineMap<Cx> toCg;
    toCg.source = fg;
    toCg.target = fg;
    toCg.lin = {{{}, {Cx(3, 0)}}, {{}, {Cx(1, 0)}}}; // f -> 3 g
    toCg.shift = {{}, {}};
    PolyC cg = f2.compose_affine(toCg);
    CHECK((cg - var(fg, 1) * var(fg, 1).scaled(Cx(9, 0))).is_zero());
}

TEST_CASE("quadratic exponent composed with f -> C*g") {
    // psi(f) = f^2/2 for R = I (d = 1); substituting f -> 2 g gives 2 g^2.
    BlockShape fg{{"f", 1}, {"g", 1}};
    auto psi = QuadraticExponent::gaussian(Eigen::VectorXd::Zero(1),
                                           Eigen::MatrixXd::Identity(1, 1));
    PolyC p = psi.to_poly(fg, 0);
    AffineMap<Cx> m;
    m.source = fg;
    m.target = fg;
    m.lin = {{{}, {Cx(2, 0)}}, {{}, {}}};
    m.shift = {{}, {}};
    PolyC q = p.compose_affine(m);
    PolyC expect = var(fg, 1) * var(fg, 1).scaled(Cx(2, 0));
    CHECK((q - expect).is_zero());
}

TEST_CASE("delta examples") {
    BlockShape fs{{"f", 1}};
    PolyC f2 = var(fs, 0) * var(fs, 0);

    double h = 0.7;
    PolyC d1 = f2.delta({{Cx(h, 0)}});
    // 2 h f + h^2
    PolyC expect = var(fs, 0).scaled(Cx(2 * h, 0)) +
                   PolyC::constant(fs, Cx(h * h, 0));
    CHECK((d1 - expect).is_zero());
    CHECK(d1.total_degree() == 1);

    PolyC c = PolyC::constant(fs, Cx(4, 2));
    CHECK(c.delta({{Cx(1, 0)}}).is_zero());

    PolyC d2 = d1.delta({{Cx(1, 0)}});
    CHECK((d2 - PolyC::constant(fs, Cx(2 * h, 0))).is_zero());
}

TEST_CASE("iterated delta kills any polynomial of its degree") {
    SplitMix64 g(99);
    for (int it = 0; it < 50; ++it) {
        BlockShape s{{"f", 1 + static_cast<int>(g.next() % 2)},
                     {"g", 1 + static_cast<int>(g.next() % 2)}};
        int deg = 1 + static_cast<int>(g.next() % 4);
        PolyC p = random_poly(s, deg, g);

        std::vector<std::vector<Cx>> sh(2);
        for (int b = 0; b < 2; ++b) {
            sh[b].resize(s.dim(b));
            for (int i = 0; i < s.dim(b); ++i)
                sh[b][i] = Cx(g.next_uniform(-1, 1), 0);
        }
        PolyC q = p;
        for (int k = 0; k <= deg; ++k) {
            CHECK(q.total_degree() <= std::max(0, p.total_degree() - k));
            q = q.delta(sh);
        }
        CHECK(q.is_zero());
    }
}

TEST_CASE("delta commutes with affine composition") {
    // Delta_h(p o sigma) = (Delta_{sigma_lin h} p) o sigma
    SplitMix64 g(17);
    BlockShape s{{"f", 2}};
    for (int it = 0; it < 30; ++it) {
        PolyC p = random_poly(s, 3, g);
        AffineMap<Cx> sigma;
        sigma.source = s;
        sigma.target = s;
        std::vector<Cx> M(4);
        for (auto& c : M) c = Cx(g.next_uniform(-1, 1), 0);
        sigma.lin = {{M}};
        sigma.shift = {{Cx(g.next_uniform(-1, 1), 0), Cx(g.next_uniform(-1, 1), 0)}};

        std::vector<Cx> h = {Cx(g.next_uniform(-1, 1), 0),
                             Cx(g.next_uniform(-1, 1), 0)};
        std::vector<Cx> Mh = {M[0] * h[0] + M[1] * h[1], M[2] * h[0] + M[3] * h[1]};

        PolyC lhs = p.compose_affine(sigma).delta({h});
        PolyC rhs = p.delta({Mh}).compose_affine(sigma);
        CHECK((lhs - rhs).is_zero(1e-10));
    }
}

TEST_CASE("is_zero") {
    BlockShape s{{"f", 1}, {"g", 1}};
    PolyC f2 = var(s, 0) * var(s, 0);
    PolyC g2 = var(s, 1) * var(s, 1);
    CHECK((f2 - f2).is_zero());
    CHECK((f2 + f2.scaled(Cx(-1, 0))).is_zero());
    CHECK_FALSE((f2 - g2).is_zero());
}

TEST_CASE("quadratic exponent embeds losslessly") {
    SplitMix64 g(5);
    for (int it = 0; it < 20; ++it) {
        int d = 1 + static_cast<int>(g.next() % 3);
        Eigen::VectorXd m(d);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < d; ++i) {
            m(i) = g.next_uniform(-2, 2);
            for (int j = 0; j < d; ++j) a(i, j) = g.next_uniform(-1, 1);
        }
        Eigen::MatrixXd R = a * a.transpose();
        auto qe = QuadraticExponent::gaussian(m, R);
        BlockShape s{{"f", d}};
        PolyC p = qe.to_poly(s, 0);
        for (int k = 0; k < 10; ++k) {
            Eigen::VectorXd f(d);
            for (int i = 0; i < d; ++i) f(i) = g.next_uniform(-2, 2);
            Cx direct = qe.eval(f);
            Cx via = eval_poly(p, {f});
            CHECK(std::abs(direct - via) <= 1e-12 * std::max(1.0, std::abs(direct)));
        }
    }
}

TEST_CASE("degree cap is enforced") {
    BlockShape s{{"f", 1}};
    Monomial m(1, 9);
    PolyC p(s);
    CHECK_THROWS_AS(p.add_term(m, Cx(1, 0)), Error);
}

TEST_CASE("pretty printer golden form") {
    BlockShape s{{"f", 1}, {"g", 1}};
    PolyC p(s);
    p.add_term({2, 0}, Cx(-0.5, 0));
    p.add_term({1, 1}, Cx(1.0, 0));
    CHECK(p.pretty() == "-0.5*f1^2 + 1.0*f1*g1");
    CHECK(PolyC(s).pretty() == "0");
}

TEST_CASE("rational coefficients cancel exactly") {
    BlockShape s{{"f", 1}, {"g", 1}};
    PolyQ f = PolyQ::variable(s, 0, 0);
    PolyQ g = PolyQ::variable(s, 1, 0);

    // (f + g)^2 - f^2 - 2fg - g^2 == 0 literally
    PolyQ sum = f + g;
    PolyQ lhs = sum * sum - f * f - (f * g).scaled(RationalComplex(2)) - g * g;
    CHECK(lhs.is_zero());
    CHECK(lhs.terms().empty());

    // Delta^3 of a rational quadratic vanishes identically
    PolyQ quad = (f * f).scaled(RationalComplex::ratio(1, 2)) +
                 (f * g).scaled(RationalComplex::ratio(-2, 3));
    std::vector<std::vector<RationalComplex>> h = {
        {RationalComplex::ratio(1, 7)}, {RationalComplex::ratio(3, 5)}};
    PolyQ q = quad.delta(h).delta(h).delta(h);
    CHECK(q.terms().empty());
}
