#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hyperstab/systems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

using namespace hyperstab;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
const IntMat2 kCat = (IntMat2() << 2, 1, 1, 1).finished();

Point pt(double a, double b = 0.0) { return Point{Vec2(a, b)}; }

double torus_gap(const Point& a, const Point& b) {
    Vec2 d = a.coords - b.coords;
    for (int k = 0; k < 2; ++k) d(k) -= std::round(d(k));
    return d.cwiseAbs().maxCoeff();
}

Mat2 central_difference(const ModelMap& m, const Vec2& x, double h) {
    Mat2 j;
    for (int k = 0; k < 2; ++k) {
        const Vec2 e = Vec2::Unit(k) * h;
        j.col(k) = (m.lift_evaluate(x + e) - m.lift_evaluate(x - e)) / (2.0 * h);
    }
    return j;
}

}  // namespace

TEST_CASE("cat map forward and inverse spot values") {
    const auto cat = make_linear_toral(kCat);
    CHECK(torus_gap(cat->evaluate(pt(0, 0)), pt(0, 0)) == 0.0);
    CHECK(torus_gap(cat->evaluate(pt(0.5, 0.5)), pt(0.5, 0.0)) < 1e-15);
    CHECK(torus_gap(cat->inverse(pt(0.5, 0.0)), pt(0.5, 0.5)) < 1e-15);
    CHECK(cat->is_linear());
    for (const Point& x : {pt(0.1, 0.7), pt(0.33, 0.91)}) CHECK(cat->jacobian(x) == kCat.cast<double>());
}

TEST_CASE("Morse-Smale circle closed forms") {
    const auto ms = make_morse_smale_circle(0.05);
    CHECK(ms->evaluate(pt(0.25)).coords(0) == doctest::Approx(0.30).epsilon(1e-15));
    const double fd = (ms->lift_evaluate(Vec2(1e-6, 0))(0) - ms->lift_evaluate(Vec2(-1e-6, 0))(0)) / 2e-6;
    CHECK(ms->jacobian(pt(0))(0, 0) == doctest::Approx(1.0 + kTwoPi * 0.05).epsilon(1e-12));
    CHECK(ms->jacobian(pt(0))(0, 0) == doctest::Approx(fd).epsilon(1e-8));
    CHECK(ms->jacobian(pt(0))(1, 1) == ms->jacobian(pt(0))(0, 0));
    CHECK(ms->evaluate(pt(0.3)).coords(1) == 0.0);
}

TEST_CASE("perturbed toral inverse accuracy") {
    const auto zero = make_perturbed_toral(kCat, default_toral_perturbation(0.0));
    const auto cat = make_linear_toral(kCat);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const Point y = pt(u(rng), u(rng));
        CHECK(torus_gap(zero->inverse(y), cat->inverse(y)) < 1e-14);
    }
    const auto p = make_perturbed_toral(kCat, default_toral_perturbation(0.01));
    CHECK(inverse_residual(*p, Grid(256, ManifoldKind::Torus2)) <= 1e-12);
}

TEST_CASE("perturbed toral jacobian matches central differences") {
    const auto p = make_perturbed_toral(kCat, default_toral_perturbation(0.01));
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const Vec2 x(u(rng), u(rng));
        CHECK((p->jacobian(Point{x}) - central_difference(*p, x, 1e-5)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("perturbation amplitude is validated") {
    CHECK_THROWS_AS(make_perturbed_toral(kCat, default_toral_perturbation(0.2)), std::invalid_argument);
    CHECK_THROWS_AS(make_linear_toral((IntMat2() << 1, 1, 0, 1).finished()), std::invalid_argument);
    CHECK_THROWS_AS(make_linear_toral((IntMat2() << 2, 0, 0, 1).finished()), std::invalid_argument);
    CHECK_THROWS_AS(make_conjugated(make_linear_toral(kCat), default_conjugacy(0.2, ManifoldKind::Torus2)),
                    std::invalid_argument);
}

TEST_CASE("hyperbolicity constants of the cat map match the eigenvalues") {
    const auto cat = make_linear_toral(kCat);
    const HyperbolicityConstants c = hyperbolicity_constants(*cat);
    CHECK(c.lambda == doctest::Approx((3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-12));
    CHECK(c.l == doctest::Approx((3.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-12));
    CHECK(c.lambda * std::pow(c.l, c.alpha) < 1.0);
    CHECK(c.lambda < c.lambda_prime);
    CHECK(c.lambda_prime * std::pow(c.l, c.alpha) < 1.0);

    const auto plain = make_linear_toral(kCat, false);
    CHECK(hyperbolicity_constants(*plain).lambda >= c.lambda - 1e-15);

    const Eigensplitting e = eigensplitting(kCat);
    const Mat2 a = kCat.cast<double>();
    CHECK((a * e.unstable - e.mu_unstable * e.unstable).norm() < 1e-14);
    CHECK((a * e.stable - e.mu_stable * e.stable).norm() < 1e-14);
    CHECK(e.mu_unstable * e.mu_stable == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("hyperbolicity constants of the Morse-Smale circle") {
    const auto ms = make_morse_smale_circle(0.05);
    const HyperbolicityConstants c = hyperbolicity_constants(*ms);
    const double repeller = 1.0 / (1.0 + kTwoPi * 0.05);
    const double attractor = 1.0 - kTwoPi * 0.05;
    CHECK(c.lambda == doctest::Approx(std::max(repeller, attractor)).epsilon(1e-12));
    CHECK(c.lambda == doctest::Approx(0.76093).epsilon(1e-5));
}

TEST_CASE("conjugated models") {
    const auto cat = make_linear_toral(kCat);
    const auto same = make_conjugated(cat, default_conjugacy(0.0, ManifoldKind::Torus2));
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        const Point x = pt(u(rng), u(rng));
        CHECK(torus_gap(same->evaluate(x), cat->evaluate(x)) < 1e-15);
    }

    const TrigSeries phi = default_conjugacy(0.01, ManifoldKind::Torus2);
    const auto g = make_conjugated(cat, phi);
    auto apply_phi = [&](const Point& x) { return Point{x.coords + phi.value(x.coords)}; };
    CHECK(torus_gap(g->evaluate(apply_phi(pt(0, 0))), apply_phi(pt(0, 0))) < 1e-14);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const Point x = pt(u(rng), u(rng));
        worst = std::max(worst, torus_gap(g->evaluate(apply_phi(x)), apply_phi(cat->evaluate(x))));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("C1 distance of a conjugated model to its base vanishes with phi") {
    const auto cat = make_linear_toral(kCat);
    const Grid grid(32, ManifoldKind::Torus2);
    double previous = 1e300;
    for (double a : {0.02, 0.01, 0.005, 0.0025}) {
        const auto g = make_conjugated(cat, default_conjugacy(a, ManifoldKind::Torus2));
        double gap = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Point x = grid.point(i);
            gap = std::max(gap, torus_gap(g->evaluate(x), cat->evaluate(x)));
            gap = std::max(gap, (g->jacobian(x) - cat->jacobian(x)).cwiseAbs().maxCoeff());
        }
        CHECK(gap < previous);
        CHECK(gap <= 100.0 * a);
        previous = gap;
    }
}

TEST_CASE("basic sets") {
    const BasicSetData cat = basic_sets(*make_linear_toral(kCat));
    REQUIRE(cat.components.size() == 1);
    CHECK(cat.components[0].whole_manifold);
    CHECK(basic_sets(*make_perturbed_toral(kCat, default_toral_perturbation(0.01))).components.size() == 1);

    const BasicSetData ms = basic_sets(*make_morse_smale_circle(0.05));
    REQUIRE(ms.components.size() == 2);
    std::vector<double> where;
    for (const auto& c : ms.components) {
        REQUIRE(c.points.size() == 1);
        where.push_back(c.points[0].coords(0));
    }
    std::sort(where.begin(), where.end());
    CHECK(where[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(where[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("shipped configurations are diffeomorphisms") {
    const Grid torus(64, ManifoldKind::Torus2);
    CHECK(min_jacobian_determinant(*make_perturbed_toral(kCat, default_toral_perturbation(0.01)), torus) > 0.1);
    CHECK(min_jacobian_determinant(
              *make_conjugated(make_linear_toral(kCat), default_conjugacy(0.01, ManifoldKind::Torus2)), torus) > 0.1);
    CHECK(min_jacobian_determinant(*make_morse_smale_circle(0.05), Grid(256, ManifoldKind::Circle)) > 0.1);
}

TEST_CASE("periodic point counts equal |det(A^p - I)|") {
    const auto cat = make_linear_toral(kCat);
    IntMat2 power = IntMat2::Identity();
    for (int p = 1; p <= 3; ++p) {
        power = power * kCat;
        const IntMat2 shifted = power - IntMat2::Identity();
        const int expected = std::abs(shifted(0, 0) * shifted(1, 1) - shifted(0, 1) * shifted(1, 0));
        const auto pts = periodic_points(*cat, p);
        CHECK(static_cast<int>(pts.size()) == expected);
        for (const Point& x : pts) CHECK(torus_gap(cat->iterate(x, p), x) < 1e-12);
    }
    const auto g = make_perturbed_toral(kCat, default_toral_perturbation(0.01));
    CHECK(periodic_points(*g, 2).size() == 5);
}
