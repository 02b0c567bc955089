#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hyperstab/conjugacy.hpp"
#include "hyperstab/error.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace hyperstab;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
const IntMat2 kCat = (IntMat2() << 2, 1, 1, 1).finished();

struct Setup {
    ModelMapPtr f = make_linear_toral(kCat);
    HyperbolicityConstants hc = hyperbolicity_constants(*f, 64);
    Grid grid{64, ManifoldKind::Torus2};
    RightInverse J{f, ComponentProjectors::exact_linear(*f), PartitionOfUnity::single(ManifoldKind::Torus2), hc,
                   grid, 40};

    SolverConfig config() const {
        SolverConfig c;
        c.alpha = hc.alpha;
        c.window = DfWindow{5};
        return c;
    }
};

const Setup& setup() {
    static const Setup s;
    return s;
}

ModelMapPtr perturbed(double eps) { return make_perturbed_toral(kCat, default_toral_perturbation(eps)); }

double torus_gap(const Vec2& a, const Vec2& b) { return min_lift(a - b, ManifoldKind::Torus2).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("Psi at the identity") {
    const Setup& s = setup();
    const DiscreteVectorField zero(s.grid, s.f->frame());
    CHECK(psi(*s.f, *s.f, zero).sup_norm() < 1e-15);

    const auto g = perturbed(0.01);
    const DiscreteVectorField p = psi(*g, *s.f, zero);
    for (std::size_t i = 0; i < s.grid.size(); i += 7) {
        const Vec2 x = s.grid.point(i).coords;
        const Vec2 expected = min_lift(g->lift_evaluate(s.f->inverse(Point{x}).coords) - x, ManifoldKind::Torus2);
        CHECK((p.values[i] - expected).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("D2 Psi at the identity is the push-forward") {
    const auto f = perturbed(0.01);
    const Grid grid(32, ManifoldKind::Torus2);
    const DiscreteVectorField eta = 0.05 * random_trig_field(grid, f->frame(), 9);
    const double t = 1e-4;
    const DiscreteVectorField fd = (0.5 / t) * (psi(*f, *f, t * eta) - psi(*f, *f, (-t) * eta));
    const DiscreteVectorField pushed = push_forward(*f, eta);
    double err = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) err = std::max(err, (fd.values[i] - pushed.values[i]).norm());
    CHECK(err <= 1e-6);
}

TEST_CASE("Psi reports chart overflow") {
    const Setup& s = setup();
    DiscreteVectorField big(s.grid, s.f->frame());
    for (auto& v : big.values) v = Vec2(0.5, 0.1);
    CHECK_THROWS_AS(psi(*s.f, *s.f, big), Error);
}

TEST_CASE("perturbation report") {
    const Setup& s = setup();
    const NormContext ctx(*s.f, s.grid, DfWindow{5}, 2000, 1);
    const DiscreteVectorField zero(s.grid, s.f->frame());
    const PerturbationReport same = verify_perturbation_bounds(*s.f, *s.f, zero, s.hc.alpha, s.hc.l, ctx);
    CHECK(same.q_c0 < 1e-15);
    CHECK(same.q_holder < 1e-12);
    CHECK(same.q_df < 1e-12);

    double previous = 0.0;
    for (double eps : {0.005, 0.01, 0.02}) {
        const PerturbationReport r = verify_perturbation_bounds(*perturbed(eps), *s.f, zero, s.hc.alpha, s.hc.l, ctx);
        CHECK(r.q_c0 > previous);
        CHECK(r.q_c0 <= 4.0 * eps);
        CHECK(r.holder_ok);
        CHECK(r.q_holder <= 1.1 * r.holder_bound);
        previous = r.q_c0;
    }
}

TEST_CASE("solver config validation") {
    SolverConfig c;
    c.eps_ball = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = SolverConfig{};
    c.r_ball = 0.25;
    CHECK_THROWS_AS(c.validate(), Error);
    c = SolverConfig{};
    c.tol = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("g = f converges at iteration zero") {
    const Setup& s = setup();
    const ConjugacyResult r = solve_conjugacy(*s.f, *s.f, s.J, s.grid, s.config());
    CHECK(r.converged);
    CHECK(r.iterations == 0);
    CHECK(r.eta.sup_norm() == 0.0);
    CHECK(r.homeo.positive);
}

TEST_CASE("oracle conjugacy is recovered") {
    const Setup& s = setup();
    const TrigSeries phi = default_conjugacy(0.01, ManifoldKind::Torus2);
    const auto g = make_conjugated(s.f, phi);
    const ConjugacyResult r = solve_conjugacy(*s.f, *g, s.J, s.grid, s.config());
    CHECK(r.converged);
    CHECK(distance_to(r.eta, phi) <= 1e-4);
    CHECK(r.residual <= 1e-8);
    CHECK(r.max_ratio <= 0.6);
    CHECK(r.homeo.positive);

    const NormContext ctx(*s.f, s.grid, DfWindow{5}, 2000, 1);
    const HolderReport h = holder_report(r.eta, *s.f, s.hc, {0.5, 0.9}, ctx);
    REQUIRE(h.alpha_hat.has_value());
    CHECK(*h.alpha_hat >= 0.95);
    for (const auto& e : h.entries) CHECK(e.admissible);
}

TEST_CASE("nonlinear perturbation: residual, periodic points, confinement") {
    const Setup& s = setup();
    const auto g = perturbed(0.01);
    const SolverConfig cfg = s.config();
    const ConjugacyResult r = solve_conjugacy(*s.f, *g, s.J, s.grid, cfg);
    CHECK(r.converged);
    CHECK(r.residual <= 1e-7);
    CHECK(r.max_ratio <= 0.6);
    CHECK(r.ball_confinement <= cfg.eps_ball);
    CHECK(r.homeo.positive);
    for (std::size_t k = 0; k + 1 < r.updates.size(); ++k) CHECK(r.updates[k] > 0.0);
    CHECK(r.updates.back() <= cfg.tol);

    for (int p = 1; p <= 3; ++p) {
        const auto matches = match_periodic_points(*s.f, *g, s.J, p);
        CHECK(!matches.empty());
        for (const auto& m : matches) {
            CHECK(m.error <= 1e-6);
            CHECK(torus_gap(g->iterate(m.q, m.period).coords, m.q.coords) <= 1e-12);
        }
    }
}

TEST_CASE("conjugacy identity along orbits") {
    const Setup& s = setup();
    const auto g = perturbed(0.01);
    const ConjugacyResult r = solve_conjugacy(*s.f, *g, s.J, s.grid, s.config());
    const double lip = hyperbolicity_constants(*g, 64).l;
    auto h = [&](std::size_t node) { return Point{wrap(s.grid.point(node).coords + r.eta.values[node], ManifoldKind::Torus2)}; };
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> pick(0, s.grid.size() - 1);
    const double n = s.grid.resolution();
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t node = pick(rng);
        std::size_t fn = node;
        Point gn = h(node);
        double factor = 0.0;
        for (int k = 1; k <= 20; ++k) {
            const Point next = s.f->evaluate(s.grid.point(fn));
            fn = s.grid.index(static_cast<int>(std::lround(next.coords(0) * n)), static_cast<int>(std::lround(next.coords(1) * n)));
            gn = g->evaluate(gn);
            factor += std::pow(lip, k - 1);
            const double gap = dist(h(fn), gn, s.f->frame(), ManifoldKind::Torus2);
            CHECK(gap <= 20.0 * r.residual * factor + 1e-15);
        }
    }
}

TEST_CASE("the fixed point does not depend on the initial field") {
    const Setup& s = setup();
    const auto g = perturbed(0.01);
    SolverConfig a = s.config();
    SolverConfig b = s.config();
    DiscreteVectorField x0 = random_trig_field(s.grid, s.f->frame(), 5);
    x0 *= 0.5 * b.r_ball / x0.sup_norm();
    b.x0 = x0;
    const ConjugacyResult ra = solve_conjugacy(*s.f, *g, s.J, s.grid, a);
    const ConjugacyResult rb = solve_conjugacy(*s.f, *g, s.J, s.grid, b);
    CHECK((ra.eta - rb.eta).sup_norm() <= 10.0 * a.tol);
}

TEST_CASE("oversized perturbation fails the gate") {
    const Setup& s = setup();
    const auto g = make_conjugated(s.f, default_conjugacy(0.08, ManifoldKind::Torus2));
    try {
        (void)solve_conjugacy(*s.f, *g, s.J, s.grid, s.config());
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Divergence);
    }
}

TEST_CASE("homeomorphism certificate") {
    const Setup& s = setup();
    const NormContext ctx(*s.f, s.grid, DfWindow{5}, 2000, 1);
    const DiscreteVectorField zero(s.grid, s.f->frame());
    const HomeoCertificate id = check_homeomorphism(zero, ctx);
    CHECK(id.positive);
    CHECK(id.injective);
    CHECK(id.degree == Eigen::Matrix2i::Identity());

    // h1 = x1 + 0.3 sin 2 pi x1 folds over itself.
    DiscreteVectorField fold(s.grid, s.f->frame());
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
        fold.values[i] = Vec2(0.3 * std::sin(kTwoPi * s.grid.point(i).coords(0)), 0.0);
    }
    const HomeoCertificate bad = check_homeomorphism(fold, ctx);
    CHECK_FALSE(bad.positive);
    CHECK_FALSE(bad.injective);
    REQUIRE(bad.witness.has_value());
    CHECK(bad.witness->first != bad.witness->second);
    const Point a = s.grid.point(bad.witness->first);
    const Point b = s.grid.point(bad.witness->second);
    const Point ha{wrap(a.coords + fold.values[bad.witness->first], ManifoldKind::Torus2)};
    const Point hb{wrap(b.coords + fold.values[bad.witness->second], ManifoldKind::Torus2)};
    CHECK(dist(ha, hb, MetricFrame::identity(), ManifoldKind::Torus2) < 0.5 * s.grid.spacing() + 1e-12);
}

TEST_CASE("Hoelder report of the zero field") {
    const Setup& s = setup();
    const NormContext ctx(*s.f, s.grid, DfWindow{5}, 2000, 1);
    const HolderReport h = holder_report(DiscreteVectorField(s.grid, s.f->frame()), *s.f, s.hc, {0.25, 0.5}, ctx);
    for (const auto& e : h.entries) {
        CHECK(e.report.c0 == 0.0);
        CHECK(e.report.holder == 0.0);
        CHECK(e.report.df_lip == 0.0);
    }
    CHECK_FALSE(h.alpha_hat.has_value());
}

TEST_CASE("Morse-Smale circle conjugacy") {
    const auto f = make_morse_smale_circle(0.05);
    const auto g = make_conjugated(f, default_conjugacy(0.005, ManifoldKind::Circle));
    const HyperbolicityConstants hc = hyperbolicity_constants(*f, 256);
    const Grid grid(256, ManifoldKind::Circle);
    const BasicSetData sets = basic_sets(*f);
    const RightInverse J(f, ComponentProjectors::morse_smale(sets), PartitionOfUnity::circle_bump(sets), hc, grid, 60);
    SolverConfig cfg;
    cfg.alpha = hc.alpha;
    cfg.window = DfWindow{8};
    const ConjugacyResult r = solve_conjugacy(*f, *g, J, grid, cfg);
    CHECK(r.converged);
    CHECK(r.homeo.positive);
    for (const auto& m : match_periodic_points(*f, *g, J, 1)) CHECK(m.error <= 1e-6);
}
