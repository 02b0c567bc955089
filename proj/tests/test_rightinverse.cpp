#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hyperstab/conjugacy.hpp"
#include "hyperstab/error.hpp"
#include "hyperstab/rightinverse.hpp"

#include <cmath>
#include <numbers>

using namespace hyperstab;

namespace {

const IntMat2 kCat = (IntMat2() << 2, 1, 1, 1).finished();

struct CatFixture {
    ModelMapPtr f = make_linear_toral(kCat);
    HyperbolicityConstants hc = hyperbolicity_constants(*f, 64);
    Grid grid{64, ManifoldKind::Torus2};

    RightInverse inverse(int n_trunc) const {
        return RightInverse(f, ComponentProjectors::exact_linear(*f), PartitionOfUnity::single(ManifoldKind::Torus2),
                            hc, grid, n_trunc);
    }
};

struct CircleFixture {
    ModelMapPtr f = make_morse_smale_circle(0.05);
    HyperbolicityConstants hc = hyperbolicity_constants(*f, 512);
    Grid grid{512, ManifoldKind::Circle};
    BasicSetData sets = basic_sets(*f);

    RightInverse inverse(int n_trunc) const {
        return RightInverse(f, ComponentProjectors::morse_smale(sets), PartitionOfUnity::circle_bump(sets), hc, grid,
                            n_trunc);
    }
};

double max_abs_diff(const DiscreteVectorField& a, const DiscreteVectorField& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) d = std::max(d, (a.values[i] - b.values[i]).cwiseAbs().maxCoeff());
    return d;
}

DiscreteVectorField constant_field(const Grid& grid, const MetricFrame& frame, const Vec2& c) {
    DiscreteVectorField f(grid, frame);
    for (auto& v : f.values) v = c;
    return f;
}

}  // namespace

TEST_CASE("push-forward") {
    const CatFixture fx;
    const DiscreteVectorField zero(fx.grid, fx.f->frame());
    CHECK(push_forward(*fx.f, zero).sup_norm() == 0.0);
    const Vec2 c(0.3, -0.1);
    const DiscreteVectorField pushed = push_forward(*fx.f, constant_field(fx.grid, fx.f->frame(), c));
    const Vec2 ac = kCat.cast<double>() * c;
    for (const Vec2& v : pushed.values) CHECK((v - ac).cwiseAbs().maxCoeff() < 1e-15);

    const auto g = make_perturbed_toral(kCat, default_toral_perturbation(0.01));
    const DiscreteVectorField a = random_trig_field(fx.grid, g->frame(), 1);
    const DiscreteVectorField b = random_trig_field(fx.grid, g->frame(), 2);
    const DiscreteVectorField lhs = push_forward(*g, 2.0 * a + (-0.5) * b);
    const DiscreteVectorField rhs = 2.0 * push_forward(*g, a) + (-0.5) * push_forward(*g, b);
    CHECK(max_abs_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("decomposition into stable and unstable parts") {
    const CatFixture fx;
    const RightInverse J = fx.inverse(10);
    const DiscreteVectorField eta = random_trig_field(fx.grid, fx.f->frame(), 3);
    const auto parts = J.decompose(eta);
    REQUIRE(parts.size() == 1);
    CHECK(max_abs_diff(parts[0].stable + parts[0].unstable, eta) < 1e-15);

    const Eigensplitting e = eigensplitting(kCat);
    const auto along_s = J.decompose(constant_field(fx.grid, fx.f->frame(), 0.2 * e.stable));
    CHECK(along_s[0].unstable.sup_norm() < 1e-15);

    const CircleFixture cx;
    const RightInverse Jc = cx.inverse(20);
    const auto cparts = Jc.decompose(random_trig_field(cx.grid, cx.f->frame(), 4));
    REQUIRE(cparts.size() == 2);
    int rank_zero_stable = 0;
    for (std::size_t i = 0; i < 2; ++i) {
        if (!Jc.projectors().has_stable(i)) {
            CHECK(cparts[i].stable.sup_norm() == 0.0);
            ++rank_zero_stable;
        }
    }
    CHECK(rank_zero_stable == 1);
}

TEST_CASE("partition of unity sums to one") {
    const CircleFixture cx;
    const auto theta = cx.sets.components.size() == 2 ? PartitionOfUnity::circle_bump(cx.sets)
                                                      : PartitionOfUnity::single(ManifoldKind::Circle);
    const auto values = theta.on_grid(cx.grid);
    for (std::size_t j = 0; j < cx.grid.size(); ++j) {
        CHECK(values[0][j] + values[1][j] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(values[0][j] >= 0.0);
        CHECK(values[1][j] >= 0.0);
    }
}

TEST_CASE("J on constant fields of the cat map is a geometric series") {
    const CatFixture fx;
    const int n = 40;
    const RightInverse J = fx.inverse(n);
    const Eigensplitting e = eigensplitting(kCat);
    CHECK(J.apply(DiscreteVectorField(fx.grid, fx.f->frame())).sup_norm() == 0.0);

    const Vec2 cs = 0.1 * e.stable;
    const double gs = (1.0 - std::pow(e.mu_stable, n + 1)) / (1.0 - e.mu_stable);
    const DiscreteVectorField js = J.apply(constant_field(fx.grid, fx.f->frame(), cs));
    for (const Vec2& v : js.values) CHECK((v - gs * cs).norm() <= 1e-15 + J.budget().tail_bound * cs.norm());

    const Vec2 cu = 0.1 * e.unstable;
    double gu = 0.0;
    for (int k = 1; k <= n; ++k) gu -= std::pow(e.mu_unstable, -k);
    const DiscreteVectorField ju = J.apply(constant_field(fx.grid, fx.f->frame(), cu));
    for (const Vec2& v : ju.values) CHECK((v - gu * cu).norm() <= 1e-15 + J.budget().tail_bound * cu.norm());
}

TEST_CASE("J is linear") {
    const CatFixture fx;
    const RightInverse J = fx.inverse(20);
    const DiscreteVectorField a = random_trig_field(fx.grid, fx.f->frame(), 5);
    const DiscreteVectorField b = random_trig_field(fx.grid, fx.f->frame(), 6);
    CHECK(max_abs_diff(J.apply(3.0 * a + (-2.0) * b), 3.0 * J.apply(a) + (-2.0) * J.apply(b)) < 1e-10);
}

TEST_CASE("right-inverse residual on the cat map") {
    const CatFixture fx;
    const RightInverse J = fx.inverse(40);
    CHECK(J.verify(DiscreteVectorField(fx.grid, fx.f->frame())).residual == 0.0);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const RightInverseResidual r = J.verify(random_trig_field(fx.grid, fx.f->frame(), seed));
        CHECK(r.residual <= 3.0 * r.tail_bound * r.eta_norm);
    }
    const SeriesBudget& b = J.budget();
    CHECK(b.tail_bound == doctest::Approx(b.K_decay * std::pow(b.rho, 41) / (1.0 - b.rho)).epsilon(1e-14));
}

TEST_CASE("Morse-Smale circle with two components") {
    const CircleFixture cx;
    const RightInverse J60 = cx.inverse(60);
    const RightInverse J30 = cx.inverse(30);
    double worst60 = 0.0;
    double worst30 = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const DiscreteVectorField eta = random_trig_field(cx.grid, cx.f->frame(), seed);
        worst60 = std::max(worst60, J60.verify(eta).residual);
        worst30 = std::max(worst30, J30.verify(eta).residual);
    }
    CHECK(worst60 <= 1e-6);
    // Thirty more terms shrink the tail by rho^30; at least a factor of two is required.
    CHECK(worst60 <= 0.5 * worst30);
}

TEST_CASE("decay of push-forward iterates") {
    const CatFixture fx;
    const RightInverse J = fx.inverse(30);
    const DiscreteVectorField eta = random_trig_field(fx.grid, fx.f->frame(), 2);
    const DecayReport d = J.measure_decay(eta, 0, 30);
    CHECK(d.fitted_rate == doctest::Approx((3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-6));
    const DecayReport z = J.measure_decay(DiscreteVectorField(fx.grid, fx.f->frame()), 0, 10);
    for (double v : z.norms) CHECK(v == 0.0);

    const CircleFixture cx;
    const RightInverse Jc = cx.inverse(60);
    for (std::size_t i = 0; i < Jc.projectors().count(); ++i) {
        if (!Jc.projectors().has_stable(i)) continue;
        const DecayReport dc = Jc.measure_decay(random_trig_field(cx.grid, cx.f->frame(), 1), i, 60);
        CHECK(dc.fitted_rate <= 1.05 * Jc.budget().rho);
    }
}

TEST_CASE("Hoelder growth of push-forward iterates") {
    const CatFixture fx;
    const RightInverse J = fx.inverse(20);
    const DfWindow w{4};
    const NormContext ctx(*fx.f, fx.grid, w, 2000, 1);
    const Eigensplitting e = eigensplitting(kCat);

    const HolderGrowthReport c = J.measure_holder_growth(constant_field(fx.grid, fx.f->frame(), 0.1 * e.stable), 0, 10, ctx);
    CHECK(c.within);
    for (double v : c.values) CHECK(v <= 1e-12);

    const HolderGrowthReport r = J.measure_holder_growth(random_trig_field(fx.grid, fx.f->frame(), 3), 0, 10, ctx);
    CHECK(r.within);
    const double step = J.budget().rho * std::pow(fx.hc.l, fx.hc.alpha);
    for (std::size_t n = 1; n < r.values.size(); ++n) {
        if (r.values[n - 1] > 1e-12) CHECK(r.values[n] <= 1.05 * step * r.values[n - 1]);
    }

    const HolderGrowthReport z = J.measure_holder_growth(DiscreteVectorField(fx.grid, fx.f->frame()), 0, 5, ctx);
    for (double v : z.values) CHECK(v == 0.0);
}

TEST_CASE("J is bounded on the combined norm") {
    const CatFixture fx;
    const RightInverse J = fx.inverse(40);
    const DfWindow w{4};
    const JNormEstimate cj = estimate_j_norm(J, fx.hc.alpha, w, 64, 20, 100);
    const NormContext ctx(*fx.f, fx.grid, w, 2000, 1);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const DiscreteVectorField eta = random_trig_field(fx.grid, fx.f->frame(), seed);
        const double ratio = field_norms(J.apply(eta), fx.hc.alpha, ctx).combined /
                             field_norms(eta, fx.hc.alpha, ctx).combined;
        CHECK(ratio <= 1.5 * cj.alpha_f);
    }
}

TEST_CASE("misaligned projectors are reported as series non-decay") {
    const CatFixture fx;
    const auto other = make_linear_toral((IntMat2() << 2, -1, -1, 1).finished());
    try {
        RightInverse bad(fx.f, ComponentProjectors::exact_linear(*other), PartitionOfUnity::single(ManifoldKind::Torus2),
                         fx.hc, fx.grid, 20);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SeriesNonDecay);
    }
}
