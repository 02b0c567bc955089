#include "hyperstab/systems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace hyperstab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kNewtonSteps = 50;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Mat2 to_real(const IntMat2& a) { return a.cast<double>(); }

ManifoldKind manifold_of(const ModelMap::Kind& kind) {
    return std::visit(
        overloaded{
            [](const LinearToral&) { return ManifoldKind::Torus2; },
            [](const PerturbedToral&) { return ManifoldKind::Torus2; },
            [](const MorseSmaleCircle&) { return ManifoldKind::Circle; },
            [](const Conjugated& c) { return c.base->manifold(); },
            [](const Inverted& i) { return i.base->manifold(); },
        },
        kind);
}

// Scalar derivative on the circle is stored as an isotropic 2x2 matrix so
// operator norms and inverses behave like the 1-d quantities.
Mat2 isotropic(double d) { return d * Mat2::Identity(); }

// Solves z + s(z) = y in the lift, where s has small Lipschitz constant.
Vec2 invert_near_identity(const TrigSeries& s, const Vec2& y, ManifoldKind kind) {
    Vec2 z = y;
    for (int it = 0; it < kNewtonSteps; ++it) {
        const Vec2 r = z + s.value(z) - y;
        Mat2 d = Mat2::Identity() + s.jacobian(z);
        if (kind == ManifoldKind::Circle) d = isotropic(d(0, 0));
        const Vec2 step = d.partialPivLu().solve(r);
        z -= step;
        if (step.lpNorm<Eigen::Infinity>() < 1e-15 && r.lpNorm<Eigen::Infinity>() < 1e-13) return z;
    }
    if ((z + s.value(z) - y).lpNorm<Eigen::Infinity>() < 1e-12) return z;
    throw std::runtime_error("Newton inversion of conjugating map did not converge");
}

Mat2 series_jacobian(const TrigSeries& s, const Vec2& x, ManifoldKind kind) {
    Mat2 d = Mat2::Identity() + s.jacobian(x);
    if (kind == ManifoldKind::Circle) d = isotropic(d(0, 0));
    return d;
}

}  // namespace

Vec2 TrigSeries::value(const Vec2& x) const {
    Vec2 out = Vec2::Zero();
    for (const auto& t : terms) {
        out(t.component) += t.coeff * std::sin(kTwoPi * (t.k1 * x(0) + t.k2 * x(1)) + t.phase);
    }
    return amplitude * out;
}

Mat2 TrigSeries::jacobian(const Vec2& x) const {
    Mat2 out = Mat2::Zero();
    for (const auto& t : terms) {
        const double c = t.coeff * kTwoPi * std::cos(kTwoPi * (t.k1 * x(0) + t.k2 * x(1)) + t.phase);
        out(t.component, 0) += c * t.k1;
        out(t.component, 1) += c * t.k2;
    }
    return amplitude * out;
}

double TrigSeries::jacobian_bound() const {
    double row[2] = {0.0, 0.0};
    for (const auto& t : terms) {
        row[t.component] += std::abs(t.coeff) * kTwoPi * std::hypot(t.k1, t.k2);
    }
    return std::abs(amplitude) * std::hypot(row[0], row[1]);
}

ModelMap::ModelMap(Kind kind, MetricFrame frame)
    : kind_(std::move(kind)), frame_(frame), manifold_(manifold_of(kind_)) {}

std::string ModelMap::describe() const {
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const LinearToral& l) {
                       os << "linear_toral[" << l.matrix(0, 0) << "," << l.matrix(0, 1) << ";"
                          << l.matrix(1, 0) << "," << l.matrix(1, 1) << "]";
                   },
                   [&](const PerturbedToral& p) {
                       os << "perturbed_toral[" << p.matrix(0, 0) << "," << p.matrix(0, 1) << ";"
                          << p.matrix(1, 0) << "," << p.matrix(1, 1) << "] eps=" << p.perturbation.amplitude;
                   },
                   [&](const MorseSmaleCircle& c) { os << "morse_smale_circle a=" << c.amplitude; },
                   [&](const Conjugated& c) {
                       os << "conjugated(" << c.base->describe() << ") phi_amp=" << c.phi.amplitude;
                   },
                   [&](const Inverted& i) { os << "inverse(" << i.base->describe() << ")"; },
               },
               kind_);
    return os.str();
}

bool ModelMap::is_linear() const noexcept { return std::holds_alternative<LinearToral>(kind_); }

Vec2 ModelMap::lift_evaluate(const Vec2& x) const {
    return std::visit(
        overloaded{
            [&](const LinearToral& l) -> Vec2 { return to_real(l.matrix) * x; },
            [&](const PerturbedToral& p) -> Vec2 { return to_real(p.matrix) * x + p.perturbation.value(x); },
            [&](const MorseSmaleCircle& c) -> Vec2 {
                return Vec2(x(0) + c.amplitude * std::sin(kTwoPi * x(0)), 0.0);
            },
            [&](const Conjugated& c) -> Vec2 {
                const Vec2 pre = invert_near_identity(c.phi, x, manifold_);
                const Vec2 img = c.base->lift_evaluate(pre);
                return img + c.phi.value(img);
            },
            [&](const Inverted& i) -> Vec2 {
                return i.base->inverse(Point{wrap(x, manifold_)}).coords;
            },
        },
        kind_);
}

Point ModelMap::evaluate(const Point& x) const {
    if (const auto* inv = std::get_if<Inverted>(&kind_)) return inv->base->inverse(x);
    return Point{wrap(lift_evaluate(x.coords), manifold_)};
}

Point ModelMap::inverse(const Point& y) const {
    return std::visit(
        overloaded{
            [&](const LinearToral& l) -> Point {
                const Mat2 inv = to_real(l.matrix).inverse();
                return Point{wrap(inv * y.coords, manifold_)};
            },
            [&](const PerturbedToral& p) -> Point {
                const Mat2 a = to_real(p.matrix);
                const Mat2 ainv = a.inverse();
                Vec2 z = ainv * y.coords;
                for (int it = 0; it < kNewtonSteps; ++it) {
                    const Vec2 r = a * z + p.perturbation.value(z) - y.coords;
                    const Mat2 d = a + p.perturbation.jacobian(z);
                    const Vec2 step = d.partialPivLu().solve(r);
                    z -= step;
                    if (step.lpNorm<Eigen::Infinity>() < 1e-15) return Point{wrap(z, manifold_)};
                }
                if ((a * z + p.perturbation.value(z) - y.coords).lpNorm<Eigen::Infinity>() < 1e-12) {
                    return Point{wrap(z, manifold_)};
                }
                throw std::runtime_error("Newton inverse did not converge in 50 steps: map is not a diffeomorphism");
            },
            [&](const MorseSmaleCircle& c) -> Point {
                double z = y.coords(0);
                for (int it = 0; it < kNewtonSteps; ++it) {
                    const double r = z + c.amplitude * std::sin(kTwoPi * z) - y.coords(0);
                    const double d = 1.0 + kTwoPi * c.amplitude * std::cos(kTwoPi * z);
                    const double step = r / d;
                    z -= step;
                    if (std::abs(step) < 1e-15) return Point{wrap(Vec2(z, 0.0), manifold_)};
                }
                if (std::abs(z + c.amplitude * std::sin(kTwoPi * z) - y.coords(0)) < 1e-12) {
                    return Point{wrap(Vec2(z, 0.0), manifold_)};
                }
                throw std::runtime_error("Newton inverse did not converge in 50 steps: map is not a diffeomorphism");
            },
            [&](const Conjugated& c) -> Point {
                const Vec2 a = invert_near_identity(c.phi, y.coords, manifold_);
                const Point b = c.base->inverse(Point{wrap(a, manifold_)});
                return Point{wrap(b.coords + c.phi.value(b.coords), manifold_)};
            },
            [&](const Inverted& i) -> Point { return i.base->evaluate(y); },
        },
        kind_);
}

Mat2 ModelMap::jacobian(const Point& x) const {
    return std::visit(
        overloaded{
            [&](const LinearToral& l) -> Mat2 { return to_real(l.matrix); },
            [&](const PerturbedToral& p) -> Mat2 {
                return to_real(p.matrix) + p.perturbation.jacobian(x.coords);
            },
            [&](const MorseSmaleCircle& c) -> Mat2 {
                return isotropic(1.0 + kTwoPi * c.amplitude * std::cos(kTwoPi * x.coords(0)));
            },
            [&](const Conjugated& c) -> Mat2 {
                const Vec2 pre = invert_near_identity(c.phi, x.coords, manifold_);
                const Point pre_p{wrap(pre, manifold_)};
                const Point img = c.base->evaluate(pre_p);
                return series_jacobian(c.phi, img.coords, manifold_) * c.base->jacobian(pre_p) *
                       series_jacobian(c.phi, pre_p.coords, manifold_).inverse();
            },
            [&](const Inverted& i) -> Mat2 { return i.base->jacobian(i.base->inverse(x)).inverse(); },
        },
        kind_);
}

Point ModelMap::iterate(const Point& x, int n) const {
    Point p = x;
    for (int k = 0; k < n; ++k) p = evaluate(p);
    for (int k = 0; k < -n; ++k) p = inverse(p);
    return p;
}

Eigensplitting eigensplitting(const IntMat2& a) {
    const Mat2 m = to_real(a);
    const double tr = m.trace();
    const double det = m.determinant();
    const double disc = tr * tr - 4.0 * det;
    if (disc <= 0.0) throw std::invalid_argument("matrix has no real eigenvalues");
    const double s = std::sqrt(disc);
    double mu1 = 0.5 * (tr + s);
    double mu2 = 0.5 * (tr - s);
    if (std::abs(mu1) < std::abs(mu2)) std::swap(mu1, mu2);
    if (!(std::abs(mu1) > 1.0 && std::abs(mu2) < 1.0)) {
        throw std::invalid_argument("matrix is not hyperbolic");
    }
    auto eigvec = [&](double mu) {
        // (m - mu I) v = 0; pick the better-conditioned row.
        Vec2 v;
        if (std::abs(m(0, 1)) + std::abs(m(0, 0) - mu) >= std::abs(m(1, 0)) + std::abs(m(1, 1) - mu)) {
            v = Vec2(m(0, 1), mu - m(0, 0));
        } else {
            v = Vec2(mu - m(1, 1), m(1, 0));
        }
        v.normalize();
        if (v(0) < 0.0 || (v(0) == 0.0 && v(1) < 0.0)) v = -v;
        return v;
    };
    return {eigvec(mu1), eigvec(mu2), mu1, mu2};
}

namespace {

MetricFrame toral_frame(const IntMat2& a, bool eigenframe) {
    if (!eigenframe) return MetricFrame::identity();
    const auto e = eigensplitting(a);
    Mat2 b;
    b.col(0) = e.unstable;
    b.col(1) = e.stable;
    return MetricFrame::from_basis(b);
}

void validate_matrix(const IntMat2& a) {
    const int det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    if (std::abs(det) != 1) throw std::invalid_argument("toral matrix must have |det| = 1");
    (void)eigensplitting(a);
}

}  // namespace

ModelMapPtr make_linear_toral(const IntMat2& a, bool eigenframe) {
    validate_matrix(a);
    return std::make_shared<const ModelMap>(LinearToral{a}, toral_frame(a, eigenframe));
}

ModelMapPtr make_perturbed_toral(const IntMat2& a, TrigSeries perturbation, bool eigenframe) {
    validate_matrix(a);
    for (const auto& t : perturbation.terms) {
        if (t.component < 0 || t.component > 1) throw std::invalid_argument("trig term component out of range");
    }
    const double ainv_norm = to_real(a).inverse().jacobiSvd().singularValues()(0);
    if (perturbation.jacobian_bound() * ainv_norm >= 1.0) {
        throw std::invalid_argument("perturbation amplitude exceeds the diffeomorphism bound |Dp| |A^{-1}| < 1");
    }
    return std::make_shared<const ModelMap>(PerturbedToral{a, std::move(perturbation)}, toral_frame(a, eigenframe));
}

ModelMapPtr make_morse_smale_circle(double amplitude) {
    if (!(amplitude > 0.0) || kTwoPi * amplitude >= 1.0) {
        throw std::invalid_argument("Morse-Smale amplitude must satisfy 0 < 2 pi a < 1");
    }
    return std::make_shared<const ModelMap>(MorseSmaleCircle{amplitude}, MetricFrame::identity());
}

ModelMapPtr make_conjugated(ModelMapPtr base, TrigSeries phi) {
    if (!base) throw std::invalid_argument("conjugated map needs a base");
    for (const auto& t : phi.terms) {
        if (t.component < 0 || t.component >= dimension(base->manifold()) ||
            (base->manifold() == ManifoldKind::Circle && t.k2 != 0)) {
            throw std::invalid_argument("conjugating series does not fit the manifold");
        }
    }
    if (phi.jacobian_bound() >= 1.0) {
        throw std::invalid_argument("conjugating map is not invertible: |D(phi - id)| >= 1");
    }
    const MetricFrame frame = base->frame();
    return std::make_shared<const ModelMap>(Conjugated{std::move(base), std::move(phi)}, frame);
}

ModelMapPtr make_inverted(ModelMapPtr base) {
    const MetricFrame frame = base->frame();
    return std::make_shared<const ModelMap>(Inverted{std::move(base)}, frame);
}

TrigSeries default_toral_perturbation(double amplitude) {
    return TrigSeries{amplitude, {{0, 1.0, 0, 1, 0.3}, {1, 1.0, 1, 0, 0.7}}};
}

TrigSeries default_conjugacy(double amplitude, ManifoldKind kind) {
    if (kind == ManifoldKind::Circle) return TrigSeries{amplitude, {{0, 1.0, 1, 0, 0.0}}};
    return TrigSeries{amplitude, {{0, 1.0, 0, 1, 0.0}, {1, 1.0, 1, 0, 0.0}}};
}

const IntMat2* linear_part(const ModelMap& m) {
    return std::visit(overloaded{
                          [](const LinearToral& l) -> const IntMat2* { return &l.matrix; },
                          [](const PerturbedToral& p) -> const IntMat2* { return &p.matrix; },
                          [](const MorseSmaleCircle&) -> const IntMat2* { return nullptr; },
                          [](const Conjugated& c) -> const IntMat2* { return linear_part(*c.base); },
                          [](const Inverted& i) -> const IntMat2* { return linear_part(*i.base); },
                      },
                      m.kind());
}

namespace {

double grid_lipschitz(const ModelMap& m, int resolution) {
    const Grid grid(resolution, m.manifold());
    double l = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Mat2 d = m.jacobian(grid.point(i));
        l = std::max({l, m.frame().operator_norm(d), m.frame().operator_norm(d.inverse())});
    }
    return l;
}

bool is_pure_linear(const ModelMap& m) {
    if (m.is_linear()) return true;
    if (const auto* inv = std::get_if<Inverted>(&m.kind())) return is_pure_linear(*inv->base);
    return false;
}

}  // namespace

HyperbolicityConstants hyperbolicity_constants(const ModelMap& m, int resolution) {
    HyperbolicityConstants c;
    if (const IntMat2* a = linear_part(m)) {
        const auto e = eigensplitting(*a);
        // Contraction of Tf on E^s and of Tf^{-1} on E^u, measured in the frame.
        const Mat2 am = to_real(*a);
        const MetricFrame& fr = m.frame();
        const double on_stable = fr.norm(am * e.stable) / fr.norm(e.stable);
        const double on_unstable = fr.norm(am.inverse() * e.unstable) / fr.norm(e.unstable);
        c.lambda = std::max(on_stable, on_unstable);
        if (!is_pure_linear(m)) c.lambda *= 1.02;
    } else {
        const BasicSetData sets = basic_sets(m);
        c.lambda = 0.0;
        for (const auto& comp : sets.components) {
            for (const auto& p : comp.points) {
                const double d = std::abs(m.jacobian(p)(0, 0));
                c.lambda = std::max(c.lambda, d > 1.0 ? 1.0 / d : d);
            }
        }
    }
    c.l = grid_lipschitz(m, resolution);
    if (!(c.lambda > 0.0 && c.lambda < 1.0)) {
        throw std::domain_error("map is not hyperbolic: contraction rate outside (0,1)");
    }
    const double alpha = std::log(0.95 / c.lambda) / std::log(c.l);
    c.alpha = std::min(0.95, alpha);
    if (!(c.alpha > 0.0) || !(c.lambda * std::pow(c.l, c.alpha) < 1.0)) {
        throw std::domain_error("no Hoelder exponent alpha in (0,1) satisfies lambda * l^alpha < 1");
    }
    const double upper = 0.98 / std::pow(c.l, c.alpha);
    c.lambda_prime = std::sqrt(c.lambda * upper);
    return c;
}

std::vector<Point> periodic_points(const ModelMap& m, int period, int seeds_per_dim) {
    const ManifoldKind kind = m.manifold();
    std::vector<Point> found;
    const int ny = kind == ManifoldKind::Circle ? 1 : seeds_per_dim;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < seeds_per_dim; ++i) {
            Point seed;
            seed.coords(0) = (i + 0.5) / seeds_per_dim;
            if (kind == ManifoldKind::Torus2) seed.coords(1) = (j + 0.5) / seeds_per_dim;
            Point p;
            try {
                p = newton_periodic_point(m, seed, period);
            } catch (const std::runtime_error&) {
                continue;
            }
            bool dup = false;
            for (const auto& q : found) {
                if (dist(p, q, MetricFrame::identity(), kind) < 1e-8) {
                    dup = true;
                    break;
                }
            }
            if (!dup) found.push_back(p);
        }
    }
    std::sort(found.begin(), found.end(), [](const Point& a, const Point& b) {
        return a.coords(0) < b.coords(0) || (a.coords(0) == b.coords(0) && a.coords(1) < b.coords(1));
    });
    return found;
}

Point newton_periodic_point(const ModelMap& m, const Point& seed, int period) {
    const ManifoldKind kind = m.manifold();
    Point z = seed;
    for (int it = 0; it < kNewtonSteps; ++it) {
        Point img = z;
        Mat2 d = Mat2::Identity();
        for (int k = 0; k < period; ++k) {
            d = m.jacobian(img) * d;
            img = m.evaluate(img);
        }
        const Vec2 r = min_lift(img.coords - z.coords, kind);
        Mat2 sys = d - Mat2::Identity();
        if (kind == ManifoldKind::Circle) sys(1, 1) = 1.0, sys(0, 1) = sys(1, 0) = 0.0;
        if (std::abs(sys.determinant()) < 1e-14) throw std::runtime_error("singular Newton system");
        const Vec2 step = sys.partialPivLu().solve(r);
        z = Point{wrap(z.coords - step, kind)};
        if (step.lpNorm<Eigen::Infinity>() < 1e-15) return z;
        if (step.lpNorm<Eigen::Infinity>() > 0.5) throw std::runtime_error("Newton step left the basin");
    }
    Point img = m.iterate(z, period);
    if (min_lift(img.coords - z.coords, kind).lpNorm<Eigen::Infinity>() < 1e-13) return z;
    throw std::runtime_error("Newton periodic point search did not converge");
}

BasicSetData basic_sets(const ModelMap& m) {
    BasicSetData data;
    if (m.manifold() == ManifoldKind::Torus2) {
        BasicSetComponent whole;
        whole.whole_manifold = true;
        whole.unstable_rank = 1;
        whole.stable_rank = 1;
        data.components.push_back(whole);
        return data;
    }
    const auto fixed = periodic_points(m, 1, 32);
    std::vector<BasicSetComponent> repellers;
    std::vector<BasicSetComponent> attractors;
    for (const auto& p : fixed) {
        const double d = std::abs(m.jacobian(p)(0, 0));
        BasicSetComponent c;
        c.points = {p};
        if (d > 1.0) {
            c.unstable_rank = 1;
            repellers.push_back(c);
        } else {
            c.stable_rank = 1;
            attractors.push_back(c);
        }
    }
    for (auto& c : repellers) data.components.push_back(c);
    for (auto& c : attractors) data.components.push_back(c);
    // Radius: a quarter of the closest separation between components.
    double sep = 0.5;
    for (std::size_t i = 0; i < data.components.size(); ++i) {
        for (std::size_t j = i + 1; j < data.components.size(); ++j) {
            sep = std::min(sep, dist(data.components[i].points[0], data.components[j].points[0],
                                     m.frame(), m.manifold()));
        }
    }
    for (auto& c : data.components) c.neighborhood_radius = 0.25 * sep;
    return data;
}

double min_jacobian_determinant(const ModelMap& m, const Grid& grid) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Mat2 d = m.jacobian(grid.point(i));
        const double det = m.manifold() == ManifoldKind::Circle ? d(0, 0) : d.determinant();
        best = std::min(best, std::abs(det));
    }
    return best;
}

double inverse_residual(const ModelMap& m, const Grid& grid) {
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Point x = grid.point(i);
        worst = std::max(worst, dist(m.evaluate(m.inverse(x)), x, MetricFrame::identity(), m.manifold()));
    }
    return worst;
}

}  // namespace hyperstab
