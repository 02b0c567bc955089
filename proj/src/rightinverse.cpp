#include "hyperstab/rightinverse.hpp"

#include "hyperstab/error.hpp"
#include "hyperstab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hyperstab {

namespace {

LVec2 widen(const Vec2& v) { return v.cast<long double>(); }
LMat2 widen(const Mat2& m) { return m.cast<long double>(); }

double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

Vec2 node_value(const DiscreteVectorField& eta, const Point& x) { return interpolate(eta, x).components; }

double lframe_norm(const MetricFrame& frame, const LVec2& v) {
    return (widen(frame.inverse()) * v).norm();
}

}  // namespace

DiscreteVectorField push_forward(const ModelMap& m, const DiscreteVectorField& eta) {
    DiscreteVectorField out(eta.grid, eta.frame);
    parallel_for(eta.grid.size(), [&](std::size_t i) {
        const Point p = m.inverse(eta.grid.point(i));
        out.values[i] = m.jacobian(p) * node_value(eta, p);
    });
    return out;
}

PartitionOfUnity PartitionOfUnity::single(ManifoldKind kind) {
    PartitionOfUnity p;
    p.kind_ = kind;
    return p;
}

PartitionOfUnity PartitionOfUnity::circle_bump(const BasicSetData& sets, double inner, double outer) {
    if (sets.count() != 2 || sets.components[0].unstable_rank != 1 || sets.components[1].stable_rank != 1) {
        throw std::invalid_argument("circle partition needs one repeller and one attractor");
    }
    if (!(0.0 < inner && inner < outer && outer < 0.5)) {
        throw std::invalid_argument("circle partition needs 0 < inner < outer < 1/2");
    }
    PartitionOfUnity p;
    p.single_ = false;
    p.kind_ = ManifoldKind::Circle;
    p.repeller_ = sets.components[0].points[0].coords(0);
    p.inner_ = inner;
    p.outer_ = outer;
    return p;
}

double PartitionOfUnity::value(std::size_t i, const Point& x) const {
    if (i >= count()) throw std::out_of_range("partition component index");
    if (single_) return 1.0;
    const double d = std::abs(min_lift(Vec2(x.coords(0) - repeller_, 0.0), kind_)(0));
    const double s = smooth_step((d - inner_) / (outer_ - inner_));
    return i == 0 ? 1.0 - s : s;
}

std::vector<std::vector<double>> PartitionOfUnity::on_grid(const Grid& grid) const {
    std::vector<std::vector<double>> out(count(), std::vector<double>(grid.size()));
    for (std::size_t i = 0; i < count(); ++i) {
        for (std::size_t j = 0; j < grid.size(); ++j) out[i][j] = value(i, grid.point(j));
    }
    return out;
}

ComponentProjectors ComponentProjectors::exact_linear(const ModelMap& m) {
    const IntMat2* a = linear_part(m);
    if (a == nullptr) throw std::invalid_argument("exact projectors need a toral map");
    const long double p = (*a)(0, 0);
    const long double q = (*a)(0, 1);
    const long double r = (*a)(1, 0);
    const long double s = (*a)(1, 1);
    const long double tr = p + s;
    const long double det = p * s - q * r;
    const long double disc = tr * tr - 4 * det;
    if (!(disc > 0)) throw std::invalid_argument("matrix is not hyperbolic");
    const long double mu_u = (tr + std::copysign(std::sqrt(disc), tr)) / 2;
    const long double mu_s = det / mu_u;
    const auto eigvec = [&](long double mu) {
        LVec2 v = std::abs(q) >= std::abs(r) ? LVec2(q, mu - p) : LVec2(mu - s, r);
        if (v.norm() == 0) v = LVec2(1, 0);
        v /= v.norm();
        if (v(0) < 0 || (v(0) == 0 && v(1) < 0)) v = -v;
        return v;
    };
    ComponentProjectors c;
    c.kind_ = ManifoldKind::Torus2;
    c.has_unstable_ = {true};
    c.has_stable_ = {true};
    c.eu_ = eigvec(mu_u);
    c.es_ = eigvec(mu_s);
    return c;
}

ComponentProjectors ComponentProjectors::from_splitting(InvariantSplitting splitting) {
    ComponentProjectors c;
    c.kind_ = ManifoldKind::Torus2;
    c.has_unstable_ = {true};
    c.has_stable_ = {true};
    c.eu_ = widen(splitting.ref.unstable);
    c.es_ = widen(splitting.ref.stable);
    c.splitting_ = std::move(splitting);
    return c;
}

ComponentProjectors ComponentProjectors::morse_smale(const BasicSetData& sets) {
    ComponentProjectors c;
    c.kind_ = ManifoldKind::Circle;
    c.eu_ = LVec2(1, 0);
    c.es_ = LVec2(1, 0);
    for (const auto& comp : sets.components) {
        c.has_unstable_.push_back(comp.unstable_rank > 0);
        c.has_stable_.push_back(comp.stable_rank > 0);
    }
    return c;
}

LVec2 ComponentProjectors::unstable_dir(const Point& x) const {
    if (!splitting_) return eu_;
    return eu_ + static_cast<long double>(splitting_->unstable.section.value_at(x)) * es_;
}

LVec2 ComponentProjectors::stable_dir(const Point& x) const {
    if (!splitting_) return es_;
    return es_ + static_cast<long double>(splitting_->stable.section.value_at(x)) * eu_;
}

std::pair<long double, long double> ComponentProjectors::coefficients(const Point& x, const LVec2& v) const {
    if (kind_ == ManifoldKind::Circle) return {v(0), v(0)};
    const LVec2 u = unstable_dir(x);
    const LVec2 s = stable_dir(x);
    const long double det = u(0) * s(1) - u(1) * s(0);
    return {(v(0) * s(1) - v(1) * s(0)) / det, (u(0) * v(1) - u(1) * v(0)) / det};
}

Mat2 ComponentProjectors::projector_stable(std::size_t i, const Point& x) const {
    if (!has_stable_.at(i)) return Mat2::Zero();
    if (kind_ == ManifoldKind::Circle) return Vec2(1.0, 0.0).asDiagonal();
    LMat2 p;
    p.col(0) = unstable_dir(x);
    p.col(1) = stable_dir(x);
    const LMat2 inv = p.inverse();
    return (p.col(1) * inv.row(1)).cast<double>();
}

Mat2 ComponentProjectors::projector_unstable(std::size_t i, const Point& x) const {
    if (!has_unstable_.at(i)) return Mat2::Zero();
    if (kind_ == ManifoldKind::Circle) return Vec2(1.0, 0.0).asDiagonal();
    LMat2 p;
    p.col(0) = unstable_dir(x);
    p.col(1) = stable_dir(x);
    const LMat2 inv = p.inverse();
    return (p.col(0) * inv.row(0)).cast<double>();
}

double ComponentProjectors::max_projector_norm(const Grid& grid, const MetricFrame& frame) const {
    std::vector<double> best(grid.size(), 0.0);
    parallel_for(grid.size(), [&](std::size_t j) {
        const Point x = grid.point(j);
        for (std::size_t i = 0; i < count(); ++i) {
            best[j] = std::max({best[j], frame.operator_norm(projector_stable(i, x)),
                                frame.operator_norm(projector_unstable(i, x))});
        }
    });
    return *std::max_element(best.begin(), best.end());
}

RightInverse::RightInverse(ModelMapPtr m, ComponentProjectors projectors, PartitionOfUnity partition,
                           const HyperbolicityConstants& hc, const Grid& grid, int n_trunc, double tolerance)
    : map_(std::move(m)), projectors_(std::move(projectors)), partition_(std::move(partition)), hc_(hc) {
    if (projectors_.count() != partition_.count()) {
        throw std::invalid_argument("projectors and partition disagree on the number of components");
    }
    if (grid.kind() != map_->manifold()) throw std::invalid_argument("grid does not match the map's manifold");
    measure_budget(grid, n_trunc, tolerance);
}

namespace {

struct Weights {
    double stable = 0.0;
    double unstable = 0.0;
};

Weights direction_weights(const ComponentProjectors& p, const PartitionOfUnity& theta, const Point& y) {
    Weights w;
    for (std::size_t i = 0; i < p.count(); ++i) {
        const double t = theta.value(i, y);
        if (p.has_stable(i)) w.stable += t;
        if (p.has_unstable(i)) w.unstable += t;
    }
    return w;
}

bool any_stable(const ComponentProjectors& p) {
    for (std::size_t i = 0; i < p.count(); ++i) {
        if (p.has_stable(i)) return true;
    }
    return false;
}

bool any_unstable(const ComponentProjectors& p) {
    for (std::size_t i = 0; i < p.count(); ++i) {
        if (p.has_unstable(i)) return true;
    }
    return false;
}

// Coefficient of T_y f e_s(y) along e_s(fy), and of T_y f e_u(y) along e_u(fy).
long double stable_multiplier(const ModelMap& m, const ComponentProjectors& p, const Point& y, const Point& fy) {
    return p.coefficients(fy, widen(m.jacobian(y)) * p.stable_dir(y)).second;
}

long double unstable_multiplier(const ModelMap& m, const ComponentProjectors& p, const Point& y, const Point& fy) {
    return p.coefficients(fy, widen(m.jacobian(y)) * p.unstable_dir(y)).first;
}

}  // namespace

void RightInverse::measure_budget(const Grid& grid, int n_trunc, double tolerance) {
    const ModelMap& m = *map_;
    const MetricFrame& frame = m.frame();
    budget_.lambda_prime = hc_.lambda_prime;
    budget_.kappa = projectors_.max_projector_norm(grid, frame) * 1.01;
    budget_.rho = budget_.kappa * budget_.lambda_prime;
    if (!(budget_.rho < 1.0)) throw Error(ErrorKind::InvalidConfig, "series rate violates rho = kappa * lambda' < 1");
    if (!(budget_.rho * std::pow(hc_.l, hc_.alpha) < 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "series rate violates rho * l^alpha < 1");
    }
    if (n_trunc <= 0 && !(tolerance > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "series needs n_trunc > 0 or a positive tolerance");
    }
    constexpr int probe = 5;
    const int n_meas = n_trunc > 0 ? std::max(n_trunc, probe) : 200;
    const double rho = budget_.rho;
    const bool has_s = any_stable(projectors_);
    const bool has_u = any_unstable(projectors_);

    std::vector<double> k_node(grid.size(), 1.0);
    std::vector<double> growth5(grid.size(), 0.0);
    parallel_for(grid.size(), [&](std::size_t j) {
        const Point x = grid.point(j);
        if (has_s) {
            const long double ex = lframe_norm(frame, projectors_.stable_dir(x));
            Point y = x;
            long double prod = 1;
            for (int n = 1; n <= n_meas; ++n) {
                const Point prev = y;
                y = m.inverse(prev);
                prod *= stable_multiplier(m, projectors_, y, prev);
                if (direction_weights(projectors_, partition_, y).stable <= 0.0) continue;
                const double g = static_cast<double>(std::abs(prod) * ex / lframe_norm(frame, projectors_.stable_dir(y)));
                k_node[j] = std::max(k_node[j], g / std::pow(rho, n));
                if (n == probe) growth5[j] = std::max(growth5[j], g);
            }
        }
        if (has_u) {
            const long double ex = lframe_norm(frame, projectors_.unstable_dir(x));
            Point z = x;
            long double prod = 1;
            for (int n = 1; n <= n_meas; ++n) {
                const Point prev = z;
                z = m.evaluate(prev);
                prod /= unstable_multiplier(m, projectors_, prev, z);
                if (direction_weights(projectors_, partition_, z).unstable <= 0.0) continue;
                const double g =
                    static_cast<double>(std::abs(prod) * ex / lframe_norm(frame, projectors_.unstable_dir(z)));
                k_node[j] = std::max(k_node[j], g / std::pow(rho, n));
                if (n == probe) growth5[j] = std::max(growth5[j], g);
            }
        }
    });
    const double worst5 = *std::max_element(growth5.begin(), growth5.end());
    if (!(worst5 < 1.0)) {
        throw Error(ErrorKind::SeriesNonDecay, "push-forward iterates do not contract by n = 5 (growth " +
                                                   std::to_string(worst5) + "); check the splitting and cover");
    }
    budget_.K_decay = *std::max_element(k_node.begin(), k_node.end());
    if (n_trunc > 0) {
        budget_.n_trunc = n_trunc;
    } else {
        int n = 1;
        while (n <= n_meas && SeriesBudget::tail(budget_.K_decay, rho, n) > tolerance) ++n;
        if (n > n_meas) {
            throw Error(ErrorKind::InvalidConfig, "series tolerance not reachable within " + std::to_string(n_meas) +
                                                      " terms");
        }
        budget_.n_trunc = n;
    }
    budget_.tail_bound = SeriesBudget::tail(budget_.K_decay, rho, budget_.n_trunc);
}

std::vector<ComponentParts> RightInverse::decompose(const DiscreteVectorField& eta) const {
    std::vector<ComponentParts> parts;
    for (std::size_t i = 0; i < projectors_.count(); ++i) {
        ComponentParts part{DiscreteVectorField(eta.grid, eta.frame), DiscreteVectorField(eta.grid, eta.frame)};
        for (std::size_t j = 0; j < eta.grid.size(); ++j) {
            const Point x = eta.grid.point(j);
            const Vec2 v = partition_.value(i, x) * eta.values[j];
            part.stable.values[j] = projectors_.projector_stable(i, x) * v;
            part.unstable.values[j] = projectors_.projector_unstable(i, x) * v;
        }
        parts.push_back(std::move(part));
    }
    return parts;
}

LVec2 RightInverse::evaluate(const DiscreteVectorField& eta, const Point& x) const {
    const ModelMap& m = *map_;
    const int N = budget_.n_trunc;
    LVec2 total = LVec2::Zero();
    if (any_stable(projectors_)) {
        long double sum = 0;
        long double prod = 1;
        Point y = x;
        for (int n = 0; n <= N; ++n) {
            if (n > 0) {
                const Point prev = y;
                y = m.inverse(prev);
                prod *= stable_multiplier(m, projectors_, y, prev);
            }
            const double w = direction_weights(projectors_, partition_, y).stable;
            if (w == 0.0) continue;
            sum += prod * w * projectors_.coefficients(y, widen(node_value(eta, y))).second;
        }
        total += sum * projectors_.stable_dir(x);
    }
    if (any_unstable(projectors_)) {
        long double sum = 0;
        long double prod = 1;
        Point z = x;
        for (int n = 1; n <= N; ++n) {
            const Point prev = z;
            z = m.evaluate(prev);
            prod /= unstable_multiplier(m, projectors_, prev, z);
            const double w = direction_weights(projectors_, partition_, z).unstable;
            if (w == 0.0) continue;
            sum += prod * w * projectors_.coefficients(z, widen(node_value(eta, z))).first;
        }
        total -= sum * projectors_.unstable_dir(x);
    }
    return total;
}

DiscreteVectorField RightInverse::apply(const DiscreteVectorField& eta) const {
    DiscreteVectorField out(eta.grid, eta.frame);
    parallel_for(eta.grid.size(), [&](std::size_t j) {
        out.values[j] = evaluate(eta, eta.grid.point(j)).cast<double>();
    });
    return out;
}

std::vector<LVec2> RightInverse::evaluate_cycle(const std::vector<Point>& orbit,
                                                const std::vector<Vec2>& values) const {
    const ModelMap& m = *map_;
    const int k = static_cast<int>(orbit.size());
    if (k == 0 || values.size() != orbit.size()) throw std::invalid_argument("cycle and values disagree");
    const auto at = [k](int j) { return static_cast<std::size_t>(((j % k) + k) % k); };
    std::vector<long double> mu_s(orbit.size());
    std::vector<long double> mu_u(orbit.size());
    std::vector<Weights> w(orbit.size());
    std::vector<std::pair<long double, long double>> c(orbit.size());
    for (int j = 0; j < k; ++j) {
        const Point& y = orbit[at(j)];
        const Point& fy = orbit[at(j + 1)];
        mu_s[at(j)] = stable_multiplier(m, projectors_, y, fy);
        mu_u[at(j)] = unstable_multiplier(m, projectors_, y, fy);
        w[at(j)] = direction_weights(projectors_, partition_, y);
        c[at(j)] = projectors_.coefficients(y, widen(values[at(j)]));
    }
    const int N = budget_.n_trunc;
    std::vector<LVec2> out(orbit.size(), LVec2::Zero());
    for (int j = 0; j < k; ++j) {
        const Point& x = orbit[at(j)];
        if (any_stable(projectors_)) {
            long double sum = 0;
            long double prod = 1;
            for (int n = 0; n <= N; ++n) {
                if (n > 0) prod *= mu_s[at(j - n)];
                sum += prod * w[at(j - n)].stable * c[at(j - n)].second;
            }
            out[at(j)] += sum * projectors_.stable_dir(x);
        }
        if (any_unstable(projectors_)) {
            long double sum = 0;
            long double prod = 1;
            for (int n = 1; n <= N; ++n) {
                prod /= mu_u[at(j + n - 1)];
                sum += prod * w[at(j + n)].unstable * c[at(j + n)].first;
            }
            out[at(j)] -= sum * projectors_.unstable_dir(x);
        }
    }
    return out;
}

RightInverseResidual RightInverse::verify(const DiscreteVectorField& eta) const {
    const ModelMap& m = *map_;
    std::vector<double> res(eta.grid.size(), 0.0);
    parallel_for(eta.grid.size(), [&](std::size_t j) {
        const Point x = eta.grid.point(j);
        const Point p = m.inverse(x);
        const LVec2 lhs = evaluate(eta, x) - widen(m.jacobian(p)) * evaluate(eta, p);
        res[j] = lframe_norm(eta.frame, lhs - widen(eta.values[j]));
    });
    RightInverseResidual r;
    r.residual = *std::max_element(res.begin(), res.end());
    r.eta_norm = eta.sup_norm();
    r.tail_bound = budget_.tail_bound;
    if (r.eta_norm > 0.0) r.ratio = r.residual / (r.tail_bound * r.eta_norm);
    return r;
}

std::vector<DiscreteVectorField> RightInverse::stable_iterates(const DiscreteVectorField& eta,
                                                               std::size_t component, int n_max) const {
    if (component >= projectors_.count()) throw std::out_of_range("component index");
    std::vector<DiscreteVectorField> out(static_cast<std::size_t>(n_max) + 1,
                                         DiscreteVectorField(eta.grid, eta.frame));
    if (!projectors_.has_stable(component)) return out;
    const ModelMap& m = *map_;
    parallel_for(eta.grid.size(), [&](std::size_t j) {
        const Point x = eta.grid.point(j);
        const LVec2 ex = projectors_.stable_dir(x);
        Point y = x;
        long double prod = 1;
        for (int n = 0; n <= n_max; ++n) {
            if (n > 0) {
                const Point prev = y;
                y = m.inverse(prev);
                prod *= stable_multiplier(m, projectors_, y, prev);
            }
            const double t = partition_.value(component, y);
            if (t == 0.0) continue;
            const long double b = projectors_.coefficients(y, widen(node_value(eta, y))).second;
            out[static_cast<std::size_t>(n)].values[j] = (prod * t * b * ex).cast<double>();
        }
    });
    return out;
}

DecayReport RightInverse::measure_decay(const DiscreteVectorField& eta, std::size_t component, int n_max) const {
    DecayReport r;
    for (const auto& f : stable_iterates(eta, component, n_max)) r.norms.push_back(f.sup_norm());
    std::vector<double> xs;
    std::vector<double> ys;
    for (int n = n_max / 2; n <= n_max; ++n) {
        const double v = r.norms[static_cast<std::size_t>(n)];
        if (v > 0.0) {
            xs.push_back(n);
            ys.push_back(std::log(v));
        }
    }
    if (xs.size() < 2) return r;
    const double k = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i] / k;
        my += ys[i] / k;
    }
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    r.fitted_rate = std::exp(sxy / sxx);
    return r;
}

HolderGrowthReport RightInverse::measure_holder_growth(const DiscreteVectorField& eta, std::size_t component,
                                                       int n_max, const NormContext& ctx) const {
    const ModelMap& m = *map_;
    const double alpha = hc_.alpha;
    const Grid& grid = eta.grid;
    const MetricFrame& frame = m.frame();
    const auto iterates = stable_iterates(eta, component, n_max);

    HolderGrowthReport r;
    for (const auto& f : iterates) r.values.push_back(field_norms(f, alpha, ctx).holder);

    // C = |Tf| L_alpha(P_s on the component) + L_alpha(Tf), sampled on the context pairs.
    double tf = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) tf = std::max(tf, frame.operator_norm(m.jacobian(grid.point(j))));
    double lp = 0.0;
    double ltf = 0.0;
    const auto& pairs = ctx.sample().pairs;
    const auto& d = ctx.distances();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const Point x = grid.point(pairs[k].first);
        const Point y = grid.point(pairs[k].second);
        const double da = std::pow(d[k], alpha);
        ltf = std::max(ltf, frame.operator_norm(m.jacobian(x) - m.jacobian(y)) / da);
        if (partition_.value(component, x) > 0.0 && partition_.value(component, y) > 0.0) {
            lp = std::max(lp, frame.operator_norm(projectors_.projector_stable(component, x) -
                                                  projectors_.projector_stable(component, y)) /
                                  da);
        }
    }
    r.C = tf * lp + ltf;
    const double K = budget_.K_decay;
    const double rho = budget_.rho;
    const double la = std::pow(hc_.l, alpha);
    r.C_prime = r.C * K * K * la / (rho * (la - 1.0));
    const double l0 = r.values.front();
    const double z0 = iterates.front().sup_norm();
    for (int n = 0; n <= n_max; ++n) {
        const double g = std::pow(rho * la, n);
        const double b = 1.1 * (K * g * l0 + r.C_prime * (g - std::pow(rho, n)) * z0);
        r.bounds.push_back(b);
        if (r.values[static_cast<std::size_t>(n)] > b * (1.0 + 1e-12)) r.within = false;
    }
    return r;
}

}  // namespace hyperstab
