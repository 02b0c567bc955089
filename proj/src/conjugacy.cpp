#include "hyperstab/conjugacy.hpp"

#include "hyperstab/error.hpp"
#include "hyperstab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hyperstab {

void SolverConfig::validate() const {
    if (!(eps_ball > 0.0 && eps_ball <= 1.0)) throw Error(ErrorKind::InvalidConfig, "solver needs eps_ball in (0,1]");
    if (!(r_ball > 0.0 && r_ball < 0.25)) throw Error(ErrorKind::InvalidConfig, "solver needs r_ball in (0,1/4)");
    if (!(tol > 0.0)) throw Error(ErrorKind::InvalidConfig, "solver needs tol > 0");
    if (max_iter < 1) throw Error(ErrorKind::InvalidConfig, "solver needs max_iter >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorKind::InvalidConfig, "solver needs alpha in (0,1]");
}

DiscreteVectorField psi(const ModelMap& g, const ModelMap& f, const DiscreteVectorField& eta) {
    const ManifoldKind kind = f.manifold();
    DiscreteVectorField out(eta.grid, eta.frame);
    parallel_for(eta.grid.size(), [&](std::size_t i) {
        const Point x = eta.grid.point(i);
        const Point y = f.inverse(x);
        const Vec2 v = interpolate(eta, y).components;
        const Vec2 d = min_lift(g.lift_evaluate(y.coords + v) - x.coords, kind);
        if (!(v.cwiseAbs().maxCoeff() < 0.5) || !(d.cwiseAbs().maxCoeff() < 0.5 - 1e-12)) {
            throw Error(ErrorKind::Divergence, "chart overflow at node " + std::to_string(i));
        }
        out.values[i] = d;
    });
    return out;
}

PerturbationReport verify_perturbation_bounds(const ModelMap& g, const ModelMap& f, const DiscreteVectorField& eta,
                                              double alpha, double l, const NormContext& ctx) {
    const DiscreteVectorField q = psi(g, f, eta) - push_forward(f, eta);
    const NormReport qn = field_norms(q, alpha, ctx);
    const NormReport en = field_norms(eta, alpha, ctx);
    PerturbationReport r;
    r.q_c0 = qn.c0;
    r.q_holder = qn.holder;
    r.q_df = qn.df_lip;

    const Grid& grid = eta.grid;
    const MetricFrame& frame = eta.frame;
    std::vector<Point> pre(grid.size());
    std::vector<Vec2> eta_pre(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        pre[i] = f.inverse(grid.point(i));
        eta_pre[i] = interpolate(eta, pre[i]).components;
    });
    double eps = r.q_c0;
    for (const auto& [a, b] : ctx.sample().pairs) {
        const double num = frame.norm(q.values[a] - q.values[b]);
        if (num == 0.0) continue;
        const double den = dist(pre[a], pre[b], frame, grid.kind()) + frame.norm(eta_pre[a] - eta_pre[b]);
        eps = std::max(eps, num / den);
    }
    r.eps_prime = eps;
    const double diam = diameter(frame, grid.kind());
    r.holder_bound = eps * (l * std::pow(diam, 1.0 - alpha) + std::pow(l, alpha) * en.holder);
    r.df_bound = eps * (1.0 + en.df_lip);
    r.holder_ok = r.q_holder <= 1.1 * r.holder_bound;
    r.df_ok = r.q_df <= 1.1 * r.df_bound;
    return r;
}

JNormEstimate estimate_j_norm(const RightInverse& J, double alpha, DfWindow w, int resolution, int probes,
                              std::uint64_t seed) {
    const ModelMap& m = J.map();
    const Grid grid(resolution, m.manifold());
    const NormContext ctx(m, grid, w, 1000, seed);
    JNormEstimate est;
    for (int k = 0; k < probes; ++k) {
        const DiscreteVectorField eta = random_trig_field(grid, m.frame(), seed + static_cast<std::uint64_t>(k));
        const DiscreteVectorField jeta = J.apply(eta);
        const NormReport a = field_norms(eta, alpha, ctx);
        const NormReport b = field_norms(jeta, alpha, ctx);
        if (a.c0 > 0.0) est.c0 = std::max(est.c0, b.c0 / a.c0);
        if (a.combined > 0.0) est.alpha_f = std::max(est.alpha_f, b.combined / a.combined);
    }
    return est;
}

HomeoCertificate check_homeomorphism(const DiscreteVectorField& eta, const NormContext& ctx) {
    const Grid& grid = eta.grid;
    const int n = grid.resolution();
    const bool torus = grid.kind() == ManifoldKind::Torus2;
    HomeoCertificate c;
    c.lf = field_norms(eta, 1.0, ctx).df_lip;
    c.lf_ok = c.lf <= 0.5;

    std::vector<Vec2> img(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) img[i] = wrap(grid.point(i).coords + eta.values[i], grid.kind());
    const auto cell = [n](double v) { return std::min(n - 1, std::max(0, static_cast<int>(std::floor(v * n)))); };
    std::vector<std::vector<std::uint32_t>> buckets(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        buckets[grid.index(cell(img[i](0)), torus ? cell(img[i](1)) : 0)].push_back(static_cast<std::uint32_t>(i));
    }
    const double half_cell = 0.5 / n;
    c.injective = true;
    for (std::size_t i = 0; i < grid.size() && c.injective; ++i) {
        const int c1 = cell(img[i](0));
        const int c2 = torus ? cell(img[i](1)) : 0;
        for (int d2 = (torus ? -1 : 0); d2 <= (torus ? 1 : 0) && c.injective; ++d2) {
            for (int d1 = -1; d1 <= 1 && c.injective; ++d1) {
                for (std::uint32_t j : buckets[grid.index(c1 + d1, c2 + d2)]) {
                    if (j <= i) continue;
                    const double d = min_lift(img[j] - img[i], grid.kind()).norm();
                    if (d < half_cell) {
                        c.injective = false;
                        c.witness = std::make_pair(i, static_cast<std::size_t>(j));
                        c.witness_distance = d;
                        break;
                    }
                }
            }
        }
    }

    Vec2 row = Vec2::Zero();
    Vec2 col = Vec2::Zero();
    for (int k = 0; k < n; ++k) {
        row += min_lift(img[grid.index(k + 1, 0)] - img[grid.index(k, 0)], grid.kind());
        if (torus) col += min_lift(img[grid.index(0, k + 1)] - img[grid.index(0, k)], grid.kind());
    }
    c.degree(0, 0) = static_cast<int>(std::lround(row(0)));
    c.degree(1, 0) = static_cast<int>(std::lround(row(1)));
    c.degree(0, 1) = torus ? static_cast<int>(std::lround(col(0))) : 0;
    c.degree(1, 1) = torus ? static_cast<int>(std::lround(col(1))) : 1;
    c.degree_ok = c.degree == Eigen::Matrix2i::Identity();
    c.positive = c.lf_ok && c.injective && c.degree_ok;
    return c;
}

double conjugacy_residual(const ModelMap& g, const ModelMap& f, const DiscreteVectorField& eta) {
    const Grid& grid = eta.grid;
    std::vector<double> res(grid.size(), 0.0);
    parallel_for(grid.size(), [&](std::size_t i) {
        const Point x = grid.point(i);
        const Point hx{wrap(x.coords + eta.values[i], grid.kind())};
        const Point fx = f.evaluate(x);
        const Point hfx{wrap(fx.coords + interpolate(eta, fx).components, grid.kind())};
        res[i] = dist(g.evaluate(hx), hfx, eta.frame, grid.kind());
    });
    return *std::max_element(res.begin(), res.end());
}

ConjugacyResult solve_conjugacy(const ModelMap& f, const ModelMap& g, const RightInverse& J, const Grid& grid,
                                const SolverConfig& cfg) {
    cfg.validate();
    const MetricFrame& frame = f.frame();
    const NormContext ctx(f, grid, cfg.window, cfg.pair_budget, cfg.seed);
    DiscreteVectorField x = cfg.x0 ? *cfg.x0 : DiscreteVectorField(grid, frame);
    if (!(x.grid == grid)) throw Error(ErrorKind::InvalidConfig, "initial field grid does not match the solver grid");
    if (x.sup_norm() > cfg.r_ball) throw Error(ErrorKind::InvalidConfig, "initial field lies outside the r_ball");

    ConjugacyResult r(x);
    r.j_norm = estimate_j_norm(J, cfg.alpha, cfg.window, std::min(grid.resolution(), 64), 20, cfg.seed);
    const PerturbationReport gate = verify_perturbation_bounds(g, f, x, cfg.alpha, J.constants().l, ctx);
    const double gate_limit = cfg.r_ball / (2.0 * std::max(r.j_norm.c0, 1e-300));
    if (!(gate.q_c0 <= gate_limit)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "perturbation gate failed: |Q(g,x0)| = %.6g exceeds r_ball / (2 |J|) = %.6g",
                      gate.q_c0, gate_limit);
        throw Error(ErrorKind::Divergence, buf);
    }

    const auto trace = [&r] {
        std::ostringstream msg;
        msg << "; updates:";
        for (double u : r.updates) msg << ' ' << u;
        msg << "; ratios:";
        for (double q : r.ratios) msg << ' ' << q;
        return msg.str();
    };
    int high = 0;
    for (int n = 0; n <= cfg.max_iter; ++n) {
        const double norm = field_norms(x, cfg.alpha, ctx).combined;
        r.norms.push_back(norm);
        r.ball_confinement = std::max(r.ball_confinement, norm);
        std::optional<DiscreteVectorField> psi_x;
        try {
            psi_x.emplace(psi(g, f, x));
        } catch (const Error& e) {
            throw Error(e.kind(), std::string(e.what()) + " at iteration " + std::to_string(n) + trace());
        }
        const DiscreteVectorField next = J.apply(*psi_x - push_forward(f, x));
        const double update = (next - x).sup_norm();
        r.updates.push_back(update);
        if (r.updates.size() >= 2) {
            const double prev = r.updates[r.updates.size() - 2];
            const double ratio = prev > 0.0 ? update / prev : 0.0;
            r.ratios.push_back(ratio);
            if (n >= 2) r.max_ratio = std::max(r.max_ratio, ratio);
            high = ratio >= 0.95 ? high + 1 : 0;
            if (high >= 3) {
                throw Error(ErrorKind::Divergence, "conjugacy iteration diverges" + trace());
            }
        }
        if (update <= cfg.tol) {
            r.converged = true;
            r.iterations = n;
            break;
        }
        x = next;
    }
    if (!r.converged) {
        throw Error(ErrorKind::Divergence,
                    "conjugacy iteration did not reach tol within " + std::to_string(cfg.max_iter) + " steps" + trace());
    }
    r.eta = x;
    r.residual = conjugacy_residual(g, f, r.eta);
    r.report = field_norms(r.eta, cfg.alpha, ctx);
    r.perturbation = verify_perturbation_bounds(g, f, r.eta, cfg.alpha, J.constants().l, ctx);
    r.homeo = check_homeomorphism(r.eta, ctx);
    return r;
}

std::vector<PeriodicMatch> match_periodic_points(const ModelMap& f, const ModelMap& g, const RightInverse& J,
                                                 int period) {
    const ManifoldKind kind = f.manifold();
    std::vector<PeriodicMatch> out;
    for (const Point& p : periodic_points(f, period)) {
        const auto k = static_cast<std::size_t>(period);
        std::vector<Point> orbit(k);
        orbit[0] = p;
        for (std::size_t j = 1; j < k; ++j) orbit[j] = f.evaluate(orbit[j - 1]);
        std::vector<Vec2> v(k, Vec2::Zero());
        for (int it = 0; it < 200; ++it) {
            std::vector<Vec2> w(k);
            for (std::size_t j = 0; j < k; ++j) {
                const std::size_t jm = (j + k - 1) % k;
                const Vec2 psi_j = min_lift(g.lift_evaluate(orbit[jm].coords + v[jm]) - orbit[j].coords, kind);
                w[j] = psi_j - f.jacobian(orbit[jm]) * v[jm];
            }
            const std::vector<LVec2> next = J.evaluate_cycle(orbit, w);
            double change = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                const Vec2 nj = next[j].cast<double>();
                change = std::max(change, (nj - v[j]).cwiseAbs().maxCoeff());
                v[j] = nj;
            }
            if (change <= 1e-15) break;
        }
        PeriodicMatch mtch;
        mtch.period = period;
        mtch.p = p;
        mtch.hp = Point{wrap(p.coords + v[0], kind)};
        mtch.q = newton_periodic_point(g, mtch.hp, period);
        mtch.error = dist(mtch.hp, mtch.q, f.frame(), kind);
        out.push_back(mtch);
    }
    return out;
}

HolderReport holder_report(const DiscreteVectorField& eta, const ModelMap& f, const HyperbolicityConstants& hc,
                           const std::vector<double>& alphas, const NormContext& ctx) {
    HolderReport r;
    for (double a : alphas) {
        HolderEntry e;
        e.alpha = a;
        e.admissible = hc.lambda * std::pow(hc.l, a) < 1.0;
        e.report = field_norms(eta, a, ctx);
        r.entries.push_back(e);
    }
    r.alpha_hat = estimate_exponent(eta, f);
    return r;
}

double distance_to(const DiscreteVectorField& eta, const TrigSeries& phi) {
    const Grid& grid = eta.grid;
    double best = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec2 x = grid.point(i).coords;
        const Point h{wrap(x + eta.values[i], grid.kind())};
        const Point p{wrap(x + phi.value(x), grid.kind())};
        best = std::max(best, dist(h, p, eta.frame, grid.kind()));
    }
    return best;
}

}  // namespace hyperstab
