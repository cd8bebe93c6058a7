#include "gearmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>
#include <limits>

#include <Eigen/Dense>

namespace gearmpc {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Largest step in [0, 1] keeping v + alpha * dv >= (1 - tau) * v elementwise.
double max_step(const VectorXd& v, const VectorXd& dv, double tau) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) alpha = std::min(alpha, -tau * v[i] / dv[i]);
    }
    return alpha;
}

QpResult solve_scaled(const QpProblem& qp, const QpOptions& opt) {
    const Eigen::Index n = qp.H.rows();
    const Eigen::Index me = qp.A.rows();
    const Eigen::Index mi = qp.G.rows();

    QpResult res;
    res.x = VectorXd::Zero(n);
    res.y = VectorXd::Zero(me);
    res.lambda = VectorXd::Zero(mi);

    // Equality-constrained QPs reduce to one KKT solve.
    if (mi == 0) {
        MatrixXd K(n + me, n + me);
        K.setZero();
        K.topLeftCorner(n, n) = qp.H;
        if (me > 0) {
            K.topRightCorner(n, me) = qp.A.transpose();
            K.bottomLeftCorner(me, n) = qp.A;
        }
        VectorXd rhs(n + me);
        rhs.head(n) = -qp.g;
        rhs.tail(me) = qp.b;
        const VectorXd sol = K.partialPivLu().solve(rhs);
        res.x = sol.head(n);
        res.y = sol.tail(me);
        res.status = sol.allFinite() ? QpStatus::Solved : QpStatus::NumericalFailure;
        return res;
    }

    // Interior-point iterates: x, y, inequality slacks s > 0, multipliers z > 0.
    VectorXd x = VectorXd::Zero(n);
    VectorXd y = VectorXd::Zero(me);
    VectorXd s = (qp.h - qp.G * x).cwiseMax(1.0);
    VectorXd z = VectorXd::Ones(mi);

    const double scale =
        std::max({1.0, qp.g.lpNorm<Eigen::Infinity>(),
                  me > 0 ? qp.b.lpNorm<Eigen::Infinity>() : 0.0, qp.h.lpNorm<Eigen::Infinity>()});

    const Eigen::Index dim = n + me;
    MatrixXd K(dim, dim);

    double best_progress = std::numeric_limits<double>::infinity();
    int stalled = 0;

    for (int it = 0; it < opt.max_iterations; ++it) {
        const VectorXd rd = qp.H * x + qp.g + qp.G.transpose() * z +
                            (me > 0 ? VectorXd(qp.A.transpose() * y) : VectorXd::Zero(n));
        const VectorXd rpe = me > 0 ? VectorXd(qp.A * x - qp.b) : VectorXd();
        const VectorXd rpi = qp.G * x + s - qp.h;
        const double mu = s.dot(z) / static_cast<double>(mi);

        res.iterations = it;
        res.gap = mu;
        res.dual_residual = rd.lpNorm<Eigen::Infinity>();
        res.primal_residual =
            std::max(me > 0 ? rpe.lpNorm<Eigen::Infinity>() : 0.0, rpi.lpNorm<Eigen::Infinity>());
        if (mu <= opt.tolerance * scale && res.dual_residual <= opt.tolerance * scale * 10.0 &&
            res.primal_residual <= opt.tolerance * scale * 10.0) {
            res.status = QpStatus::Solved;
            break;
        }

        // Floating-point floor: stop once progress stalls near convergence.
        const double progress = std::max({mu, res.dual_residual, res.primal_residual});
        if (progress < 0.9 * best_progress) {
            best_progress = progress;
            stalled = 0;
        } else if (++stalled >= 2) {
            res.status = progress <= 1e-6 * scale ? QpStatus::Solved : QpStatus::MaxIterations;
            break;
        }

        // Reduced KKT matrix with inequality multipliers eliminated.
        const VectorXd d = z.cwiseQuotient(s);  // z_i / s_i
        K.setZero();
        K.topLeftCorner(n, n) = qp.H + qp.G.transpose() * d.asDiagonal() * qp.G;
        for (Eigen::Index i = 0; i < n; ++i) K(i, i) += 1e-12;
        if (me > 0) {
            K.topRightCorner(n, me) = qp.A.transpose();
            K.bottomLeftCorner(me, n) = qp.A;
            for (Eigen::Index i = 0; i < me; ++i) K(n + i, n + i) -= 1e-12;
        }
        Eigen::PartialPivLU<MatrixXd> lu(K);

        struct Dir {
            VectorXd dx, dy, dz, ds;
        };
        auto solve_direction = [&](const VectorXd& rs_comp) {
            // rs_comp holds the target for the complementarity residual S z e.
            VectorXd rhs_local(dim);
            rhs_local.head(n) =
                -rd + qp.G.transpose() * (rs_comp.cwiseQuotient(s) - d.cwiseProduct(rpi));
            if (me > 0) rhs_local.tail(me) = -rpe;
            VectorXd step = lu.solve(rhs_local);
            step += lu.solve(rhs_local - K * step);  // one refinement pass
            Dir dir;
            dir.dx = step.head(n);
            dir.dy = me > 0 ? VectorXd(step.tail(me)) : VectorXd();
            dir.ds = -(rpi + qp.G * dir.dx);
            dir.dz = -(rs_comp + z.cwiseProduct(dir.ds)).cwiseQuotient(s);
            return dir;
        };

        // Affine predictor.
        const VectorXd rs_aff = s.cwiseProduct(z);
        const Dir aff = solve_direction(rs_aff);
        const double a_p_aff = max_step(s, aff.ds, 1.0);
        const double a_d_aff = max_step(z, aff.dz, 1.0);
        const double mu_aff =
            (s + a_p_aff * aff.ds).dot(z + a_d_aff * aff.dz) / static_cast<double>(mi);
        const double sigma = std::pow(std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0), 3);

        // Corrector with centering.
        const VectorXd rs_cor =
            s.cwiseProduct(z) + aff.ds.cwiseProduct(aff.dz) - VectorXd::Constant(mi, sigma * mu);
        const Dir dir = solve_direction(rs_cor);

        if (!dir.dx.allFinite() || !dir.ds.allFinite() || !dir.dz.allFinite()) {
            res.status = QpStatus::NumericalFailure;
            break;
        }

        const double tau = 0.995;
        const double a_p = max_step(s, dir.ds, tau);
        const double a_d = max_step(z, dir.dz, tau);
        if (std::getenv("GEARMPC_QP_DEBUG") != nullptr) {
            std::printf(
                "it=%d mu=%.3e rd=%.3e rp=%.3e sigma=%.3e dxinf=%.3e ap=%.3e ad=%.3e "
                "muaff=%.3e\n",
                it, mu, res.dual_residual, res.primal_residual, sigma,
                dir.dx.lpNorm<Eigen::Infinity>(), a_p, a_d, mu_aff);
        }
        x += a_p * dir.dx;
        s += a_p * dir.ds;
        z += a_d * dir.dz;
        if (me > 0) y += a_d * dir.dy;

        if (it + 1 == opt.max_iterations) res.status = QpStatus::MaxIterations;
    }

    res.x = x;
    res.y = y;
    res.lambda = z;
    if (!x.allFinite()) res.status = QpStatus::NumericalFailure;
    return res;
}

// Crossover: re-solve the QP exactly on the active face identified by the
// interior-point iterate, repairing the guess with a small active-set loop
// (add the most violated row, drop the most negative multiplier). Along
// near-flat directions the barrier bias leaves the IPM solution short of the
// true minimizer; the polished point lands on it to machine precision. Falls
// back to the IPM point when the repair does not settle.
void polish(const QpProblem& qp, QpResult& res) {
    if (res.status == QpStatus::NumericalFailure || !res.x.allFinite()) return;
    const Eigen::Index n = qp.H.rows();
    const Eigen::Index me = qp.A.rows();
    const Eigen::Index mi = qp.G.rows();
    if (mi == 0) return;

    std::vector<Eigen::Index> active;
    const VectorXd slack0 = qp.h - qp.G * res.x;
    for (Eigen::Index i = 0; i < mi; ++i) {
        if (res.lambda[i] > slack0[i]) active.push_back(i);
    }

    const double feas_tol = 1e-9 * std::max(1.0, qp.h.lpNorm<Eigen::Infinity>());
    VectorXd x, y, lam_active;

    for (int pass = 0; pass < 15; ++pass) {
        const Eigen::Index ma = static_cast<Eigen::Index>(active.size());
        MatrixXd K(n + me + ma, n + me + ma);
        K.setZero();
        K.topLeftCorner(n, n) = qp.H;
        if (me > 0) {
            K.block(0, n, n, me) = qp.A.transpose();
            K.block(n, 0, me, n) = qp.A;
        }
        for (Eigen::Index k = 0; k < ma; ++k) {
            K.block(0, n + me + k, n, 1) = qp.G.row(active[k]).transpose();
            K.block(n + me + k, 0, 1, n) = qp.G.row(active[k]);
        }
        VectorXd rhs(n + me + ma);
        rhs.head(n) = -qp.g;
        rhs.segment(n, me) = qp.b;
        for (Eigen::Index k = 0; k < ma; ++k) rhs[n + me + k] = qp.h[active[k]];

        const Eigen::PartialPivLU<MatrixXd> lu(K);
        VectorXd sol = lu.solve(rhs);
        sol += lu.solve(rhs - K * sol);
        sol += lu.solve(rhs - K * sol);
        if (!sol.allFinite()) return;
        // Partial pivoting on a degenerate face can go astray; verify.
        const double resid = (K * sol - rhs).lpNorm<Eigen::Infinity>();
        if (resid > 1e-8 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) return;

        x = sol.head(n);
        y = sol.segment(n, me);
        lam_active = sol.tail(ma);

        // Drop the most negative multiplier first, then add the most
        // violated row; settle when neither applies.
        Eigen::Index drop = -1;
        double worst_lam = -feas_tol;
        for (Eigen::Index k = 0; k < ma; ++k) {
            if (lam_active[k] < worst_lam) {
                worst_lam = lam_active[k];
                drop = k;
            }
        }
        if (drop >= 0) {
            active.erase(active.begin() + drop);
            continue;
        }
        const VectorXd excess = qp.G * x - qp.h;
        Eigen::Index add = -1;
        double worst_excess = feas_tol;
        for (Eigen::Index i = 0; i < mi; ++i) {
            if (excess[i] > worst_excess &&
                std::find(active.begin(), active.end(), i) == active.end()) {
                worst_excess = excess[i];
                add = i;
            }
        }
        if (add >= 0) {
            active.push_back(add);
            continue;
        }

        // Settled: exact solution of the QP on this face.
        res.x = x;
        res.y = y;
        res.lambda.setZero();
        for (Eigen::Index k = 0; k < ma; ++k)
            res.lambda[active[k]] = std::max(0.0, lam_active[k]);
        res.status = QpStatus::Solved;
        const VectorXd rd = qp.H * x + qp.g + qp.G.transpose() * res.lambda +
                            (me > 0 ? VectorXd(qp.A.transpose() * y) : VectorXd::Zero(n));
        res.dual_residual = rd.lpNorm<Eigen::Infinity>();
        res.primal_residual =
            std::max(0.0, std::max(me > 0 ? (qp.A * x - qp.b).lpNorm<Eigen::Infinity>() : 0.0,
                                   excess.maxCoeff()));
        res.gap = 0.0;
        return;
    }
}

}  // namespace

QpResult solve_qp(const QpProblem& qp, const QpOptions& opt) {
    // Row-equilibrate the constraints before solving. x is invariant;
    // multipliers are mapped back afterwards.
    const Eigen::Index me = qp.A.rows();
    const Eigen::Index mi = qp.G.rows();

    QpProblem scaled;
    scaled.H = qp.H;
    scaled.g = qp.g;
    VectorXd re = VectorXd::Ones(me);
    VectorXd ri = VectorXd::Ones(mi);
    scaled.A = qp.A;
    scaled.b = qp.b;
    for (Eigen::Index i = 0; i < me; ++i) {
        re[i] = std::max(1.0, qp.A.row(i).lpNorm<Eigen::Infinity>());
        scaled.A.row(i) /= re[i];
        scaled.b[i] /= re[i];
    }
    scaled.G = qp.G;
    scaled.h = qp.h;
    for (Eigen::Index i = 0; i < mi; ++i) {
        ri[i] = std::max(1.0, std::max(qp.G.row(i).lpNorm<Eigen::Infinity>(),
                                       std::abs(qp.h[i]) / 100.0));
        scaled.G.row(i) /= ri[i];
        scaled.h[i] /= ri[i];
    }

    QpResult res = solve_scaled(scaled, opt);
    polish(scaled, res);

    for (Eigen::Index i = 0; i < me; ++i) res.y[i] /= re[i];
    for (Eigen::Index i = 0; i < mi; ++i) res.lambda[i] /= ri[i];
    return res;
}


namespace {

struct ElasticDir {
    VectorXd du, dt, ds1, dz1, ds2, dz2;
};

// Active-set polish of the elastic QP in u-space. A holds candidate active
// rows; V marks the subset whose elastic slack is positive (violated rows,
// multiplier saturated at rho * c). Eliminating the slacks leaves a KKT
// system in (u, lambda_A) with a diagonal correction on the V rows.
bool polish_elastic(const MatrixXd& H, const VectorXd& g, const MatrixXd& G,
                    const VectorXd& h, const VectorXd& c, double rho, double eps,
                    std::vector<Eigen::Index> active, std::vector<bool> saturated,
                    ElasticQpResult& res, const VectorXd& row_scale) {
    const Eigen::Index nu = H.rows();
    const Eigen::Index mi = G.rows();
    const double lam_tol = 1e-9 * rho * std::max(1.0, c.maxCoeff());
    const double feas_tol = 1e-9 * std::max(1.0, h.lpNorm<Eigen::Infinity>());

    for (int pass = 0; pass < 25; ++pass) {
        const Eigen::Index ma = static_cast<Eigen::Index>(active.size());
        MatrixXd K(nu + ma, nu + ma);
        K.setZero();
        K.topLeftCorner(nu, nu) = H;
        VectorXd rhs(nu + ma);
        rhs.head(nu) = -g;
        for (Eigen::Index k = 0; k < ma; ++k) {
            const Eigen::Index i = active[k];
            K.block(0, nu + k, nu, 1) = G.row(i).transpose();
            K.block(nu + k, 0, 1, nu) = G.row(i);
            rhs[nu + k] = h[i];
            if (saturated[k]) {
                K(nu + k, nu + k) = -1.0 / (eps * rho * rho);
                rhs[nu + k] -= c[i] / (eps * rho);
            }
        }
        const Eigen::PartialPivLU<MatrixXd> lu(K);
        VectorXd sol = lu.solve(rhs);
        sol += lu.solve(rhs - K * sol);
        sol += lu.solve(rhs - K * sol);
        if (!sol.allFinite()) return false;
        if ((K * sol - rhs).lpNorm<Eigen::Infinity>() >
            1e-8 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>()))
            return false;

        const VectorXd u = sol.head(nu);
        const VectorXd lam = sol.tail(ma);

        // One repair per pass: drop, demote, promote, then add.
        Eigen::Index worst = -1;
        double score = -lam_tol;
        for (Eigen::Index k = 0; k < ma; ++k) {
            if (lam[k] < score) {
                score = lam[k];
                worst = k;
            }
        }
        if (worst >= 0) {
            active.erase(active.begin() + worst);
            saturated.erase(saturated.begin() + worst);
            continue;
        }
        bool changed = false;
        for (Eigen::Index k = 0; k < ma && !changed; ++k) {
            const Eigen::Index i = active[k];
            if (saturated[k]) {
                const double t = (lam[k] / rho - c[i]) / eps;
                if (t < -1e-7) {
                    saturated[k] = false;
                    changed = true;
                }
            } else if (lam[k] > rho * c[i] + lam_tol) {
                saturated[k] = true;
                changed = true;
            }
        }
        if (changed) continue;
        Eigen::Index add = -1;
        double worst_excess = feas_tol;
        for (Eigen::Index i = 0; i < mi; ++i) {
            if (std::find(active.begin(), active.end(), i) != active.end()) continue;
            const double excess = G.row(i).dot(u) - h[i];
            if (excess > worst_excess) {
                worst_excess = excess;
                add = i;
            }
        }
        if (add >= 0) {
            active.push_back(add);
            saturated.push_back(false);
            continue;
        }

        res.u = u;
        res.lambda.setZero(mi);
        res.violation = 0.0;
        for (Eigen::Index k = 0; k < ma; ++k) {
            const Eigen::Index i = active[k];
            res.lambda[i] = std::max(0.0, lam[k]) / row_scale[i];
            if (saturated[k])
                res.violation += row_scale[i] * std::max(0.0, (lam[k] / rho - c[i]) / eps) / rho;
        }
        res.status = QpStatus::Solved;
        res.gap = 0.0;
        return true;
    }
    return false;
}

}  // namespace

ElasticQpResult solve_elastic_qp(const ElasticQpProblem& qp, const QpOptions& opt) {
    const Eigen::Index nu = qp.H.rows();
    const Eigen::Index mi = qp.G.rows();
    const double rho = qp.rho;
    const double eps = 1e-10;

    ElasticQpResult res;
    if (mi == 0) {
        res.u = qp.H.llt().solve(-qp.g);
        res.lambda.resize(0);
        res.status = res.u.allFinite() ? QpStatus::Solved : QpStatus::NumericalFailure;
        return res;
    }

    // Row equilibration; slack costs keep the penalty exact in original units.
    VectorXd row_scale = VectorXd::Ones(mi);
    MatrixXd G = qp.G;
    VectorXd h = qp.h;
    for (Eigen::Index i = 0; i < mi; ++i) {
        row_scale[i] = std::max(1.0, qp.G.row(i).lpNorm<Eigen::Infinity>());
        G.row(i) /= row_scale[i];
        h[i] /= row_scale[i];
    }
    const VectorXd c = row_scale;

    VectorXd u = VectorXd::Zero(nu);
    VectorXd t = rho * (-h).cwiseMax(0.0);
    VectorXd s1 = (h + t / rho).cwiseMax(1.0);
    VectorXd s2 = t.cwiseMax(1.0);
    VectorXd z1 = VectorXd::Ones(mi);
    VectorXd z2 = c;

    const double scale = std::max({1.0, qp.g.lpNorm<Eigen::Infinity>(),
                                   h.lpNorm<Eigen::Infinity>(), c.maxCoeff()});

    double best_progress = std::numeric_limits<double>::infinity();
    int stalled = 0;
    std::vector<Eigen::Index> active;
    std::vector<bool> saturated;

    for (int it = 0; it < opt.max_iterations; ++it) {
        const VectorXd r_u = qp.H * u + qp.g + G.transpose() * z1;
        const VectorXd r_t = c + eps * t - z1 / rho - z2;
        const VectorXd r_p1 = G * u - t / rho + s1 - h;
        const VectorXd r_p2 = s2 - t;
        const double mu = (s1.dot(z1) + s2.dot(z2)) / static_cast<double>(2 * mi);

        res.iterations = it;
        res.gap = mu;
        const double rinf = std::max({r_u.lpNorm<Eigen::Infinity>(), r_t.lpNorm<Eigen::Infinity>(),
                                      r_p1.lpNorm<Eigen::Infinity>(),
                                      r_p2.lpNorm<Eigen::Infinity>()});
        if (mu <= opt.tolerance * scale && rinf <= opt.tolerance * scale * 10.0) {
            res.status = QpStatus::Solved;
            break;
        }
        const double progress = std::max(mu, rinf);
        if (progress < 0.9 * best_progress) {
            best_progress = progress;
            stalled = 0;
        } else if (++stalled >= 6) {
            res.status = progress <= 1e-6 * scale ? QpStatus::Solved : QpStatus::MaxIterations;
            break;
        }

        const VectorXd D1 = z1.cwiseQuotient(s1);
        const VectorXd D2 = z2.cwiseQuotient(s2);
        const VectorXd W = (D1 / (rho * rho) + D2).array() + eps;
        const VectorXd Deff = D1 - D1.cwiseProduct(D1).cwiseQuotient(W) / (rho * rho);

        MatrixXd K = qp.H + G.transpose() * Deff.asDiagonal() * G;
        K.diagonal().array() += 1e-12;
        Eigen::LLT<MatrixXd> llt(K);
        Eigen::PartialPivLU<MatrixXd> lu;
        const bool use_llt = llt.info() == Eigen::Success;
        if (!use_llt) lu.compute(K);
        const auto ksolve = [&](const VectorXd& b) {
            return use_llt ? VectorXd(llt.solve(b)) : VectorXd(lu.solve(b));
        };

        const auto direction = [&](const VectorXd& rs1, const VectorXd& rs2) {
            ElasticDir dir;
            const VectorXd rhs_T = -r_t + D1.cwiseProduct(r_p1) / rho -
                                   rs1.cwiseQuotient(s1) / rho - rs2.cwiseQuotient(s2) +
                                   D2.cwiseProduct(r_p2);
            const VectorXd rhs_U =
                -r_u - G.transpose() * (D1.cwiseProduct(r_p1) - rs1.cwiseQuotient(s1));
            dir.du = ksolve(rhs_U + G.transpose() *
                                        (D1.cwiseProduct(rhs_T.cwiseQuotient(W)) / rho));
            dir.dt = (D1.cwiseProduct(G * dir.du) / rho + rhs_T).cwiseQuotient(W);
            dir.ds1 = -r_p1 - G * dir.du + dir.dt / rho;
            dir.dz1 = (-rs1 - z1.cwiseProduct(dir.ds1)).cwiseQuotient(s1);
            dir.ds2 = -r_p2 + dir.dt;
            dir.dz2 = (-rs2 - z2.cwiseProduct(dir.ds2)).cwiseQuotient(s2);
            return dir;
        };

        const auto step_len = [&](const ElasticDir& dir, double tau) {
            double ap = std::min(max_step(s1, dir.ds1, tau), max_step(s2, dir.ds2, tau));
            double ad = std::min(max_step(z1, dir.dz1, tau), max_step(z2, dir.dz2, tau));
            return std::pair<double, double>(ap, ad);
        };

        const ElasticDir aff = direction(s1.cwiseProduct(z1), s2.cwiseProduct(z2));
        const auto [apa, ada] = step_len(aff, 1.0);
        const double mu_aff = ((s1 + apa * aff.ds1).dot(z1 + ada * aff.dz1) +
                               (s2 + apa * aff.ds2).dot(z2 + ada * aff.dz2)) /
                              static_cast<double>(2 * mi);
        const double sigma = std::pow(std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0), 3);

        const VectorXd rs1 = s1.cwiseProduct(z1) + aff.ds1.cwiseProduct(aff.dz1) -
                             VectorXd::Constant(mi, sigma * mu);
        const VectorXd rs2 = s2.cwiseProduct(z2) + aff.ds2.cwiseProduct(aff.dz2) -
                             VectorXd::Constant(mi, sigma * mu);
        const ElasticDir dir = direction(rs1, rs2);
        if (!dir.du.allFinite() || !dir.dt.allFinite()) {
            res.status = QpStatus::NumericalFailure;
            break;
        }

        if (std::getenv("GEARMPC_EQP_DEBUG") != nullptr) {
            const auto [apx, adx] = step_len(dir, 0.995);
            std::printf("eqp it=%d mu=%.3e rinf=%.3e sigma=%.3e ap=%.3f ad=%.3f\n", it, mu,
                        rinf, sigma, apx, adx);
        }
        const auto [ap, ad] = step_len(dir, 0.995);
        u += ap * dir.du;
        t += ap * dir.dt;
        s1 += ap * dir.ds1;
        s2 += ap * dir.ds2;
        z1 += ad * dir.dz1;
        z2 += ad * dir.dz2;

        if (it + 1 == opt.max_iterations) res.status = QpStatus::MaxIterations;
    }

    // Fallback values from the interior-point iterate.
    res.u = u;
    res.lambda = z1.cwiseQuotient(row_scale);
    res.violation = row_scale.cwiseProduct(t).sum() / rho;
    if (!u.allFinite()) {
        res.status = QpStatus::NumericalFailure;
        return res;
    }

    for (Eigen::Index i = 0; i < mi; ++i) {
        if (z1[i] > s1[i]) {
            active.push_back(i);
            saturated.push_back(z2[i] < s2[i]);
        }
    }
    polish_elastic(qp.H, qp.g, G, h, c, rho, eps, std::move(active), std::move(saturated), res,
                   row_scale);
    return res;
}
}  // namespace gearmpc
