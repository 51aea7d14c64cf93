#pragma once

// Small dense minimizers shared by the trap analysis: BFGS on central-difference
// gradients with Armijo backtracking, and Nelder-Mead as a fallback.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "atomchip/errors.hpp"

namespace atomchip::detail {

template <int N>
using VecN = Eigen::Matrix<double, N, 1>;
template <int N>
using MatN = Eigen::Matrix<double, N, N>;

// Evaluates f, mapping SingularityError to +inf so line searches back off.
template <class F, int N>
double safe_eval(F& f, const VecN<N>& x) {
    try {
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const SingularityError&) {
        return std::numeric_limits<double>::infinity();
    }
}

template <int N, class F>
VecN<N> fd_gradient(F& f, const VecN<N>& x, double h) {
    VecN<N> g;
    for (int i = 0; i < N; ++i) {
        VecN<N> xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

template <int N, class F>
MatN<N> fd_hessian(F& f, const VecN<N>& x, double h) {
    MatN<N> H;
    const double f0 = f(x);
    for (int i = 0; i < N; ++i) {
        VecN<N> xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h * h);
        for (int j = i + 1; j < N; ++j) {
            VecN<N> pp = x, pm = x, mp = x, mm = x;
            pp[i] += h; pp[j] += h;
            pm[i] += h; pm[j] -= h;
            mp[i] -= h; mp[j] += h;
            mm[i] -= h; mm[j] -= h;
            H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
        }
    }
    return 0.5 * (H + H.transpose());
}

template <int N>
struct MinimizeResult {
    VecN<N> x;
    double f = 0.0;
    VecN<N> grad;
    int iterations = 0;
    bool converged = false;
};

struct MinimizeSettings {
    double h = 0.05e-6;
    double grad_tol = 1e-28;
    double step_tol = 1e-9;
    int max_iters = 200;
    double max_step = 20e-6;
};

template <int N, class F>
VecN<N> nelder_mead(F& f, VecN<N> x0, double size, double xtol, int max_iters) {
    std::array<VecN<N>, N + 1> pts;
    std::array<double, N + 1> val;
    pts[0] = x0;
    for (int i = 0; i < N; ++i) {
        pts[i + 1] = x0;
        pts[i + 1][i] += size;
    }
    for (int i = 0; i <= N; ++i) val[i] = safe_eval<F, N>(f, pts[i]);
    for (int it = 0; it < max_iters; ++it) {
        std::array<int, N + 1> idx;
        for (int i = 0; i <= N; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return val[a] < val[b]; });
        double spread = 0.0;
        for (int i = 1; i <= N; ++i) spread = std::max(spread, (pts[idx[i]] - pts[idx[0]]).norm());
        if (spread < xtol) break;
        VecN<N> centroid = VecN<N>::Zero();
        for (int i = 0; i < N; ++i) centroid += pts[idx[i]];
        centroid /= N;
        const int worst = idx[N];
        const VecN<N> xr = centroid + (centroid - pts[worst]);
        const double fr = safe_eval<F, N>(f, xr);
        if (fr < val[idx[0]]) {
            const VecN<N> xe = centroid + 2.0 * (centroid - pts[worst]);
            const double fe = safe_eval<F, N>(f, xe);
            if (fe < fr) {
                pts[worst] = xe; val[worst] = fe;
            } else {
                pts[worst] = xr; val[worst] = fr;
            }
        } else if (fr < val[idx[N - 1]]) {
            pts[worst] = xr; val[worst] = fr;
        } else {
            const VecN<N> xc = centroid + 0.5 * (pts[worst] - centroid);
            const double fc = safe_eval<F, N>(f, xc);
            if (fc < val[worst]) {
                pts[worst] = xc; val[worst] = fc;
            } else {
                for (int i = 1; i <= N; ++i) {
                    pts[idx[i]] = pts[idx[0]] + 0.5 * (pts[idx[i]] - pts[idx[0]]);
                    val[idx[i]] = safe_eval<F, N>(f, pts[idx[i]]);
                }
            }
        }
    }
    int best = 0;
    for (int i = 1; i <= N; ++i) {
        if (val[i] < val[best]) best = i;
    }
    return pts[best];
}

template <int N, class F>
MinimizeResult<N> bfgs_minimize(F& f, VecN<N> x, const MinimizeSettings& s) {
    MinimizeResult<N> r;
    auto reset_inverse = [&](const VecN<N>& at, const VecN<N>& g) -> MatN<N> {
        const MatN<N> H = fd_hessian<N>(f, at, s.h);
        Eigen::SelfAdjointEigenSolver<MatN<N>> es(H);
        if (es.eigenvalues().minCoeff() > 0.0) return H.inverse();
        const double gn = std::max(g.norm(), 1e-300);
        return MatN<N>::Identity() * (0.1 * s.max_step / gn);
    };

    double fx = f(x);
    VecN<N> g = fd_gradient<N>(f, x, s.h);
    MatN<N> Hinv = reset_inverse(x, g);
    bool fell_back = false;
    int stalled = 0;
    double last_step = std::numeric_limits<double>::infinity();

    for (int it = 0; it < s.max_iters; ++it) {
        r.iterations = it;
        if (g.norm() < s.grad_tol && last_step < s.step_tol) {
            r.converged = true;
            break;
        }
        VecN<N> p = -Hinv * g;
        if (p.dot(g) >= 0.0) {
            Hinv = MatN<N>::Identity() * (0.1 * s.max_step / std::max(g.norm(), 1e-300));
            p = -Hinv * g;
        }
        const double pn = p.norm();
        if (pn > s.max_step) p *= s.max_step / pn;

        double alpha = 1.0;
        double fn = 0.0;
        VecN<N> xn;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            xn = x + alpha * p;
            fn = safe_eval<F, N>(f, xn);
            if (fn <= fx + 1e-4 * alpha * g.dot(p)) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // Converged to the noise floor: accept if the gradient is already small.
            if (g.norm() < s.grad_tol) {
                r.converged = true;
                break;
            }
            if (fell_back) break;
            fell_back = true;
            xn = nelder_mead<N>(f, x, std::max(10.0 * s.h, 1e-3 * s.max_step), 1e-3 * s.step_tol, 4000);
            fn = f(xn);
        }
        const VecN<N> step = xn - x;
        last_step = step.norm();
        // No representable decrease left: further iterations cannot improve x.
        stalled = (fn >= fx) ? stalled + 1 : 0;
        if (stalled > 3) {
            x = xn;
            fx = fn;
            g = fd_gradient<N>(f, xn, s.h);
            break;
        }
        const VecN<N> gn = fd_gradient<N>(f, xn, s.h);
        const VecN<N> y = gn - g;
        const double sy = step.dot(y);
        if (!accepted) {
            Hinv = reset_inverse(xn, gn);
        } else if (sy > 0.0) {
            const double rho = 1.0 / sy;
            const MatN<N> I = MatN<N>::Identity();
            Hinv = (I - rho * step * y.transpose()) * Hinv * (I - rho * y * step.transpose()) +
                   rho * step * step.transpose();
        }
        x = xn;
        fx = fn;
        g = gn;
    }
    if (!r.converged && g.norm() < s.grad_tol && last_step < s.step_tol) r.converged = true;
    r.x = x;
    r.f = fx;
    r.grad = g;
    return r;
}

}  // namespace atomchip::detail
