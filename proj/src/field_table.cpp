#include "atomchip/field_table.hpp"

#include <cmath>

#include "atomchip/errors.hpp"
#include "atomchip/parallel.hpp"

namespace atomchip {

namespace {

// In-place interpolating cubic B-spline prefilter with mirror boundaries.
void prefilter(double* c, int n, std::ptrdiff_t stride) {
    if (n < 2) return;
    const double z = std::sqrt(3.0) - 2.0;
    const double gain = (1.0 - z) * (1.0 - 1.0 / z);
    for (int k = 0; k < n; ++k) c[k * stride] *= gain;
    double sum = c[0];
    double zk = z;
    const int horizon = std::min(n, 40);
    for (int k = 1; k < horizon; ++k) {
        sum += zk * c[k * stride];
        zk *= z;
    }
    c[0] = sum;
    for (int k = 1; k < n; ++k) c[k * stride] += z * c[(k - 1) * stride];
    c[(n - 1) * stride] = (z / (z * z - 1.0)) * (c[(n - 1) * stride] + z * c[(n - 2) * stride]);
    for (int k = n - 2; k >= 0; --k) c[k * stride] = z * (c[(k + 1) * stride] - c[k * stride]);
}

inline void bspline_weights(double t, double w[4], double dw[4]) {
    const double s = 1.0 - t;
    const double t2 = t * t, t3 = t2 * t;
    w[0] = s * s * s / 6.0;
    w[1] = (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0;
    w[2] = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0;
    w[3] = t3 / 6.0;
    dw[0] = -0.5 * s * s;
    dw[1] = 0.5 * (3.0 * t2 - 4.0 * t);
    dw[2] = 0.5 * (-3.0 * t2 + 2.0 * t + 1.0);
    dw[3] = 0.5 * t2;
}

}  // namespace

FieldTable::FieldTable(const FieldEngine& engine, const DriveConfig& drive, const Box& box, double spacing,
                       int threads)
    : box_(box), h_(spacing) {
    if (!(spacing > 0.0)) throw ConfigError("field table spacing must be positive");
    if (!((box.hi - box.lo).array() > 0.0).all()) throw ConfigError("field table box is empty");
    // Four extra nodes on each side: two keep every 4x4x4 support inside the
    // grid, the rest let the mirror-boundary error of the prefilter decay.
    origin_ = box.lo - Vec3::Constant(4.0 * h_);
    for (int a = 0; a < 3; ++a) {
        n_[a] = static_cast<int>(std::ceil((box.hi[a] - box.lo[a]) / h_ - 1e-9)) + 9;
    }
    const std::size_t nodes = static_cast<std::size_t>(n_[0]) * n_[1] * n_[2];
    coef_.assign(nodes * kComps, 0.0);

    const Vec3 bias = engine.scene().bias.vector();
    const std::map<std::string, double> extra;
    parallel_for(static_cast<std::size_t>(n_[0]), [&](std::size_t ix) {
        for (int iy = 0; iy < n_[1]; ++iy) {
            for (int iz = 0; iz < n_[2]; ++iz) {
                const Vec3 p = origin_ + h_ * Vec3(static_cast<double>(ix), static_cast<double>(iy), static_cast<double>(iz));
                const auto ch = engine.channel_fields(p, extra);
                const Vec3 stat = bias + drive.I0 * ch[static_cast<int>(Channel::I0)];
                const Vec3 parts[4] = {stat, ch[static_cast<int>(Channel::M1)], ch[static_cast<int>(Channel::M2)],
                                       ch[static_cast<int>(Channel::H2)]};
                double* c = &coef_[((ix * n_[1] + iy) * static_cast<std::size_t>(n_[2]) + iz) * kComps];
                for (int k = 0; k < 4; ++k) {
                    for (int d = 0; d < 3; ++d) c[3 * k + d] = parts[k][d];
                }
            }
        }
    }, threads);

    const std::ptrdiff_t sz = kComps;
    const std::ptrdiff_t sy = sz * n_[2];
    const std::ptrdiff_t sx = sy * n_[1];
    // along z
    parallel_for(static_cast<std::size_t>(n_[0]), [&](std::size_t ix) {
        for (int iy = 0; iy < n_[1]; ++iy)
            for (int k = 0; k < kComps; ++k) prefilter(&coef_[ix * sx + iy * sy + k], n_[2], sz);
    }, threads);
    // along y
    parallel_for(static_cast<std::size_t>(n_[0]), [&](std::size_t ix) {
        for (int iz = 0; iz < n_[2]; ++iz)
            for (int k = 0; k < kComps; ++k) prefilter(&coef_[ix * sx + iz * sz + k], n_[1], sy);
    }, threads);
    // along x
    parallel_for(static_cast<std::size_t>(n_[1]), [&](std::size_t iy) {
        for (int iz = 0; iz < n_[2]; ++iz)
            for (int k = 0; k < kComps; ++k) prefilter(&coef_[iy * sy + iz * sz + k], n_[0], sx);
    }, threads);
}

template <bool WithGradient>
void FieldTable::evaluate(double IM1, double IM2, double IH2, const Vec3& p, FieldGradient& out) const {
    if (!box_.contains(p)) throw SingularityError("point outside the field table");
    int cell[3];
    double w[3][4], dw[3][4];
    for (int a = 0; a < 3; ++a) {
        const double u = (p[a] - origin_[a]) / h_;
        int i = static_cast<int>(std::floor(u));
        i = std::min(std::max(i, 1), n_[a] - 3);
        bspline_weights(u - i, w[a], dw[a]);
        cell[a] = i - 1;
    }
    double B[3] = {0, 0, 0};
    double G[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    const std::size_t sy = static_cast<std::size_t>(n_[2]) * kComps;
    const std::size_t sx = sy * n_[1];
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            const double wxy = w[0][a] * w[1][b];
            const double dxy = dw[0][a] * w[1][b];
            const double xdy = w[0][a] * dw[1][b];
            const double* row = &coef_[(cell[0] + a) * sx + (cell[1] + b) * sy + static_cast<std::size_t>(cell[2]) * kComps];
            for (int c = 0; c < 4; ++c) {
                const double* q = row + c * kComps;
                const double v[3] = {q[0] + IM1 * q[3] + IM2 * q[6] + IH2 * q[9],
                                     q[1] + IM1 * q[4] + IM2 * q[7] + IH2 * q[10],
                                     q[2] + IM1 * q[5] + IM2 * q[8] + IH2 * q[11]};
                const double wv = wxy * w[2][c];
                for (int d = 0; d < 3; ++d) B[d] += wv * v[d];
                if constexpr (WithGradient) {
                    const double gx = dxy * w[2][c], gy = xdy * w[2][c], gz = wxy * dw[2][c];
                    for (int d = 0; d < 3; ++d) {
                        G[d][0] += gx * v[d];
                        G[d][1] += gy * v[d];
                        G[d][2] += gz * v[d];
                    }
                }
            }
        }
    }
    out.B = Vec3(B[0], B[1], B[2]);
    if constexpr (WithGradient) {
        for (int d = 0; d < 3; ++d)
            for (int e = 0; e < 3; ++e) out.J(d, e) = G[d][e] / h_;
    }
}

FieldGradient FieldTable::field(double IM1, double IM2, double IH2, const Vec3& p) const {
    FieldGradient out;
    evaluate<true>(IM1, IM2, IH2, p, out);
    return out;
}

Vec3 FieldTable::field_only(double IM1, double IM2, double IH2, const Vec3& p) const {
    FieldGradient out;
    evaluate<false>(IM1, IM2, IH2, p, out);
    return out.B;
}

}  // namespace atomchip
