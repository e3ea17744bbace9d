#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "komlos/core_matrix.hpp"
#include "komlos/errors.hpp"
#include "komlos/rng.hpp"
#include "komlos/sign_vector.hpp"

namespace komlos {

// Acceptance window for the truncated distribution D: keep walk outputs with
// c_lo * sqrt(d) <= ||Mx||_2 <= c_hi * sqrt(d). The window is configuration,
// not a claim; tail_scale is the 8 in the exp(-t^2/8) tail shape.
struct TruncationConfig {
    double c_lo = 0.2;
    double c_hi = 5.0;
    int max_rejections = 10000;
    double tail_scale = 8.0;

    void check() const {
        if (!(0.0 < c_lo && c_lo < c_hi))
            throw PreconditionViolated("truncation window requires 0 < c_lo < c_hi");
        if (max_rejections < 1)
            throw PreconditionViolated("max_rejections must be >= 1");
        if (!(tail_scale > 0.0)) throw PreconditionViolated("tail_scale must be > 0");
    }
};

struct WalkState {
    std::vector<double> fractional;   // in [-1, 1]^n; frozen coordinates exactly +-1
    std::vector<std::uint8_t> alive;  // 1 iff |fractional_i| < 1
    int alive_count = 0;
    int pivot = -1;  // -1 once everything is frozen
    int steps = 0;

    bool invariants_ok() const {
        int count = 0;
        for (std::size_t i = 0; i < fractional.size(); ++i) {
            if (alive[i]) {
                ++count;
                if (!(std::fabs(fractional[i]) < 1.0)) return false;
            } else if (fractional[i] != 1.0 && fractional[i] != -1.0) {
                return false;
            }
        }
        if (count != alive_count) return false;
        if (pivot >= 0 && !alive[static_cast<std::size_t>(pivot)]) return false;
        return true;
    }
};

namespace detail {

inline constexpr double kWalkRidge = 1e-12;
inline constexpr double kWalkResidualTol = 1e-8;
// must sit well above the ridge: collinear columns leave direction deficits
// of lambda / sigma^2, which would otherwise park coordinates just inside
// the cube
inline constexpr double kFreezeSnap = 1e-9;

// Solve A z = b for SPD A (d x d, row-major); A is destroyed. Returns false
// on a non-positive pivot.
inline bool cholesky_solve(std::vector<double>& A, std::vector<double>& z,
                           const std::vector<double>& b, int d) {
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = A[static_cast<std::size_t>(i) * d + j];
            for (int k = 0; k < j; ++k)
                s -= A[static_cast<std::size_t>(i) * d + k] * A[static_cast<std::size_t>(j) * d + k];
            if (i == j) {
                if (!(s > 0.0)) return false;
                A[static_cast<std::size_t>(i) * d + i] = std::sqrt(s);
            } else {
                A[static_cast<std::size_t>(i) * d + j] = s / A[static_cast<std::size_t>(j) * d + j];
            }
        }
    }
    z.assign(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
        double s = b[static_cast<std::size_t>(i)];
        for (int k = 0; k < i; ++k) s -= A[static_cast<std::size_t>(i) * d + k] * z[static_cast<std::size_t>(k)];
        z[static_cast<std::size_t>(i)] = s / A[static_cast<std::size_t>(i) * d + i];
    }
    for (int i = d - 1; i >= 0; --i) {
        double s = z[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < d; ++k) s -= A[static_cast<std::size_t>(k) * d + i] * z[static_cast<std::size_t>(k)];
        z[static_cast<std::size_t>(i)] = s / A[static_cast<std::size_t>(i) * d + i];
    }
    return true;
}

// Solve (W + lambda I) z = b with escalating jitter; verifies the residual.
inline std::vector<double> solve_regularised(const std::vector<double>& W,
                                             const std::vector<double>& b, int d,
                                             double lambda) {
    double bmax = 0.0;
    for (double x : b) bmax = std::max(bmax, std::fabs(x));
    std::vector<double> A;
    std::vector<double> z;
    double jitter = lambda;
    for (int attempt = 0; attempt < 4; ++attempt) {
        A = W;
        for (int i = 0; i < d; ++i) A[static_cast<std::size_t>(i) * d + i] += jitter;
        if (cholesky_solve(A, z, b, d)) {
            // residual against the jittered system
            double rmax = 0.0;
            for (int i = 0; i < d; ++i) {
                double s = -b[static_cast<std::size_t>(i)];
                for (int j = 0; j < d; ++j)
                    s += W[static_cast<std::size_t>(i) * d + j] * z[static_cast<std::size_t>(j)];
                s += jitter * z[static_cast<std::size_t>(i)];
                rmax = std::max(rmax, std::fabs(s));
            }
            if (rmax <= kWalkResidualTol * std::max(1.0, bmax)) return z;
        }
        jitter *= 1e4;
    }
    throw NumericalFailure("gs_walk: least-squares subproblem unsolvable beyond tolerance");
}

// Step direction for one walk iteration: u_pivot = 1, u on the other alive
// coordinates minimises ||V u||_2 with ridge kWalkRidge, zero elsewhere.
// cols is column-major d x n; W_alive = sum of v v^T over alive columns.
inline std::vector<double> walk_direction(const double* cols, int d, int n,
                                          const std::vector<std::uint8_t>& alive, int pivot,
                                          const std::vector<double>& W_alive) {
    const double* vp = cols + static_cast<std::size_t>(pivot) * d;
    std::vector<double> u(static_cast<std::size_t>(n), 0.0);
    u[static_cast<std::size_t>(pivot)] = 1.0;

    int alive_count = 0;
    for (int j = 0; j < n; ++j)
        if (alive[static_cast<std::size_t>(j)]) ++alive_count;
    if (alive_count <= 1) return u;

    // ridge least squares in its d x d kernel form:
    // u_A = -V_A^T (V_A V_A^T + lambda I)^{-1} v_p
    std::vector<double> Wp(W_alive);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) Wp[static_cast<std::size_t>(a) * d + b] -= vp[a] * vp[b];
    std::vector<double> rhs(vp, vp + d);
    std::vector<double> z = solve_regularised(Wp, rhs, d, kWalkRidge);
    for (int j = 0; j < n; ++j) {
        if (!alive[static_cast<std::size_t>(j)] || j == pivot) continue;
        const double* vj = cols + static_cast<std::size_t>(j) * d;
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += vj[i] * z[static_cast<std::size_t>(i)];
        u[static_cast<std::size_t>(j)] = -s;
    }
    return u;
}

}  // namespace detail

// One Gram-Schmidt walk run. Starts at the all-zeros fractional vector; the
// pivot is the largest-index alive coordinate and is re-picked only when it
// freezes. The step direction u has u_pivot = 1 and, on the other alive
// coordinates, minimises ||V u||_2 (ridge-regularised least squares; solved
// in its equivalent d x d kernel form). Step sizes delta+/- are maximal
// subject to staying in [-1,1]^n and the sign is drawn with
// Pr[+delta+] = delta- / (delta+ + delta-).
//
// `choose` receives that probability and returns true to take the plus step;
// this is the seam the branch-exhaustion tests drive.
template <class Chooser>
inline SignVector gs_walk_core(const KomlosMatrix& M, Chooser&& choose,
                               WalkState* state_out = nullptr) {
    const int d = M.d();
    const int n = M.n();

    // column-major copy for contiguous column access
    std::vector<double> cols(static_cast<std::size_t>(d) * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < d; ++i)
            cols[static_cast<std::size_t>(j) * d + i] = M.at(i, j);
    auto col = [&](int j) { return cols.data() + static_cast<std::size_t>(j) * d; };

    WalkState st;
    st.fractional.assign(static_cast<std::size_t>(n), 0.0);
    st.alive.assign(static_cast<std::size_t>(n), 1);
    st.alive_count = n;
    st.pivot = n - 1;

    // W = sum over alive columns of v v^T, downdated as coordinates freeze
    std::vector<double> W(static_cast<std::size_t>(d) * d, 0.0);
    for (int j = 0; j < n; ++j) {
        const double* v = col(j);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) W[static_cast<std::size_t>(a) * d + b] += v[a] * v[b];
    }

    auto freeze = [&](int j, double value) {
        st.fractional[static_cast<std::size_t>(j)] = value;
        st.alive[static_cast<std::size_t>(j)] = 0;
        --st.alive_count;
        const double* v = col(j);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) W[static_cast<std::size_t>(a) * d + b] -= v[a] * v[b];
    };

    while (st.alive_count > 0) {
        if (++st.steps > n)
            throw NumericalFailure("gs_walk: exceeded n freezing steps");
        std::vector<double> u = detail::walk_direction(cols.data(), d, n, st.alive, st.pivot, W);

        // maximal step sizes keeping the fractional vector inside the cube
        double dplus = std::numeric_limits<double>::infinity();
        double dminus = std::numeric_limits<double>::infinity();
        int bind_plus = -1, bind_minus = -1;
        for (int j = 0; j < n; ++j) {
            if (!st.alive[static_cast<std::size_t>(j)]) continue;
            double uj = u[static_cast<std::size_t>(j)];
            if (uj == 0.0) continue;
            double fj = st.fractional[static_cast<std::size_t>(j)];
            double room_up = (uj > 0.0 ? (1.0 - fj) / uj : (-1.0 - fj) / uj);
            double room_dn = (uj > 0.0 ? (fj + 1.0) / uj : (fj - 1.0) / uj);
            if (room_up < dplus) { dplus = room_up; bind_plus = j; }
            if (room_dn < dminus) { dminus = room_dn; bind_minus = j; }
        }
        if (!(dplus > 0.0) || !(dminus > 0.0) || bind_plus < 0 || bind_minus < 0)
            throw NumericalFailure("gs_walk: degenerate step sizes");

        double p_plus = dminus / (dplus + dminus);
        bool take_plus = choose(p_plus);
        double step = take_plus ? dplus : -dminus;
        int binding = take_plus ? bind_plus : bind_minus;

        for (int j = 0; j < n; ++j) {
            if (!st.alive[static_cast<std::size_t>(j)]) continue;
            st.fractional[static_cast<std::size_t>(j)] += step * u[static_cast<std::size_t>(j)];
        }
        // the binding coordinate lands exactly on the boundary
        double bound = (step * u[static_cast<std::size_t>(binding)] > 0.0) ? 1.0 : -1.0;
        freeze(binding, bound);
        for (int j = 0; j < n; ++j) {
            if (!st.alive[static_cast<std::size_t>(j)]) continue;
            double fj = st.fractional[static_cast<std::size_t>(j)];
            if (std::fabs(fj) >= 1.0 - detail::kFreezeSnap) freeze(j, fj > 0.0 ? 1.0 : -1.0);
        }
        if (!st.alive[static_cast<std::size_t>(st.pivot)]) {
            st.pivot = -1;
            for (int j = n - 1; j >= 0; --j)
                if (st.alive[static_cast<std::size_t>(j)]) { st.pivot = j; break; }
        }
    }

    std::vector<std::int8_t> out(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        double fj = st.fractional[static_cast<std::size_t>(j)];
        if (fj != 1.0 && fj != -1.0)
            throw NumericalFailure("gs_walk: unfrozen coordinate at termination");
        out[static_cast<std::size_t>(j)] = (fj > 0.0) ? 1 : -1;
    }
    if (state_out) *state_out = st;
    return SignVector(std::move(out));
}

inline SignVector gs_walk_sample(const KomlosMatrix& M, RngStream& rng,
                                 WalkState* state_out = nullptr) {
    return gs_walk_core(M, [&rng](double p_plus) { return rng.uniform01() < p_plus; },
                        state_out);
}

struct TruncatedSample {
    SignVector x;
    int attempts = 0;  // walk runs consumed, including the accepted one
    std::uint64_t master_seed = 0;  // provenance of the stream that drew x
    std::uint64_t stream_index = 0;
};

// Rejection sampler for the truncated distribution D: walk outputs
// conditioned on the ||Mx||_2 window.
inline TruncatedSample sample_truncated_info(const KomlosMatrix& M,
                                             const TruncationConfig& cfg, RngStream& rng) {
    cfg.check();
    const double sqrt_d = std::sqrt(static_cast<double>(M.d()));
    const double lo = cfg.c_lo * sqrt_d;
    const double hi = cfg.c_hi * sqrt_d;
    for (int attempt = 1; attempt <= cfg.max_rejections; ++attempt) {
        SignVector x = gs_walk_sample(M, rng);
        double norm = two_norm(M.mul(x));
        if (lo <= norm && norm <= hi)
            return TruncatedSample{std::move(x), attempt, rng.master_seed(),
                                   rng.stream_index()};
    }
    throw MaxRejectionsExceeded(cfg.max_rejections);
}

inline SignVector sample_truncated(const KomlosMatrix& M, const TruncationConfig& cfg,
                                   RngStream& rng) {
    return sample_truncated_info(M, cfg, rng).x;
}

// --- empirical subgaussian tail check -------------------------------------

struct TailRow {
    int direction_id = 0;
    double t = 0.0;
    double frequency = 0.0;
    double bound = 0.0;  // 2 exp(-t^2 / tail_scale)
    double slack = 0.0;  // 3 sigma of a binomial proportion at the bound
    bool pass = false;
};

inline std::vector<TailRow> subgaussian_tail_report(
    const std::vector<SignVector>& samples, const KomlosMatrix& M,
    const std::vector<std::vector<double>>& directions, const std::vector<double>& thresholds,
    double tail_scale = 8.0) {
    if (samples.empty()) throw EmptySampleSet();
    for (const auto& dir : directions) {
        if (static_cast<int>(dir.size()) != M.d())
            throw DimensionMismatch("tail report: direction length != d");
        double nrm = two_norm(dir);
        if (std::fabs(nrm - 1.0) > 1e-9)
            throw PreconditionViolated("tail report: direction not unit-norm");
    }

    std::vector<std::vector<double>> mx;
    mx.reserve(samples.size());
    for (const auto& x : samples) mx.push_back(M.mul(x));

    const double N = static_cast<double>(samples.size());
    std::vector<TailRow> rows;
    for (int di = 0; di < static_cast<int>(directions.size()); ++di) {
        const auto& v = directions[static_cast<std::size_t>(di)];
        std::vector<double> proj(samples.size());
        for (std::size_t s = 0; s < samples.size(); ++s) {
            double acc = 0.0;
            for (int i = 0; i < M.d(); ++i) acc += mx[s][static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
            proj[s] = std::fabs(acc);
        }
        for (double t : thresholds) {
            std::size_t hits = 0;
            for (double pv : proj)
                if (pv >= t) ++hits;
            TailRow row;
            row.direction_id = di;
            row.t = t;
            row.frequency = static_cast<double>(hits) / N;
            row.bound = 2.0 * std::exp(-t * t / tail_scale);
            double b = std::clamp(row.bound, 0.0, 1.0);
            row.slack = 3.0 * std::sqrt(b * (1.0 - b) / N);
            row.pass = row.frequency <= row.bound + row.slack;
            rows.push_back(row);
        }
    }
    return rows;
}

inline std::string tail_report_csv(const std::vector<TailRow>& rows) {
    std::string out = "direction_id,t,frequency,bound,slack,pass\n";
    for (const auto& r : rows) {
        out += std::to_string(r.direction_id);
        out += ',';
        out += detail::format_double(r.t);
        out += ',';
        out += detail::format_double(r.frequency);
        out += ',';
        out += detail::format_double(r.bound);
        out += ',';
        out += detail::format_double(r.slack);
        out += ',';
        out += (r.pass ? "1" : "0");
        out += '\n';
    }
    return out;
}

}  // namespace komlos
