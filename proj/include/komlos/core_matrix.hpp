#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "komlos/errors.hpp"
#include "komlos/sign_vector.hpp"

namespace komlos {

inline constexpr double kColumnNormTolerance = 1e-9;
inline constexpr int kBruteForceCap = 24;
inline constexpr double kDiscRecomputeTolerance = 1e-12;

// Dense row-major d x n matrix of reals.
struct Matrix {
    int d = 0;
    int n = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int d_, int n_) : d(d_), n(n_), v(static_cast<std::size_t>(d_) * n_, 0.0) {
        if (d_ < 1 || n_ < 1) throw PreconditionViolated("matrix dimensions must be >= 1");
    }

    double& at(int i, int j) { return v[static_cast<std::size_t>(i) * n + j]; }
    double at(int i, int j) const { return v[static_cast<std::size_t>(i) * n + j]; }

    double column_norm(int j) const {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += at(i, j) * at(i, j);
        return std::sqrt(s);
    }

    std::vector<double> mul(const SignVector& x) const {
        if (x.size() != n) throw DimensionMismatch("matrix-vector product: size mismatch");
        std::vector<double> out(static_cast<std::size_t>(d), 0.0);
        for (int i = 0; i < d; ++i) {
            double s = 0.0;
            const double* row = v.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) s += row[j] * x[j];
            out[static_cast<std::size_t>(i)] = s;
        }
        return out;
    }
};

inline double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

inline double two_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// A validated Komlos matrix: every column lies within the unit ball
// (up to the construction tolerance). Immutable after construction.
class KomlosMatrix {
public:
    static KomlosMatrix validate(Matrix m, double tolerance = kColumnNormTolerance) {
        for (double x : m.v)
            if (!std::isfinite(x)) throw PreconditionViolated("matrix entries must be finite");
        int worst = -1;
        double worst_norm = 0.0;
        for (int j = 0; j < m.n; ++j) {
            double nj = m.column_norm(j);
            if (nj > worst_norm) {
                worst_norm = nj;
                worst = j;
            }
        }
        if (worst_norm > 1.0 + tolerance) throw ColumnNormExceeded(worst, worst_norm);
        return KomlosMatrix(std::move(m));
    }

    int d() const { return m_.d; }
    int n() const { return m_.n; }
    const Matrix& mat() const { return m_; }
    double at(int i, int j) const { return m_.at(i, j); }
    std::vector<double> mul(const SignVector& x) const { return m_.mul(x); }

private:
    explicit KomlosMatrix(Matrix m) : m_(std::move(m)) {}
    Matrix m_;
};

inline KomlosMatrix validate_komlos(Matrix m, double tolerance = kColumnNormTolerance) {
    return KomlosMatrix::validate(std::move(m), tolerance);
}

// +-1 matrix; row_parity_even asserts every row has an even number of +1s.
struct RademacherMatrix {
    int d = 0;
    int n = 0;
    std::vector<std::int8_t> e;
    bool row_parity_even = false;

    RademacherMatrix() = default;
    RademacherMatrix(int d_, int n_, std::vector<std::int8_t> entries, bool even_rows)
        : d(d_), n(n_), e(std::move(entries)), row_parity_even(even_rows) {
        if (d_ < 1 || n_ < 1) throw PreconditionViolated("matrix dimensions must be >= 1");
        if (e.size() != static_cast<std::size_t>(d_) * n_)
            throw DimensionMismatch("rademacher matrix: entry count mismatch");
        for (int i = 0; i < d; ++i) {
            int ones = 0;
            for (int j = 0; j < n; ++j) {
                std::int8_t x = at(i, j);
                if (x != 1 && x != -1)
                    throw PreconditionViolated("rademacher entries must be -1 or +1");
                if (x == 1) ++ones;
            }
            if (even_rows && (ones & 1))
                throw ParityViolation("row " + std::to_string(i) + " has odd +1 count");
        }
    }

    std::int8_t at(int i, int j) const { return e[static_cast<std::size_t>(i) * n + j]; }
    std::int8_t& at(int i, int j) { return e[static_cast<std::size_t>(i) * n + j]; }

    SignVector row(int i) const {
        std::vector<std::int8_t> r(e.begin() + static_cast<std::ptrdiff_t>(i) * n,
                                   e.begin() + static_cast<std::ptrdiff_t>(i + 1) * n);
        return SignVector(std::move(r));
    }

    // Exact integer row sums of R x.
    std::vector<long long> mul(const SignVector& x) const {
        if (x.size() != n) throw DimensionMismatch("rademacher product: size mismatch");
        std::vector<long long> out(static_cast<std::size_t>(d), 0);
        for (int i = 0; i < d; ++i) {
            long long s = 0;
            const std::int8_t* row = e.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) s += static_cast<long long>(row[j]) * x[j];
            out[static_cast<std::size_t>(i)] = s;
        }
        return out;
    }

    Matrix as_matrix() const {
        Matrix m(d, n);
        for (std::size_t k = 0; k < e.size(); ++k) m.v[k] = e[k];
        return m;
    }
};

struct DiscrepancyReport {
    double value = 0.0;
    SignVector witness;
    bool exhaustive = false;
};

// ||Mx||_inf.
inline double disc_value(const Matrix& m, const SignVector& x) { return inf_norm(m.mul(x)); }

inline double disc_value(const KomlosMatrix& m, const SignVector& x) {
    return disc_value(m.mat(), x);
}

// Exact minimiser of ||Mx||_inf over {-1,1}^n. Fixes x_n = +1 and walks the
// remaining 2^(n-1) assignments in Gray-code order, updating Mx by one column
// per step; the x <-> -x symmetry makes the half-cube sufficient.
inline DiscrepancyReport brute_force_disc(const KomlosMatrix& m, int cap = kBruteForceCap) {
    const int n = m.n();
    const int d = m.d();
    if (n > cap)
        throw TooLarge("brute_force_disc: n = " + std::to_string(n) + " exceeds cap " +
                       std::to_string(cap));

    std::vector<double> mx(static_cast<std::size_t>(d), 0.0);
    // start: all +1
    for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += m.at(i, j);
        mx[static_cast<std::size_t>(i)] = s;
    }

    std::uint32_t best_code = 0;
    double best = inf_norm(mx);
    std::uint32_t gray = 0;
    const std::uint64_t total = 1ull << (n - 1);
    for (std::uint64_t k = 1; k < total; ++k) {
        std::uint32_t g = static_cast<std::uint32_t>(k ^ (k >> 1));
        std::uint32_t flip_bit = gray ^ g;  // exactly one bit
        gray = g;
        int j = 0;
        while (!((flip_bit >> j) & 1u)) ++j;
        // code bit 0 <-> entry +1, bit 1 <-> entry -1; start state is all +1
        double delta = ((g >> j) & 1u) ? -2.0 : 2.0;
        for (int i = 0; i < d; ++i) mx[static_cast<std::size_t>(i)] += delta * m.at(i, j);
        double val = inf_norm(mx);
        if (val < best) {
            best = val;
            best_code = g;
        }
    }

    std::vector<std::int8_t> w(static_cast<std::size_t>(n), 1);
    for (int j = 0; j < n - 1; ++j)
        w[static_cast<std::size_t>(j)] = ((best_code >> j) & 1u) ? -1 : 1;
    SignVector witness(std::move(w));

    DiscrepancyReport rep{best, witness, true};
    double recomputed = disc_value(m, rep.witness);
    if (std::fabs(recomputed - rep.value) > kDiscRecomputeTolerance)
        throw NumericalFailure("brute_force_disc: witness recompute drifted");
    rep.value = recomputed;
    return rep;
}

// Entrywise M + R*scale. The result is a plain grid; it need not be Komlos.
inline Matrix perturb(const KomlosMatrix& m, const RademacherMatrix& r, double scale) {
    if (m.d() != r.d || m.n() != r.n) throw DimensionMismatch("perturb: dimensions differ");
    if (!(scale >= 0.0)) throw PreconditionViolated("perturb: scale must be >= 0");
    Matrix out(m.d(), m.n());
    for (int i = 0; i < m.d(); ++i)
        for (int j = 0; j < m.n(); ++j) out.at(i, j) = m.at(i, j) + scale * r.at(i, j);
    return out;
}

namespace detail {

inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

}  // namespace detail

// Text format: first line "d n", then d lines of n whitespace-separated reals.
inline std::string write_matrix_text(const Matrix& m) {
    std::string out = std::to_string(m.d) + " " + std::to_string(m.n) + "\n";
    for (int i = 0; i < m.d; ++i) {
        for (int j = 0; j < m.n; ++j) {
            if (j) out += ' ';
            out += detail::format_double(m.at(i, j));
        }
        out += '\n';
    }
    return out;
}

inline Matrix read_matrix_text(std::istream& in) {
    int d = 0, n = 0;
    if (!(in >> d >> n)) throw IoError("matrix text: missing dimension header");
    if (d < 1 || n < 1) throw IoError("matrix text: bad dimensions");
    Matrix m(d, n);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < n; ++j)
            if (!(in >> m.at(i, j))) throw IoError("matrix text: not enough entries");
    return m;
}

inline Matrix read_matrix_text(const std::string& text) {
    std::istringstream ss(text);
    return read_matrix_text(ss);
}

inline void save_matrix(const Matrix& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << write_matrix_text(m);
}

inline Matrix load_matrix(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    return read_matrix_text(f);
}

// Sign-vector format: one line of n space-separated tokens from {-1, 1}.
inline std::string write_sign_vector_text(const SignVector& x) {
    std::string out;
    for (int i = 0; i < x.size(); ++i) {
        if (i) out += ' ';
        out += (x[i] == 1 ? "1" : "-1");
    }
    out += '\n';
    return out;
}

inline SignVector read_sign_vector_text(const std::string& text) {
    std::istringstream ss(text);
    std::vector<std::int8_t> e;
    std::string tok;
    while (ss >> tok) {
        if (tok == "1" || tok == "+1")
            e.push_back(1);
        else if (tok == "-1")
            e.push_back(-1);
        else
            throw IoError("sign vector text: bad token '" + tok + "'");
    }
    if (e.empty()) throw IoError("sign vector text: empty");
    return SignVector(std::move(e));
}

}  // namespace komlos
