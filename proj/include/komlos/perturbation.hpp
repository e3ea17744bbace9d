#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "komlos/core_matrix.hpp"
#include "komlos/errors.hpp"
#include "komlos/rng.hpp"
#include "komlos/sign_vector.hpp"

namespace komlos {

inline RademacherMatrix sample_rademacher(int d, int n, RngStream& rng) {
    if (d < 1 || n < 1) throw PreconditionViolated("sample_rademacher: d, n >= 1");
    std::vector<std::int8_t> e(static_cast<std::size_t>(d) * n);
    for (auto& v : e) v = static_cast<std::int8_t>(rng.sign());
    return RademacherMatrix(d, n, std::move(e), false);
}

// Uniform over E_n: entries 2..n are i.i.d. signs, entry 1 completes the +1
// count to even.
inline SignVector sample_row_even(int n, RngStream& rng) {
    if (n < 1) throw PreconditionViolated("sample_row_even: n >= 1");
    std::vector<std::int8_t> e(static_cast<std::size_t>(n));
    int ones = 0;
    for (int j = 1; j < n; ++j) {
        e[static_cast<std::size_t>(j)] = static_cast<std::int8_t>(rng.sign());
        if (e[static_cast<std::size_t>(j)] == 1) ++ones;
    }
    e[0] = static_cast<std::int8_t>((ones & 1) ? 1 : -1);
    return SignVector(std::move(e));
}

inline RademacherMatrix sample_rademacher_even_rows(int d, int n, RngStream& rng) {
    if (d < 1 || n < 1) throw PreconditionViolated("sample_rademacher_even_rows: d, n >= 1");
    std::vector<std::int8_t> e;
    e.reserve(static_cast<std::size_t>(d) * n);
    for (int i = 0; i < d; ++i) {
        SignVector row = sample_row_even(n, rng);
        e.insert(e.end(), row.entries().begin(), row.entries().end());
    }
    return RademacherMatrix(d, n, std::move(e), true);
}

// Replaces the first entry of every row with a fresh i.i.d. sign; the result
// is distributed as an unconditioned Rademacher matrix.
inline RademacherMatrix resample_first_column(const RademacherMatrix& R, RngStream& rng) {
    if (!R.row_parity_even)
        throw PreconditionViolated("resample_first_column requires even-parity rows");
    RademacherMatrix out = R;
    out.row_parity_even = false;
    for (int i = 0; i < out.d; ++i) out.at(i, 0) = static_cast<std::int8_t>(rng.sign());
    return out;
}

// M padded with copies of u = (1,...,1)/sqrt(d): one column if n is odd, two
// if n is even, so the padded column count is always even.
struct PaddedInstance {
    KomlosMatrix base;
    KomlosMatrix padded;
    int pad_count = 0;
    std::vector<double> pad_column;
};

inline PaddedInstance pad_matrix(const KomlosMatrix& M) {
    const int d = M.d();
    const int n = M.n();
    const int pad = (n % 2 == 1) ? 1 : 2;
    const double ui = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix grid(d, n + pad);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < n; ++j) grid.at(i, j) = M.at(i, j);
        for (int j = n; j < n + pad; ++j) grid.at(i, j) = ui;
    }
    std::vector<double> u(static_cast<std::size_t>(d), ui);
    return PaddedInstance{M, validate_komlos(std::move(grid)), pad, std::move(u)};
}

// Appends parity-fixing entries: the padded vector always has even +1 count.
inline SignVector pad_vector(const SignVector& x, int pad_count) {
    if (pad_count != 1 && pad_count != 2)
        throw PreconditionViolated("pad_vector: pad_count must be 1 or 2");
    std::vector<std::int8_t> e(x.entries());
    const bool even = (x.parity() == 0);
    if (pad_count == 1) {
        e.push_back(even ? -1 : 1);
    } else {
        e.push_back(-1);
        e.push_back(even ? -1 : 1);
    }
    SignVector out(std::move(e));
    if (out.parity() != 0) throw ParityViolation("pad_vector: padded parity is odd");
    return out;
}

inline SignVector unpad_vector(const SignVector& x_padded, int pad_count) {
    if (x_padded.size() <= pad_count)
        throw DimensionMismatch("unpad_vector: vector shorter than padding");
    std::vector<std::int8_t> e(x_padded.entries().begin(),
                               x_padded.entries().end() - pad_count);
    return SignVector(std::move(e));
}

inline RademacherMatrix unpad_matrix(const RademacherMatrix& R_padded, int pad_count) {
    if (R_padded.n <= pad_count)
        throw DimensionMismatch("unpad_matrix: matrix narrower than padding");
    const int n = R_padded.n - pad_count;
    std::vector<std::int8_t> e;
    e.reserve(static_cast<std::size_t>(R_padded.d) * n);
    for (int i = 0; i < R_padded.d; ++i)
        for (int j = 0; j < n; ++j) e.push_back(R_padded.at(i, j));
    return RademacherMatrix(R_padded.d, n, std::move(e), false);
}

inline std::pair<SignVector, RademacherMatrix> unpad(const SignVector& x_padded,
                                                     const RademacherMatrix& R_padded,
                                                     int pad_count) {
    if (x_padded.size() != R_padded.n)
        throw DimensionMismatch("unpad: vector and matrix widths differ");
    return {unpad_vector(x_padded, pad_count), unpad_matrix(R_padded, pad_count)};
}

// Even integers in [-sqrt(d)(Mx)_i - 1, -sqrt(d)(Mx)_i + 1]; the interval has
// length exactly 2 (Delta = d^{-1/2}), so there are one or two of them, with
// two exactly when sqrt(d)(Mx)_i is an odd integer. Closed interval: boundary
// hits count.
struct TargetSet {
    int row = 0;
    std::vector<long long> values;
};

inline std::vector<TargetSet> target_sets(const KomlosMatrix& M, const SignVector& x) {
    std::vector<double> mx = M.mul(x);
    const double sqrt_d = std::sqrt(static_cast<double>(M.d()));
    std::vector<TargetSet> out;
    out.reserve(static_cast<std::size_t>(M.d()));
    for (int i = 0; i < M.d(); ++i) {
        double c = -sqrt_d * mx[static_cast<std::size_t>(i)];
        long long lo = static_cast<long long>(std::ceil((c - 1.0) / 2.0));
        long long hi = static_cast<long long>(std::floor((c + 1.0) / 2.0));
        TargetSet ts;
        ts.row = i;
        for (long long k = lo; k <= hi; ++k) ts.values.push_back(2 * k);
        if (ts.values.empty() || ts.values.size() > 2)
            throw NumericalFailure("target set size outside {1, 2}");
        out.push_back(std::move(ts));
    }
    return out;
}

// --- on-disk form ----------------------------------------------------------

// Writes <prefix>.base.mat, <prefix>.padded.mat and a <prefix>.json sidecar
// recording pad_count and seed provenance.
inline void save_padded_instance(const PaddedInstance& inst, const std::string& prefix,
                                 std::uint64_t master_seed, std::uint64_t stream_index) {
    save_matrix(inst.base.mat(), prefix + ".base.mat");
    save_matrix(inst.padded.mat(), prefix + ".padded.mat");
    nlohmann::json j;
    j["pad_count"] = inst.pad_count;
    j["master_seed"] = master_seed;
    j["stream_index"] = stream_index;
    j["base_file"] = prefix + ".base.mat";
    j["padded_file"] = prefix + ".padded.mat";
    std::ofstream f(prefix + ".json", std::ios::binary);
    if (!f) throw IoError("cannot open " + prefix + ".json for writing");
    f << j.dump(2) << "\n";
}

inline PaddedInstance load_padded_instance(const std::string& prefix) {
    std::ifstream f(prefix + ".json");
    if (!f) throw IoError("cannot open " + prefix + ".json");
    nlohmann::json j;
    f >> j;
    KomlosMatrix base = validate_komlos(load_matrix(j.at("base_file").get<std::string>()));
    KomlosMatrix padded = validate_komlos(load_matrix(j.at("padded_file").get<std::string>()));
    int pad_count = j.at("pad_count").get<int>();
    std::vector<double> u(static_cast<std::size_t>(base.d()),
                          1.0 / std::sqrt(static_cast<double>(base.d())));
    return PaddedInstance{std::move(base), std::move(padded), pad_count, std::move(u)};
}

}  // namespace komlos
