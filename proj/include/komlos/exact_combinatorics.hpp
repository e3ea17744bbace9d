#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "komlos/errors.hpp"
#include "komlos/sign_vector.hpp"

namespace komlos {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

// An exact probability: arbitrary-precision rational kept reduced in [0, 1].
class ExactProbability {
public:
    ExactProbability() : value_(0) {}

    ExactProbability(BigInt num, BigInt den) : value_(std::move(num), std::move(den)) {
        check_range();
    }

    explicit ExactProbability(BigRational v) : value_(std::move(v)) { check_range(); }

    static ExactProbability zero() { return ExactProbability(); }
    static ExactProbability one() { return ExactProbability(BigRational(1)); }

    BigInt numerator() const { return boost::multiprecision::numerator(value_); }
    BigInt denominator() const { return boost::multiprecision::denominator(value_); }
    const BigRational& value() const { return value_; }
    bool reduced() const { return true; }  // cpp_rational is kept canonical

    bool is_zero() const { return value_.is_zero(); }
    double to_double() const { return value_.convert_to<double>(); }

    bool operator==(const ExactProbability& o) const { return value_ == o.value_; }
    bool operator!=(const ExactProbability& o) const { return value_ != o.value_; }

    friend ExactProbability operator+(const ExactProbability& a, const ExactProbability& b) {
        return ExactProbability(a.value_ + b.value_);
    }
    friend ExactProbability operator*(const ExactProbability& a, const ExactProbability& b) {
        return ExactProbability(a.value_ * b.value_);
    }

    std::string str() const {
        return numerator().str() + "/" + denominator().str();
    }

private:
    void check_range() const {
        if (value_ < 0 || value_ > 1)
            throw PreconditionViolated("probability outside [0,1]: " + value_.str());
    }
    BigRational value_;
};

// Exact C(n, k); 0 outside 0 <= k <= n.
inline BigInt binom(long long n, long long k) {
    if (n < 0) throw PreconditionViolated("binom: n must be non-negative");
    if (k < 0 || k > n) return BigInt(0);
    k = std::min(k, n - k);
    BigInt result = 1;
    for (long long i = 1; i <= k; ++i) {
        result *= (n - k + i);
        result /= i;  // exact at every step
    }
    return result;
}

// |S_t| where S_t = { v in {-1,1}^n : sum v_i = 2t }; n even.
inline BigInt count_S_t(int n, long long t) {
    if (n % 2 != 0) throw OddN(n);
    return binom(n, n / 2 + t);
}

inline BigInt pow2(int k) {
    BigInt r = 1;
    r <<= k;
    return r;
}

// Support of <r, x> for r uniform over the even class E_n: the inner product
// equals n - 2m where m = |Diff(r, x)| and m has the parity of #1(x).
struct EvenClassInfo {
    int n = 0;
    int m_parity = 0;  // required parity of m

    bool contains_sum(long long s) const {
        if (s < -n || s > n) return false;
        if ((s - n) % 2 != 0) return false;
        long long m = (n - s) / 2;
        return (m & 1LL) == m_parity;
    }

    std::vector<long long> values() const {
        std::vector<long long> out;
        for (long long m = m_parity; m <= n; m += 2) out.push_back(n - 2 * m);
        std::sort(out.begin(), out.end());
        return out;
    }
};

inline EvenClassInfo support_even_inner(int n, const SignVector& x) {
    if (n % 2 != 0) throw OddN(n);
    if (x.size() != n) throw DimensionMismatch("support_even_inner: length mismatch");
    return EvenClassInfo{n, x.parity()};
}

// Pr[<r, x> = 2t] for r uniform over E_n: C(n, n/2 + t) / 2^(n-1) on the
// support, exact 0 off it. The support gate is mandatory: the binomial is
// nonzero for every |t| <= n/2 but only half those values are reachable.
inline ExactProbability prob_single_even(int n, const SignVector& x, long long t) {
    if (n % 2 != 0) throw OddN(n);
    if (x.size() != n) throw DimensionMismatch("prob_single_even: length mismatch");
    EvenClassInfo info = support_even_inner(n, x);
    if (!info.contains_sum(2 * t)) return ExactProbability::zero();
    return ExactProbability(count_S_t(n, t), pow2(n - 1));
}

// Pr[<r, x> = 2tx, <r, y> = 2ty] for r uniform over E_n and parity-matched
// x, y; alpha*n is the agreement count.
inline ExactProbability prob_joint_even(int n, const SignVector& x, const SignVector& y,
                                        long long tx, long long ty) {
    if (n % 2 != 0) throw OddN(n);
    if (x.size() != n || y.size() != n)
        throw DimensionMismatch("prob_joint_even: length mismatch");
    if (x.parity() != y.parity())
        throw ParityMismatch("prob_joint_even: #1(x) and #1(y) differ mod 2");

    EvenClassInfo sx = support_even_inner(n, x);
    EvenClassInfo sy = support_even_inner(n, y);
    if (!sx.contains_sum(2 * tx) || !sy.contains_sum(2 * ty)) return ExactProbability::zero();
    if (((tx - ty) & 1LL) != 0) return ExactProbability::zero();

    int diff = 0;
    for (int i = 0; i < n; ++i)
        if (x[i] != y[i]) ++diff;
    long long an = n - diff;        // alpha * n, always even here
    long long bn = diff;            // (1 - alpha) * n
    BigInt hits = binom(an, (an + tx + ty) / 2) * binom(bn, (bn + tx - ty) / 2);
    return ExactProbability(std::move(hits), pow2(n - 1));
}

// --- enumeration oracles -------------------------------------------------
//
// Ground truth for the closed forms above, by walking all 2^(n-1) members of
// E_n. Nothing here calls the formula code paths.

inline constexpr int kEvenEnumerationCap = 20;

// Visit every member of E_n once, encoded as a bit mask (bit = +1).
template <class F>
inline void for_each_even_mask(int n, F&& f) {
    if (n < 1) throw PreconditionViolated("for_each_even_mask: n must be >= 1");
    if (n > kEvenEnumerationCap)
        throw TooLarge("even-class enumeration capped at n = " +
                       std::to_string(kEvenEnumerationCap));
    const std::uint32_t half = 1u << (n - 1);
    for (std::uint32_t code = 0; code < half; ++code) {
        std::uint32_t ones = static_cast<std::uint32_t>(__builtin_popcount(code));
        std::uint32_t mask = code | ((ones & 1u) << (n - 1));  // complete to even parity
        f(mask);
    }
}

inline ExactProbability enumerate_even_oracle(
    int n, const std::function<bool(const SignVector&)>& predicate) {
    BigInt count = 0;
    BigInt total = 0;
    for_each_even_mask(n, [&](std::uint32_t mask) {
        ++total;
        if (predicate(SignVector::from_mask(mask, n))) ++count;
    });
    if (total != pow2(n - 1)) throw NumericalFailure("|E_n| != 2^(n-1)");
    return ExactProbability(std::move(count), pow2(n - 1));
}

// Counts of <r, x> = s over r in E_n, keyed by s.
inline std::map<long long, long long> oracle_single_counts(int n, const SignVector& x) {
    if (x.size() != n) throw DimensionMismatch("oracle_single_counts: length mismatch");
    std::map<long long, long long> counts;
    const std::uint32_t xm = x.mask();
    for_each_even_mask(n, [&](std::uint32_t mask) {
        long long s = n - 2LL * __builtin_popcount(mask ^ xm);
        ++counts[s];
    });
    return counts;
}

// Counts of (<r, x>, <r, y>) pairs over r in E_n.
inline std::map<std::pair<long long, long long>, long long> oracle_joint_counts(
    int n, const SignVector& x, const SignVector& y) {
    if (x.size() != n || y.size() != n)
        throw DimensionMismatch("oracle_joint_counts: length mismatch");
    std::map<std::pair<long long, long long>, long long> counts;
    const std::uint32_t xm = x.mask();
    const std::uint32_t ym = y.mask();
    for_each_even_mask(n, [&](std::uint32_t mask) {
        long long sx = n - 2LL * __builtin_popcount(mask ^ xm);
        long long sy = n - 2LL * __builtin_popcount(mask ^ ym);
        ++counts[{sx, sy}];
    });
    return counts;
}

// --- near-centre binomial approximation ----------------------------------

struct SpencerEstimate {
    long long n = 0;
    long long t = 0;
    double exact_log_ratio = 0.0;   // log of C(n,(n+t)/2)/C(n,n/2), product form
    double approx_log_ratio = 0.0;  // -t^2 / (2n)
    double error_budget = 0.0;      // calibrated empirical envelope
    bool within_budget = false;
};

// log of Q = C(n,(n+t)/2)/C(n,n/2) = prod_{j=1}^{t/2} (n/2 - j + 1)/(n/2 + j),
// summed in extended precision so n = 10^4 stays well-conditioned.
inline double spencer_exact_log_ratio(long long n, long long t) {
    long double acc = 0.0L;
    for (long long j = 1; j <= t / 2; ++j)
        acc += std::log(static_cast<long double>(n / 2 - j + 1)) -
               std::log(static_cast<long double>(n / 2 + j));
    return static_cast<double>(acc);
}

inline double spencer_error_budget(long long n, long long t) {
    double td = static_cast<double>(t);
    double nd = static_cast<double>(n);
    return 3.0 * (td * td * td + td * td + 1.0) / (nd * nd) + td * td / (nd * (nd + td));
}

inline SpencerEstimate spencer_estimate(long long n, long long t) {
    if (n <= 0 || n % 2 != 0) throw OddN(static_cast<int>(n));
    if ((n + t) % 2 != 0)
        throw ParityViolation("spencer_estimate: (n + t)/2 must be integral");
    t = std::llabs(t);  // symmetric in t
    double cutoff = std::pow(static_cast<double>(n), 2.0 / 3.0);
    if (static_cast<double>(t) > cutoff + 1e-9)
        throw TooLarge("spencer_estimate: |t| exceeds n^(2/3)");

    SpencerEstimate est;
    est.n = n;
    est.t = t;
    est.exact_log_ratio = spencer_exact_log_ratio(n, t);
    est.approx_log_ratio = -static_cast<double>(t) * static_cast<double>(t) /
                           (2.0 * static_cast<double>(n));
    est.error_budget = spencer_error_budget(n, t);
    est.within_budget =
        std::fabs(est.exact_log_ratio - est.approx_log_ratio) <= est.error_budget;
    return est;
}

// Exact rational Q for the same ratio; the big-integer route used to check
// the floating product form.
inline BigRational spencer_exact_ratio(long long n, long long t) {
    if (n <= 0 || n % 2 != 0) throw OddN(static_cast<int>(n));
    if ((n + t) % 2 != 0)
        throw ParityViolation("spencer_exact_ratio: (n + t)/2 must be integral");
    t = std::llabs(t);
    BigInt num = 1, den = 1;
    for (long long j = 1; j <= t / 2; ++j) {
        num *= (n / 2 - j + 1);
        den *= (n / 2 + j);
    }
    return BigRational(num, den);
}

// --- parity implications ----------------------------------------------------

struct ParityCheckResult {
    // premise -> conclusion, each reported as an implication (vacuously true
    // when the premise fails)
    bool parity_match_implies_diff_even = true;  // matching #1 parity => |Diff| even
    bool equal_sums_imply_diff_even = true;      // equal coordinate sums => |Diff| even
    bool even_transfer = true;                   // v even and |Diff| even => u even
};

inline ParityCheckResult parity_checks(const SignVector& u, const SignVector& v) {
    if (u.size() != v.size()) throw DimensionMismatch("parity_checks: lengths differ");
    int diff = 0;
    for (int i = 0; i < u.size(); ++i)
        if (u[i] != v[i]) ++diff;
    bool diff_even = (diff % 2 == 0);

    ParityCheckResult r;
    if (u.parity() == v.parity()) r.parity_match_implies_diff_even = diff_even;
    if (coordinate_sum(u) == coordinate_sum(v)) r.equal_sums_imply_diff_even = diff_even;
    if (v.parity() == 0 && diff_even) r.even_transfer = (u.parity() == 0);
    return r;
}

}  // namespace komlos
