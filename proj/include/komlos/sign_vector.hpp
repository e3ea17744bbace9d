#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "komlos/errors.hpp"

namespace komlos {

// A +-1 vector with its count of +1 entries (and hence parity) cached.
class SignVector {
public:
    SignVector() = default;

    explicit SignVector(std::vector<std::int8_t> entries)
        : e_(std::move(entries)) {
        ones_ = 0;
        for (std::int8_t v : e_) {
            if (v != 1 && v != -1)
                throw PreconditionViolated("sign vector entries must be -1 or +1");
            if (v == 1) ++ones_;
        }
    }

    SignVector(std::initializer_list<int> entries) {
        std::vector<std::int8_t> tmp;
        tmp.reserve(entries.size());
        for (int v : entries) tmp.push_back(static_cast<std::int8_t>(v));
        *this = SignVector(std::move(tmp));
    }

    int size() const { return static_cast<int>(e_.size()); }
    int ones_count() const { return ones_; }
    int parity() const { return ones_ & 1; }
    std::int8_t operator[](int i) const { return e_[static_cast<std::size_t>(i)]; }
    const std::vector<std::int8_t>& entries() const { return e_; }

    SignVector negated() const {
        std::vector<std::int8_t> out(e_.size());
        for (std::size_t i = 0; i < e_.size(); ++i) out[i] = static_cast<std::int8_t>(-e_[i]);
        return SignVector(std::move(out));
    }

    bool operator==(const SignVector& o) const { return e_ == o.e_; }
    bool operator!=(const SignVector& o) const { return e_ != o.e_; }

    // Bit mask with bit j set iff entry j is +1. Requires size <= 32.
    std::uint32_t mask() const {
        std::uint32_t m = 0;
        for (std::size_t i = 0; i < e_.size(); ++i)
            if (e_[i] == 1) m |= (1u << i);
        return m;
    }

    static SignVector from_mask(std::uint32_t m, int n) {
        std::vector<std::int8_t> v(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = (m >> i) & 1u ? 1 : -1;
        return SignVector(std::move(v));
    }

private:
    std::vector<std::int8_t> e_;
    int ones_ = 0;
};

inline long long inner(const SignVector& x, const SignVector& y) {
    if (x.size() != y.size())
        throw DimensionMismatch("inner: lengths differ");
    long long s = 0;
    for (int i = 0; i < x.size(); ++i) s += static_cast<long long>(x[i]) * y[i];
    return s;
}

inline long long coordinate_sum(const SignVector& x) {
    return 2LL * x.ones_count() - x.size();
}

}  // namespace komlos
