#include <catch_amalgamated.hpp>

#include <cmath>

#include "komlos/relevant_vectors.hpp"
#include "komlos/rng.hpp"

using namespace komlos;

namespace {

Matrix random_unit_columns(int d, int n, RngStream& rng) {
    Matrix m(d, n);
    for (int j = 0; j < n; ++j) {
        std::vector<double> col(static_cast<std::size_t>(d));
        double norm = 0.0;
        while (norm == 0.0) {
            for (int i = 0; i < d; ++i) col[static_cast<std::size_t>(i)] = rng.gaussian();
            norm = two_norm(col);
        }
        for (int i = 0; i < d; ++i) m.at(i, j) = col[static_cast<std::size_t>(i)] / norm;
    }
    return m;
}

SignVector random_signs(int n, RngStream& rng) {
    std::vector<std::int8_t> e(static_cast<std::size_t>(n));
    for (auto& v : e) v = static_cast<std::int8_t>(rng.sign());
    return SignVector(std::move(e));
}

}  // namespace

TEST_CASE("diff_set") {
    SignVector x{1, 1, -1, -1};
    SignVector y{1, -1, 1, -1};
    DiffResult r = diff_set(x, y);
    CHECK(r.indices == std::vector<int>{1, 2});
    CHECK(r.count == 2);
    CHECK(r.alpha == 0.5);

    CHECK(diff_set(x, x).count == 0);
    CHECK(diff_set(x, x).alpha == 1.0);
    CHECK(diff_set(x, x.negated()).count == 4);
    CHECK(diff_set(x, x.negated()).alpha == 0.0);
    CHECK_THROWS_AS(diff_set(x, SignVector{1, 1}), DimensionMismatch);
}

TEST_CASE("inner_from_diff identity") {
    SignVector a{1, 1, 1, 1, 1, 1};
    CHECK(inner_from_diff(a, a) == 6);

    SignVector b{1, 1, 1, -1, -1, -1};
    CHECK(inner_from_diff(a, b) == 0);  // |Diff| = n/2

    RngStream rng(211, 0);
    for (int rep = 0; rep < 50; ++rep) {
        SignVector x = random_signs(11, rng);
        SignVector y = random_signs(11, rng);
        long long direct = 0;
        for (int i = 0; i < 11; ++i) direct += static_cast<long long>(x[i]) * y[i];
        CHECK(inner_from_diff(x, y) == direct);
    }
}

TEST_CASE("is_shallow") {
    RelevanceConfig cfg;  // c_const = 4

    KomlosMatrix Z = validate_komlos(Matrix(3, 5));
    SignVector x{1, 1, -1, 1, -1};
    PredicateResult r = is_shallow(Z, x, cfg);
    CHECK(r.ok);
    CHECK(r.margin == Catch::Approx(4.0 * std::sqrt(std::log(3.0))));

    // d = 3, ten copies of e_1: (Mx)_1 = 10 > 4 sqrt(log 3) ~ 4.19
    Matrix m(3, 10);
    for (int j = 0; j < 10; ++j) m.at(0, j) = 1.0;
    KomlosMatrix M = validate_komlos(std::move(m));
    std::vector<std::int8_t> ones(10, 1);
    PredicateResult bad = is_shallow(M, SignVector(std::move(ones)), cfg);
    CHECK_FALSE(bad.ok);
    CHECK(bad.margin < 0.0);

    KomlosMatrix D1 = validate_komlos(Matrix(1, 2));
    CHECK_THROWS_AS(is_shallow(D1, SignVector{1, 1}, cfg), PreconditionViolated);
}

TEST_CASE("is_antipodal") {
    RelevanceConfig cfg;
    SignVector x{1, 1, 1, 1, -1, -1, -1, -1};
    SignVector y{1, 1, -1, -1, 1, 1, -1, -1};  // |Diff| = 4 = n/2
    CHECK(is_antipodal(x, y, 16, cfg).ok);
    CHECK(is_antipodal(x, y, 16, cfg).margin ==
          Catch::Approx(4.0 * std::sqrt(8.0 * std::log(16.0))));

    // x = y gives deviation n/2; false once n/2 > c sqrt(n log d):
    // n = 1024, d = 16: 512 > 4 sqrt(1024 log 16) ~ 213
    RngStream rng(223, 1);
    SignVector big = random_signs(1024, rng);
    CHECK_FALSE(is_antipodal(big, big, 16, cfg).ok);

    // independent uniform pairs concentrate at Hamming distance n/2
    int pass = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        SignVector a = random_signs(1024, rng);
        SignVector b = random_signs(1024, rng);
        if (is_antipodal(a, b, 16, cfg).ok) ++pass;
    }
    CHECK(pass >= 990);
}

TEST_CASE("is_uncorrelated") {
    RelevanceConfig cfg;
    RngStream rng(227, 2);

    // y with My = 0: duplicated-column cancellation
    Matrix m(4, 4);
    for (int i = 0; i < 4; ++i) {
        m.at(i, 0) = m.at(i, 1) = (i == 0) ? 0.6 : (i == 1 ? 0.8 : 0.0);
        m.at(i, 2) = m.at(i, 3) = (i == 2) ? 1.0 : 0.0;
    }
    KomlosMatrix M = validate_komlos(std::move(m));
    SignVector y{1, -1, 1, -1};  // My = 0
    SignVector x{1, 1, 1, 1};
    PredicateResult r = is_uncorrelated(M, x, y, cfg);
    CHECK(r.ok);
    CHECK(r.margin == Catch::Approx(4.0 * std::sqrt(4.0 * std::log(4.0))));

    // ||Mx||_2^2 = d beats c sqrt(d log d) for large d: 32 copies of e_1,
    // x = all ones, d = 1024 -> <Mx, Mx> = 1024 > 4 sqrt(1024 log 1024) ~ 337
    Matrix big(1024, 32);
    for (int j = 0; j < 32; ++j) big.at(0, j) = 1.0;
    KomlosMatrix B = validate_komlos(std::move(big));
    std::vector<std::int8_t> ones(32, 1);
    SignVector allones(std::move(ones));
    CHECK_FALSE(is_uncorrelated(B, allones, allones, cfg).ok);
}

TEST_CASE("truncated samples are usually shallow and pairwise uncorrelated") {
    RngStream rng(229, 3);
    KomlosMatrix M = validate_komlos(random_unit_columns(16, 256, rng));
    RelevanceConfig cfg;
    TruncationConfig trunc;

    int shallow = 0;
    const int draws = 200;
    std::vector<SignVector> xs;
    for (int rep = 0; rep < draws; ++rep) {
        SignVector x = sample_truncated(M, trunc, rng);
        if (is_shallow(M, x, cfg).ok) ++shallow;
        if (xs.size() < 200) xs.push_back(std::move(x));
    }
    CHECK(shallow >= draws * 95 / 100);

    int uncorrelated = 0;
    for (int k = 0; k + 1 < static_cast<int>(xs.size()); k += 2)
        if (is_uncorrelated(M, xs[static_cast<std::size_t>(k)], xs[static_cast<std::size_t>(k + 1)], cfg).ok)
            ++uncorrelated;
    CHECK(uncorrelated >= 90);
}

TEST_CASE("hamming triangle inequality") {
    RngStream rng(233, 4);
    for (int rep = 0; rep < 200; ++rep) {
        SignVector x = random_signs(17, rng);
        SignVector y = random_signs(17, rng);
        SignVector z = random_signs(17, rng);
        CHECK(diff_set(x, y).count + diff_set(y, z).count >= diff_set(x, z).count);
    }
}

TEST_CASE("parity law: matching parity iff even hamming distance") {
    for (int n = 2; n <= 10; n += 2) {
        for (std::uint32_t a = 0; a < (1u << n); ++a) {
            SignVector x = SignVector::from_mask(a, n);
            for (std::uint32_t b = 0; b < (1u << n); ++b) {
                SignVector y = SignVector::from_mask(b, n);
                bool parity_match = x.parity() == y.parity();
                bool diff_even = diff_set(x, y).count % 2 == 0;
                REQUIRE(parity_match == diff_even);
            }
        }
    }
}

TEST_CASE("find_relevant_set") {
    RngStream rng(239, 5);
    RelevanceConfig cfg;
    TruncationConfig trunc;

    // zero matrix: no D samples exist, surfaced as AttemptsExhausted
    KomlosMatrix Z = validate_komlos(Matrix(2, 6));
    TruncationConfig small = trunc;
    small.max_rejections = 20;
    try {
        find_relevant_set(Z, cfg, small, rng, 2);
        FAIL("expected AttemptsExhausted");
    } catch (const AttemptsExhausted& e) {
        CHECK(e.kept_so_far == 0);
    }

    // successful construction re-verifies bit-for-bit
    for (int rep = 0; rep < 3; ++rep) {
        KomlosMatrix M = validate_komlos(random_unit_columns(16, 128, rng));
        RelevantSet set = find_relevant_set(M, cfg, trunc, rng, 2);
        REQUIRE(set.members.size() == 2);
        CHECK(set.verify(M));
        CHECK(set.members[0] != set.members[1]);
    }

    // shared-parity variant used by the padded pipeline
    KomlosMatrix M = validate_komlos(random_unit_columns(8, 64, rng));
    RelevantSet set = find_relevant_set(M, cfg, trunc, rng, 3, true);
    REQUIRE(set.members.size() == 3);
    for (const auto& m : set.members) CHECK(m.parity() == set.members[0].parity());

    CHECK_THROWS_AS(find_relevant_set(M, cfg, trunc, rng, 1), PreconditionViolated);

    // d <= n regime is a precondition
    KomlosMatrix tall = validate_komlos(random_unit_columns(8, 4, rng));
    CHECK_THROWS_AS(find_relevant_set(tall, cfg, trunc, rng, 2), PreconditionViolated);
}

TEST_CASE("high-overlap pairs are logged on certificates, never rejected") {
    // on a tiny matrix with a generous constant, a pair differing in one
    // coordinate passes every predicate while |<x, y>| = n - 2 >= 3n/4
    Matrix m(16, 8);
    m.at(0, 0) = 0.05;
    KomlosMatrix M = validate_komlos(std::move(m));
    RelevanceConfig cfg;
    SignVector x{1, 1, 1, 1, -1, -1, -1, -1};
    SignVector y{1, 1, 1, -1, -1, -1, -1, -1};
    RelevantSet close = make_relevant_set(M, {x, y}, cfg);
    REQUIRE(close.pair_certificates.size() == 1);
    CHECK(close.pair_certificates[0].high_overlap);

    SignVector z{1, -1, 1, -1, 1, -1, 1, -1};  // |<x, z>| = 0
    RelevantSet far = make_relevant_set(M, {x, z}, cfg);
    CHECK_FALSE(far.pair_certificates[0].high_overlap);
}

TEST_CASE("relevant set json round trip") {
    RngStream rng(241, 6);
    KomlosMatrix M = validate_komlos(random_unit_columns(8, 64, rng));
    RelevanceConfig cfg;
    TruncationConfig trunc;
    RelevantSet set = find_relevant_set(M, cfg, trunc, rng, 2);

    nlohmann::json j = to_json(set);
    RelevantSet back = relevant_set_from_json(j);
    REQUIRE(back.members.size() == set.members.size());
    for (std::size_t i = 0; i < set.members.size(); ++i)
        CHECK(back.members[i] == set.members[i]);
    CHECK(back.shallow_margins == set.shallow_margins);
    CHECK(back.verify(M));  // certificates survive the round trip exactly
}
