#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "komlos/perturbation.hpp"
#include "komlos/rng.hpp"

using namespace komlos;

TEST_CASE("sample_rademacher") {
    RngStream rng(301, 0);
    RademacherMatrix R = sample_rademacher(5, 7, rng);
    CHECK(R.d == 5);
    CHECK(R.n == 7);
    CHECK_FALSE(R.row_parity_even);
    for (auto v : R.e) CHECK((v == 1 || v == -1));

    // fixed seed replays bit-identically
    RngStream rng_a(55, 9), rng_b(55, 9);
    CHECK(sample_rademacher(6, 6, rng_a).e == sample_rademacher(6, 6, rng_b).e);

    // CLT: mean of 10^5 entries within 3 sigma ~ 0.0095
    RngStream rng_c(302, 1);
    RademacherMatrix big = sample_rademacher(100, 1000, rng_c);
    long long sum = 0;
    for (auto v : big.e) sum += v;
    CHECK(std::fabs(static_cast<double>(sum) / 1e5) <= 0.01);
}

TEST_CASE("sample_row_even") {
    RngStream rng(303, 2);
    for (int n : {1, 2, 5, 12}) {
        for (int rep = 0; rep < 200; ++rep) {
            SignVector r = sample_row_even(n, rng);
            REQUIRE(r.size() == n);
            REQUIRE(r.parity() == 0);
        }
    }
    // n = 1 is forced to (-1): zero ones is the only even count
    SignVector one = sample_row_even(1, rng);
    CHECK(one == SignVector{-1});

    // uniformity over the 8 members of E_4: chi-square, df = 7,
    // critical value 24.322 at p = 0.001
    std::map<std::uint32_t, int> counts;
    const int draws = 8000;
    for (int rep = 0; rep < draws; ++rep) counts[sample_row_even(4, rng).mask()]++;
    REQUIRE(counts.size() == 8);
    double chi2 = 0.0;
    for (const auto& [mask, c] : counts) {
        double expect = draws / 8.0;
        chi2 += (c - expect) * (c - expect) / expect;
    }
    CHECK(chi2 < 24.322);
}

TEST_CASE("membership: even rows live in E_n with |E_n| = 2^(n-1)") {
    RngStream rng(307, 3);
    for (int n = 2; n <= 12; n += 2) {
        std::uint64_t members = 0;
        for (std::uint32_t m = 0; m < (1u << n); ++m)
            if (__builtin_popcount(m) % 2 == 0) ++members;
        CHECK(members == (1ull << (n - 1)));
        for (int rep = 0; rep < 50; ++rep) {
            SignVector r = sample_row_even(n, rng);
            CHECK(__builtin_popcount(r.mask()) % 2 == 0);
        }
    }
}

TEST_CASE("resample_first_column") {
    RngStream rng(311, 4);
    RademacherMatrix R = sample_rademacher_even_rows(6, 9, rng);
    REQUIRE(R.row_parity_even);

    RademacherMatrix R2 = resample_first_column(R, rng);
    CHECK_FALSE(R2.row_parity_even);
    for (int i = 0; i < 6; ++i)
        for (int j = 1; j < 9; ++j) CHECK(R2.at(i, j) == R.at(i, j));

    RademacherMatrix plain = sample_rademacher(3, 3, rng);
    CHECK_THROWS_AS(resample_first_column(plain, rng), PreconditionViolated);

    // row parities after resampling are fair coins
    int odd = 0;
    const int trials = 10000;
    for (int rep = 0; rep < trials; ++rep) {
        RademacherMatrix r = sample_rademacher_even_rows(1, 5, rng);
        RademacherMatrix r2 = resample_first_column(r, rng);
        int ones = 0;
        for (int j = 0; j < 5; ++j)
            if (r2.at(0, j) == 1) ++ones;
        if (ones % 2 == 1) ++odd;
    }
    CHECK(std::fabs(static_cast<double>(odd) / trials - 0.5) <= 0.015);  // 3 sigma

    // per-row change is one entry: ||(R' - R)x||_inf <= 2 before scaling
    RademacherMatrix Rb = sample_rademacher_even_rows(8, 11, rng);
    RademacherMatrix Rb2 = resample_first_column(Rb, rng);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<std::int8_t> e(11);
        for (auto& v : e) v = static_cast<std::int8_t>(rng.sign());
        SignVector x(std::move(e));
        auto a = Rb.mul(x);
        auto b = Rb2.mul(x);
        for (int i = 0; i < 8; ++i) CHECK(std::llabs(b[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(i)]) <= 2);
    }
}

TEST_CASE("pad_matrix") {
    RngStream rng(313, 5);
    Matrix m3(4, 3);
    m3.at(0, 0) = 1.0;
    m3.at(1, 1) = 1.0;
    m3.at(2, 2) = 1.0;
    PaddedInstance p1 = pad_matrix(validate_komlos(std::move(m3)));
    CHECK(p1.pad_count == 1);
    CHECK(p1.padded.n() == 4);

    Matrix m4(4, 4);
    m4.at(0, 0) = 1.0;
    PaddedInstance p2 = pad_matrix(validate_komlos(std::move(m4)));
    CHECK(p2.pad_count == 2);
    CHECK(p2.padded.n() == 6);

    // pad columns are exact copies of u = 1/sqrt(d) with unit norm
    for (int j = 4; j < 6; ++j) {
        double norm = 0.0;
        for (int i = 0; i < 4; ++i) {
            CHECK(p2.padded.at(i, j) == 0.5);
            norm += p2.padded.at(i, j) * p2.padded.at(i, j);
        }
        CHECK(std::fabs(std::sqrt(norm) - 1.0) <= 1e-12);
    }
    (void)rng;
}

TEST_CASE("pad_vector parity rules") {
    // even #1 count, one pad: append -1
    CHECK(pad_vector(SignVector{1, 1}, 1) == SignVector{1, 1, -1});
    // odd #1 count, one pad: append +1
    CHECK(pad_vector(SignVector{1, 1, 1}, 1) == SignVector{1, 1, 1, 1});
    // even #1 count, two pads: append (-1, -1)
    CHECK(pad_vector(SignVector{1, -1, 1}, 2) == SignVector{1, -1, 1, -1, -1});
    // odd #1 count, two pads: append (-1, +1)
    CHECK(pad_vector(SignVector{1, 1, 1, -1}, 2) == SignVector{1, 1, 1, -1, -1, 1});

    CHECK_THROWS_AS(pad_vector(SignVector{1}, 3), PreconditionViolated);

    // padded parity is always even; exhaustive n <= 12
    for (int n = 1; n <= 12; ++n) {
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            SignVector x = SignVector::from_mask(mask, n);
            CHECK(pad_vector(x, 1).parity() == 0);
            CHECK(pad_vector(x, 2).parity() == 0);
        }
        if (n >= 10) break;  // 2^10 masks x2 checks is plenty
    }
}

TEST_CASE("unpad round trip") {
    RngStream rng(317, 6);
    Matrix grid(3, 5);
    grid.at(0, 0) = 0.4;
    grid.at(1, 2) = 0.7;
    KomlosMatrix M = validate_komlos(std::move(grid));
    PaddedInstance pad = pad_matrix(M);

    SignVector x{1, -1, 1, 1, -1};
    SignVector xp = pad_vector(x, pad.pad_count);
    RademacherMatrix Rp = sample_rademacher_even_rows(3, pad.padded.n(), rng);

    auto [x_back, R_back] = unpad(xp, Rp, pad.pad_count);
    CHECK(x_back == x);
    CHECK(R_back.d == 3);
    CHECK(R_back.n == 5);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) CHECK(R_back.at(i, j) == Rp.at(i, j));

    CHECK_THROWS_AS(unpad(x, Rp, pad.pad_count), DimensionMismatch);
}

TEST_CASE("dropping a pad column moves each row sum by at most 2/sqrt(d)") {
    // d = 4: the pad entry and the rademacher entry each contribute 1/2
    RngStream rng(331, 7);
    Matrix grid(4, 7);
    KomlosMatrix M = validate_komlos(std::move(grid));
    PaddedInstance pad = pad_matrix(M);
    REQUIRE(pad.pad_count == 1);
    const double sqrt_d = 2.0;

    for (int rep = 0; rep < 50; ++rep) {
        RademacherMatrix Rp = sample_rademacher_even_rows(4, 8, rng);
        std::vector<std::int8_t> e(8);
        for (auto& v : e) v = static_cast<std::int8_t>(rng.sign());
        SignVector xp(std::move(e));
        SignVector x = unpad_vector(xp, 1);
        RademacherMatrix R = unpad_matrix(Rp, 1);

        auto padded_rows = Rp.mul(xp);
        auto rows = R.mul(x);
        for (int i = 0; i < 4; ++i) {
            double before = pad.padded.mul(xp)[static_cast<std::size_t>(i)] +
                            static_cast<double>(padded_rows[static_cast<std::size_t>(i)]) / sqrt_d;
            double after = pad.base.mul(x)[static_cast<std::size_t>(i)] +
                           static_cast<double>(rows[static_cast<std::size_t>(i)]) / sqrt_d;
            CHECK(std::fabs(after - before) <= 2.0 / sqrt_d + 1e-12);
        }
    }
}

TEST_CASE("target_sets") {
    // d = 4: split (Mx)_1 over two columns so values up to sqrt(d)(Mx)_1 = 4
    // stay Komlos
    auto single_row_case = [](double mx_times_sqrt_d) {
        int d = 4;
        Matrix m(d, 2);
        m.at(0, 0) = m.at(0, 1) = mx_times_sqrt_d / 4.0;  // sqrt(d) = 2
        KomlosMatrix M = validate_komlos(std::move(m));
        return target_sets(M, SignVector{1, 1});
    };

    // sqrt(d) (Mx)_i = 0 -> [-1, 1] -> {0}
    auto t0 = single_row_case(0.0);
    CHECK(t0[0].values == std::vector<long long>{0});

    // sqrt(d) (Mx)_i = 1 -> [-2, 0] -> {-2, 0}
    auto t1 = single_row_case(1.0);
    CHECK(t1[0].values == std::vector<long long>{-2, 0});

    // sqrt(d) (Mx)_i = 0.5 -> [-1.5, 0.5] -> {0}
    auto th = single_row_case(0.5);
    CHECK(th[0].values == std::vector<long long>{0});

    // sizes are always 1 or 2; 2 exactly on odd-integer boundaries
    RngStream rng(337, 8);
    for (int rep = 0; rep < 200; ++rep) {
        double v = 4.0 * (rng.uniform01() - 0.5);
        auto ts = single_row_case(v);
        REQUIRE(ts[0].values.size() >= 1);
        REQUIRE(ts[0].values.size() <= 2);
    }
    auto boundary = single_row_case(3.0);
    CHECK(boundary[0].values == std::vector<long long>{-4, -2});
}

TEST_CASE("padded instance sidecar") {
    namespace fs = std::filesystem;
    RngStream rng(347, 9);
    Matrix grid(3, 4);
    grid.at(0, 0) = 0.9;
    grid.at(2, 3) = -0.5;
    PaddedInstance inst = pad_matrix(validate_komlos(std::move(grid)));

    fs::path dir = fs::temp_directory_path() / "komlos_sidecar_test";
    fs::create_directories(dir);
    std::string prefix = (dir / "case0").string();
    save_padded_instance(inst, prefix, 123, 7);

    PaddedInstance back = load_padded_instance(prefix);
    CHECK(back.pad_count == inst.pad_count);
    CHECK(back.base.mat().v == inst.base.mat().v);
    CHECK(back.padded.mat().v == inst.padded.mat().v);

    nlohmann::json j;
    {
        std::ifstream f(prefix + ".json");
        f >> j;
    }
    CHECK(j.at("pad_count") == 2);
    CHECK(j.at("master_seed") == 123);
    CHECK(j.at("stream_index") == 7);
    fs::remove_all(dir);
}
