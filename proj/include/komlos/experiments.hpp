#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "komlos/core_matrix.hpp"
#include "komlos/errors.hpp"
#include "komlos/exact_combinatorics.hpp"
#include "komlos/gs_walk.hpp"
#include "komlos/perturbation.hpp"
#include "komlos/relevant_vectors.hpp"
#include "komlos/rng.hpp"
#include "komlos/sign_vector.hpp"

namespace komlos {

enum class Ensemble {
    GaussianUnitColumns,
    BeckFialaIncidence,
    DuplicatedColumns,
    AllOnesOverSqrtD,
};

inline std::string ensemble_name(Ensemble e, int incidence_t = 0) {
    switch (e) {
        case Ensemble::GaussianUnitColumns: return "gaussian-unit-columns";
        case Ensemble::BeckFialaIncidence:
            return "beck-fiala-incidence(" + std::to_string(incidence_t) + ")";
        case Ensemble::DuplicatedColumns: return "duplicated-columns";
        case Ensemble::AllOnesOverSqrtD: return "all-ones-over-sqrt-d";
    }
    throw InvalidEnsembleParams("unknown ensemble");
}

// Accepts "beck-fiala-incidence(t)" or a bare name.
inline std::pair<Ensemble, int> parse_ensemble(const std::string& s) {
    if (s == "gaussian-unit-columns") return {Ensemble::GaussianUnitColumns, 0};
    if (s == "duplicated-columns") return {Ensemble::DuplicatedColumns, 0};
    if (s == "all-ones-over-sqrt-d") return {Ensemble::AllOnesOverSqrtD, 0};
    const std::string prefix = "beck-fiala-incidence";
    if (s.rfind(prefix, 0) == 0) {
        int t = 0;
        if (s.size() > prefix.size()) {
            if (s[prefix.size()] != '(' || s.back() != ')')
                throw InvalidEnsembleParams("bad incidence ensemble syntax: " + s);
            t = std::stoi(s.substr(prefix.size() + 1,
                                   s.size() - prefix.size() - 2));
        }
        return {Ensemble::BeckFialaIncidence, t};
    }
    throw InvalidEnsembleParams("unknown ensemble: " + s);
}

struct ExperimentConfig {
    int d = 9;
    int n = 128;
    Ensemble ensemble = Ensemble::GaussianUnitColumns;
    int incidence_t = 0;  // ones per column for the incidence ensemble
    int samples_per_trial = 200;  // K candidate draws from D
    int trials = 50;
    RelevanceConfig relevance;
    TruncationConfig truncation;
    std::uint64_t master_seed = 0;

    void check() const {
        if (d < 1 || n < 1) throw InvalidEnsembleParams("d, n must be >= 1");
        if (n < d) throw InvalidEnsembleParams("relevance-based runs need n >= d");
        if (samples_per_trial < 1) throw InvalidEnsembleParams("K must be >= 1");
        if (trials < 1) throw InvalidEnsembleParams("trials must be >= 1");
        if (ensemble == Ensemble::BeckFialaIncidence && (incidence_t < 1 || incidence_t > d))
            throw InvalidEnsembleParams("incidence ensemble needs 1 <= t <= d");
        relevance.check();
        truncation.check();
    }
};

inline KomlosMatrix generate_matrix(const ExperimentConfig& cfg, RngStream& rng) {
    cfg.check();
    Matrix m(cfg.d, cfg.n);
    switch (cfg.ensemble) {
        case Ensemble::GaussianUnitColumns: {
            for (int j = 0; j < cfg.n; ++j) {
                double norm = 0.0;
                std::vector<double> col(static_cast<std::size_t>(cfg.d));
                while (norm == 0.0) {
                    for (int i = 0; i < cfg.d; ++i) col[static_cast<std::size_t>(i)] = rng.gaussian();
                    norm = two_norm(col);
                }
                for (int i = 0; i < cfg.d; ++i) m.at(i, j) = col[static_cast<std::size_t>(i)] / norm;
            }
            break;
        }
        case Ensemble::BeckFialaIncidence: {
            const double v = 1.0 / std::sqrt(static_cast<double>(cfg.incidence_t));
            std::vector<int> rows(static_cast<std::size_t>(cfg.d));
            for (int j = 0; j < cfg.n; ++j) {
                std::iota(rows.begin(), rows.end(), 0);
                for (int k = 0; k < cfg.incidence_t; ++k) {
                    std::size_t pick = static_cast<std::size_t>(k) +
                                       rng.below(static_cast<std::uint64_t>(cfg.d - k));
                    std::swap(rows[static_cast<std::size_t>(k)], rows[pick]);
                    m.at(rows[static_cast<std::size_t>(k)], j) = v;
                }
            }
            break;
        }
        case Ensemble::DuplicatedColumns: {
            std::vector<double> col(static_cast<std::size_t>(cfg.d));
            for (int j = 0; j < cfg.n; j += 2) {
                double norm = 0.0;
                while (norm == 0.0) {
                    for (int i = 0; i < cfg.d; ++i) col[static_cast<std::size_t>(i)] = rng.gaussian();
                    norm = two_norm(col);
                }
                for (int i = 0; i < cfg.d; ++i) {
                    m.at(i, j) = col[static_cast<std::size_t>(i)] / norm;
                    if (j + 1 < cfg.n) m.at(i, j + 1) = m.at(i, j);
                }
            }
            break;
        }
        case Ensemble::AllOnesOverSqrtD: {
            const double v = 1.0 / std::sqrt(static_cast<double>(cfg.d));
            for (double& x : m.v) x = v;
            break;
        }
    }
    return validate_komlos(std::move(m));
}

struct TrialRecord {
    std::uint64_t seed = 0;   // stream index of the trial's random stream
    double best_disc = std::numeric_limits<double>::quiet_NaN();
    double threshold = 0.0;  // 1 + 6 / sqrt(d)
    bool passed = false;
    bool padded_passed = false;  // Delta-bound on the padded instance, pre-resampling
    bool setup_failed = false;   // sampler produced no candidates
    bool bookkeeping_ok = false; // pad parity, unpad round-trip, resampling slack
    bool success_transfer_ok = true;  // padded pass implies final pass
    int samples_used = 0;     // truncated draws obtained
    int candidates_kept = 0;  // after parity + relevance filtering
    double wall_time_s = 0.0;
};

// One trial of the padding pipeline on a given matrix:
// pad -> K truncated draws on the padded matrix (even parity enforced,
// greedily filtered to a relevant family) -> one even-row R -> Delta-bound ->
// resample first column -> unpad -> best final discrepancy vs 1 + 6/sqrt(d).
inline TrialRecord run_trial_on(const KomlosMatrix& M, const ExperimentConfig& cfg,
                                RngStream& rng) {
    const auto t0 = std::chrono::steady_clock::now();
    const int d = M.d();
    const double sqrt_d = std::sqrt(static_cast<double>(d));
    const double delta = 1.0 / sqrt_d;

    TrialRecord rec;
    rec.seed = rng.stream_index();
    rec.threshold = 1.0 + 6.0 / sqrt_d;

    RngStream cand_rng = rng.substream(1);
    RngStream rad_rng = rng.substream(2);
    RngStream resample_rng = rng.substream(3);

    PaddedInstance pad = pad_matrix(M);
    const int np = pad.padded.n();

    std::vector<SignVector> kept;
    for (int k = 0; k < cfg.samples_per_trial; ++k) {
        SignVector x;
        try {
            x = sample_truncated(pad.padded, cfg.truncation, cand_rng);
        } catch (const MaxRejectionsExceeded&) {
            break;  // the window is empty for this instance; no more draws will come
        }
        ++rec.samples_used;
        if (x.parity() != 0) continue;
        if (!is_shallow(pad.padded, x, cfg.relevance).ok) continue;
        bool ok = true;
        for (const auto& y : kept) {
            if (x == y || !is_antipodal(x, y, d, cfg.relevance).ok ||
                !is_uncorrelated(pad.padded, x, y, cfg.relevance).ok) {
                ok = false;
                break;
            }
        }
        if (ok) kept.push_back(std::move(x));
    }
    rec.candidates_kept = static_cast<int>(kept.size());

    if (kept.empty()) {
        rec.setup_failed = true;
        rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rec;
    }

    RademacherMatrix R = sample_rademacher_even_rows(d, np, rad_rng);

    double best_padded = std::numeric_limits<double>::infinity();
    for (const auto& x : kept) {
        std::vector<double> mx = pad.padded.mul(x);
        std::vector<long long> rx = R.mul(x);
        double worst = 0.0;
        for (int i = 0; i < d; ++i)
            worst = std::max(worst, std::fabs(mx[static_cast<std::size_t>(i)] +
                                              static_cast<double>(rx[static_cast<std::size_t>(i)]) / sqrt_d));
        best_padded = std::min(best_padded, worst);
    }
    rec.padded_passed = best_padded <= delta + 1e-12;

    RademacherMatrix R2 = resample_first_column(R, resample_rng);

    // bookkeeping: pad parity, unpad round-trip, per-row resampling slack
    bool bookkeeping = true;
    for (const auto& x : kept)
        if (x.parity() != 0) bookkeeping = false;
    const double slack_cap = 2.0 / sqrt_d + 1e-12;
    for (const auto& x : kept) {
        std::vector<long long> rx = R.mul(x);
        std::vector<long long> rx2 = R2.mul(x);
        for (int i = 0; i < d; ++i) {
            double change = std::fabs(static_cast<double>(rx2[static_cast<std::size_t>(i)] -
                                                          rx[static_cast<std::size_t>(i)])) / sqrt_d;
            if (change > slack_cap) bookkeeping = false;
        }
    }

    RademacherMatrix Rfinal = unpad_matrix(R2, pad.pad_count);
    if (Rfinal.d != d || Rfinal.n != M.n()) bookkeeping = false;
    for (int i = 0; i < d && bookkeeping; ++i)
        for (int j = 0; j < M.n(); ++j)
            if (pad.padded.at(i, j) != M.at(i, j)) { bookkeeping = false; break; }

    Matrix final_mat(d, M.n());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < M.n(); ++j)
            final_mat.at(i, j) = M.at(i, j) + static_cast<double>(Rfinal.at(i, j)) / sqrt_d;

    double best = std::numeric_limits<double>::infinity();
    for (const auto& x : kept) {
        SignVector xf = unpad_vector(x, pad.pad_count);
        if (xf.size() != M.n()) bookkeeping = false;
        best = std::min(best, inf_norm(final_mat.mul(xf)));
    }
    rec.bookkeeping_ok = bookkeeping;
    rec.best_disc = best;
    rec.passed = best <= rec.threshold + 1e-12;
    rec.success_transfer_ok = !rec.padded_passed || rec.passed;
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

inline TrialRecord run_trial(const ExperimentConfig& cfg, RngStream& rng) {
    cfg.check();
    RngStream matrix_rng = rng.substream(0);
    KomlosMatrix M = generate_matrix(cfg, matrix_rng);
    return run_trial_on(M, cfg, rng);
}

// --- second-moment diagnostics --------------------------------------------

enum class DiagMode { Enumerate, Sample };

struct SecondMomentReport {
    bool exact = false;
    double e_s = 0.0;
    double e_s2 = 0.0;
    double pr_positive = 0.0;
    double paley_zygmund_bound = 0.0;
    // populated in enumerate mode only
    std::optional<ExactProbability> e_s_exact;
    std::optional<ExactProbability> e_s2_exact;
    std::optional<ExactProbability> pr_positive_exact;
    std::optional<ExactProbability> pz_exact;
    std::vector<ExactProbability> member_hit_prob;  // P_x per member, enumerate mode
};

namespace detail {

// Hit tables: member m, row i -> bitmask over row codes of E_n.
inline std::vector<std::vector<std::vector<std::uint8_t>>> build_hit_tables(
    const KomlosMatrix& M, const std::vector<SignVector>& members) {
    const int n = M.n();
    const std::uint32_t half = 1u << (n - 1);
    std::vector<std::vector<std::vector<std::uint8_t>>> tables;
    for (const auto& x : members) {
        std::vector<TargetSet> targets = target_sets(M, x);
        std::vector<std::vector<std::uint8_t>> per_row;
        const std::uint32_t xm = x.mask();
        for (int i = 0; i < M.d(); ++i) {
            std::vector<std::uint8_t> tab(half, 0);
            for (std::uint32_t code = 0; code < half; ++code) {
                std::uint32_t ones = static_cast<std::uint32_t>(__builtin_popcount(code));
                std::uint32_t mask = code | ((ones & 1u) << (n - 1));
                long long s = n - 2LL * __builtin_popcount(mask ^ xm);
                bool hit = false;
                for (long long v : targets[static_cast<std::size_t>(i)].values)
                    if (v == s) hit = true;
                tab[code] = hit ? 1 : 0;
            }
            per_row.push_back(std::move(tab));
        }
        tables.push_back(std::move(per_row));
    }
    return tables;
}

}  // namespace detail

// S(R) = sum over members of 1{ ||(M + R/sqrt(d)) x||_inf <= Delta } / |R|,
// with uniform weights over the set (the conditional D-weights are unknowable
// without the full law; positivity and the Paley-Zygmund structure do not
// depend on the weights). Enumerate mode is exact over all even-row R.
inline SecondMomentReport second_moment_diag(const KomlosMatrix& M,
                                             const RelevantSet& relevant, DiagMode mode,
                                             RngStream& rng, int n_samples = 10000) {
    const int d = M.d();
    const int n = M.n();
    const auto& members = relevant.members;
    if (members.empty()) throw PreconditionViolated("second_moment_diag: empty set");
    for (const auto& x : members)
        if (x.size() != n) throw DimensionMismatch("second_moment_diag: member length != n");
    const std::size_t m_count = members.size();

    SecondMomentReport rep;
    if (mode == DiagMode::Enumerate) {
        if (d * (n - 1) > 24)
            throw TooLarge("enumerate mode needs d*(n-1) <= 24 bits of randomness");
        auto tables = detail::build_hit_tables(M, members);
        const std::uint32_t half = 1u << (n - 1);

        std::uint64_t total = 1;
        for (int i = 0; i < d; ++i) total *= half;

        std::uint64_t sum_hits = 0, sum_hits_sq = 0, positive = 0;
        std::vector<std::uint64_t> member_hits(m_count, 0);
        std::vector<std::uint32_t> codes(static_cast<std::size_t>(d), 0);
        for (std::uint64_t it = 0;; ++it) {
            std::uint64_t hits = 0;
            for (std::size_t m = 0; m < m_count; ++m) {
                bool all = true;
                for (int i = 0; i < d; ++i) {
                    if (!tables[m][static_cast<std::size_t>(i)][codes[static_cast<std::size_t>(i)]]) {
                        all = false;
                        break;
                    }
                }
                if (all) {
                    ++hits;
                    ++member_hits[m];
                }
            }
            sum_hits += hits;
            sum_hits_sq += hits * hits;
            if (hits > 0) ++positive;

            int pos = 0;
            while (pos < d && ++codes[static_cast<std::size_t>(pos)] == half) {
                codes[static_cast<std::size_t>(pos)] = 0;
                ++pos;
            }
            if (pos == d) break;
        }

        BigInt tot(total), mm(static_cast<std::uint64_t>(m_count));
        rep.exact = true;
        rep.e_s_exact = ExactProbability(BigInt(sum_hits), tot * mm);
        rep.e_s2_exact = ExactProbability(BigInt(sum_hits_sq), tot * mm * mm);
        rep.pr_positive_exact = ExactProbability(BigInt(positive), tot);
        if (sum_hits_sq == 0) {
            rep.pz_exact = ExactProbability::zero();
        } else {
            BigRational es = rep.e_s_exact->value();
            BigRational es2 = rep.e_s2_exact->value();
            rep.pz_exact = ExactProbability(es * es / es2);
        }
        for (std::size_t m = 0; m < m_count; ++m)
            rep.member_hit_prob.emplace_back(BigInt(member_hits[m]), tot);
        rep.e_s = rep.e_s_exact->to_double();
        rep.e_s2 = rep.e_s2_exact->to_double();
        rep.pr_positive = rep.pr_positive_exact->to_double();
        rep.paley_zygmund_bound = rep.pz_exact->to_double();
        return rep;
    }

    if (n_samples < 1) throw PreconditionViolated("sample mode needs n_samples >= 1");
    const double sqrt_d = std::sqrt(static_cast<double>(d));
    const double delta = 1.0 / sqrt_d;
    double sum_s = 0.0, sum_s2 = 0.0;
    long long positive = 0;
    for (int s = 0; s < n_samples; ++s) {
        RademacherMatrix R = sample_rademacher_even_rows(d, n, rng);
        int hits = 0;
        for (const auto& x : members) {
            std::vector<double> mx = M.mul(x);
            std::vector<long long> rx = R.mul(x);
            double worst = 0.0;
            for (int i = 0; i < d; ++i)
                worst = std::max(worst, std::fabs(mx[static_cast<std::size_t>(i)] +
                                                  static_cast<double>(rx[static_cast<std::size_t>(i)]) / sqrt_d));
            if (worst <= delta + 1e-12) ++hits;
        }
        double sv = static_cast<double>(hits) / static_cast<double>(m_count);
        sum_s += sv;
        sum_s2 += sv * sv;
        if (hits > 0) ++positive;
    }
    rep.exact = false;
    rep.e_s = sum_s / n_samples;
    rep.e_s2 = sum_s2 / n_samples;
    rep.pr_positive = static_cast<double>(positive) / n_samples;
    rep.paley_zygmund_bound = rep.e_s2 > 0.0 ? rep.e_s * rep.e_s / rep.e_s2 : 0.0;
    return rep;
}

// --- formula-vs-oracle verification ---------------------------------------

struct VerifyRow {
    std::string lemma_id;
    int n = 0;
    std::string case_id;
    BigInt exact_num, exact_den;
    BigInt oracle_num, oracle_den;
    bool match = false;
};

struct VerifyReport {
    std::vector<VerifyRow> rows;
    bool all_match = true;

    std::string csv() const {
        std::string out = "lemma_id,n,case_id,exact_num,exact_den,oracle_num,oracle_den,match\n";
        for (const auto& r : rows) {
            out += r.lemma_id + "," + std::to_string(r.n) + "," + r.case_id + "," +
                   r.exact_num.str() + "," + r.exact_den.str() + "," + r.oracle_num.str() +
                   "," + r.oracle_den.str() + "," + (r.match ? "1" : "0") + "\n";
        }
        return out;
    }
};

namespace detail {

inline SignVector random_sign_vector(int n, RngStream& rng) {
    std::vector<std::int8_t> e(static_cast<std::size_t>(n));
    for (auto& v : e) v = static_cast<std::int8_t>(rng.sign());
    return SignVector(std::move(e));
}

}  // namespace detail

// Runs every closed form against its enumeration oracle on a grid of random
// cases. `mutate_for_testing` injects an off-by-one into the first compared
// numerator so the harness's mismatch path can itself be tested.
inline VerifyReport verify_core(int n_max = 12, std::uint64_t seed = 0,
                                bool mutate_for_testing = false) {
    if (n_max < 2) throw PreconditionViolated("verify_core: n_max >= 2");
    if (n_max > kEvenEnumerationCap)
        throw TooLarge("verify_core: n_max capped at " + std::to_string(kEvenEnumerationCap));
    RngStream rng(seed, 0x5ec0facadeull);
    VerifyReport rep;
    bool mutated = false;

    auto push = [&](std::string lemma, int n, std::string case_id, BigInt en, BigInt ed,
                    BigInt on, BigInt od) {
        if (mutate_for_testing && !mutated) {
            en += 1;
            mutated = true;
        }
        bool match = (en * od == on * ed);  // compare as rationals
        rep.all_match = rep.all_match && match;
        rep.rows.push_back(VerifyRow{std::move(lemma), n, std::move(case_id), std::move(en),
                                     std::move(ed), std::move(on), std::move(od), match});
    };

    // sum-count identity: |S_t| = C(n, n/2 + t), checked against the full cube
    for (int n = 2; n <= std::min(n_max, 14); n += 2) {
        std::vector<long long> counts(static_cast<std::size_t>(n + 1), 0);
        const std::uint64_t total = 1ull << n;
        for (std::uint64_t m = 0; m < total; ++m)
            ++counts[static_cast<std::size_t>(__builtin_popcountll(m))];
        for (long long t = -n / 2 - 1; t <= n / 2 + 1; ++t) {
            long long ones = n / 2 + t;  // sum 2t <=> #1 = n/2 + t
            long long cnt = (ones >= 0 && ones <= n) ? counts[static_cast<std::size_t>(ones)] : 0;
            push("sum-count", n, "t=" + std::to_string(t), count_S_t(n, t), BigInt(1),
                 BigInt(cnt), BigInt(1));
        }
    }

    // single even-row core probability vs enumeration over E_n
    for (int n = 2; n <= n_max; n += 2) {
        for (int xi = 0; xi < 50; ++xi) {
            SignVector x = detail::random_sign_vector(n, rng);
            auto counts = oracle_single_counts(n, x);
            EvenClassInfo supp = support_even_inner(n, x);
            for (long long s = -n; s <= n; s += 2) {
                long long t = s / 2;
                auto it = counts.find(s);
                BigInt oracle_cnt = (it == counts.end()) ? BigInt(0) : BigInt(it->second);
                ExactProbability p = prob_single_even(n, x, t);
                // only emit rows for support values and two off-support probes
                if (!supp.contains_sum(s) && s != 0 && s != 2) continue;
                push("single-even", n, "x" + std::to_string(xi) + ",t=" + std::to_string(t),
                     p.numerator(), p.denominator(), oracle_cnt, pow2(n - 1));
            }
        }
    }

    // joint even-row core probability vs enumeration over E_n
    for (int n = 4; n <= std::min(n_max, 12); n += 2) {
        for (int pi = 0; pi < 20; ++pi) {
            SignVector x = detail::random_sign_vector(n, rng);
            SignVector y = detail::random_sign_vector(n, rng);
            if (x.parity() != y.parity()) {
                // flip one coordinate of y to match parity
                std::vector<std::int8_t> e(y.entries());
                e[0] = static_cast<std::int8_t>(-e[0]);
                y = SignVector(std::move(e));
            }
            auto counts = oracle_joint_counts(n, x, y);
            EvenClassInfo sx = support_even_inner(n, x);
            EvenClassInfo sy = support_even_inner(n, y);
            for (long long sxv : sx.values()) {
                for (long long syv : sy.values()) {
                    auto it = counts.find({sxv, syv});
                    BigInt oracle_cnt = (it == counts.end()) ? BigInt(0) : BigInt(it->second);
                    ExactProbability p = prob_joint_even(n, x, y, sxv / 2, syv / 2);
                    push("joint-even", n,
                         "p" + std::to_string(pi) + ",tx=" + std::to_string(sxv / 2) +
                             ",ty=" + std::to_string(syv / 2),
                         p.numerator(), p.denominator(), oracle_cnt, pow2(n - 1));
                }
            }
        }
    }

    // parity implications, exhaustive at n = 8
    {
        const int n = std::min(8, n_max);
        long long violations[3] = {0, 0, 0};
        const std::uint32_t total = 1u << n;
        for (std::uint32_t a = 0; a < total; ++a) {
            for (std::uint32_t b = 0; b < total; ++b) {
                SignVector u = SignVector::from_mask(a, n);
                SignVector v = SignVector::from_mask(b, n);
                ParityCheckResult r = parity_checks(u, v);
                if (!r.parity_match_implies_diff_even) ++violations[0];
                if (!r.equal_sums_imply_diff_even) ++violations[1];
                if (!r.even_transfer) ++violations[2];
            }
        }
        const char* ids[3] = {"parity-diff-even", "equal-sums-diff-even", "even-transfer"};
        for (int k = 0; k < 3; ++k)
            push(ids[k], n, "exhaustive", BigInt(violations[k]), BigInt(1), BigInt(0),
                 BigInt(1));
    }

    return rep;
}

// --- sweeps ----------------------------------------------------------------

struct SweepCell {
    int d = 0;
    int n = 0;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::vector<std::vector<TrialRecord>> records;  // per cell, per trial
    ExperimentConfig base;

    std::string csv() const;
};

// Trials are independent jobs keyed by (master_seed, cell, trial); results
// merge by index, so the worker count never changes the output.
inline SweepResult sweep(const std::vector<SweepCell>& grid, const ExperimentConfig& base,
                         int workers = 1) {
    if (grid.empty()) throw PreconditionViolated("sweep: empty grid");
    if (workers < 1) workers = 1;
    base.check();

    SweepResult result;
    result.cells = grid;
    result.base = base;
    result.records.assign(grid.size(), std::vector<TrialRecord>(
                                           static_cast<std::size_t>(base.trials)));

    struct Job {
        std::size_t cell;
        int trial;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < grid.size(); ++c)
        for (int t = 0; t < base.trials; ++t) jobs.push_back(Job{c, t});

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            std::size_t k = next.fetch_add(1);
            if (k >= jobs.size()) return;
            const Job& job = jobs[k];
            try {
                ExperimentConfig cfg = base;
                cfg.d = grid[job.cell].d;
                cfg.n = grid[job.cell].n;
                std::uint64_t stream = (static_cast<std::uint64_t>(job.cell) << 32) |
                                       static_cast<std::uint32_t>(job.trial);
                RngStream rng(base.master_seed, stream);
                result.records[job.cell][static_cast<std::size_t>(job.trial)] = run_trial(cfg, rng);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return result;
}

// Frozen schema. wall_ms is written as 0: replaying a sweep with the same
// master seed must produce a byte-identical file, and wall time cannot do
// that. Per-trial timings live in TrialRecord::wall_time_s.
inline std::string SweepResult::csv() const {
    std::string out =
        "d,n,ensemble,trial,seed,best_disc,threshold,passed,padded_passed,setup_failed,wall_ms\n";
    const std::string ens = ensemble_name(base.ensemble, base.incidence_t);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c];
        int passed = 0, padded = 0, setup = 0, live = 0;
        double disc_sum = 0.0;
        for (std::size_t t = 0; t < records[c].size(); ++t) {
            const TrialRecord& r = records[c][t];
            out += std::to_string(cell.d) + "," + std::to_string(cell.n) + "," + ens + "," +
                   std::to_string(t) + "," + std::to_string(r.seed) + "," +
                   detail::format_double(r.best_disc) + "," +
                   detail::format_double(r.threshold) + "," + (r.passed ? "1" : "0") + "," +
                   (r.padded_passed ? "1" : "0") + "," + (r.setup_failed ? "1" : "0") + ",0\n";
            if (r.setup_failed) {
                ++setup;
            } else {
                ++live;
                disc_sum += r.best_disc;
                if (r.passed) ++passed;
                if (r.padded_passed) ++padded;
            }
        }
        double pass_rate = live > 0 ? static_cast<double>(passed) / live
                                    : std::numeric_limits<double>::quiet_NaN();
        double padded_rate = live > 0 ? static_cast<double>(padded) / live
                                      : std::numeric_limits<double>::quiet_NaN();
        double mean_disc = live > 0 ? disc_sum / live : std::numeric_limits<double>::quiet_NaN();
        out += std::to_string(cell.d) + "," + std::to_string(cell.n) + "," + ens + ",agg," +
               std::to_string(base.master_seed) + "," + detail::format_double(mean_disc) + "," +
               detail::format_double(1.0 + 6.0 / std::sqrt(static_cast<double>(cell.d))) + "," +
               detail::format_double(pass_rate) + "," + detail::format_double(padded_rate) + "," +
               std::to_string(setup) + ",0\n";
    }
    return out;
}

inline std::vector<SweepCell> parse_grid(std::istream& in) {
    std::vector<SweepCell> grid;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        SweepCell cell;
        if (ss >> cell.d >> cell.n) grid.push_back(cell);
    }
    if (grid.empty()) throw IoError("grid file contains no (d, n) rows");
    return grid;
}

// --- normalisation checks ---------------------------------------------------
//
// The 1/sqrt(d) scale on R is forced from below: each column of R/k has norm
// sqrt(d)/k, so keeping perturbation columns inside the unit ball needs
// k >= sqrt(d). Enlarging k is capped around sqrt(n / log d) by the shallow
// witnesses available; the preset exposes both ends with no claim attached.
struct NormalisationReport {
    double k_lower = 0.0;              // sqrt(d)
    double perturbation_column_norm = 0.0;  // sqrt(d) / k_lower, exactly 1
    double k_upper_hint = 0.0;         // sqrt(n / log d)
    std::vector<double> scale_preset;  // k values to sweep
};

inline NormalisationReport normalisation_report(int d, int n) {
    if (d < 2 || n < 1) throw PreconditionViolated("normalisation_report: d >= 2, n >= 1");
    NormalisationReport rep;
    rep.k_lower = std::sqrt(static_cast<double>(d));
    rep.perturbation_column_norm = std::sqrt(static_cast<double>(d)) / rep.k_lower;
    rep.k_upper_hint = std::sqrt(static_cast<double>(n) / std::log(static_cast<double>(d)));
    rep.scale_preset = {rep.k_lower, 2.0 * rep.k_lower, rep.k_upper_hint};
    return rep;
}

}  // namespace komlos
