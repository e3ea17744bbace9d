#pragma once

#include <cmath>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "komlos/core_matrix.hpp"
#include "komlos/errors.hpp"
#include "komlos/gs_walk.hpp"
#include "komlos/rng.hpp"
#include "komlos/sign_vector.hpp"

namespace komlos {

// Shared constant for the shallow / antipodal / uncorrelated predicates.
struct RelevanceConfig {
    double c_const = 4.0;
    int max_attempts = 500;

    void check() const {
        if (!(c_const > 0.0)) throw PreconditionViolated("c_const must be > 0");
        if (max_attempts < 1) throw PreconditionViolated("max_attempts must be >= 1");
    }
};

struct DiffResult {
    std::vector<int> indices;  // positions where x and y disagree
    int count = 0;
    double alpha = 0.0;  // agreement fraction (n - |Diff|) / n
};

inline DiffResult diff_set(const SignVector& x, const SignVector& y) {
    if (x.size() != y.size()) throw DimensionMismatch("diff_set: lengths differ");
    DiffResult r;
    for (int i = 0; i < x.size(); ++i)
        if (x[i] != y[i]) r.indices.push_back(i);
    r.count = static_cast<int>(r.indices.size());
    r.alpha = static_cast<double>(x.size() - r.count) / static_cast<double>(x.size());
    return r;
}

// <x, y>, cross-checked against the |n - 2|Diff|| identity.
inline long long inner_from_diff(const SignVector& x, const SignVector& y) {
    long long ip = inner(x, y);  // throws DimensionMismatch on length mismatch
    long long diff = diff_set(x, y).count;
    if (std::llabs(ip) != std::llabs(static_cast<long long>(x.size()) - 2 * diff))
        throw NumericalFailure("inner_from_diff: identity violated");
    return ip;
}

struct PredicateResult {
    bool ok = false;
    double margin = 0.0;  // threshold minus the measured quantity
};

// ||Mx||_inf <= c sqrt(log d); log is natural throughout.
inline PredicateResult is_shallow(const KomlosMatrix& M, const SignVector& x,
                                  const RelevanceConfig& cfg) {
    if (M.d() < 2) throw PreconditionViolated("is_shallow requires d >= 2");
    double threshold = cfg.c_const * std::sqrt(std::log(static_cast<double>(M.d())));
    double margin = threshold - disc_value(M, x);
    return PredicateResult{margin >= 0.0, margin};
}

// | |Diff(x,y)| - n/2 | <= c sqrt(n log d).
inline PredicateResult is_antipodal(const SignVector& x, const SignVector& y, int d,
                                    const RelevanceConfig& cfg) {
    if (x.size() != y.size()) throw DimensionMismatch("is_antipodal: lengths differ");
    if (d < 2) throw PreconditionViolated("is_antipodal requires d >= 2");
    double n = static_cast<double>(x.size());
    double dev = std::fabs(static_cast<double>(diff_set(x, y).count) - n / 2.0);
    double threshold = cfg.c_const * std::sqrt(n * std::log(static_cast<double>(d)));
    double margin = threshold - dev;
    return PredicateResult{margin >= 0.0, margin};
}

// |<Mx, My>| <= c sqrt(d log d).
inline PredicateResult is_uncorrelated(const KomlosMatrix& M, const SignVector& x,
                                       const SignVector& y, const RelevanceConfig& cfg) {
    if (M.d() < 2) throw PreconditionViolated("is_uncorrelated requires d >= 2");
    std::vector<double> mx = M.mul(x);
    std::vector<double> my = M.mul(y);
    double ip = 0.0;
    for (int i = 0; i < M.d(); ++i)
        ip += mx[static_cast<std::size_t>(i)] * my[static_cast<std::size_t>(i)];
    double dd = static_cast<double>(M.d());
    double threshold = cfg.c_const * std::sqrt(dd * std::log(dd));
    double margin = threshold - std::fabs(ip);
    return PredicateResult{margin >= 0.0, margin};
}

struct PairCertificate {
    int i = 0;
    int j = 0;
    double antipodal_margin = 0.0;
    double uncorrelated_margin = 0.0;
    bool high_overlap = false;  // |<x, y>| >= 3n/4; logged, never acted on
};

// Members certified shallow, pairwise antipodal and uncorrelated. The stored
// margins reproduce exactly on re-verification.
struct RelevantSet {
    std::vector<SignVector> members;
    std::vector<double> shallow_margins;
    std::vector<PairCertificate> pair_certificates;
    RelevanceConfig config;

    bool verify(const KomlosMatrix& M) const {
        if (members.size() < 2) return false;
        if (shallow_margins.size() != members.size()) return false;
        for (std::size_t i = 0; i < members.size(); ++i) {
            PredicateResult r = is_shallow(M, members[i], config);
            if (!r.ok || r.margin != shallow_margins[i]) return false;
        }
        std::size_t expected_pairs = members.size() * (members.size() - 1) / 2;
        if (pair_certificates.size() != expected_pairs) return false;
        for (const auto& pc : pair_certificates) {
            const auto& x = members[static_cast<std::size_t>(pc.i)];
            const auto& y = members[static_cast<std::size_t>(pc.j)];
            PredicateResult a = is_antipodal(x, y, M.d(), config);
            PredicateResult u = is_uncorrelated(M, x, y, config);
            if (!a.ok || !u.ok) return false;
            if (a.margin != pc.antipodal_margin || u.margin != pc.uncorrelated_margin)
                return false;
        }
        return true;
    }
};

// Builds a RelevantSet from given members, computing all certificates and
// throwing if any predicate fails.
inline RelevantSet make_relevant_set(const KomlosMatrix& M,
                                     std::vector<SignVector> members,
                                     const RelevanceConfig& cfg) {
    cfg.check();
    if (members.size() < 2)
        throw PreconditionViolated("relevant set needs at least 2 members");
    RelevantSet set;
    set.config = cfg;
    for (const auto& x : members) {
        PredicateResult r = is_shallow(M, x, cfg);
        if (!r.ok) throw PreconditionViolated("member is not shallow");
        set.shallow_margins.push_back(r.margin);
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j) {
            PredicateResult a = is_antipodal(members[i], members[j], M.d(), cfg);
            PredicateResult u = is_uncorrelated(M, members[i], members[j], cfg);
            if (!a.ok) throw PreconditionViolated("pair is not antipodal");
            if (!u.ok) throw PreconditionViolated("pair is not uncorrelated");
            bool overlap = 4 * std::llabs(inner(members[i], members[j])) >=
                           3LL * members[i].size();
            set.pair_certificates.push_back(PairCertificate{
                static_cast<int>(i), static_cast<int>(j), a.margin, u.margin, overlap});
        }
    }
    set.members = std::move(members);
    return set;
}

// Greedy accumulation of truncated-distribution samples: a candidate is kept
// only if shallow and antipodal + uncorrelated against every kept member.
// With require_shared_parity, candidates must also match the first kept
// member's +1-count parity (the padded-pipeline precondition).
inline RelevantSet find_relevant_set(const KomlosMatrix& M, const RelevanceConfig& cfg,
                                     const TruncationConfig& trunc, RngStream& rng,
                                     int target_size, bool require_shared_parity = false) {
    cfg.check();
    if (target_size < 2) throw PreconditionViolated("target_size must be >= 2");
    if (M.d() > M.n()) throw PreconditionViolated("find_relevant_set expects d <= n");

    std::vector<SignVector> kept;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        SignVector x;
        try {
            x = sample_truncated(M, trunc, rng);
        } catch (const MaxRejectionsExceeded&) {
            throw AttemptsExhausted(static_cast<int>(kept.size()));
        }
        if (!is_shallow(M, x, cfg).ok) continue;
        if (require_shared_parity && !kept.empty() && x.parity() != kept.front().parity())
            continue;
        bool ok = true;
        for (const auto& y : kept) {
            if (x == y || !is_antipodal(x, y, M.d(), cfg).ok ||
                !is_uncorrelated(M, x, y, cfg).ok) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        // antipodal members must be distinct once the threshold leaves room
        double n = static_cast<double>(M.n());
        double thr = cfg.c_const * std::sqrt(n * std::log(static_cast<double>(M.d())));
        if (n / 2.0 - thr > 0.0)
            for (const auto& y : kept)
                if (x == y) throw NumericalFailure("antipodal members collided");
        kept.push_back(std::move(x));
        if (static_cast<int>(kept.size()) >= target_size)
            return make_relevant_set(M, std::move(kept), cfg);
    }
    throw AttemptsExhausted(static_cast<int>(kept.size()));
}

// --- JSON serialisation ----------------------------------------------------

inline nlohmann::json to_json(const RelevantSet& set) {
    nlohmann::json j;
    j["config"] = {{"c_const", set.config.c_const}, {"max_attempts", set.config.max_attempts}};
    j["members"] = nlohmann::json::array();
    for (const auto& m : set.members) {
        nlohmann::json arr = nlohmann::json::array();
        for (int i = 0; i < m.size(); ++i) arr.push_back(static_cast<int>(m[i]));
        j["members"].push_back(arr);
    }
    j["certificates"]["shallow_margins"] = set.shallow_margins;
    j["certificates"]["pairs"] = nlohmann::json::array();
    for (const auto& pc : set.pair_certificates)
        j["certificates"]["pairs"].push_back({{"i", pc.i},
                                              {"j", pc.j},
                                              {"antipodal_margin", pc.antipodal_margin},
                                              {"uncorrelated_margin", pc.uncorrelated_margin},
                                              {"high_overlap", pc.high_overlap}});
    return j;
}

inline RelevantSet relevant_set_from_json(const nlohmann::json& j) {
    RelevantSet set;
    set.config.c_const = j.at("config").at("c_const").get<double>();
    set.config.max_attempts = j.at("config").at("max_attempts").get<int>();
    for (const auto& arr : j.at("members")) {
        std::vector<std::int8_t> e;
        for (const auto& v : arr) e.push_back(static_cast<std::int8_t>(v.get<int>()));
        set.members.emplace_back(std::move(e));
    }
    set.shallow_margins = j.at("certificates").at("shallow_margins").get<std::vector<double>>();
    for (const auto& p : j.at("certificates").at("pairs"))
        set.pair_certificates.push_back(PairCertificate{p.at("i").get<int>(), p.at("j").get<int>(),
                                                        p.at("antipodal_margin").get<double>(),
                                                        p.at("uncorrelated_margin").get<double>(),
                                                        p.at("high_overlap").get<bool>()});
    return set;
}

}  // namespace komlos
