// Command-line front door: verify-core, trial, sweep, diag.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "komlos/experiments.hpp"

namespace {

int cmd_verify_core(int n_max, std::uint64_t seed) {
    komlos::VerifyReport rep = komlos::verify_core(n_max, seed);
    std::cout << rep.csv();
    if (!rep.all_match) {
        std::cerr << "verify-core: MISMATCH detected\n";
        return 1;
    }
    std::cerr << "verify-core: all " << rep.rows.size() << " cases match\n";
    return 0;
}

int cmd_trial(int d, int n, const std::string& ensemble, int k, std::uint64_t seed) {
    komlos::ExperimentConfig cfg;
    cfg.d = d;
    cfg.n = n;
    auto [ens, t] = komlos::parse_ensemble(ensemble);
    cfg.ensemble = ens;
    cfg.incidence_t = t;
    cfg.samples_per_trial = k;
    cfg.master_seed = seed;
    cfg.check();

    komlos::RngStream rng(seed, 0);
    komlos::TrialRecord rec = komlos::run_trial(cfg, rng);
    std::cout << "d=" << d << " n=" << n << " ensemble=" << ensemble
              << " seed_stream=" << rec.seed << "\n"
              << "samples_used=" << rec.samples_used
              << " candidates_kept=" << rec.candidates_kept
              << " setup_failed=" << (rec.setup_failed ? 1 : 0) << "\n"
              << "best_disc=" << rec.best_disc << " threshold=" << rec.threshold
              << " passed=" << (rec.passed ? 1 : 0)
              << " padded_passed=" << (rec.padded_passed ? 1 : 0) << "\n"
              << "bookkeeping_ok=" << (rec.bookkeeping_ok ? 1 : 0)
              << " success_transfer_ok=" << (rec.success_transfer_ok ? 1 : 0)
              << " wall_s=" << rec.wall_time_s << "\n";
    return 0;
}

int cmd_sweep(const std::string& grid_path, int trials, std::uint64_t seed, int workers,
              const std::string& out_path, const std::string& ensemble, int k) {
    std::ifstream gf(grid_path);
    if (!gf) {
        std::cerr << "cannot open grid file: " << grid_path << "\n";
        return 2;
    }
    std::vector<komlos::SweepCell> grid = komlos::parse_grid(gf);

    komlos::ExperimentConfig cfg;
    auto [ens, t] = komlos::parse_ensemble(ensemble);
    cfg.ensemble = ens;
    cfg.incidence_t = t;
    cfg.samples_per_trial = k;
    cfg.trials = trials;
    cfg.master_seed = seed;
    cfg.d = grid.front().d;
    cfg.n = grid.front().n;
    cfg.check();

    komlos::SweepResult result = komlos::sweep(grid, cfg, workers);
    std::string csv = result.csv();
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) {
            std::cerr << "cannot open " << out_path << " for writing\n";
            return 2;
        }
        f << csv;
    }
    double total_wall = 0.0;
    for (const auto& cell : result.records)
        for (const auto& r : cell) total_wall += r.wall_time_s;
    std::cerr << "sweep: " << grid.size() << " cells x " << trials << " trials, total trial time "
              << total_wall << " s\n";
    return 0;
}

int cmd_diag(int d, int n, const std::string& mode, int n_r, std::uint64_t seed,
             const std::string& ensemble) {
    komlos::ExperimentConfig cfg;
    cfg.d = d;
    cfg.n = n;
    auto [ens, t] = komlos::parse_ensemble(ensemble);
    cfg.ensemble = ens;
    cfg.incidence_t = t;
    cfg.master_seed = seed;
    cfg.check();

    komlos::RngStream rng(seed, 1);
    komlos::KomlosMatrix M = komlos::generate_matrix(cfg, rng);

    // two canonical parity-matched members: half-split and alternating
    std::vector<std::int8_t> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        a[static_cast<std::size_t>(j)] = (j < n / 2) ? 1 : -1;
        b[static_cast<std::size_t>(j)] = (j % 2 == 0) ? 1 : -1;
    }
    komlos::RelevanceConfig rc;
    komlos::RelevantSet set = komlos::make_relevant_set(
        M, {komlos::SignVector(std::move(a)), komlos::SignVector(std::move(b))}, rc);

    komlos::DiagMode dm;
    if (mode == "enumerate")
        dm = komlos::DiagMode::Enumerate;
    else if (mode == "sample")
        dm = komlos::DiagMode::Sample;
    else {
        std::cerr << "mode must be 'enumerate' or 'sample'\n";
        return 2;
    }

    komlos::RngStream diag_rng(seed, 2);
    komlos::SecondMomentReport rep = komlos::second_moment_diag(M, set, dm, diag_rng, n_r);
    std::cout << "exact=" << (rep.exact ? 1 : 0) << "\n";
    if (rep.exact) {
        std::cout << "E[S]=" << rep.e_s_exact->str() << " (" << rep.e_s << ")\n"
                  << "E[S^2]=" << rep.e_s2_exact->str() << " (" << rep.e_s2 << ")\n"
                  << "Pr[S>0]=" << rep.pr_positive_exact->str() << " (" << rep.pr_positive
                  << ")\n"
                  << "PZ=" << rep.pz_exact->str() << " (" << rep.paley_zygmund_bound << ")\n";
    } else {
        std::cout << "E[S]=" << rep.e_s << "\nE[S^2]=" << rep.e_s2
                  << "\nPr[S>0]=" << rep.pr_positive << "\nPZ=" << rep.paley_zygmund_bound
                  << "\n";
    }
    bool ok = rep.e_s2 + 1e-15 >= rep.e_s * rep.e_s &&
              rep.pr_positive + 1e-12 >= rep.paley_zygmund_bound;
    std::cout << "paley_zygmund_holds=" << (ok ? 1 : 0) << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrepancy experiments for randomly perturbed Komlos matrices"};
    app.require_subcommand(1);

    int n_max = 12;
    std::uint64_t seed = 0;
    auto* verify = app.add_subcommand("verify-core", "run closed forms against enumeration oracles");
    verify->add_option("--n-max", n_max, "largest even n to check")->check(CLI::Range(2, 20));
    verify->add_option("--seed", seed, "master seed");

    int d = 9, n = 128, k = 200;
    std::string ensemble = "gaussian-unit-columns";
    auto* trial = app.add_subcommand("trial", "one padding-pipeline trial");
    trial->add_option("--d", d, "rows");
    trial->add_option("--n", n, "columns");
    trial->add_option("--ensemble", ensemble, "matrix ensemble");
    trial->add_option("--k", k, "candidate draws per trial");
    trial->add_option("--seed", seed, "master seed");

    std::string grid_path, out_path;
    int trials = 50, workers = 1;
    auto* sweep = app.add_subcommand("sweep", "trials over a (d, n) grid, CSV out");
    sweep->add_option("--grid", grid_path, "grid file: lines of 'd n'")->required();
    sweep->add_option("--trials", trials, "trials per cell");
    sweep->add_option("--seed", seed, "master seed");
    sweep->add_option("--workers", workers, "worker threads");
    sweep->add_option("--out", out_path, "output CSV path (stdout if omitted)");
    sweep->add_option("--ensemble", ensemble, "matrix ensemble");
    sweep->add_option("--k", k, "candidate draws per trial");

    std::string mode = "enumerate";
    int n_r = 10000;
    int diag_d = 2, diag_n = 4;
    std::string diag_ensemble = "all-ones-over-sqrt-d";
    auto* diag = app.add_subcommand("diag", "second-moment / Paley-Zygmund diagnostics");
    diag->add_option("--d", diag_d, "rows");
    diag->add_option("--n", diag_n, "columns");
    diag->add_option("--mode", mode, "enumerate | sample");
    diag->add_option("--n-r", n_r, "samples of R in sample mode");
    diag->add_option("--seed", seed, "master seed");
    diag->add_option("--ensemble", diag_ensemble, "matrix ensemble");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (verify->parsed()) return cmd_verify_core(n_max, seed);
        if (trial->parsed()) return cmd_trial(d, n, ensemble, k, seed);
        if (sweep->parsed())
            return cmd_sweep(grid_path, trials, seed, workers, out_path, ensemble, k);
        if (diag->parsed()) return cmd_diag(diag_d, diag_n, mode, n_r, seed, diag_ensemble);
    } catch (const komlos::InvalidEnsembleParams& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const komlos::PreconditionViolated& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const komlos::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
