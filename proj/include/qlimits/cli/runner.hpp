#pragma once

// Experiment orchestration: builds the seeded inputs, runs one experiment,
// writes its artifacts and the run manifest, and verifies finished runs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qlimits/cli/config.hpp"
#include "qlimits/cli/io.hpp"
#include "qlimits/fidelity.hpp"
#include "qlimits/measurement.hpp"
#include "qlimits/peres.hpp"
#include "qlimits/random.hpp"
#include "qlimits/truncation.hpp"

#ifndef QLIMITS_VERSION
#define QLIMITS_VERSION "0.0.0"
#endif

namespace qlimits::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitViolation = 2;

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kConfigName = "config.json";

// ---------------------------------------------------------------- inputs

inline HermitianOperator make_operator(const OperatorConfig& op, Index dim, std::uint64_t seed, Stream stream,
                                       OperatorRole role) {
    if (op.source == "zero") return HermitianOperator::zero(dim, role);
    if (op.source == "diagonal") return HermitianOperator::diagonal(op.diagonal, role);
    if (op.source == "explicit") return HermitianOperator(op.matrix, role);
    Rng rng = make_rng(seed, stream);
    return sample_gue(dim, op.scale, rng, role);
}

/// Explicit states are normalized here; every experiment takes a unit state.
inline StateVector make_state(const StateConfig& s, Index dim, std::uint64_t seed) {
    if (s.source == "basis") return StateVector::basis(dim, s.index);
    if (s.source == "explicit") return StateVector(s.amplitudes).normalized();
    Rng rng = make_rng(seed, Stream::state);
    return random_state(dim, rng);
}

/// Same draws as sample_composite_model for the default sources.
inline CompositeModel make_model(const ExperimentConfig& cfg) {
    const Index dim = cfg.dims.D;
    const Index n = cfg.dims.N;
    ComplexVector c, d;
    if (cfg.amplitudes.source == "explicit") {
        c = cfg.amplitudes.c;
        d = cfg.amplitudes.d;
    } else {
        AmplitudeSplit split = sample_amplitudes(dim, n, cfg.amplitudes.tail_exponent, cfg.amplitudes.particle_weight,
                                                 cfg.amplitudes.random_phases, cfg.seed);
        c = std::move(split.c);
        d = std::move(split.d);
    }
    RealVector energies = cfg.energies.source == "explicit" ? cfg.energies.values
                                                            : sample_energies(dim, cfg.energies.span, cfg.seed);
    HermitianOperator v = make_operator(cfg.interaction, dim, cfg.seed, Stream::interaction, OperatorRole::interaction);
    return CompositeModel(std::move(c), std::move(d), std::move(energies), std::move(v));
}

inline MeasurementDevice make_device(const ExperimentConfig& cfg) {
    if (cfg.device.source == "explicit") return MeasurementDevice(cfg.device.weights);
    if (cfg.device.source == "uniform") return MeasurementDevice::uniform(cfg.device.channels, cfg.dims.D);
    Rng rng = make_rng(cfg.seed, Stream::device);
    return random_device(cfg.device.channels, cfg.dims.D, rng);
}

// ---------------------------------------------------------------- experiments

struct Artifact {
    std::string name;
    std::string bytes;
};

struct ExperimentOutput {
    std::vector<Artifact> files;
    std::vector<std::string> summary;     ///< human-readable stdout lines
    std::vector<std::string> violations;  ///< reasons for exit 2; empty on success
};

namespace detail {

inline std::string fmt(double x) { return format_double(x); }

}  // namespace detail

inline ExperimentOutput run_truncate_sweep(const ExperimentConfig& cfg) {
    const Index dim = cfg.dims.D;
    const HermitianOperator h =
        make_operator(cfg.hamiltonian, dim, cfg.seed, Stream::hamiltonian, OperatorRole::hamiltonian);
    const HermitianOperator a0 =
        make_operator(cfg.observable, dim, cfg.seed, Stream::observable, OperatorRole::observable);
    const StateVector psi = make_state(cfg.state, dim, cfg.seed);
    const TimeGrid grid = cfg.grid.build();
    const SpectralDecomposition dec = spectral_decompose(h);

    const RankSearchResult search = minimal_rank_for_epsilon(psi, a0, h, grid, cfg.tolerances.epsilon, cfg.threads);
    const Index rank = cfg.dims.n.value_or(search.rank);
    const TruncationPair pair =
        cfg.truncation_basis == "computational" ? make_truncation(dim, rank) : make_truncation(dec, rank);
    const TruncationReport report = truncation_error(psi, a0, dec, pair, grid, cfg.threads);
    const TruncatedEvolution cert = truncated_evolution(dec, grid.t_max(), pair, &psi);

    ExperimentOutput out;
    CsvWriter csv({"t", "error", "termQQ", "termCross", "termComm"});
    double split_residual = 0.0;
    std::size_t bound_violations = 0;
    for (const auto& s : report.samples) {
        csv.row({s.t, s.error, std::abs(s.term_qq), std::abs(s.term_cross), std::abs(s.term_commutator)});
        split_residual = std::max(split_residual, std::abs(s.term_qq + s.term_cross + s.term_commutator - s.difference));
        const double triangle = std::abs(s.term_qq) + std::abs(s.term_cross) + std::abs(s.term_commutator);
        if (s.error > triangle * (1.0 + 1e-12) + 1e-15) ++bound_violations;
    }
    out.files.push_back({"truncation.csv", csv.str()});

    CsvWriter profile({"n", "max_error"});
    for (std::size_t n = 0; n < search.max_error_by_rank.size(); ++n)
        profile.row({static_cast<double>(n), search.max_error_by_rank[n]});
    out.files.push_back({"rank_profile.csv", profile.str()});

    const double full_rank_error = search.max_error_by_rank.back();
    Json result = {
        {"D", dim},
        {"n", rank},
        {"n_source", cfg.dims.n ? "config" : "minimal_rank"},
        {"basis", cfg.truncation_basis},
        {"epsilon", cfg.tolerances.epsilon},
        {"max_error", report.max_error},
        {"minimal_rank", {{"rank", search.rank},
                          {"error_at_rank", search.error_at_rank},
                          {"error_below", finite_or_null(search.error_below)}}},
        {"full_rank_error", full_rank_error},
        {"split_residual", split_residual},
        {"split_bound_violations", bound_violations},
        {"truncated_evolution", {{"t", grid.t_max()},
                                 {"near_zero_singular_values", cert.near_zero_count},
                                 {"numerical_rank", cert.numerical_rank},
                                 {"determinant_zero", cert.determinant_zero},
                                 {"abs_determinant", cert.abs_determinant},
                                 {"threshold", cert.threshold},
                                 {"expectation_gap", finite_or_null(cert.expectation_gap.value_or(0.0))},
                                 {"no_op", cert.no_op}}},
    };
    out.files.push_back({"result.json", canonical_json(result)});

    out.summary.push_back("truncate-sweep: D = " + std::to_string(dim) + ", n = " + std::to_string(rank) +
                          ", max error = " + detail::fmt(report.max_error));
    out.summary.push_back("minimal rank for epsilon " + detail::fmt(cfg.tolerances.epsilon) + ": " +
                          std::to_string(search.rank));
    out.summary.push_back("P U P at t_max: " + std::to_string(cert.near_zero_count) + " near-zero singular values");
    if (split_residual > 1e-10)
        out.violations.push_back("operator split residual " + detail::fmt(split_residual) + " exceeds 1e-10");
    if (bound_violations > 0)
        out.violations.push_back(std::to_string(bound_violations) + " grid points exceed the split triangle bound");
    if (full_rank_error > 1e-12)
        out.violations.push_back("error at n = D is " + detail::fmt(full_rank_error) + ", above 1e-12");
    if (rank < dim && !cert.determinant_zero)
        out.violations.push_back("truncated evolution does not certify a zero determinant");
    return out;
}

inline ExperimentOutput run_readout(const ExperimentConfig& cfg) {
    const CompositeModel model = make_model(cfg);
    const MeasurementDevice device = make_device(cfg);
    const TimeGrid grid = cfg.grid.build();
    ReadoutOptions opts;
    opts.order = cfg.cross_terms;
    opts.hbar = cfg.hbar;
    opts.workers = cfg.threads;
    const ReadoutCurve inter = interacting_readout(model, device, grid, std::nullopt, opts);
    const ReadoutCurve free = free_readout(model, device, grid, opts);
    const ExactReadout exact = exact_oracle_readout(model, device, grid, opts);
    const QualityReport q = quality(inter, free);

    ExperimentOutput out;
    CsvWriter csv({"t", "channel", "P_interacting", "P_free", "|diff|"});
    for (Index a = 0; a < device.channels(); ++a)
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double pi = inter.probability(a, static_cast<Index>(k));
            const double pf = free.probability(a, static_cast<Index>(k));
            csv.row({grid[k], static_cast<double>(a), pi, pf, std::abs(pi - pf)});
        }
    out.files.push_back({"readout.csv", csv.str()});

    Json channels = Json::array();
    for (const auto& cq : q.channels)
        channels.push_back({{"alpha", cq.alpha}, {"Q", cq.value}, {"argmax_t", cq.argmax_time}});
    const double imag = std::max(inter.max_imaginary(), free.max_imaginary());
    const bool commuting =
        qlimits::detail::max_abs_entry(model.interaction().matrix() * model.energies().cast<Complex>().asDiagonal() -
                              model.energies().cast<Complex>().asDiagonal() * model.interaction().matrix()) == 0.0;
    Json result = {
        {"D", model.dim()},
        {"N", model.apparatus_states()},
        {"channels", channels},
        {"Q_aggregate", q.aggregate},
        {"max_imaginary", imag},
        {"cross_terms", cfg.cross_terms == CrossTermOrder::symmetric ? "symmetric" : "transposed"},
        {"exact_oracle_max_deviation", exact.max_deviation},
        {"interaction_commutes", commuting},
    };
    out.files.push_back({"quality.json", canonical_json(result)});

    out.summary.push_back("readout: D = " + std::to_string(model.dim()) + ", channels = " +
                          std::to_string(device.channels()) + ", Q = " + detail::fmt(q.aggregate));
    out.summary.push_back("factorized vs exact-evolution deviation: " + detail::fmt(exact.max_deviation));
    if (cfg.cross_terms == CrossTermOrder::symmetric && imag > 1e-12)
        out.violations.push_back("readout imaginary part " + detail::fmt(imag) + " exceeds 1e-12");
    if (commuting && exact.max_deviation > 1e-10)
        out.violations.push_back("commuting model deviates from exact evolution by " + detail::fmt(exact.max_deviation));
    return out;
}

inline ExperimentOutput run_fidelity(const ExperimentConfig& cfg) {
    const CompositeModel model = make_model(cfg);
    const MeasurementDevice device = make_device(cfg);
    const CoarseningSpec spec(model, cfg.dims.N1);
    const CharacteristicTime t0 = characteristic_time(model, spec, cfg.hbar);
    const TimeGrid grid = cfg.grid.build(t0.t0);

    BoundFitOptions opts;
    opts.k_constant = cfg.k_constant;
    opts.ceiling = cfg.tolerances.ceiling;
    opts.hbar = cfg.hbar;
    opts.workers = cfg.threads;
    opts.order = cfg.cross_terms;

    ExperimentOutput out;
    // With V = 0 the coupling block vanishes, t0 is unbounded and every t > 0 is admissible.
    const BoundFit fit = fit_bound_constant(model, device, grid, spec, opts);
    const FidelityGap& gap = fit.gap;
    const PeresProfile peres =
        peres_condition_check(model, grid, {cfg.tolerances.epsilon, cfg.tolerances.plateau}, cfg.hbar);

    CsvWriter csv({"t", "F", "A_t_eps", "admissible"});
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double f = fit.gap_curve.col(static_cast<Index>(k)).maxCoeff();
        const bool admissible = grid[k] > 0.0 && grid[k] < t0.t0;
        csv.row({grid[k], f, fit.used_a * grid[k] * fit.epsilon[k], admissible ? 1.0 : 0.0});
    }
    out.files.push_back({"fidelity.csv", csv.str()});

    Json channels = Json::array();
    for (const auto& g : gap.channels)
        channels.push_back({{"alpha", g.alpha},
                            {"Q", g.q_perfect},
                            {"Qt", g.q_coarse},
                            {"F", g.gap},
                            {"triangle_bound", g.triangle_bound},
                            {"ordered", g.ordered}});

    Json violations = Json::array();
    for (const auto& p : fit.points)
        if (!p.satisfied)
            violations.push_back({{"kind", "bound"}, {"t", p.t}, {"alpha", p.alpha}, {"F", p.gap}, {"bound", p.bound}});
    for (const auto& v : fit.chain_violations)
        violations.push_back({{"kind", "chain"}, {"t", v.t}, {"alpha", v.alpha}, {"state", v.state},
                              {"admissible", v.admissible}});
    for (const auto& g : gap.channels)
        if (!g.ordered) violations.push_back({{"kind", "ordering"}, {"alpha", g.alpha}, {"Q", g.q_perfect},
                                              {"Qt", g.q_coarse}});
    if (!gap.triangle_holds) violations.push_back({{"kind", "triangle"}});

    Json eps_profile = Json::array();
    for (std::size_t c = 0; c < peres.cutoffs.size(); ++c)
        eps_profile.push_back({{"N1", peres.cutoffs[c]}, {"epsilon_max", peres.epsilon_max[c]}});

    Json result = {
        {"seed", cfg.seed},
        {"D", model.dim()},
        {"N", model.apparatus_states()},
        {"N1", cfg.dims.N1},
        {"t0", finite_or_null(t0.t0)},
        {"t0_bounded", t0.bounded},
        {"K", cfg.k_constant},
        {"A_fitted", finite_or_null(fit.fitted_a)},
        {"A_used", fit.used_a},
        {"A_ceiling", cfg.tolerances.ceiling},
        {"A_finite", fit.finite_a},
        {"satisfied_fraction", fit.satisfied_fraction()},
        {"admissible_points", fit.admissible.size()},
        {"excluded_points", fit.excluded.size()},
        {"chain", {{"checks", fit.chain_checks},
                   {"admissible_violations", fit.admissible_chain_violations},
                   {"flagged_beyond_t0", fit.chain_violations.size() - fit.admissible_chain_violations}}},
        {"C_fitted", fit.fitted_c},
        {"C_tilde_fitted", fit.fitted_c_tilde},
        {"epsilon_profile", eps_profile},
        {"channels", channels},
        {"F_aggregate", gap.aggregate_gap},
        {"triangle_holds", gap.triangle_holds},
        {"ordering_holds", gap.ordering_holds},
        {"peres", {{"condition_holds", peres.condition_holds},
                   {"decay_cutoff", peres.decay_cutoff},
                   {"plateau_cutoff", peres.plateau_cutoff},
                   {"interaction_converges", peres.interaction_converges}}},
        {"violations", violations},
    };
    out.files.push_back({"fidelity.json", canonical_json(result)});

    std::ostringstream line;
    line << "fidelity: D = " << model.dim() << ", N = " << model.apparatus_states() << ", N1 = " << cfg.dims.N1
         << ", t0 = " << detail::fmt(t0.t0);
    out.summary.push_back(line.str());
    out.summary.push_back("A_fitted = " + detail::fmt(fit.fitted_a) + " (ceiling " + detail::fmt(cfg.tolerances.ceiling) +
                          "), " + std::to_string(fit.satisfied) + "/" + std::to_string(fit.points.size()) +
                          " admissible points within A t eps");
    out.summary.push_back("bound chain: " + std::to_string(fit.admissible_chain_violations) + " of " +
                          std::to_string(fit.chain_checks) + " admissible checks violated (reported only)");
    if (!fit.finite_a) out.violations.push_back("A_fitted = " + detail::fmt(fit.fitted_a) + " exceeds the ceiling");
    if (fit.satisfied < fit.points.size())
        out.violations.push_back(std::to_string(fit.points.size() - fit.satisfied) +
                                 " admissible points violate F <= A t eps");
    if (!gap.ordering_holds) out.summary.push_back("Q >= Qt fails on at least one channel (reported only)");
    if (!gap.triangle_holds) out.violations.push_back("|F| exceeds max_t |q - qt| on some channel");
    return out;
}

inline ExperimentOutput run_peres_condition(const ExperimentConfig& cfg) {
    const CompositeModel model = make_model(cfg);
    const TimeGrid grid = cfg.grid.build();
    const PeresProfile p =
        peres_condition_check(model, grid, {cfg.tolerances.epsilon, cfg.tolerances.plateau}, cfg.hbar);

    ExperimentOutput out;
    CsvWriter csv({"N1", "epsilon_max", "interaction_tail"});
    for (std::size_t c = 0; c < p.cutoffs.size(); ++c)
        csv.row({static_cast<double>(p.cutoffs[c]), p.epsilon_max[c], p.interaction_tail[c]});
    out.files.push_back({"peres_profile.csv", csv.str()});

    Json result = {
        {"D", model.dim()},
        {"N", model.apparatus_states()},
        {"epsilon_threshold", cfg.tolerances.epsilon},
        {"plateau_tolerance", cfg.tolerances.plateau},
        {"condition_holds", p.condition_holds},
        {"decay_cutoff", p.decay_cutoff},
        {"plateau_cutoff", p.plateau_cutoff},
        {"interaction_converges", p.interaction_converges},
    };
    out.files.push_back({"peres.json", canonical_json(result)});
    out.summary.push_back("peres-condition: D = " + std::to_string(model.dim()) + ", condition " +
                          (p.condition_holds ? "holds from N1 = " + std::to_string(p.decay_cutoff)
                                             : std::string("does not hold below N1 = D")));
    out.summary.push_back(std::string("interaction tail ") +
                          (p.interaction_converges ? "converges from N1 = " + std::to_string(p.plateau_cutoff)
                                                   : "does not converge"));
    return out;
}

inline ExperimentOutput run_peres_echo(const ExperimentConfig& cfg) {
    const Index dim = cfg.dims.D;
    EnsembleSpec spec;
    spec.dim = dim;
    spec.members = cfg.echo.members;
    spec.seed = cfg.seed;
    spec.ordering = cfg.echo.ordering;
    if (cfg.hamiltonian.source == "gue") spec.base_scale = cfg.hamiltonian.scale;
    else spec.base = make_operator(cfg.hamiltonian, dim, cfg.seed, Stream::hamiltonian, OperatorRole::hamiltonian);
    const double h_norm = operator_norm(ensemble_base(spec).matrix());
    const double unit = cfg.echo.relative ? h_norm : 1.0;
    const StateVector psi = make_state(cfg.state, dim, cfg.seed);
    const TimeGrid grid = cfg.grid.build();

    spec.delta = cfg.echo.delta * unit;
    const EchoCurve curve = ensemble_echo(spec, psi, grid, cfg.threads);

    ExperimentOutput out;
    CsvWriter csv({"t", "mean_echo", "std_echo", "min", "max"});
    bool in_range = true;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        csv.row({grid[k], curve.mean[k], curve.stddev[k], curve.min[k], curve.max[k]});
        in_range = in_range && curve.min[k] >= 0.0 && curve.max[k] <= 1.0 + 1e-10;
    }
    out.files.push_back({"echo.csv", csv.str()});

    Json ladder = Json::array();
    bool monotone = true;
    if (!cfg.echo.ladder.empty()) {
        CsvWriter lcsv({"delta", "delta_absolute", "time_averaged_echo"});
        double previous = std::numeric_limits<double>::infinity();
        for (double rung : cfg.echo.ladder) {
            EnsembleSpec s = spec;
            s.delta = rung * unit;
            const double avg = time_averaged_echo(ensemble_echo(s, psi, grid, cfg.threads));
            lcsv.row({rung, s.delta, avg});
            ladder.push_back({{"delta", rung}, {"delta_absolute", s.delta}, {"time_averaged_echo", avg}});
            if (avg > previous) monotone = false;
            previous = avg;
        }
        out.files.push_back({"ladder.csv", lcsv.str()});
    }

    Json result = {
        {"D", dim},
        {"members", cfg.echo.members},
        {"delta", cfg.echo.delta},
        {"delta_absolute", spec.delta},
        {"hamiltonian_norm", h_norm},
        {"ordering", cfg.echo.ordering == EchoOrdering::forward_nominal ? "forward_nominal" : "forward_perturbed"},
        {"time_averaged_echo", time_averaged_echo(curve)},
        {"final_mean_echo", curve.mean.back()},
        {"ladder", ladder},
        {"ladder_non_increasing", monotone},
    };
    out.files.push_back({"echo.json", canonical_json(result)});

    out.summary.push_back("peres-echo: D = " + std::to_string(dim) + ", members = " + std::to_string(cfg.echo.members) +
                          ", delta = " + detail::fmt(spec.delta) + ", time-averaged echo = " +
                          detail::fmt(time_averaged_echo(curve)));
    if (!cfg.echo.ladder.empty())
        out.summary.push_back(std::string("delta ladder ") + (monotone ? "non-increasing" : "NOT non-increasing"));
    if (!in_range) out.violations.push_back("echo left [0, 1 + 1e-10]");
    if (!monotone) out.violations.push_back("time-averaged echo increases along the delta ladder");
    return out;
}

inline ExperimentOutput run_speed_limit(const ExperimentConfig& cfg) {
    const Index dim = cfg.dims.D;
    const HermitianOperator h =
        make_operator(cfg.hamiltonian, dim, cfg.seed, Stream::hamiltonian, OperatorRole::hamiltonian);
    const StateVector psi = make_state(cfg.state, dim, cfg.seed);
    const TimeGrid grid = cfg.grid.build();
    const SpeedLimitResult r = speed_limit_check(h, psi, grid, cfg.hbar);

    ExperimentOutput out;
    CsvWriter csv({"t", "survival", "bound"});
    for (std::size_t k = 0; k < r.times.size(); ++k) csv.row({r.times[k], r.survival[k], r.bound[k]});
    out.files.push_back({"speed_limit.csv", csv.str()});
    Json result = {
        {"D", dim},
        {"energy_spread", r.energy_spread},
        {"checked_points", r.checked},
        {"min_margin", finite_or_null(r.min_margin)},
        {"holds", r.holds},
    };
    out.files.push_back({"speed_limit.json", canonical_json(result)});
    out.summary.push_back("speed-limit: D = " + std::to_string(dim) + ", dE = " + detail::fmt(r.energy_spread) + ", " +
                          std::to_string(r.checked) + " points checked, bound " + (r.holds ? "holds" : "FAILS"));
    if (!r.holds) out.violations.push_back("survival probability drops below cos^2(dE t / hbar)");
    return out;
}

inline ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.kind) {
        case Experiment::truncate_sweep: return run_truncate_sweep(cfg);
        case Experiment::readout: return run_readout(cfg);
        case Experiment::fidelity: return run_fidelity(cfg);
        case Experiment::peres_condition: return run_peres_condition(cfg);
        case Experiment::peres_echo: return run_peres_echo(cfg);
        case Experiment::speed_limit: return run_speed_limit(cfg);
    }
    throw Error("run_experiment: unknown experiment");
}

// ---------------------------------------------------------------- manifest

inline std::string config_hash(const Json& resolved) { return sha256_hex(canonical_json_compact(resolved)); }

struct RunResult {
    int exit_code = kExitOk;
    std::string status;
    std::vector<std::string> summary;
    std::vector<std::string> violations;
    std::string error;
    std::filesystem::path directory;
};

/// Runs `cfg` into `dir`: config.json and a "running" manifest first, then the
/// artifacts, then the final manifest. Errors after the directory exists are
/// recorded in the manifest with status "failed".
inline RunResult execute(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                         const std::string& seed_source) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    RunResult run;
    run.directory = dir;

    const std::string config_bytes = canonical_json(cfg.resolved);
    write_file(dir / kConfigName, config_bytes);
    Json manifest = {
        {"schema", "qlimits-manifest/1"},
        {"version", QLIMITS_VERSION},
        {"experiment", to_string(cfg.kind)},
        {"status", "running"},
        {"exit_code", nullptr},
        {"seed", cfg.seed},
        {"seed_source", seed_source},
        {"threads", cfg.threads},
        {"config_file", kConfigName},
        {"config_hash", config_hash(cfg.resolved)},
        {"started_at", utc_timestamp()},
        {"finished_at", nullptr},
        {"outputs", Json::array()},
    };
    write_file(dir / kManifestName, canonical_json(manifest));

    try {
        const ExperimentOutput out = run_experiment(cfg);
        Json outputs = Json::array();
        for (const auto& file : out.files) {
            write_file(dir / file.name, file.bytes);
            outputs.push_back({{"file", file.name}, {"sha256", sha256_hex(file.bytes)}, {"bytes", file.bytes.size()}});
        }
        manifest["outputs"] = outputs;
        run.summary = out.summary;
        run.violations = out.violations;
        run.exit_code = out.violations.empty() ? kExitOk : kExitViolation;
        run.status = out.violations.empty() ? "complete" : "violation";
        if (!out.violations.empty()) manifest["violations"] = out.violations;
    } catch (const std::exception& e) {
        run.exit_code = kExitInput;
        run.status = "failed";
        run.error = e.what();
        manifest["error"] = run.error;
    }
    manifest["status"] = run.status;
    manifest["exit_code"] = run.exit_code;
    manifest["finished_at"] = utc_timestamp();
    write_file(dir / kManifestName, canonical_json(manifest));
    return run;
}

struct VerifyReport {
    std::string verdict = "ok";  ///< ok | stale | corrupt
    std::vector<std::string> missing;
    std::vector<std::string> corrupt;
    std::vector<std::string> notes;
};

/// corrupt: an output is missing or its checksum changed. stale: outputs are
/// intact but config.json no longer matches the recorded hash, or the run
/// never finished.
inline VerifyReport verify_manifest(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = dir / kManifestName;
    if (!fs::exists(manifest_path)) throw InputError(dir.string() + ": no " + kManifestName);
    Json manifest;
    try {
        manifest = Json::parse(read_file(manifest_path));
    } catch (const Json::parse_error& e) {
        throw InputError(manifest_path.string() + ": not valid JSON: " + e.what());
    }
    VerifyReport report;
    bool stale = false;

    const std::string status = manifest.value("status", std::string());
    if (status != "complete" && status != "violation") {
        stale = true;
        report.notes.push_back("run status is '" + status + "', not finalized with outputs");
    }

    const fs::path config_path = dir / manifest.value("config_file", std::string(kConfigName));
    if (!fs::exists(config_path)) {
        report.missing.push_back(config_path.filename().string());
    } else {
        try {
            const Json config = Json::parse(read_file(config_path));
            if (config_hash(config) != manifest.value("config_hash", std::string())) {
                stale = true;
                report.notes.push_back("config.json no longer matches config_hash");
            }
        } catch (const Json::parse_error&) {
            report.corrupt.push_back(config_path.filename().string());
        }
    }

    if (manifest.contains("outputs") && manifest["outputs"].is_array()) {
        for (const auto& entry : manifest["outputs"]) {
            const std::string name = entry.value("file", std::string());
            const fs::path path = dir / name;
            if (!fs::exists(path)) {
                report.missing.push_back(name);
            } else if (sha256_hex(read_file(path)) != entry.value("sha256", std::string())) {
                report.corrupt.push_back(name);
            }
        }
    } else {
        report.notes.push_back("manifest has no outputs list");
        stale = true;
    }

    if (!report.missing.empty() || !report.corrupt.empty()) report.verdict = "corrupt";
    else if (stale) report.verdict = "stale";
    return report;
}

}  // namespace qlimits::cli
