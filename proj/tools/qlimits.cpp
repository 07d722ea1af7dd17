#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "qlimits/cli/config.hpp"
#include "qlimits/cli/runner.hpp"

namespace {

using namespace qlimits::cli;

struct RunArgs {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

std::uint64_t parse_env_seed(const char* text) {
    const std::string s(text);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("QLIMITS_SEED: expected an unsigned 64-bit integer (got '" + s + "')");
    return value;
}

int run(Experiment kind, const RunArgs& args) {
    ExperimentConfig cfg = load_config(args.config, kind);
    std::string source = cfg.seed_in_file ? "config" : "default";
    if (const char* env = std::getenv("QLIMITS_SEED"); env != nullptr) {
        cfg.set_seed(parse_env_seed(env));
        source = "env";
    }
    if (args.seed) {
        cfg.set_seed(*args.seed);
        source = "cli";
    }
    if (args.threads) cfg.threads = *args.threads;
    const std::string dir = args.out.value_or(cfg.output_dir);

    const RunResult result = execute(cfg, dir, source);
    for (const auto& line : result.summary) std::cout << line << '\n';
    for (const auto& v : result.violations) std::cout << "violation: " << v << '\n';
    if (!result.error.empty()) std::cerr << "qlimits: error: " << result.error << '\n';
    std::cout << "seed " << cfg.seed << " (" << source << "), status " << result.status << ", exit "
              << result.exit_code << ", outputs in " << dir << '\n';
    return result.exit_code;
}

int verify(const std::string& dir) {
    const VerifyReport report = verify_manifest(dir);
    for (const auto& f : report.missing) std::cout << "missing: " << f << '\n';
    for (const auto& f : report.corrupt) std::cout << "checksum mismatch: " << f << '\n';
    for (const auto& n : report.notes) std::cout << "note: " << n << '\n';
    std::cout << report.verdict << '\n';
    return report.verdict == "ok" ? kExitOk : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qlimits: seeded numerical experiments on truncation, readout fidelity and echo decay"};
    app.require_subcommand(1);
    app.set_version_flag("--version", QLIMITS_VERSION);

    RunArgs args;
    std::optional<Experiment> chosen;
    for (const auto& [kind, name] : experiment_names()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", args.config, "TOML or JSON experiment config")->required();
        sub->add_option("--out", args.out, "output directory (overrides output_dir)");
        sub->add_option("--seed", args.seed, "master seed (overrides QLIMITS_SEED and the config)");
        sub->add_option("--threads", args.threads, "worker threads")->check(CLI::Range(1u, 1024u));
        sub->callback([&chosen, kind = kind] { chosen = kind; });
    }
    std::string verify_dir;
    CLI::App* verify_cmd = app.add_subcommand("verify", "check a run directory against its manifest");
    verify_cmd->add_option("dir", verify_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitInput;
    }

    try {
        if (verify_cmd->parsed()) return verify(verify_dir);
        return run(*chosen, args);
    } catch (const qlimits::InputError& e) {
        std::cerr << "qlimits: error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "qlimits: error: " << e.what() << '\n';
        return kExitInput;
    }
}
