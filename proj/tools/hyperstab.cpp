#include "hyperstab/error.hpp"
#include "hyperstab/experiment.hpp"
#include "hyperstab/parallel.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

namespace {

unsigned threads_from_env() {
    const char* env = std::getenv("HYPERSTAB_THREADS");
    if (!env || !*env) return 0;
    try {
        const long n = std::stol(env);
        return n > 0 ? static_cast<unsigned>(n) : 0;
    } catch (const std::exception&) {
        std::cerr << "hyperstab: ignoring malformed HYPERSTAB_THREADS='" << env << "'\n";
        return 0;
    }
}

int fail(int code, const std::string& what) {
    std::cerr << "hyperstab: " << what << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structural stability experiments for hyperbolic model maps"};
    app.require_subcommand(1);

    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string field;
    std::string sweep_file;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", out, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Override the config seed");
        sub->add_option("--threads", threads, "Worker threads (default: HYPERSTAB_THREADS or all cores)");
    };
    auto* splitting = app.add_subcommand("splitting", "Invariant splitting via the graph transform");
    auto* conjugacy = app.add_subcommand("conjugacy", "Conjugacy h with g h = h f");
    auto* inverse = app.add_subcommand("inverse-check", "Right-inverse residuals and series decay");
    auto* norms = app.add_subcommand("norms", "Norm report for a field file");
    auto* sweep = app.add_subcommand("sweep", "Parameter sweep over eps_p, resolution or alpha");
    for (auto* sub : {splitting, conjugacy, inverse, norms}) {
        sub->add_option("--config", config, "Experiment config (JSON)")->required();
        add_common(sub);
    }
    norms->add_option("--field", field, "Field file")->required();
    sweep->add_option("--config", sweep_file, "Sweep document (JSON)")->required();
    add_common(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (threads == 0) threads = threads_from_env();
    if (threads > 0) hyperstab::set_thread_count(threads);

    try {
        hyperstab::CommandSummary s;
        if (*sweep) {
            s = hyperstab::run_sweep(sweep_file, out, seed);
        } else {
            hyperstab::ExperimentConfig cfg = hyperstab::load_config(config);
            if (seed) cfg.seed = *seed;
            if (*splitting) s = hyperstab::run_splitting(cfg, out);
            if (*conjugacy) s = hyperstab::run_conjugacy(cfg, out);
            if (*inverse) s = hyperstab::run_inverse_check(cfg, out);
            if (*norms) s = hyperstab::run_norms(cfg, field, out);
        }
        std::cout << s.header << '\n' << s.row << '\n';
    } catch (const hyperstab::Error& e) {
        return fail(e.exit_code(), e.what());
    } catch (const std::invalid_argument& e) {
        return fail(2, e.what());
    } catch (const std::domain_error& e) {
        return fail(2, e.what());
    } catch (const std::exception& e) {
        return fail(1, e.what());
    }
    return 0;
}
