/// towerlab command-line front end.
///
/// Exit codes: 0 success, 1 verification failure, 2 usage or runtime error,
/// 3 unstable mld result without --allow-unstable.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "towerlab/acceptance.hpp"
#include "towerlab/config.hpp"
#include "towerlab/experiment.hpp"

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    unsigned threads = 0;
    bool allow_unstable = false;
};

void add_common(CLI::App* sub, Common& c)
{
    sub->add_option("--config", c.config, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "master seed, overrides the config");
    sub->add_option("--out", c.out, "output directory, overrides the config");
    sub->add_option("--threads", c.threads, "worker threads (default: TOWERLAB_THREADS or all cores)");
    sub->add_flag("--allow-unstable", c.allow_unstable, "exit 0 when the mld sup has not saturated");
}

int run(const std::string& command, const Common& c)
{
    auto cfg = towerlab::load_config(c.config);
    if (c.seed)
        cfg.estimator.seed = *c.seed;
    const std::string out = c.out.empty() ? cfg.output_dir : c.out;
    const auto r = towerlab::run_experiment(command, cfg, {out, c.threads, c.allow_unstable});
    for (const auto& f : r.files)
        std::cout << (std::filesystem::path(out) / f).string() << "\n";
    for (const auto& f : r.flags)
        std::cerr << "flag: " << f << "\n";
    if (r.unstable && !c.allow_unstable) {
        std::cerr << "towerlab: mld sup not saturated at j_max; raise j_max or pass --allow-unstable\n";
        return 3;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Young-tower experiments: transfer decay, deviation tails and expansion times"};
    app.require_subcommand(1);
    Common common;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"tower", "tower summary: level masses, return-time tail, spec"},
        {"corr", "centered L1 decay and correlations from the cylinder operator"},
        {"ld", "large-deviation probabilities ld(n)"},
        {"mld", "maximal deviation probabilities mld(n)"},
        {"tails", "return-time tails"},
        {"etime", "expansion-time tails on an unstable leaf"},
        {"fit", "classify and fit a rate from a series CSV"}};
    for (const auto& [name, help] : commands)
        add_common(app.add_subcommand(name, help), common);

    auto* verify = app.add_subcommand("verify", "run the acceptance criteria");
    std::string level = "quick";
    towerlab::AcceptanceOptions vopt;
    vopt.out = "verify_out";
    bool tamper = false;
    verify->add_option("level", level, "quick or full")->check(CLI::IsMember({"quick", "full"}));
    verify->add_option("--out", vopt.out, "artifact directory");
    verify->add_option("--seed", vopt.seed, "master seed");
    verify->add_flag("--tamper-kac", tamper, "perturb the Kac constant by 1%");

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) {
            vopt.full = level == "full";
            vopt.tamper_kac = tamper;
            const auto rep = towerlab::run_verify(vopt, [](const towerlab::CriterionRow& r) {
                std::cout << towerlab::format_row(r) << std::endl;
            });
            towerlab::ArtifactWriter(vopt.out).json("report.json", rep.json());
            std::cout << "report: " << (vopt.out / "report.json").string() << "\n";
            return rep.all_pass() ? 0 : 1;
        }
        for (const auto& [name, help] : commands)
            if (app.got_subcommand(name))
                return run(name, common);
    } catch (const std::exception& e) {
        std::cerr << "towerlab: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
