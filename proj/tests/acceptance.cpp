/// Acceptance suite: one PASS/FAIL line per criterion row, nonzero exit on any failure.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "towerlab/acceptance.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"towerlab acceptance suite"};
    towerlab::AcceptanceOptions opt;
    bool quick = false;
    app.add_option("--out", opt.out, "artifact directory");
    app.add_flag("--quick", quick, "reduced ensembles");
    app.add_flag("--tamper-kac", opt.tamper_kac, "perturb the Kac constant by 1%");
    app.add_option("--seed", opt.seed, "master seed");
    CLI11_PARSE(app, argc, argv);
    opt.full = !quick;

    try {
        const auto rep = towerlab::run_verify(opt, [](const towerlab::CriterionRow& r) {
            std::cout << towerlab::format_row(r) << std::endl;
        });
        std::ofstream(opt.out / "acceptance.json") << towerlab::json_text(rep.json());
        const auto failed = std::count_if(rep.rows.begin(), rep.rows.end(),
                                          [](const auto& r) { return !r.pass; });
        std::cout << rep.rows.size() << " rows, " << failed << " failed (" << rep.level << ")\n";
        return failed ? 1 : 0;
    } catch (const std::exception& e) {
        std::cerr << "acceptance: " << e.what() << "\n";
        return 2;
    }
}
