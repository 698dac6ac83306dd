// Materializes the bundled synthetic benchmark datasets (CSV + manifest).
// Generation is deterministic; rerunning overwrites byte-identical files.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advos/benchgen.hpp"
#include "advos/error.hpp"
#include "advos/log.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic benchmark dataset generator"};
    std::string out = "data";
    std::vector<std::string> only;
    app.add_option("--out", out, "output directory (default: data)");
    app.add_option("--only", only, "generate just these datasets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        std::vector<std::string> manifests;
        if (only.empty()) {
            manifests = advos::bench::write_all(out);
        } else {
            for (const auto& name : only) {
                manifests.push_back(advos::bench::write_dataset(name, out));
            }
        }
        for (const auto& m : manifests) std::cout << m << '\n';
        return 0;
    } catch (const std::exception& e) {
        advos::log::error(e.what());
        return 1;
    }
}
