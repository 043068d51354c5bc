#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fluctsim/experiment.hpp"
#include "fluctsim/io.hpp"

namespace {

struct CommonArgs {
    std::string config = "config.json";
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out;
};

void add_common(CLI::App* sub, CommonArgs& c) {
    sub->add_option("--config", c.config, "experiment config (JSON)")->capture_default_str();
    sub->add_option("--seed", c.seed, "override ensemble.base_seed");
    sub->add_option("--workers", c.workers,
                    "worker threads; overrides the config and FLUCTSIM_WORKERS");
    sub->add_option("--out", c.out, "override output_dir");
}

fluctsim::RunOverrides overrides_of(const CommonArgs& c) {
    fluctsim::RunOverrides ov;
    ov.seed = c.seed;
    ov.out_dir = c.out;
    ov.workers = c.workers;
    return ov;
}

// Largest |value| in a CSV column, for the report digest.
std::optional<double> csv_max_abs(const std::string& path, std::size_t col) {
    std::ifstream f(path);
    if (!f) return std::nullopt;
    std::string line;
    std::getline(f, line);  // header
    double best = 0.0;
    bool any = false;
    while (std::getline(f, line)) {
        std::size_t start = 0;
        for (std::size_t c = 0; c < col; ++c) {
            start = line.find(',', start);
            if (start == std::string::npos) break;
            ++start;
        }
        if (start == std::string::npos) continue;
        try {
            best = std::max(best, std::fabs(std::stod(line.substr(start))));
            any = true;
        } catch (...) {
        }
    }
    return any ? std::optional<double>(best) : std::nullopt;
}

int print_report(const std::string& dir, std::ostream& os, std::ostream& err) {
    nlohmann::json man;
    try {
        man = nlohmann::json::parse(fluctsim::read_text_file(dir + "/manifest.json"));
    } catch (const std::exception& e) {
        err << "report: " << e.what() << "\n";
        return 2;
    }
    os << "artifacts: " << dir << "\n";
    os << "tool " << man.value("tool_version", "?") << ", config hash "
       << man.value("config_hash", "?") << ", base seed " << man.value("base_seed", 0ull) << ", "
       << man.value("wall_clock_seconds", 0.0) << " s\n";
    for (const auto& f : man.value("files", nlohmann::json::array()))
        os << "  " << f.value("path", "?") << "  " << f.value("bytes", 0ull) << " bytes  fnv1a64 "
           << f.value("fnv1a64", "?") << "\n";

    auto maybe_json = [&](const char* name) -> std::optional<nlohmann::json> {
        try {
            return nlohmann::json::parse(fluctsim::read_text_file(dir + "/" + name));
        } catch (...) {
            return std::nullopt;
        }
    };
    if (auto fd = maybe_json("fd_report.json")) {
        os << "fluctuation-dissipation: " << (fd->value("pass", false) ? "pass" : "FAIL")
           << ", max z " << fd->value("max_z", 0.0) << ", exact residual "
           << fd->value("max_exact_residual", 0.0) << "\n";
        auto diss = fd->value("dissipativity", nlohmann::json::object());
        os << "dissipativity: " << (diss.value("pass", false) ? "pass" : "FAIL")
           << ", max symmetric eigenvalue " << diss.value("max_sym_eigenvalue", 0.0) << "\n";
    }
    if (auto b = maybe_json("balance_report.json"))
        os << "equilibrium balance: " << (b->value("pass", false) ? "pass" : "FAIL") << ", max |z| "
           << b->value("max_abs_z", 0.0) << "\n";
    if (auto z = csv_max_abs(dir + "/ou_stationary.csv", 7))
        os << "ou stationary: max |z| vs identity " << *z << "\n";
    if (auto z = csv_max_abs(dir + "/ou_lagged.csv", 6))
        os << "ou lagged: max |z| vs propagated covariance " << *z << "\n";
    std::ifstream cl(dir + "/clusters.csv");
    if (cl) {
        os << "cluster scan:\n";
        std::string line;
        while (std::getline(cl, line)) os << "  " << line << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hard-sphere fluctuation toolkit"};
    app.require_subcommand(1);

    CommonArgs args[6];
    auto* sim = app.add_subcommand("simulate", "sample the ensemble and store fields + snapshots");
    auto* ana = app.add_subcommand("analyze", "full pipeline with the config's analysis flags");
    auto* fd = app.add_subcommand("fd-check", "generator/noise assembly and Lyapunov residual");
    auto* ou = app.add_subcommand("ou", "Langevin self-consistency run");
    auto* cl = app.add_subcommand("clusters", "good-configuration probability scan");
    auto* ba = app.add_subcommand("balance", "equilibrium gain/loss balance");
    CLI::App* subs[6] = {sim, ana, fd, ou, cl, ba};
    for (int i = 0; i < 6; ++i) add_common(subs[i], args[i]);

    std::string report_dir = "out";
    auto* rep = app.add_subcommand("report", "summarize a stored artifact directory");
    rep->add_option("--out", report_dir, "artifact directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    if (rep->parsed()) return print_report(report_dir, std::cout, std::cerr);
    for (int i = 0; i < 6; ++i) {
        if (!subs[i]->parsed()) continue;
        auto ov = overrides_of(args[i]);
        fluctsim::AnalysisFlags flags;
        switch (i) {
            case 0:  // simulate: ensemble only, every analysis off
                ov.analyses = flags;
                break;
            case 1:  // analyze: honor the config
                break;
            case 2:
                flags.fd_check = true;
                ov.analyses = flags;
                ov.skip_ensemble = true;
                break;
            case 3:
                flags.ou = true;
                ov.analyses = flags;
                ov.skip_ensemble = true;
                break;
            case 4:
                flags.clusters = true;
                ov.analyses = flags;
                ov.skip_ensemble = true;
                break;
            case 5:
                flags.balance = true;
                ov.analyses = flags;
                ov.skip_ensemble = true;
                break;
        }
        return fluctsim::run_experiment(args[i].config, ov, std::cout, std::cerr);
    }
    return 0;
}
