// lcsmap: command-line front end for the mobile low-cost sensor workflow.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lcs/error.hpp"
#include "lcs/pipeline.hpp"
#include "lcs/synth.hpp"

namespace {

struct GlobalOptions {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> window;
};

lcs::PipelineConfig build_config(const GlobalOptions& g, bool window_selects_fit)
{
    lcs::PipelineConfig c = g.config.empty() ? lcs::PipelineConfig{} : lcs::PipelineConfig::load(g.config);
    for (const auto& kv : g.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw lcs::UsageError("--set expects key=value, got '" + kv + "'");
        c.set(kv.substr(0, eq), kv.substr(eq + 1), std::filesystem::current_path().string());
    }
    if (g.seed)
        c.seed = *g.seed;
    if (g.out_dir)
        c.set("out_dir", *g.out_dir, std::filesystem::current_path().string());
    if (g.window) {
        c.set("transfer.window", *g.window);
        if (window_selects_fit)
            c.set("fit.windows", *g.window);
    }
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Low-cost PM2.5 sensor correction, background removal, mapping and hotspot detection"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(LCS_VERSION));

    GlobalOptions g;
    app.add_option("--config", g.config, "key = value configuration file");
    app.add_option("--set", g.sets, "override a configuration key (key=value); repeatable");
    app.add_option("--seed", g.seed, "master random seed");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--window", g.window, "averaging window")->check(CLI::IsMember({"5s", "1min", "1h"}));

    std::function<void()> action;

    auto* fit = app.add_subcommand("fit", "fit correction models on collocation data");
    fit->callback([&] { action = [&] { lcs::cmd_fit(build_config(g, true)); }; });

    std::string model_path, input_path, output_path;
    auto* apply = app.add_subcommand("apply", "apply a saved model to a campaign CSV");
    apply->add_option("--model", model_path, "model JSON")->required();
    apply->add_option("--input", input_path, "campaign CSV")->required();
    apply->add_option("--output", output_path, "corrected CSV")->required();
    apply->callback([&] {
        action = [&] {
            const auto c = build_config(g, false);
            std::optional<lcs::Window> w;
            if (g.window)
                w = lcs::parse_window(*g.window);
            lcs::cmd_apply(model_path, input_path, output_path, w, c);
        };
    });

    auto* transfer = app.add_subcommand("transfer-eval", "apply fitted models to mobile data and compare");
    transfer->callback([&] { action = [&] { lcs::cmd_transfer_eval(build_config(g, false)); }; });

    auto* background = app.add_subcommand("background", "estimate and remove the background");
    background->callback([&] { action = [&] { lcs::cmd_background(build_config(g, false)); }; });

    auto* map = app.add_subcommand("map", "grid medians with bootstrap standard errors");
    map->callback([&] {
        action = [&] {
            const auto out = lcs::cmd_map(build_config(g, false));
            std::cout << out.n_stable << " (out of " << out.cells.size() << ") grid cells are stable\n";
        };
    });

    auto* hotspots = app.add_subcommand("hotspots", "detect persistent hotspots");
    hotspots->callback([&] {
        action = [&] {
            const auto r = lcs::cmd_hotspots(build_config(g, false));
            std::size_t persistent = 0;
            for (const auto& c : r.clusters)
                persistent += c.persistent;
            std::cout << r.selected.size() << " points selected, " << r.clusters.size() << " clusters, "
                      << persistent << " persistent\n";
        };
    });

    auto* anova = app.add_subcommand("anova", "sequential ANOVA of corrected differences");
    anova->callback([&] { action = [&] { lcs::cmd_anova(build_config(g, false)); }; });

    auto* run = app.add_subcommand("run", "fit, transfer-eval, background, map, hotspots and anova in turn");
    run->callback([&] { action = [&] { lcs::cmd_run(build_config(g, true)); }; });

    lcs::SynthOptions synth_opts;
    auto* synth = app.add_subcommand("synth", "generate a synthetic campaign with known truth");
    synth->add_option("--runs", synth_opts.runs, "number of mobile runs");
    synth->add_option("--days", synth_opts.collocation_days, "collocation length in days");
    synth->callback([&] {
        action = [&] {
            if (g.seed)
                synth_opts.seed = *g.seed;
            const std::string dir = g.out_dir.value_or("synth");
            lcs::write_synth_campaign(lcs::generate_campaign(synth_opts), synth_opts, dir);
            std::cout << "synthetic campaign written to " << dir << "\n";
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        action();
    } catch (const lcs::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const lcs::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const lcs::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
