#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include <dgate/scenario.hpp>

namespace sc = dgate::scenario;

static int report(const sc::RunResult& r) {
    if (r.exit_code != 0) {
        std::cerr << r.message << "\n";
        return r.exit_code;
    }
    for (const auto& f : r.files) std::cout << f << "\n";
    return 0;
}

int main(int argc, char** argv) {
    CLI::App app{"dissipative geometric phase gate tool"};
    app.require_subcommand(1);

    sc::Overrides ov;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    unsigned threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", out, "output directory (default $DGATE_OUT_DIR or ./out)");
        sub->add_option("--seed", seed, "Monte Carlo seed");
        sub->add_option("--samples", samples, "Monte Carlo sample count")->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
        sub->add_option("--threads", threads, "worker threads, 0 = all cores");
    };

    std::string config;
    auto* run = app.add_subcommand("run", "run a JSON scenario");
    run->add_option("config", config, "scenario file")->required();
    add_common(run);

    std::string preset;
    bool dump = false;
    auto* pre = app.add_subcommand("preset", "run a built-in figure preset");
    pre->add_option("name", preset, "fig2, fig3, fig4, fig5 or fig6")->required();
    pre->add_flag("--dump-config", dump, "print the preset scenarios instead of running them");
    add_common(pre);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    auto fill = [&](CLI::App* sub) {
        if (sub->count("--out")) ov.out_dir = out;
        if (sub->count("--seed")) ov.seed = seed;
        if (sub->count("--samples")) ov.samples = samples;
        if (sub->count("--threads")) ov.threads = threads;
    };

    if (*run) {
        fill(run);
        return report(sc::run_file(config, ov));
    }
    fill(pre);
    std::vector<sc::json> docs;
    try {
        docs = sc::preset(preset);
    } catch (const dgate::InvalidInput& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    }
    if (dump) {
        for (const auto& d : docs) std::cout << d.dump(2) << "\n";
        return 0;
    }
    int rc = 0;
    for (const auto& d : docs) {
        auto r = sc::run_config(d, ov);
        int c = report(r);
        if (c != 0 && rc == 0) rc = c;
    }
    return rc;
}
