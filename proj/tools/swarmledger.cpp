#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "swarmledger/runner.hpp"

// run <config> [--seed N] [--out DIR]   simulate and write artifacts
// report <metrics.json...> [--json]     aggregate finished runs
// validate-chain <chain.bin>            recheck a dumped chain
//
// exit 0 success, 2 config or usage error, 1 runtime failure (a chain
// that fails validation, broken conservation, a scenario that ends
// short of its configured outcome)

namespace {

using namespace swarmledger;

int cmd_run(const std::string& config_path, bool seed_set, uint64_t seed,
            std::string out_root) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot read " << config_path << "\n";
        return 2;
    }
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    RunConfig cfg = parse_run_config(body);
    if (seed_set) cfg.seed = seed;

    if (out_root.empty()) {
        if (const char* env = std::getenv("SWARMLEDGER_OUT"); env && *env) out_root = env;
        else out_root = "runs";
    }

    RunArtifacts art = run_simulation(cfg, out_root);

    std::cout << "run: " << art.dir.string() << "\n";
    std::cout << "scenario: " << cfg.scenario << " seed " << cfg.seed << " (" << cfg.duration
              << " ticks, " << cfg.nodes << " nodes)\n";
    const auto& chains = art.metrics.at("chains");
    for (auto it = chains.begin(); it != chains.end(); ++it) {
        const auto& m = it.value();
        std::cout << "chain " << it.key() << ": height " << m.at("head_height").get<uint64_t>()
                  << ", " << m.at("canonical_txs").get<uint64_t>() << " txs, "
                  << m.at("orphans").get<uint64_t>() << " orphans\n";
    }
    const auto& conf = art.metrics.at("confirmation");
    std::cout << "confirmation: " << conf.at("confirmed").get<uint64_t>() << "/"
              << conf.at("tracked").get<uint64_t>() << " confirmed";
    if (conf.at("confirmed").get<uint64_t>() > 0)
        std::cout << ", median " << conf.at("median").get<double>() << " ticks";
    std::cout << "\n";
    const auto& cons = art.metrics.at("conservation");
    if (!cons.at("ok").get<bool>()) {
        std::cout << "conservation: FAILED\n";
        return 1;
    }
    std::cout << "conservation: ok (" << cons.at("total_balances").get<uint64_t>() << " of "
              << cons.at("total_created").get<uint64_t>() << " tokens accounted)\n";
    if (auto fail = scenario_failure(cfg.scenario, art.metrics.at("scenario_result"))) {
        std::cout << "outcome: negative, " << *fail << "\n";
        return 1;
    }
    std::cout << "outcome: success\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic swarm ledger simulator"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string out_root;
    auto* run = app.add_subcommand("run", "simulate a scenario and write run artifacts");
    run->add_option("config", config_path, "run configuration (JSON)")->required();
    run->add_option("--seed", seed, "override the config's seed")
        ->each([&](const std::string&) { seed_set = true; });
    run->add_option("--out", out_root, "artifact root (default $SWARMLEDGER_OUT or ./runs)");

    std::vector<std::string> metrics_files;
    bool machine = false;
    auto* report = app.add_subcommand("report", "aggregate metrics across finished runs");
    report->add_option("files", metrics_files, "metrics.json files")->required();
    report->add_flag("--json", machine, "machine-readable aggregate");

    std::string dump_path;
    auto* validate = app.add_subcommand("validate-chain", "recheck a dumped chain end to end");
    validate->add_option("dump", dump_path, "chain_*.bin file from a run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, seed_set, seed, out_root);
        if (report->parsed())
            return swarmledger::report_files(metrics_files, machine, std::cout, std::cerr);
        return swarmledger::validate_chain_file(dump_path, std::cout, std::cerr);
    } catch (const swarmledger::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
