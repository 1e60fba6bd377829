#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qpe/cli_io.hpp"
#include "qpe/errors.hpp"

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "out";
    bool paper_constants = false;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config_path, "Config file (key = value lines)");
    sub->add_option("-s,--set", c.overrides, "Extra config line key=value, applied after the file")->take_all();
    sub->add_option("-o,--out", c.out_dir, "Output directory");
    sub->add_flag("--paper-constants", c.paper_constants, "Use the proof's tau and k0 instead of the practical schedule");
}

qpe::RunConfig load(const Common& c) {
    std::string text;
    if (!c.config_path.empty()) {
        std::ifstream in(c.config_path);
        if (!in) qpe::fail(qpe::ErrorCode::config, "cannot read config file '" + c.config_path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    for (const auto& o : c.overrides) {
        // later lines win: drop an earlier assignment of the same key
        auto eq = o.find('=');
        if (eq == std::string::npos) qpe::fail(qpe::ErrorCode::config, "--set expects key=value, got '" + o + "'");
        std::string key = o.substr(0, eq);
        key.erase(0, key.find_first_not_of(" \t"));
        key.erase(key.find_last_not_of(" \t") + 1);
        std::stringstream in(text), out;
        std::string line;
        while (std::getline(in, line)) {
            auto e = line.find('=');
            std::string k = e == std::string::npos ? "" : line.substr(0, e);
            k.erase(0, k.find_first_not_of(" \t"));
            if (!k.empty()) k.erase(k.find_last_not_of(" \t") + 1);
            if (k != key || key == "forcing") out << line << "\n";
        }
        text = out.str() + o + "\n";
    }
    auto cfg = qpe::parse_config(text);
    if (c.paper_constants) cfg.paper_constants = true;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quasi-periodic Euler solutions: Nash-Moser solver, reducibility stages and measure scans"};
    app.require_subcommand(1);
    Common common;
    qpe::CommandOptions opt;
    std::string predicate;

    struct Sub {
        const char* name;
        const char* help;
    };
    const Sub subs[] = {
        {"solve", "Run the Nash-Moser iteration and reconstruct velocity and pressure"},
        {"straighten", "Straighten the transport operator at the probe velocity"},
        {"reduce", "Run the staged reduction and check the inverse at the probe velocity"},
        {"reduce-kam", "Run the staged reduction and report the KAM remainders"},
        {"melnikov-scan", "Critical gamma of every predicate at sampled parameters"},
        {"measure", "Excluded parameter fraction against gamma"},
        {"verify", "Recompute the invariants of a snapshot"},
        {"oracle", "Run a brute-force reference case"},
    };
    std::vector<CLI::App*> apps;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, common);
        apps.push_back(sub);
    }
    apps[0]->add_option("--snapshot-every", opt.snapshot_every, "Write state_NNN.qpef every k Newton steps");
    apps[5]->add_option("--predicate", predicate, "diophantine, melnikov1, melnikov2 or full");
    apps[6]->add_option("--state", opt.state_path, "QPEF snapshot to verify")->required();
    apps[7]->add_option("--case", opt.oracle_case, "melnikov-diagonal, sublevel-monomial, sublevel-diagonal, diophantine-critical")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return qpe::exit_code(qpe::ErrorCode::config);
    }

    std::string cmd;
    for (auto* sub : apps)
        if (sub->parsed()) cmd = sub->get_name();
    try {
        auto cfg = load(common);
        if (!predicate.empty()) {
            cfg.predicate = predicate;
            cfg = qpe::config_from_json(cfg.to_json());
        }
        opt.out_dir = common.out_dir;
        return qpe::run_command(cmd, cfg, opt, std::cout);
    } catch (const qpe::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return qpe::exit_code(e.code());
    }
}
