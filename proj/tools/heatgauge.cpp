// heatgauge <config-file> [--out DIR] [--seed N]
//
// Runs one pipeline described by a flat key=value config file. Exit codes:
// 0 success, 1 operational error (bad config, I/O), 2 failed scientific check.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "heatgauge/run_config.hpp"

int main(int argc, char** argv) {
    std::string config_path, out_override, seed_override;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--out" || arg == "--seed") {
            if (i + 1 >= argc) {
                std::cerr << "error: " << arg << " needs a value\n";
                return 1;
            }
            (arg == "--out" ? out_override : seed_override) = argv[++i];
        } else if (!arg.empty() && arg[0] == '-') {
            std::cerr << "error: unknown flag " << arg << "\n";
            return 1;
        } else if (config_path.empty()) {
            config_path = arg;
        } else {
            std::cerr << "error: more than one config file given\n";
            return 1;
        }
    }
    if (config_path.empty()) {
        std::cerr << "usage: heatgauge <config-file> [--out DIR] [--seed N]\n";
        return 1;
    }

    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "error: cannot read " << config_path << "\n";
        return 1;
    }
    std::ostringstream text;
    text << in.rdbuf();

    try {
        auto cfg = heatgauge::parse_config(text.str());
        if (!out_override.empty()) {
            cfg.out = out_override;
            for (auto& [k, v] : cfg.resolved)
                if (k == "out") v = out_override;
        }
        if (!seed_override.empty()) {
            size_t pos = 0;
            unsigned long long s = std::stoull(seed_override, &pos);
            if (pos != seed_override.size())
                throw heatgauge::ConfigError("--seed expects an integer, got '" +
                                             seed_override + "'");
            cfg.seed = s;
            for (auto& [k, v] : cfg.resolved)
                if (k == "seed") v = std::to_string(s);
        }
        return heatgauge::run(cfg, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
