// Copyright 2026 The rfqkd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// rfqkd command line: collective-rotation sweeps, single sessions, key-rate
// evaluation of stored tallies, and the invariant self-test.

#include "rfqkd/rfqkd.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct GlobalOptions {
    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed;
    double duration_scale = 1.0;
    std::string format = "csv";
    std::string output = "-";
};

rfqkd::ExperimentConfig resolve(const GlobalOptions &opt) {
    rfqkd::ExperimentConfig cfg;
    if (!opt.config_path.empty()) {
        cfg = rfqkd::load_config(opt.config_path);
    }
    if (!opt.preset.empty()) {
        // A preset flag replaces the noise model and duration wholesale.
        auto p = rfqkd::ExperimentConfig::for_preset(opt.preset);
        cfg.preset = p.preset;
        cfg.noise = p.noise;
        cfg.duration_s = p.duration_s;
    }
    if (opt.seed) cfg.seed = *opt.seed;
    if (!(opt.duration_scale > 0.0)) throw rfqkd::ConfigError("--duration-scale must be positive");
    cfg.duration_s *= opt.duration_scale;
    cfg.validate();
    return cfg;
}

rfqkd::OutputFormat output_format(const GlobalOptions &opt) {
    auto f = rfqkd::parse_format(opt.format);
    if (!f) throw rfqkd::ConfigError("--format must be csv or json");
    return *f;
}

int run_sweep(const GlobalOptions &opt) {
    const auto cfg = resolve(opt);
    const auto rows = rfqkd::run_sweep(cfg);
    rfqkd::emit(rows, output_format(opt), opt.output, &cfg);
    return 0;
}

int run_single(const GlobalOptions &opt, int setting, const std::string &scheme_name, const std::string &tally_out) {
    auto cfg = resolve(opt);
    if (setting < 0 || static_cast<std::size_t>(setting) >= cfg.settings.size()) {
        throw rfqkd::ConfigError("--setting out of range");
    }
    auto scheme = rfqkd::parse_randomization(scheme_name);
    if (!scheme) throw rfqkd::ConfigError("--scheme must be none, flip_half or haar");

    auto rng = rfqkd::row_stream(cfg.seed, setting, *scheme);
    const auto t = rfqkd::simulate_session(cfg.noise, cfg.settings[static_cast<std::size_t>(setting)], *scheme,
                                           cfg.duration_s, rng);
    const auto row = rfqkd::summarize(setting, *scheme, t);

    nlohmann::ordered_json doc;
    doc["config"] = rfqkd::config_to_json(cfg);
    doc["setting_index"] = setting;
    doc["scheme"] = std::string(rfqkd::to_string(*scheme));
    doc["tally"] = rfqkd::tally_to_json(t);
    try {
        doc["report"] = rfqkd::report_to_json(rfqkd::report(t));
    } catch (const std::exception &e) {
        doc["report"] = nullptr;
        doc["report_error"] = e.what();
    }
    doc["qber"] = rfqkd::detail::json_number(row.qber);
    doc["qber_stderr"] = rfqkd::detail::json_number(row.qber_stderr);
    std::cout << doc.dump(2) << "\n";

    if (!tally_out.empty()) {
        std::ofstream out(tally_out);
        if (!out) throw std::runtime_error("cannot write " + tally_out);
        out << rfqkd::tally_to_json(t).dump(2) << "\n";
    }
    return 0;
}

int run_keyrate(const std::string &tally_path) {
    std::ifstream in(tally_path);
    if (!in) throw std::runtime_error("cannot read " + tally_path);
    const auto t = rfqkd::tally_from_json(nlohmann::json::parse(in));
    const auto r = rfqkd::report(t);
    std::cout << rfqkd::report_to_json(r).dump(2) << "\n";
    return 0;
}

int run_selftest() {
    const bool ok = rfqkd::selftest::run_all(std::cout);
    std::cout << (ok ? "selftest: all suites passed" : "selftest: FAILED") << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Reference-frame-free entangled-photon QKD simulator"};
    app.fallthrough();

    GlobalOptions opt;
    app.add_option("-c,--config", opt.config_path, "Experiment config file (key = value)");
    app.add_option("--preset", opt.preset, "Noise/duration preset: short_fiber or one_km");
    app.add_option("-s,--seed", opt.seed, "64-bit seed");
    app.add_option("--duration-scale", opt.duration_scale, "Multiply the per-setting duration");
    app.add_option("-f,--format", opt.format, "Output format: csv or json");
    app.add_option("-o,--output", opt.output, "Output path, '-' for stdout");

    auto *sweep = app.add_subcommand("sweep", "Run the collective-rotation sweep and write result rows");

    auto *single = app.add_subcommand("single", "Simulate one (setting, scheme) session and print its report");
    int setting = 0;
    std::string scheme = "flip_half";
    std::string tally_out;
    single->add_option("--setting", setting, "Index into the configured settings");
    single->add_option("--scheme", scheme, "none, flip_half or haar");
    single->add_option("--tally-out", tally_out, "Also write the session tallies as JSON");

    auto *keyrate = app.add_subcommand("keyrate", "Evaluate the key-rate bound for a stored tally file");
    std::string tally_path;
    keyrate->add_option("tally", tally_path, "Tally JSON file")->required();

    auto *selftest = app.add_subcommand("selftest", "Run the invariant suites");

    app.require_subcommand(0, 1);
    CLI11_PARSE(app, argc, argv);

    try {
        if (*sweep) return run_sweep(opt);
        if (*single) return run_single(opt, setting, scheme, tally_out);
        if (*keyrate) return run_keyrate(tally_path);
        if (*selftest) return run_selftest();

        // No subcommand: dispatch on the config's mode.
        const auto cfg = resolve(opt);
        switch (cfg.mode) {
            case rfqkd::Mode::sweep:
                return run_sweep(opt);
            case rfqkd::Mode::single:
                return run_single(opt, setting, scheme, tally_out);
            case rfqkd::Mode::selftest:
                return run_selftest();
            case rfqkd::Mode::keyrate:
                throw rfqkd::ConfigError("mode = keyrate needs the keyrate subcommand and a tally file");
        }
    } catch (const rfqkd::ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
