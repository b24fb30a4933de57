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

// Experiment configuration, collective-rotation sweeps and result files.
//
// Config files are `key = value` lines; `#` starts a comment. `preset` is
// applied first regardless of where it appears, every other key overrides
// it. Results are CSV (fixed column order) or JSON.

#pragma once

#include "rfqkd/channel.hpp"
#include "rfqkd/detection.hpp"
#include "rfqkd/security.hpp"
#include "rfqkd/tally.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace rfqkd {

inline constexpr std::uint64_t kDefaultSeed = 20061018;

enum class Mode { sweep, single, keyrate, selftest };

inline std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::sweep:
            return "sweep";
        case Mode::single:
            return "single";
        case Mode::keyrate:
            return "keyrate";
        case Mode::selftest:
            return "selftest";
    }
    return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
    for (Mode m : {Mode::sweep, Mode::single, Mode::keyrate, Mode::selftest}) {
        if (s == to_string(m)) return m;
    }
    return std::nullopt;
}

class ConfigError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string preset = "short_fiber";
    NoiseConfig noise = NoiseConfig::short_fiber();
    std::vector<Randomization> schemes = {Randomization::none, Randomization::flip_half};
    std::vector<RotatorSetting> settings = five_setting_sweep();
    double duration_s = 1200.0;
    std::uint64_t seed = kDefaultSeed;
    Mode mode = Mode::sweep;

    /// "short_fiber" (4 m, 20 min per setting) or "one_km" (1 km, 3 h).
    static ExperimentConfig for_preset(std::string_view name) {
        ExperimentConfig cfg;
        if (name == "short_fiber") {
            return cfg;
        }
        if (name == "one_km") {
            cfg.preset = "one_km";
            cfg.noise = NoiseConfig::one_km();
            cfg.duration_s = 3.0 * 3600.0;
            return cfg;
        }
        throw ConfigError("unknown preset '" + std::string(name) + "'");
    }

    void validate() const {
        if (settings.empty()) throw ConfigError("settings must not be empty");
        if (schemes.empty()) throw ConfigError("schemes must not be empty");
        if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw ConfigError("duration_s must be positive");
        for (const auto &s : settings) {
            if (!std::isfinite(s.qwp1_deg) || !std::isfinite(s.hwp_deg) || !std::isfinite(s.qwp2_deg)) {
                throw ConfigError("settings contain a non-finite angle");
            }
        }
        try {
            noise.validate();
        } catch (const std::invalid_argument &e) {
            throw ConfigError(e.what());
        }
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        auto piece = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (!piece.empty()) out.push_back(piece);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(const std::string &v, const std::string &key) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
    return out;
}

inline std::uint64_t parse_u64(const std::string &v, const std::string &key) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError("key '" + key + "': expected an unsigned integer, got '" + v + "'");
    }
    return out;
}

// Shortest text that parses back to the same double.
inline std::string exact(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline const std::map<std::string, double NoiseConfig::*> &noise_fields() {
    static const std::map<std::string, double NoiseConfig::*> fields = {
        {"pair_rate_hz", &NoiseConfig::pair_rate_hz},
        {"apparatus_efficiency", &NoiseConfig::apparatus_efficiency},
        {"fiber_length_km", &NoiseConfig::fiber_length_km},
        {"atten_db_per_km", &NoiseConfig::atten_db_per_km},
        {"extra_loss_db", &NoiseConfig::extra_loss_db},
        {"singles_rate_hz", &NoiseConfig::singles_rate_hz},
        {"window_ns", &NoiseConfig::window_ns},
        {"source_error_prob", &NoiseConfig::source_error_prob},
        {"visibility", &NoiseConfig::visibility},
        {"outside_s_weight", &NoiseConfig::outside_s_weight},
        {"ps_sample_fraction", &NoiseConfig::ps_sample_fraction},
    };
    return fields;
}

// Fixed echo order.
inline constexpr const char *kNoiseKeys[] = {
    "pair_rate_hz",      "apparatus_efficiency", "fiber_length_km",  "atten_db_per_km",
    "extra_loss_db",     "singles_rate_hz",      "window_ns",        "source_error_prob",
    "visibility",        "outside_s_weight",     "ps_sample_fraction",
};

}  // namespace detail

inline std::vector<RotatorSetting> parse_settings(const std::string &value) {
    std::vector<RotatorSetting> out;
    for (const auto &item : detail::split(value, ';')) {
        auto parts = detail::split(item, ':');
        if (parts.size() != 3) {
            throw ConfigError("settings: expected qwp1:hwp:qwp2, got '" + item + "'");
        }
        out.push_back({detail::parse_double(parts[0], "settings"), detail::parse_double(parts[1], "settings"),
                       detail::parse_double(parts[2], "settings")});
    }
    return out;
}

inline std::vector<Randomization> parse_schemes(const std::string &value) {
    std::vector<Randomization> out;
    for (const auto &item : detail::split(value, ',')) {
        auto r = parse_randomization(item);
        if (!r) throw ConfigError("schemes: unknown scheme '" + item + "'");
        out.push_back(*r);
    }
    return out;
}

/// Parses config text. Throws ConfigError naming the offending line.
inline ExperimentConfig parse_config(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    std::optional<std::string> preset;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::string body = detail::trim(line);
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        std::string key = detail::trim(body.substr(0, eq));
        std::string value = detail::trim(body.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (key == "preset") {
            preset = value;
        } else {
            entries.emplace_back(std::move(key), std::move(value));
        }
    }

    ExperimentConfig cfg = ExperimentConfig::for_preset(preset.value_or("short_fiber"));
    const auto &fields = detail::noise_fields();
    for (const auto &[key, value] : entries) {
        if (auto it = fields.find(key); it != fields.end()) {
            cfg.noise.*(it->second) = detail::parse_double(value, key);
        } else if (key == "schemes" || key == "scheme") {
            cfg.schemes = parse_schemes(value);
        } else if (key == "settings") {
            cfg.settings = parse_settings(value);
        } else if (key == "duration_s") {
            cfg.duration_s = detail::parse_double(value, key);
        } else if (key == "seed") {
            cfg.seed = detail::parse_u64(value, key);
        } else if (key == "mode") {
            auto m = parse_mode(value);
            if (!m) throw ConfigError("mode: unknown mode '" + value + "'");
            cfg.mode = *m;
        } else {
            throw ConfigError("unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Full resolved configuration in config-file syntax; parse_config of the
/// result reproduces `cfg` exactly.
inline std::string to_config_text(const ExperimentConfig &cfg) {
    std::ostringstream out;
    out << "preset = " << cfg.preset << "\n";
    out << "mode = " << to_string(cfg.mode) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "duration_s = " << detail::exact(cfg.duration_s) << "\n";
    out << "schemes = ";
    for (std::size_t i = 0; i < cfg.schemes.size(); ++i) {
        out << (i ? "," : "") << to_string(cfg.schemes[i]);
    }
    out << "\nsettings = ";
    for (std::size_t i = 0; i < cfg.settings.size(); ++i) {
        const auto &s = cfg.settings[i];
        out << (i ? "; " : "") << detail::exact(s.qwp1_deg) << ":" << detail::exact(s.hwp_deg) << ":"
            << detail::exact(s.qwp2_deg);
    }
    out << "\n";
    const auto &fields = detail::noise_fields();
    for (const char *key : detail::kNoiseKeys) {
        out << key << " = " << detail::exact(cfg.noise.*(fields.at(key))) << "\n";
    }
    return out.str();
}

struct SweepRow {
    int setting_index = 0;
    Randomization scheme = Randomization::none;
    double conclusive_rate_hz = 0.0;
    double normalized_coincidence = 0.0;
    double qber = 0.0;
    double qber_stderr = 0.0;
    double p_S = 0.0;
    double key_rate_fraction = 0.0;
    TallyCounts tally;  // not serialized
};

inline constexpr const char *kCsvHeader =
    "setting_index,scheme,conclusive_rate_hz,normalized_coincidence,qber,qber_stderr,p_S,key_rate_fraction";

/// Independent stream per (seed, setting, scheme), so a row does not depend
/// on which other rows are in the sweep.
inline std::mt19937_64 row_stream(std::uint64_t seed, int setting_index, Randomization scheme) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(setting_index), static_cast<std::uint32_t>(scheme)};
    return std::mt19937_64(seq);
}

inline SweepRow summarize(int setting_index, Randomization scheme, const TallyCounts &t) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    SweepRow row;
    row.setting_index = setting_index;
    row.scheme = scheme;
    row.tally = t;
    row.conclusive_rate_hz = static_cast<double>(t.conclusive) / t.duration_s;
    if (t.sifted > 0) {
        const double n = static_cast<double>(t.sifted);
        row.qber = static_cast<double>(t.errors) / n;
        row.qber_stderr = std::sqrt(row.qber * (1.0 - row.qber) / n);
    } else {
        row.qber = row.qber_stderr = nan;
    }
    row.p_S = t.pS_sample_total > 0
                  ? static_cast<double>(t.pS_sample_inS) / static_cast<double>(t.pS_sample_total)
                  : nan;
    try {
        row.key_rate_fraction = report(t).rate_fraction;
    } catch (const std::exception &) {
        row.key_rate_fraction = nan;
    }
    return row;
}

/// One row per (setting, scheme), settings outermost. Rows are simulated in
/// parallel; output order and content depend only on the config.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig &cfg) {
    cfg.validate();
    std::vector<std::future<SweepRow>> jobs;
    for (std::size_t k = 0; k < cfg.settings.size(); ++k) {
        for (Randomization scheme : cfg.schemes) {
            jobs.push_back(std::async(std::launch::async, [&cfg, k, scheme] {
                auto rng = row_stream(cfg.seed, static_cast<int>(k), scheme);
                auto t = simulate_session(cfg.noise, cfg.settings[k], scheme, cfg.duration_s, rng);
                return summarize(static_cast<int>(k), scheme, t);
            }));
        }
    }
    std::vector<SweepRow> rows;
    rows.reserve(jobs.size());
    for (auto &j : jobs) rows.push_back(j.get());

    double max_rate = 0.0;
    for (const auto &r : rows) max_rate = std::max(max_rate, r.conclusive_rate_hz);
    for (auto &r : rows) r.normalized_coincidence = max_rate > 0.0 ? r.conclusive_rate_hz / max_rate : 0.0;
    return rows;
}

enum class OutputFormat { csv, json };

inline std::optional<OutputFormat> parse_format(std::string_view s) {
    if (s == "csv") return OutputFormat::csv;
    if (s == "json") return OutputFormat::json;
    return std::nullopt;
}

/// Six significant digits; "nan" for undefined values.
inline std::string format6(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline void write_csv(std::ostream &out, std::span<const SweepRow> rows, const ExperimentConfig *echo = nullptr) {
    if (echo) {
        std::istringstream lines(to_config_text(*echo));
        std::string line;
        while (std::getline(lines, line)) out << "# " << line << "\n";
    }
    out << kCsvHeader << "\n";
    for (const auto &r : rows) {
        out << r.setting_index << "," << to_string(r.scheme) << "," << format6(r.conclusive_rate_hz) << ","
            << format6(r.normalized_coincidence) << "," << format6(r.qber) << "," << format6(r.qber_stderr) << ","
            << format6(r.p_S) << "," << format6(r.key_rate_fraction) << "\n";
    }
}

namespace detail {
inline nlohmann::ordered_json json_number(double v) {
    if (std::isnan(v)) return nullptr;
    return std::stod(format6(v));
}
}  // namespace detail

inline nlohmann::ordered_json rows_to_json(std::span<const SweepRow> rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto &r : rows) {
        arr.push_back({
            {"setting_index", r.setting_index},
            {"scheme", std::string(to_string(r.scheme))},
            {"conclusive_rate_hz", detail::json_number(r.conclusive_rate_hz)},
            {"normalized_coincidence", detail::json_number(r.normalized_coincidence)},
            {"qber", detail::json_number(r.qber)},
            {"qber_stderr", detail::json_number(r.qber_stderr)},
            {"p_S", detail::json_number(r.p_S)},
            {"key_rate_fraction", detail::json_number(r.key_rate_fraction)},
        });
    }
    return arr;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig &cfg) {
    nlohmann::ordered_json o = nlohmann::ordered_json::object();
    std::istringstream lines(to_config_text(cfg));
    std::string line;
    while (std::getline(lines, line)) {
        auto eq = line.find('=');
        o[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
    }
    return o;
}

/// Without `echo` JSON output is a bare array of row objects; with it, an
/// object {"config": {...}, "rows": [...]}.
inline void write_json(std::ostream &out, std::span<const SweepRow> rows, const ExperimentConfig *echo = nullptr) {
    if (echo) {
        nlohmann::ordered_json doc = {{"config", config_to_json(*echo)}, {"rows", rows_to_json(rows)}};
        out << doc.dump(2) << "\n";
    } else {
        out << rows_to_json(rows).dump(2) << "\n";
    }
}

/// Writes rows to `path` ("-" for stdout). Throws std::system_error when the
/// file cannot be written.
inline void emit(std::span<const SweepRow> rows, OutputFormat format, const std::filesystem::path &path,
                 const ExperimentConfig *echo = nullptr) {
    if (rows.empty()) {
        throw std::invalid_argument("emit: no rows");
    }
    auto write = [&](std::ostream &out) {
        if (format == OutputFormat::csv) {
            write_csv(out, rows, echo);
        } else {
            write_json(out, rows, echo);
        }
    };
    if (path == "-") {
        write(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::system_error(std::make_error_code(std::errc::io_error), "emit: cannot open " + path.string());
    }
    write(out);
    out.flush();
    if (!out) {
        throw std::system_error(std::make_error_code(std::errc::io_error), "emit: write failed for " + path.string());
    }
}

/// Reads rows back from CSV, skipping `#` comment lines.
inline std::vector<SweepRow> read_csv(std::istream &in) {
    std::vector<SweepRow> rows;
    std::string line;
    bool header = false;
    auto number = [](const std::string &s) {
        return s == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
    };
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != kCsvHeader) throw std::runtime_error("read_csv: unexpected header");
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 8) throw std::runtime_error("read_csv: expected 8 columns");
        SweepRow r;
        r.setting_index = std::stoi(f[0]);
        auto scheme = parse_randomization(f[1]);
        if (!scheme) throw std::runtime_error("read_csv: bad scheme");
        r.scheme = *scheme;
        r.conclusive_rate_hz = number(f[2]);
        r.normalized_coincidence = number(f[3]);
        r.qber = number(f[4]);
        r.qber_stderr = number(f[5]);
        r.p_S = number(f[6]);
        r.key_rate_fraction = number(f[7]);
        rows.push_back(r);
    }
    return rows;
}

inline nlohmann::ordered_json tally_to_json(const TallyCounts &t) {
    return {
        {"rounds", t.rounds},
        {"conclusive", t.conclusive},
        {"sifted", t.sifted},
        {"errors", t.errors},
        {"accidental_conclusive", t.accidental_conclusive},
        {"pS_sample_total", t.pS_sample_total},
        {"pS_sample_inS", t.pS_sample_inS},
        {"duration_s", t.duration_s},
    };
}

inline TallyCounts tally_from_json(const nlohmann::json &j) {
    TallyCounts t;
    try {
        t.rounds = j.at("rounds").get<std::int64_t>();
        t.conclusive = j.at("conclusive").get<std::int64_t>();
        t.sifted = j.at("sifted").get<std::int64_t>();
        t.errors = j.at("errors").get<std::int64_t>();
        t.accidental_conclusive = j.value("accidental_conclusive", std::int64_t{0});
        t.pS_sample_total = j.at("pS_sample_total").get<std::int64_t>();
        t.pS_sample_inS = j.at("pS_sample_inS").get<std::int64_t>();
        t.duration_s = j.at("duration_s").get<double>();
    } catch (const nlohmann::json::exception &e) {
        throw std::invalid_argument(std::string("tally file: ") + e.what());
    }
    t.validate();
    return t;
}

inline nlohmann::ordered_json report_to_json(const SecurityReport &r) {
    return {
        {"p_S", r.p_S},
        {"e_x", r.e_x},
        {"e_x_S", r.e_x_S},
        {"rate_fraction", r.rate_fraction},
        {"secret_bits_per_s", r.secret_bits_per_s},
    };
}

}  // namespace rfqkd
