#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "magloc/geometry.hpp"
#include "magloc/sim.hpp"
#include "magloc/textio.hpp"

namespace magloc {

// Scenario files are sectioned key-value text:
//
//   [wires]
//   arrangement = W6        # or: file = cage.wires
//   clearance = 0.5
//   current = 100
//
//   [magnetometer]
//   rel_error = 0.01
//   range_max_tesla = 0.12
//   noise_basis = component   # or magnitude
//
//   [earth]
//   north_nanotesla = 131
//   east_nanotesla = 94
//   vertical_nanotesla = 157
//   mapping = xyz             # world axes receiving (north, east, vertical)
//
//   [field]
//   mu_henry_per_meter = 1.2566370614359173e-06
//
//   [simulation]
//   runs_per_point = 100
//   seed = 42
//   threads = 0
//   phantom_file = voxels.txt   # or phantom_height / phantom_resolution / margins
//   saturation_limit_tesla = 0.12
//   output = out
//
// '#' starts a comment (full line or trailing). Unknown sections or keys are
// rejected.

namespace detail {

struct ParsedConfig {
    // section -> key -> value, plus source location for error messages
    std::map<std::string, std::map<std::string, std::string>> sections;
    std::string origin;
};

inline ParsedConfig parse_config_stream(std::istream& in, const std::string& origin) {
    ParsedConfig cfg;
    cfg.origin = origin;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = line;
        const std::size_t hash = sv.find('#');
        if (hash != std::string_view::npos) sv = sv.substr(0, hash);
        sv = trim(sv);
        if (sv.empty()) continue;
        if (sv.front() == '[') {
            if (sv.back() != ']' || sv.size() < 3) fail("malformed section header");
            section = std::string(trim(sv.substr(1, sv.size() - 2)));
            cfg.sections.try_emplace(section);
            continue;
        }
        const std::size_t eq = sv.find('=');
        if (eq == std::string_view::npos) fail("expected key = value");
        const std::string key(trim(sv.substr(0, eq)));
        const std::string value(trim(sv.substr(eq + 1)));
        if (key.empty()) fail("empty key");
        if (section.empty()) fail("key outside any section");
        if (!cfg.sections[section].emplace(key, value).second) fail("duplicate key '" + key + "'");
    }
    return cfg;
}

// Consume-on-read view over one section; leftovers are reported as errors.
class SectionReader {
public:
    SectionReader(ParsedConfig& cfg, const std::string& name) : cfg_(cfg), name_(name) {
        auto it = cfg_.sections.find(name);
        if (it != cfg_.sections.end()) keys_ = &it->second;
    }

    bool take(const std::string& key, std::string& out) {
        if (!keys_) return false;
        auto it = keys_->find(key);
        if (it == keys_->end()) return false;
        out = it->second;
        keys_->erase(it);
        return true;
    }

    bool take_double(const std::string& key, double& out) {
        std::string raw;
        if (!take(key, raw)) return false;
        if (!parse_double(raw, out)) bad_value(key, raw);
        return true;
    }

    bool take_int(const std::string& key, int& out) {
        std::string raw;
        if (!take(key, raw)) return false;
        if (!parse_int(raw, out)) bad_value(key, raw);
        return true;
    }

    bool take_u64(const std::string& key, std::uint64_t& out) {
        std::string raw;
        if (!take(key, raw)) return false;
        if (!parse_u64(raw, out)) bad_value(key, raw);
        return true;
    }

    [[noreturn]] void bad_value(const std::string& key, const std::string& raw) const {
        throw std::runtime_error(cfg_.origin + ": bad value '" + raw + "' for [" + name_ + "] " + key);
    }

    void finish() const {
        if (keys_ && !keys_->empty())
            throw std::runtime_error(cfg_.origin + ": unknown key '" + keys_->begin()->first +
                                     "' in section [" + name_ + "]");
    }

private:
    ParsedConfig& cfg_;
    std::string name_;
    std::map<std::string, std::string>* keys_ = nullptr;
};

}  // namespace detail

inline ScenarioConfig scenario_from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("scenario_from_file: cannot open " + path.string());
    detail::ParsedConfig parsed = detail::parse_config_stream(in, path.string());
    for (const auto& [name, keys] : parsed.sections) {
        (void)keys;
        if (name != "wires" && name != "magnetometer" && name != "earth" && name != "field" &&
            name != "simulation")
            throw std::runtime_error(path.string() + ": unknown section [" + name + "]");
    }

    ScenarioConfig cfg;
    {
        detail::SectionReader wires(parsed, "wires");
        std::string raw;
        if (wires.take("arrangement", raw)) {
            try {
                cfg.arrangement = arrangement_from_name(raw);
            } catch (const std::invalid_argument&) {
                wires.bad_value("arrangement", raw);
            }
        }
        if (wires.take("file", raw)) cfg.wire_file = raw;
        wires.take_double("clearance", cfg.clearance);
        wires.take_double("current", cfg.current);
        wires.finish();
    }
    {
        detail::SectionReader mag(parsed, "magnetometer");
        std::string raw;
        mag.take_double("rel_error", cfg.magnetometer.rel_error);
        mag.take_double("range_max_tesla", cfg.magnetometer.range_max);
        if (mag.take("noise_basis", raw)) {
            if (raw == "component") cfg.magnetometer.noise_basis = NoiseBasis::Component;
            else if (raw == "magnitude") cfg.magnetometer.noise_basis = NoiseBasis::Magnitude;
            else mag.bad_value("noise_basis", raw);
        }
        mag.finish();
    }
    {
        detail::SectionReader earth(parsed, "earth");
        double north = 131.0, east = 94.0, vertical = 157.0;
        std::string mapping = "xyz";
        earth.take_double("north_nanotesla", north);
        earth.take_double("east_nanotesla", east);
        earth.take_double("vertical_nanotesla", vertical);
        earth.take("mapping", mapping);
        if (mapping.size() != 3) earth.bad_value("mapping", mapping);
        double* slot[3] = {nullptr, nullptr, nullptr};
        const double values[3] = {north * 1e-9, east * 1e-9, vertical * 1e-9};
        bool used[3] = {false, false, false};
        for (int i = 0; i < 3; ++i) {
            Axis a = Axis::X;
            try {
                a = axis_from_name(std::string_view(&mapping[i], 1));
            } catch (const std::invalid_argument&) {
                earth.bad_value("mapping", mapping);
            }
            const int ai = static_cast<int>(a);
            if (used[ai]) earth.bad_value("mapping", mapping);
            used[ai] = true;
            slot[i] = ai == 0 ? &cfg.earth.ex : ai == 1 ? &cfg.earth.ey : &cfg.earth.ez;
        }
        for (int i = 0; i < 3; ++i) *slot[i] = values[i];
        earth.finish();
    }
    {
        detail::SectionReader field(parsed, "field");
        double mu = cfg.mu.mu;
        if (field.take_double("mu_henry_per_meter", mu)) cfg.mu = Permeability(mu);
        field.finish();
    }
    {
        detail::SectionReader sim(parsed, "simulation");
        std::string raw;
        sim.take_int("runs_per_point", cfg.runs_per_point);
        sim.take_u64("seed", cfg.seed);
        sim.take_int("threads", cfg.threads);
        if (sim.take("phantom_file", raw)) cfg.phantom_file = raw;
        sim.take_double("phantom_height", cfg.phantom_height);
        sim.take_double("phantom_resolution", cfg.phantom_resolution);
        sim.take_double("phantom_margin_xy", cfg.phantom_margin_xy);
        sim.take_double("phantom_margin_z", cfg.phantom_margin_z);
        sim.take_double("saturation_limit_tesla", cfg.saturation_limit);
        if (sim.take("output", raw)) cfg.output_dir = raw;
        sim.finish();
    }
    validate_scenario(cfg);
    return cfg;
}

}  // namespace magloc
