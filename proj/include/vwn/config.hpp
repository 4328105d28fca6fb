#pragma once

/// \file
/// `key = value` experiment files. Blank lines and text after '#' are
/// ignored; lists are comma separated. The same keys serve as CLI overrides.

#include "vwn/harness.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vwn {

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (trim(std::string_view(v).substr(used)).empty()) return d;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw std::invalid_argument("config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
    }
    return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace detail

/// Keys accepted by apply_setting, in the order they are documented.
inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "num_bs", "num_carriers", "num_slices", "users_per_slice", "num_users", "cell_radius",
        "pathloss_exponent", "p_max_dbm", "noise_dbm", "r_rsv", "user_distribution", "edge_fraction",
        "edge_threshold", "min_distance", "seed", "trials", "threads", "max_outer_iter",
        "ua_max_inner_iter", "pa_max_inner_iter", "eps1", "eps2", "xi1"};
    return keys;
}

/// Applies one setting. `num_slices` and `num_users` reshape users_per_slice
/// to equal slices; `num_users` must divide evenly.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& raw) {
    using namespace detail;
    const std::string v = trim(raw);
    auto& sc = cfg.scenario;
    auto reshape = [&](std::size_t slices, std::size_t users) {
        if (slices == 0 || users % slices != 0) {
            throw std::invalid_argument("config: " + std::to_string(users) + " users do not split evenly over " +
                                        std::to_string(slices) + " slices");
        }
        sc.users_per_slice.assign(slices, users / slices);
    };
    if (key == "num_bs") {
        sc.num_bs = parse_uint(key, v);
    } else if (key == "num_carriers") {
        sc.num_carriers = parse_uint(key, v);
    } else if (key == "num_slices") {
        const std::size_t g = parse_uint(key, v);
        sc.users_per_slice.assign(g, sc.users_per_slice.empty() ? 1 : sc.users_per_slice.front());
    } else if (key == "users_per_slice") {
        sc.users_per_slice.clear();
        for (const auto& s : split_list(v)) sc.users_per_slice.push_back(parse_uint(key, s));
    } else if (key == "num_users") {
        reshape(sc.users_per_slice.size(), parse_uint(key, v));
    } else if (key == "cell_radius") {
        sc.cell_radius = parse_double(key, v);
    } else if (key == "pathloss_exponent") {
        sc.pathloss_exponent = parse_double(key, v);
    } else if (key == "p_max_dbm") {
        sc.p_max_dbm = parse_double(key, v);
    } else if (key == "noise_dbm") {
        sc.noise_dbm = parse_double(key, v);
    } else if (key == "r_rsv") {
        sc.r_rsv.clear();
        for (const auto& s : split_list(v)) sc.r_rsv.push_back(parse_double(key, s));
    } else if (key == "user_distribution") {
        if (v == "uniform") {
            sc.distribution = UserDistribution::uniform;
        } else if (v == "edge_heavy") {
            sc.distribution = UserDistribution::edge_heavy;
        } else {
            throw std::invalid_argument("config: user_distribution must be uniform or edge_heavy, got '" + v + "'");
        }
    } else if (key == "edge_fraction") {
        sc.edge_fraction = parse_double(key, v);
    } else if (key == "edge_threshold") {
        sc.edge_threshold = parse_double(key, v);
    } else if (key == "min_distance") {
        sc.min_distance = parse_double(key, v);
    } else if (key == "seed") {
        sc.seed = parse_uint(key, v);
    } else if (key == "trials") {
        sc.trials = parse_uint(key, v);
    } else if (key == "threads") {
        cfg.threads = parse_uint(key, v);
    } else if (key == "max_outer_iter") {
        cfg.solver.max_outer_iter = parse_uint(key, v);
    } else if (key == "ua_max_inner_iter") {
        cfg.solver.ua.max_inner_iter = parse_uint(key, v);
    } else if (key == "pa_max_inner_iter") {
        cfg.solver.pa.max_inner_iter = parse_uint(key, v);
    } else if (key == "eps1") {
        cfg.solver.eps1 = cfg.solver.ua.eps1 = parse_double(key, v);
    } else if (key == "eps2") {
        cfg.solver.eps2 = cfg.solver.pa.eps2 = parse_double(key, v);
    } else if (key == "xi1") {
        cfg.solver.ua.xi1 = parse_double(key, v);
    } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

/// Parses `key = value` lines into `cfg`. Errors name the line.
inline void apply_config_text(ExperimentConfig& cfg, const std::string& text, const std::string& origin = "<text>") {
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        try {
            apply_setting(cfg, detail::trim(std::string_view(t).substr(0, eq)), t.substr(eq + 1));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str(), path);
}

}  // namespace vwn
