#pragma once

/// \file
/// Random multi-cell instances: BSs on a square grid, users dropped in
/// discs or edge annuli around their cell's BS, gains chi * d^-a with
/// chi ~ Exp(1) per (m, k, n).

#include "vwn/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace vwn {

/// P[W] = 10^((dBm - 30) / 10)
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

enum class UserDistribution { uniform, edge_heavy };

struct ScenarioConfig {
    std::size_t num_bs = 4;
    std::size_t num_carriers = 4;
    std::vector<std::size_t> users_per_slice{4, 4};
    double cell_radius = 500.0;
    double pathloss_exponent = 3.0;
    double p_max_dbm = 40.0;
    double noise_dbm = -80.0;
    std::vector<double> r_rsv{1.0, 1.0};  ///< one value per slice, or a single value for all
    UserDistribution distribution = UserDistribution::uniform;
    double edge_fraction = 0.75;          ///< share of users in the edge annulus when edge_heavy
    double edge_threshold = 0.8;          ///< edge annulus is [edge_threshold * r, r]
    double min_distance = 10.0;           ///< meters; keeps d^-a bounded
    std::uint64_t seed = 1;
    std::size_t trials = 50;

    void validate() const {
        if (num_bs == 0 || num_carriers == 0 || users_per_slice.empty()) throw std::invalid_argument("scenario: empty dimension");
        for (std::size_t n : users_per_slice) {
            if (n == 0) throw std::invalid_argument("scenario: every slice needs at least one user");
        }
        if (!(cell_radius > 0.0) || !(pathloss_exponent > 0.0)) throw std::invalid_argument("scenario: radius and exponent must be positive");
        if (!(min_distance > 0.0) || min_distance >= cell_radius * edge_threshold) {
            throw std::invalid_argument("scenario: min_distance must lie inside the centre region");
        }
        if (!(edge_fraction >= 0.0 && edge_fraction <= 1.0)) throw std::invalid_argument("scenario: edge_fraction outside [0, 1]");
        if (!(edge_threshold > 0.0 && edge_threshold < 1.0)) throw std::invalid_argument("scenario: edge_threshold outside (0, 1)");
        if (r_rsv.size() != 1 && r_rsv.size() != users_per_slice.size()) {
            throw std::invalid_argument("scenario: r_rsv needs one value or one per slice");
        }
        for (double r : r_rsv) {
            if (!(r >= 0.0)) throw std::invalid_argument("scenario: r_rsv must be nonnegative");
        }
        if (trials == 0) throw std::invalid_argument("scenario: trials must be at least 1");
    }
};

/// SplitMix64 finalizer; keys per-trial streams by (seed, trial) so trials
/// are independent of execution order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t trial) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (trial + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// BS sites on a near-square grid with spacing r * sqrt(2), centred on the origin.
inline std::vector<Point2> bs_layout(std::size_t M, double radius) {
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(M))));
    const std::size_t rows = (M + cols - 1) / cols;
    const double d = radius * std::numbers::sqrt2;
    std::vector<Point2> out;
    for (std::size_t i = 0; i < M; ++i) {
        const double cx = (static_cast<double>(i % cols) - 0.5 * static_cast<double>(cols - 1)) * d;
        const double cy = (static_cast<double>(i / cols) - 0.5 * static_cast<double>(rows - 1)) * d;
        out.push_back({cx, cy});
    }
    return out;
}

/// Each user drops in a cell drawn uniformly at random, so cell loads vary
/// between trials. Radii are area-uniform within their region.
inline NetworkInstance generate_scenario(const ScenarioConfig& cfg, std::uint64_t trial) {
    cfg.validate();
    std::mt19937_64 rng(mix_seed(cfg.seed, trial));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> fading(1.0);

    NetworkInstance inst;
    inst.num_bs = cfg.num_bs;
    inst.num_carriers = cfg.num_carriers;
    inst.users_per_slice = cfg.users_per_slice;
    inst.noise_power = dbm_to_watt(cfg.noise_dbm);
    inst.p_max.assign(cfg.num_bs, dbm_to_watt(cfg.p_max_dbm));
    inst.r_rsv = cfg.r_rsv.size() == 1 ? std::vector<double>(cfg.users_per_slice.size(), cfg.r_rsv.front()) : cfg.r_rsv;
    inst.bs_positions = bs_layout(cfg.num_bs, cfg.cell_radius);

    const std::size_t N = inst.num_users();
    const double r = cfg.cell_radius;
    const double inner = cfg.edge_threshold * r;
    std::uniform_int_distribution<std::size_t> cell(0, cfg.num_bs - 1);
    auto area_uniform = [&](double lo, double hi) { return std::sqrt(lo * lo + unit(rng) * (hi * hi - lo * lo)); };
    for (std::size_t n = 0; n < N; ++n) {
        const Point2 c = inst.bs_positions[cell(rng)];
        double rho = 0.0;
        if (cfg.distribution == UserDistribution::uniform) {
            rho = area_uniform(cfg.min_distance, r);
        } else {
            rho = unit(rng) < cfg.edge_fraction ? area_uniform(inner, r) : area_uniform(cfg.min_distance, inner);
        }
        const double th = 2.0 * std::numbers::pi * unit(rng);
        inst.user_positions.push_back({c.x + rho * std::cos(th), c.y + rho * std::sin(th)});
    }
    inst.gains = Tensor3(cfg.num_bs, cfg.num_carriers, N);
    for (std::size_t m = 0; m < cfg.num_bs; ++m) {
        for (std::size_t k = 0; k < cfg.num_carriers; ++k) {
            for (std::size_t n = 0; n < N; ++n) {
                const double d = std::max(distance(inst.bs_positions[m], inst.user_positions[n]), cfg.min_distance);
                inst.gains(m, k, n) = std::max(fading(rng), 1e-12) * std::pow(d, -cfg.pathloss_exponent);
            }
        }
    }
    return inst;
}

/// A user is at the cell edge when its nearest BS is farther than
/// edge_threshold * radius.
inline bool is_edge_user(const NetworkInstance& inst, std::size_t n, double radius, double edge_threshold = 0.8) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : inst.bs_positions) best = std::min(best, distance(b, inst.user_positions.at(n)));
    return best > edge_threshold * radius;
}

}  // namespace vwn
