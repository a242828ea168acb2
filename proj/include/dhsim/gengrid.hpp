#ifndef DHSIM_GENGRID_HPP
#define DHSIM_GENGRID_HPP

#include "dhsim/network.hpp"

#include <cstdint>

namespace dhsim {

/// Parameters for the seeded synthetic-grid generator. Grids are random
/// trees rooted at a single producer: pipes are sized so that design
/// velocity is reached at peak demand, so capacities, water masses, and
/// transport delays stay mutually consistent.
struct GridGenParams {
    int nodes = 600;
    std::uint64_t seed = 1;
    double chain_bias = 0.65;            // P(extend the latest branch tip)
    double internal_consumer_prob = 0.25;
    double length_median = 120.0;        // m, lognormal
    double length_sigma = 0.55;          // of log length
    double length_min = 20.0;
    double length_max = 600.0;
    double design_velocity = 1.2;        // m/s at design flow
    double peak_demand_mean = 0.5;       // kg/s per consumer
    double peak_spread = 0.4;            // relative, uniform
    double capacity_margin = 1.3;        // max_flow over design flow
    double loss_per_meter = 0.05;        // W/(m K), lumped onto nodes
    double ambient_temp = 8.0;           // degC
};

/// Deterministic for a given seed. Every leaf is a consumer so all pipes
/// carry demand; masses and capacities are quantized to dyadic values so
/// aggregate sums are order-independent.
Network gen_grid(const GridGenParams& params = {});

}  // namespace dhsim

#endif
