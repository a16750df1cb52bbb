#pragma once

#include "llot/grid.hpp"
#include "llot/regularizer.hpp"

#include <cstdint>

#include <string>
#include <vector>

namespace llot::fixtures {

/// A desk instance: a symmetric plan, its binned marginal, and the widths to test.
struct Instance {
    std::string name;
    AtomicPlan<double> plan;
    GridDensity<double> rho;
    std::vector<double> eps;
};

/// Bumps cos^p(pi t / 2), |t| < 1, of half-width `half_width` nodes at the given centre
/// nodes. Every bump is an exact copy of the first; mass normalized to 1.
GridDensity<double> bump_density(const Grid<double>& grid, const std::vector<Index>& centres,
                                 double half_width, int power);

/// Plan moving each node of the first bump to the matching node of every other bump:
/// one atom per ordering of (x_i, x_i + s_1, ..., x_i + s_{N-1}).
AtomicPlan<double> translation_plan(const GridDensity<double>& rho, const std::vector<Index>& centres);

/// Uniform symmetric plan on one configuration of distinct grid nodes.
AtomicPlan<double> permutation_plan(const Grid<double>& grid, const std::vector<Index>& nodes);

/// N = 1 plan whose atoms carry the node masses of rho.
AtomicPlan<double> single_particle_plan(const GridDensity<double>& rho);

/// The five acceptance fixtures (N = 1, 2, 2, 3, 3 on d = 1 grids of 32 to 64 nodes).
std::vector<Instance> desk_instances();

/// N = 2 two-bump instance on `nodes` points over [-2.25, 2.25): cos^6 bumps of half-width
/// 0.9 centred at -+1 (rounded to a whole-node shift), eps = 0.3.
Instance kinetic_instance(Index nodes);

/// N = 2 two-bump instance on [-2, 2) with 1024 nodes, bumps of half-width 0.4 at -+1.
Instance potential_sweep_instance();

/// 200-node grid with spacing `spacing`, two cos^4 bumps of half-width 24 nodes, 64 apart.
GridDensity<double> semiclassical_density(double spacing);

/// Sites x_i = 0.1 i, i < n, with a discretized Gaussian marginal.
GridDensity<double> gaussian_sites(Index n);

/// Two sites at 0 and 1 (or three at 0, 1, 2) with equal mass.
GridDensity<double> equal_sites(Index n);

/// Node configurations for pointwise checks: mostly an atom's sites displaced by up to the
/// kernel radius, in shuffled particle order, plus some uniform draws.
std::vector<std::vector<Index>> sample_configurations(const RegularizedPlan<double>& rp, Index count,
                                                      std::uint64_t seed);

}  // namespace llot::fixtures
