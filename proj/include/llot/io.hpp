#pragma once

#include "llot/grid.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace llot::io {

enum class ConventionFlag { automatic, probability, particle_number };

ConventionFlag parse_convention(const std::string& s);
std::string to_string(MassConvention c);

/// Parses `x,value` (or `x1,...,xd,value`) rows sampling a full tensor grid. Errors carry
/// the offending line number.
GridDensity<double> parse_density_csv(const std::string& text, const std::string& source = "<input>");
GridDensity<double> read_density_csv(const std::string& path);

/// Assigns the mass convention: mass 1 is probability, mass N is particle number.
/// With `automatic` and N = 1 the two coincide and probability is chosen.
void apply_convention(GridDensity<double>& rho, int n_particles, ConventionFlag flag);

std::string format_density_csv(const GridDensity<double>& rho);
void write_density_csv(const std::string& path, const GridDensity<double>& rho);

/// `{ "n": N, "dim": d, "atoms": [ { "x": [[...], ...], "w": w } ] }`, one inner array per particle.
AtomicPlan<double> plan_from_json(const nlohmann::json& j);
nlohmann::ordered_json plan_to_json(const AtomicPlan<double>& plan);
AtomicPlan<double> read_plan_json(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Shortest decimal form that round-trips.
std::string format_double(double v);

}  // namespace llot::io
