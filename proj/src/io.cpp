#include "llot/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace llot::io {

ConventionFlag parse_convention(const std::string& s)
{
    if (s == "auto") return ConventionFlag::automatic;
    if (s == "probability") return ConventionFlag::probability;
    if (s == "particle-number" || s == "particle_number") return ConventionFlag::particle_number;
    throw ValidationError("unknown mass convention '" + s + "' (auto, probability, particle-number)");
}

std::string to_string(MassConvention c)
{
    return c == MassConvention::probability ? "probability" : "particle_number";
}

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

[[noreturn]] void fail_at(const std::string& source, std::size_t line, const std::string& what)
{
    throw ValidationError(source + ":" + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& field, const std::string& source, std::size_t line)
{
    double v = 0;
    const char* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
        fail_at(source, line, "invalid number '" + field + "'");
    return v;
}

}  // namespace

GridDensity<double> parse_density_csv(const std::string& text, const std::string& source)
{
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, raw)) {
        ++line_no;
        if (trim(raw).empty()) continue;
        header = split(trim(raw));
    }
    if (header.empty()) throw ValidationError(source + ": empty density file");
    if (header.size() < 2 || header.back() != "value")
        fail_at(source, line_no, "header must be x,value or x1,...,xd,value");
    const int d = int(header.size()) - 1;
    for (int a = 0; a < d; ++a) {
        const std::string want = d == 1 ? "x" : "x" + std::to_string(a + 1);
        if (header[std::size_t(a)] != want) fail_at(source, line_no, "expected column '" + want + "'");
    }

    std::vector<std::vector<double>> coords;
    std::vector<double> values;
    std::vector<std::size_t> lines;
    while (std::getline(in, raw)) {
        ++line_no;
        if (trim(raw).empty()) continue;
        const auto fields = split(trim(raw));
        if (int(fields.size()) != d + 1)
            fail_at(source, line_no,
                    "expected " + std::to_string(d + 1) + " fields, found " + std::to_string(fields.size()));
        std::vector<double> x(static_cast<std::size_t>(d));
        for (int a = 0; a < d; ++a) x[std::size_t(a)] = parse_number(fields[std::size_t(a)], source, line_no);
        const double v = parse_number(fields.back(), source, line_no);
        if (v < 0) fail_at(source, line_no, "density values must be nonnegative");
        coords.push_back(std::move(x));
        values.push_back(v);
        lines.push_back(line_no);
    }
    if (values.size() < 2) throw ValidationError(source + ": density needs at least 2 rows");

    // Axis coordinates: distinct values per axis, uniformly spaced with a common spacing.
    Vector<double> origin(d);
    double spacing = 0;
    Index points = 0;
    for (int a = 0; a < d; ++a) {
        std::vector<double> axis;
        for (const auto& x : coords) axis.push_back(x[std::size_t(a)]);
        std::sort(axis.begin(), axis.end());
        axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
        if (axis.size() < 2) throw ValidationError(source + ": axis " + std::to_string(a + 1) + " has a single coordinate");
        const double h = (axis.back() - axis.front()) / double(axis.size() - 1);
        for (std::size_t i = 0; i < axis.size(); ++i)
            if (std::abs(axis[i] - (axis.front() + double(i) * h)) > 1e-9 * std::max(1.0, h * double(axis.size())))
                throw ValidationError(source + ": coordinates on axis " + std::to_string(a + 1) +
                                      " are not uniformly spaced");
        if (a == 0) {
            spacing = h;
            points = Index(axis.size());
        } else if (Index(axis.size()) != points || std::abs(h - spacing) > 1e-12 * spacing) {
            throw ValidationError(source + ": every axis must share the same spacing and node count");
        }
        origin[a] = axis.front();
    }
    const Grid<double> grid(origin, spacing, points);
    if (Index(values.size()) != grid.node_count())
        throw ValidationError(source + ": expected " + std::to_string(grid.node_count()) +
                              " rows for a full tensor grid, found " + std::to_string(values.size()));
    Vector<double> v = Vector<double>::Constant(grid.node_count(), -1);
    for (std::size_t r = 0; r < values.size(); ++r) {
        const Vector<double> x = Eigen::Map<const Vector<double>>(coords[r].data(), d);
        const Index flat = grid.locate(x);
        if (v[flat] >= 0) fail_at(source, lines[r], "duplicate grid node");
        v[flat] = values[r];
    }
    return GridDensity<double>(grid, std::move(v));
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << content;
    if (!out) throw ValidationError("failed writing '" + path + "'");
}

GridDensity<double> read_density_csv(const std::string& path)
{
    return parse_density_csv(read_file(path), path);
}

void apply_convention(GridDensity<double>& rho, int n_particles, ConventionFlag flag)
{
    const double mass = rho.mass();
    const double n = double(n_particles);
    auto near = [&](double target) { return std::abs(mass - target) <= 1e-10 * target; };
    switch (flag) {
    case ConventionFlag::probability:
        rho.convention = MassConvention::probability;
        break;
    case ConventionFlag::particle_number:
        rho.convention = MassConvention::particle_number;
        break;
    case ConventionFlag::automatic:
        if (near(1)) {
            rho.convention = MassConvention::probability;
        } else if (near(n)) {
            rho.convention = MassConvention::particle_number;
        } else {
            std::ostringstream msg;
            msg << "density mass " << mass << " is neither 1 nor N = " << n_particles;
            throw ValidationError(msg.str());
        }
        break;
    }
    rho.check_mass(n_particles);
}

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_density_csv(const GridDensity<double>& rho)
{
    const int d = rho.grid.dim();
    std::string out;
    for (int a = 0; a < d; ++a) out += d == 1 ? "x," : "x" + std::to_string(a + 1) + ",";
    out += "value\n";
    for (Index i = 0; i < rho.grid.node_count(); ++i) {
        const auto x = rho.grid.node(i);
        for (int a = 0; a < d; ++a) out += format_double(x[a]) + ",";
        out += format_double(rho.values[i]) + "\n";
    }
    return out;
}

void write_density_csv(const std::string& path, const GridDensity<double>& rho)
{
    write_file(path, format_density_csv(rho));
}

AtomicPlan<double> plan_from_json(const nlohmann::json& j)
{
    try {
        AtomicPlan<double> plan;
        plan.n_particles = j.at("n").get<int>();
        plan.dim = j.at("dim").get<int>();
        if (plan.n_particles < 1 || plan.dim < 1) throw ValidationError("plan n and dim must be positive");
        const auto& atoms = j.at("atoms");
        if (!atoms.is_array()) throw ValidationError("plan atoms must be an array");
        for (std::size_t a = 0; a < atoms.size(); ++a) {
            const auto& xs = atoms[a].at("x");
            if (!xs.is_array() || int(xs.size()) != plan.n_particles)
                throw ValidationError("atom " + std::to_string(a) + ": x must list n points");
            Configuration<double> x(plan.dim, plan.n_particles);
            for (int k = 0; k < plan.n_particles; ++k) {
                const auto& p = xs[std::size_t(k)];
                if (!p.is_array() || int(p.size()) != plan.dim)
                    throw ValidationError("atom " + std::to_string(a) + ": each point needs dim coordinates");
                for (int c = 0; c < plan.dim; ++c) x(c, k) = p[std::size_t(c)].get<double>();
            }
            plan.atoms.push_back({std::move(x), atoms[a].at("w").get<double>()});
        }
        plan.validate(1e-10);
        return plan;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed plan JSON: ") + e.what());
    }
}

nlohmann::ordered_json plan_to_json(const AtomicPlan<double>& plan)
{
    nlohmann::ordered_json j;
    j["n"] = plan.n_particles;
    j["dim"] = plan.dim;
    auto atoms = nlohmann::ordered_json::array();
    for (const auto& a : plan.atoms) {
        auto xs = nlohmann::ordered_json::array();
        for (int k = 0; k < plan.n_particles; ++k) {
            auto p = nlohmann::ordered_json::array();
            for (int c = 0; c < plan.dim; ++c) p.push_back(a.x(c, k));
            xs.push_back(std::move(p));
        }
        atoms.push_back({{"x", std::move(xs)}, {"w", a.w}});
    }
    j["atoms"] = std::move(atoms);
    return j;
}

AtomicPlan<double> read_plan_json(const std::string& path)
{
    const auto text = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return plan_from_json(j);
}

}  // namespace llot::io
