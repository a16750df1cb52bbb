#include <doctest.h>

#include "llot/cli.hpp"
#include "llot/fixtures.hpp"
#include "llot/io.hpp"

#include <json.hpp>

#include <filesystem>
#include <sstream>

using namespace llot;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "llot");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(int(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string data(const std::string& name)
{
    return std::string(LLOT_DATA_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("density CSV parsing")
{
    const auto rho = io::parse_density_csv("x,value\n0,0.25\n0.5,0.5\n1,0.25\n", "mem");
    CHECK(rho.grid.points_per_axis() == 3);
    CHECK(rho.grid.spacing() == doctest::Approx(0.5));
    CHECK(rho.values[1] == 0.5);

    const auto shuffled = io::parse_density_csv("x1,x2,value\n1,1,4\n0,0,1\n1,0,3\n0,1,2\n", "mem");
    CHECK(shuffled.grid.dim() == 2);
    CHECK(shuffled.values.sum() == 10);
    CHECK(shuffled.values[shuffled.grid.locate(Vector<double>{{1.0, 0.0}})] == 3);

    CHECK_THROWS_WITH_AS(io::parse_density_csv("x,value\n0,0.5\n1,abc\n", "f.csv"),
                         "f.csv:3: invalid number 'abc'", ValidationError);
    CHECK_THROWS_WITH_AS(io::parse_density_csv("x,value\n0,0.5\n1,0.2,3\n", "f.csv"),
                         "f.csv:3: expected 2 fields, found 3", ValidationError);
    CHECK_THROWS_WITH_AS(io::parse_density_csv("x,value\n0,0.5\n1,-0.2\n", "f.csv"),
                         doctest::Contains("f.csv:3: density values must be nonnegative"), ValidationError);
    CHECK_THROWS_WITH_AS(io::parse_density_csv("x,value\n0,0.5\n1,0.2\n3,0.3\n", "f.csv"),
                         doctest::Contains("not uniformly spaced"), ValidationError);
    CHECK_THROWS_WITH_AS(io::parse_density_csv("x,value\n0,0.5\n1,0.2\n1,0.3\n", "f.csv"),
                         doctest::Contains("rows for a full tensor grid"), ValidationError);
    CHECK_THROWS_WITH_AS(io::parse_density_csv("pos,value\n0,1\n1,1\n", "f.csv"),
                         doctest::Contains("expected column 'x'"), ValidationError);
    CHECK_THROWS_AS(io::parse_density_csv("", "f.csv"), ValidationError);
}

TEST_CASE("density CSV round trip is exact")
{
    const auto rho = fixtures::gaussian_sites(16);
    const auto back = io::parse_density_csv(io::format_density_csv(rho), "mem");
    CHECK(back.values == rho.values);
    CHECK(back.grid.spacing() == rho.grid.spacing());
}

TEST_CASE("mass convention")
{
    auto rho = fixtures::equal_sites(2);
    io::apply_convention(rho, 2, io::ConventionFlag::automatic);
    CHECK(rho.convention == MassConvention::probability);

    auto doubled = fixtures::equal_sites(2);
    doubled.values *= 2;
    io::apply_convention(doubled, 2, io::ConventionFlag::automatic);
    CHECK(doubled.convention == MassConvention::particle_number);

    auto odd = fixtures::equal_sites(2);
    odd.values *= 1.5;
    CHECK_THROWS_WITH_AS(io::apply_convention(odd, 2, io::ConventionFlag::automatic),
                         doctest::Contains("neither 1 nor N"), ValidationError);
    auto forced = fixtures::equal_sites(2);
    CHECK_THROWS_AS(io::apply_convention(forced, 2, io::ConventionFlag::particle_number), ValidationError);
    CHECK_THROWS_AS(io::parse_convention("grams"), ValidationError);
}

TEST_CASE("plan JSON round trip")
{
    const auto plan = fixtures::desk_instances()[3].plan;
    const auto back = io::plan_from_json(nlohmann::json::parse(io::plan_to_json(plan).dump()));
    REQUIRE(back.atoms.size() == plan.atoms.size());
    for (std::size_t a = 0; a < plan.atoms.size(); ++a) {
        CHECK(back.atoms[a].w == plan.atoms[a].w);
        CHECK(back.atoms[a].x == plan.atoms[a].x);
    }
    CHECK_THROWS_WITH_AS(io::plan_from_json(nlohmann::json::parse(R"({"n": 2})")),
                         doctest::Contains("malformed plan JSON"), ValidationError);
    CHECK_THROWS_AS(io::plan_from_json(nlohmann::json::parse(R"({"n": 2, "dim": 1, "atoms": [{"x": [[0]], "w": 1}]})")),
                    ValidationError);
}

TEST_CASE("mmot command")
{
    const auto r = run_cli({"mmot", "--density", data("two_site.csv"), "--n", "2"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["schema_version"] == 1);
    CHECK(j["command"] == "mmot");
    CHECK(j["results"]["value"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(j["results"]["dual_check"]["feasible"] == true);

    const auto again = run_cli({"mmot", "--density", data("two_site.csv"), "--n", "2"});
    CHECK(again.out == r.out);
}

TEST_CASE("regularize and quantum-check commands")
{
    const auto plan = data("two_bump64_plan.json"), density = data("two_bump64.csv");
    const auto reg = run_cli({"regularize", "--plan", plan, "--density", density, "--eps", "0.046875"});
    REQUIRE(reg.code == 0);
    const auto j = nlohmann::json::parse(reg.out);
    CHECK(j["results"]["marginal"]["passed"] == true);
    CHECK(j["results"]["kinetic"]["passed"] == true);
    CHECK(j["results"]["potential"]["passed"] == true);

    const auto q = run_cli({"quantum-check", "--plan", plan, "--density", density, "--eps", "0.046875", "--samples", "200"});
    REQUIRE(q.code == 0);
    const auto k = nlohmann::json::parse(q.out);
    CHECK(k["results"]["trace"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("exit codes")
{
    CHECK(run_cli({"mmot", "--density", data("missing.csv"), "--n", "2"}).code == 1);
    CHECK(run_cli({"mmot", "--density", data("two_site.csv"), "--n", "2", "--solver", "simplex"}).code == 1);
    CHECK(run_cli({"mmot", "--density", data("two_site.csv"), "--n", "3"}).code == 1);
    const auto numerical = run_cli({"mmot", "--density", data("gaussian16.csv"), "--n", "2", "--solver", "sinkhorn",
                                    "--mode", "kernel", "--beta", "60"});
    CHECK(numerical.code == 2);
    CHECK(numerical.err.find("log-domain") != std::string::npos);
    CHECK(run_cli({"nonsense"}).code == 1);
    const auto flag = run_cli({"mmot", "--density", data("two_site.csv"), "--n", "2", "--colour"});
    CHECK(flag.code == 1);
    CHECK(flag.err.find("Usage") != std::string::npos);

    const auto bad = std::filesystem::temp_directory_path() / "llot_bad_density.csv";
    io::write_file(bad.string(), "x,value\n0,0.5\n1,half\n");
    const auto malformed = run_cli({"mmot", "--density", bad.string(), "--n", "2"});
    CHECK(malformed.code == 1);
    CHECK(malformed.err.find(":3: invalid number 'half'") != std::string::npos);
    std::filesystem::remove(bad);
}

TEST_CASE("sweep writes CSV and report")
{
    const auto dir = std::filesystem::temp_directory_path() / "llot_sweep_test";
    std::filesystem::create_directories(dir);
    const auto csv = (dir / "sweep.csv").string();
    const auto r = run_cli({"sweep", "--density", data("two_bump64.csv"), "--n", "2", "--etas", "1e-3:1e-1:5", "--out", csv});
    REQUIRE(r.code == 0);
    const auto text = io::read_file(csv);
    CHECK(text.rfind("eta,eps_opt,e_ot,trial_total,gap,assembled_C\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["fit"]["gaps_nonnegative"] == true);
    CHECK(run_cli({"sweep", "--density", data("two_bump64.csv"), "--n", "2", "--etas", "1e-3:1e-1:3"}).code == 1);
    std::filesystem::remove_all(dir);
}
