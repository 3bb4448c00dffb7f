#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "pnp/app.hpp"
#include "pnp/errors.hpp"

using namespace pnp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pnp_app_test_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig small(const fs::path& dir) {
  RunConfig c;
  c.N = 20;
  c.T = 0.5;
  c.dt_over_h = 1.0;  // 10 steps
  c.emit_fields_every = 3;
  c.output_dir = dir.string();
  return c;
}

}  // namespace

TEST_SUITE("app") {
  TEST_CASE("number formatting keeps every bit") {
    CHECK(fmt17(0.1) == "0.10000000000000001");
    CHECK(std::stod(fmt17(1.0 / 3.0)) == 1.0 / 3.0);
  }

  TEST_CASE("atomic write replaces the file and leaves no temporary behind") {
    const fs::path dir = scratch("atomic");
    const std::string path = (dir / "sub" / "a.txt").string();
    write_atomic(path, "one");
    write_atomic(path, "two");
    CHECK(slurp(path) == "two");
    CHECK_FALSE(fs::exists(path + ".tmp"));
  }

  TEST_CASE("a run writes its artifacts") {
    const fs::path dir = scratch("run");
    const RunConfig c = small(dir);
    const RunSummary s = run_simulation(c, 0.25);
    CHECK_FALSE(s.blew_up);
    CHECK(s.steps == 10);
    for (int step : {0, 3, 6, 9, 10}) CHECK(fs::exists(dir / ("fields_" + std::to_string(step) + ".csv")));
    CHECK_FALSE(fs::exists(dir / "fields_1.csv"));

    const std::string series = slurp(dir / "series.csv");
    CHECK(series.rfind("step,t,mass_plus,mass_minus,qn_deficit,min_c_plus,min_c_minus,max_c_plus,max_c_minus,"
                       "peclet_margin\n",
                       0) == 0);
    CHECK(lines(series) == 11);  // header and one row per step

    const std::string fields = slurp(dir / "fields_10.csv");
    CHECK(fields.rfind("x,y,class,c_plus,c_minus,phi\n", 0) == 0);
    CHECK(fields.find(",ghost,") != std::string::npos);
    CHECK(fields.find(",internal,") != std::string::npos);

    const std::string profile = slurp(dir / "profile.csv");
    CHECK(lines(profile) == 22);  // x = 0.25 misses the obstacle: 21 nodes plus header
    CHECK(profile.find("\n0.25,0,") != std::string::npos);

    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report["verdict"] == "stable");
    CHECK(report["steps_taken"] == 10);
    CHECK(report["config"]["N"] == 20);
    CHECK(report["linear_solver"].get<std::string>().find("umfpack") != std::string::npos);
    CHECK(report["timings"]["run_seconds"].get<double>() > 0.0);
  }

  TEST_CASE("identical configurations give byte-identical series") {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    run_simulation(small(a));
    run_simulation(small(b));
    CHECK(slurp(a / "series.csv") == slurp(b / "series.csv"));
    CHECK(slurp(a / "fields_10.csv") == slurp(b / "fields_10.csv"));
  }

  TEST_CASE("field output can be switched off") {
    const fs::path dir = scratch("nofields");
    RunConfig c = small(dir);
    c.emit_fields_every = 0;
    run_simulation(c);
    for (const auto& e : fs::directory_iterator(dir)) CHECK(e.path().filename().string().rfind("fields_", 0) != 0);
  }

  TEST_CASE("a profile outside the square is a configuration error") {
    const fs::path dir = scratch("badprofile");
    CHECK_THROWS_AS(run_simulation(small(dir), 1.5), ConfigError);
  }

  TEST_CASE("timing table layout") {
    TimingReport r;
    r.rows.push_back({1e-4, 0.5, 0.25, std::nullopt, std::nullopt});
    r.rows.push_back({1e-9, std::nullopt, 0.75, std::nullopt, std::nullopt});
    CHECK(timing_csv(r) == "epsilon,t_primitive,t_cq\n0.0001,0.5,0.25\n1.0000000000000001e-09,,0.75\n");
  }
}
