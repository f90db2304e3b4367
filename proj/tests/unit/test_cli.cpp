#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coxmesh/cli.hpp"
#include "coxmesh/error.hpp"

using namespace coxmesh;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workspace(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("coxmesh_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (const char* f : {"domain.geojson", "sim.toml", "fit.toml"})
    fs::copy_file(fs::path(COXMESH_FIXTURES) / f, dir / f);
  return dir;
}

std::string slurp(const fs::path& p) { return read_file(p); }

}  // namespace

TEST_CASE("cli: simulate, fit, predict, evaluate, kfunc") {
  auto dir = workspace("pipeline");
  auto sim = cli({"simulate", "--config", (dir / "sim.toml").string(), "--out", (dir / "data.csv").string(), "--truth",
                  (dir / "truth.json").string(), "--out-dir", (dir / "sim").string()});
  INFO(sim.err);
  REQUIRE(sim.code == 0);
  auto truth = json::parse(slurp(dir / "truth.json"));
  const int n = truth["n_points"];
  CHECK(n > 120);
  CHECK(n < 300);
  CHECK(read_sightings_csv(dir / "data.csv").size() == static_cast<std::size_t>(n));

  auto fit = cli({"fit", "--config", (dir / "fit.toml").string(), "--out-dir", (dir / "a").string()});
  INFO(fit.err);
  REQUIRE(fit.code == 0);
  auto rep = json::parse(slurp(dir / "a" / "fit.json"));
  CHECK(rep["converged"] == true);
  CHECK(rep["fixed_effects"].size() > 0);
  CHECK(fs::exists(dir / "a" / "run.json"));
  CHECK(fs::exists(dir / "a" / "mesh.mesh.json"));

  auto again = cli({"fit", "--config", (dir / "fit.toml").string(), "--out-dir", (dir / "b").string()});
  REQUIRE(again.code == 0);
  auto rep_b = json::parse(slurp(dir / "b" / "fit.json"));
  // identical apart from where the outputs went
  rep_b["config"]["outputs"]["dir"] = rep["config"]["outputs"]["dir"];
  rep_b["config"]["paths"]["mesh"] = rep["config"]["paths"]["mesh"];
  CHECK(rep_b.dump() == rep.dump());
  CHECK(slurp(dir / "a" / "fit.bin") == slurp(dir / "b" / "fit.bin"));

  auto pred = cli({"predict", "--fit", (dir / "a" / "fit.json").string(), "--species", "bowhead", "--month", "8",
                   "--year", "2015", "--out", (dir / "r.csv").string()});
  INFO(pred.err);
  REQUIRE(pred.code == 0);
  CHECK(slurp(dir / "r.csv").rfind("x,y,mean,sd\n", 0) == 0);
  CHECK(fs::exists(dir / "r.grid.json"));
  CHECK(fs::exists(dir / "r.svg"));
  CHECK(cli({"predict", "--fit", (dir / "a" / "fit.json").string(), "--month", "7", "--year", "2015"}).code == 1);

  auto ev = cli({"evaluate", "--fit", (dir / "a" / "fit.json").string(), "--out", (dir / "scores.json").string()});
  INFO(ev.err);
  REQUIRE(ev.code == 0);
  auto sc = json::parse(slurp(dir / "scores.json"));
  const double waic = sc["combined"]["waic"], lppd = sc["combined"]["lppd"], pw = sc["combined"]["p_waic"];
  CHECK(waic == -2.0 * (lppd - pw));

  auto kf = cli({"kfunc", "--fit", (dir / "a" / "fit.json").string(), "--month", "8", "--year", "2015", "--out",
                 (dir / "k.csv").string()});
  INFO(kf.err);
  REQUIRE(kf.code == 0);
  CHECK(slurp(dir / "k.csv").rfind("r,khat,norm,lo,hi\n", 0) == 0);
  auto kf2 = cli({"kfunc", "--fit", (dir / "a" / "fit.json").string(), "--month", "8", "--year", "2015", "--out",
                  (dir / "k2.csv").string()});
  CHECK(slurp(dir / "k.csv") == slurp(dir / "k2.csv"));
}

TEST_CASE("cli: exit codes") {
  auto dir = workspace("errors");
  auto r = cli({"fit", "--config", (dir / "fit.toml").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find((dir / "data.csv").string()) != std::string::npos);

  CHECK(cli({"fit", "--config", (dir / "absent.toml").string()}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"fit"}).code == 1);

  {
    std::ofstream bad(dir / "bad.toml");
    bad << "[model]\nmarkz = true\n";
  }
  auto b = cli({"fit", "--config", (dir / "bad.toml").string()});
  CHECK(b.code == 1);
  CHECK(b.err.find("model.markz") != std::string::npos);

  {
    std::ofstream data(dir / "data.csv");
    data << "lon,lat,year,month,species,behavior,group_size\n-160,71,2015,8,beluga,swim,1\n-160,71,2015,8,narwhal,swim,1\n";
  }
  auto d = cli({"fit", "--config", (dir / "fit.toml").string()});
  CHECK(d.code == 2);
  CHECK(d.err.find("line 3") != std::string::npos);

  auto m = cli({"mesh", "--domain", (dir / "domain.geojson").string(), "--inner-res", "5", "--out",
                (dir / "m").string()});
  CHECK(m.code == 0);
  CHECK(read_mesh(dir / "m.mesh.json").n_vertices() > 10);
  CHECK(cli({"mesh", "--domain", (dir / "domain.geojson").string(), "--inner-res", "-1"}).code != 0);
}
