#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("srbound_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

CliResult run_cli(const std::string& args) {
  const fs::path log = work_dir() / "last_output.txt";
  const std::string cmd = std::string(SRB_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  res.output = ss.str();
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string strip_timing(std::string text) {
  nlohmann::json j = nlohmann::json::parse(text);
  j.erase("timing");
  return j.dump();
}

}  // namespace

TEST_CASE("qfim command prints the closed-form matrix") {
  const CliResult res = run_cli("qfim --psf gaussian --s 1 --q 0.5");
  REQUIRE(res.exit_code == 0);
  std::istringstream is(res.output);
  std::string header;
  std::getline(is, header);
  CHECK(header.substr(0, 6) == "# QFIM");
  double m[3][3];
  for (auto& row : m)
    for (double& v : row) REQUIRE((is >> v));
  CHECK(m[0][0] == doctest::Approx(0.805299804232).epsilon(1e-10));
  CHECK(m[1][1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(m[2][2] == doctest::Approx(0.884796867714).epsilon(1e-10));
  CHECK(m[0][2] == doctest::Approx(0.778800783071).epsilon(1e-10));
  CHECK(m[0][1] == 0);
  CHECK(m[1][2] == 0);
}

TEST_CASE("qfim oracle cross-check reports agreement") {
  const CliResult res = run_cli("qfim --s 1 --q 0.5 --check-oracle");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.find("# oracle agreement: ok") != std::string::npos);
}

TEST_CASE("qfim flags the coalescence point") {
  const CliResult res = run_cli("qfim --s 0 --q 0.5");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.find("# degenerate: q") != std::string::npos);

  // The spectral oracle needs two distinct eigenvalues; exit 3 at s = 0.
  const CliResult oracle = run_cli("qfim --s 0 --q 0.5 --check-oracle");
  CHECK(oracle.exit_code == 3);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("qfim --s 1").exit_code == 2);
  CHECK(run_cli("sweep --s-log 0.1:1:6").exit_code == 2);
  CHECK(run_cli("sweep --q 0.5 --s-log 0.1:1:6 --s-lin 0.1:1:6").exit_code == 2);
  CHECK(run_cli("sweep --q 0.5 --s-log bogus").exit_code == 2);
  CHECK(run_cli("nonsense").exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("sweep emits the documented CSV layout") {
  const fs::path csv = work_dir() / "sweep.csv";
  const CliResult res =
      run_cli("sweep --q 0.5,0.3 --s-lin 0.5:1.5:3 --measure direct --format csv --out " +
              csv.string());
  REQUIRE(res.exit_code == 0);
  const auto rows = parse_csv(slurp(csv));
  REQUIRE(rows.size() == 7);
  REQUIRE(rows[0].size() == 9);
  CHECK(rows[0][0] == "s");
  CHECK(rows[0][3] == "Hs0_opt");
  CHECK(rows[0][4] == "Hs_opt");
  CHECK(rows[0][5] == "Hq_opt");
  CHECK(rows[0][6] == "Hs0_direct");
  CHECK(rows[0][8] == "Hq_direct");
  // q-major ordering and the balanced-source constant.
  CHECK(std::stod(rows[1][1]) == 0.5);
  CHECK(std::stod(rows[1][0]) == 0.5);
  CHECK(std::stod(rows[2][0]) == 1.0);
  CHECK(std::stod(rows[4][1]) == 0.3);
  for (int r : {1, 2, 3}) CHECK(std::stod(rows[static_cast<std::size_t>(r)][4]) == 0.25);
  // Classical never exceeds quantum, column by column.
  for (std::size_t r = 1; r < rows.size(); ++r)
    for (int c : {3, 4, 5})
      CHECK(std::stod(rows[r][static_cast<std::size_t>(c + 3)]) <=
            std::stod(rows[r][static_cast<std::size_t>(c)]) * (1 + 1e-9));
}

TEST_CASE("csv and json sweeps carry identical values") {
  const fs::path csv = work_dir() / "pair.csv";
  const fs::path json = work_dir() / "pair.json";
  REQUIRE(run_cli("sweep --q 0.4 --s-lin 0.6:1.2:2 --measure direct --format csv --out " +
                  csv.string())
              .exit_code == 0);
  REQUIRE(run_cli("sweep --q 0.4 --s-lin 0.6:1.2:2 --measure direct --format json --out " +
                  json.string())
              .exit_code == 0);
  const auto rows = parse_csv(slurp(csv));
  const nlohmann::json j = nlohmann::json::parse(slurp(json));
  const auto& results = j.at("results");
  REQUIRE(rows.size() == results.size() + 1);
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto& jr = results[r];
    CHECK(std::stod(rows[r + 1][0]) == jr.at("s").get<double>());
    CHECK(std::stod(rows[r + 1][4]) == jr.at("Hs_opt").get<double>());
    CHECK(std::stod(rows[r + 1][7]) == jr.at("Hs_direct").get<double>());
  }
  CHECK(j.at("run_config").at("command") == "sweep");
  CHECK(j.contains("timing"));
}

TEST_CASE("slopes from a sweep file equal slopes computed in-process") {
  const fs::path csv = work_dir() / "scaling.csv";
  const std::string grid = "--q 0.5,0.3 --s-log 0.001:0.01:13 --measure direct";
  REQUIRE(run_cli("sweep " + grid + " --format csv --out " + csv.string()).exit_code == 0);

  const fs::path direct_out = work_dir() / "slopes_direct.csv";
  const fs::path file_out = work_dir() / "slopes_file.csv";
  REQUIRE(run_cli("slopes " + grid + " --out " + direct_out.string()).exit_code == 0);
  REQUIRE(run_cli("slopes --in " + csv.string() + " --out " + file_out.string()).exit_code == 0);
  const std::string a = slurp(direct_out);
  CHECK(a == slurp(file_out));
  CHECK(!a.empty());

  // Spot-check the quantum-advantage pattern from the emitted table.
  const auto rows = parse_csv(a);
  REQUIRE(rows.size() > 1);
  REQUIRE(rows[0] == std::vector<std::string>({"q", "column", "slope", "std_error"}));
  auto slope_of = [&](const std::string& q, const std::string& col) {
    for (std::size_t r = 1; r < rows.size(); ++r)
      if (rows[r][0] == q && rows[r][1] == col) return std::stod(rows[r][2]);
    FAIL("missing slope row " << q << " " << col);
    return 0.0;
  };
  CHECK(slope_of("0.5", "Hs_opt") == doctest::Approx(0.0).epsilon(0.05));
  CHECK(slope_of("0.3", "Hs_opt") == doctest::Approx(2.0).epsilon(0.025));
  CHECK(slope_of("0.5", "Hs_direct") == doctest::Approx(2.0).epsilon(0.025));
  CHECK(slope_of("0.3", "Hs_direct") == doctest::Approx(4.0).epsilon(0.0125));
  CHECK(slope_of("0.5", "Hq_opt") == doctest::Approx(4.0).epsilon(0.0125));
  CHECK(slope_of("0.5", "Hq_direct") == doctest::Approx(6.0).epsilon(0.01));
}

TEST_CASE("simulate reports a reproducible study") {
  const fs::path a = work_dir() / "sim_a.json";
  const fs::path b = work_dir() / "sim_b.json";
  const std::string line = "simulate --n 10000 --trials 100 --s 1 --q 0.5 --measure direct "
                           "--seed 3 --out ";
  REQUIRE(run_cli(line + a.string()).exit_code == 0);
  REQUIRE(run_cli(line + b.string()).exit_code == 0);
  CHECK(strip_timing(slurp(a)) == strip_timing(slurp(b)));

  const nlohmann::json j = nlohmann::json::parse(slurp(a));
  CHECK(j.at("run_config").at("seed") == 3);
  CHECK(j.at("run_config").at("photons") == 10000);
  const auto ratio = j.at("results").at("ratio");
  REQUIRE(ratio.size() == 3);
  // Loose envelope at this desk scale; the tight interval is checked at the
  // acceptance scale of 200 x 1e5.
  for (const auto& r : ratio) {
    CHECK(r.get<double>() > 0.6);
    CHECK(r.get<double>() < 1.6);
  }
  CHECK(j.at("crlb_reference").at("precision").contains("s"));
}

TEST_CASE("optimize meets the benchmark through the command line") {
  const fs::path a = work_dir() / "opt_a.json";
  const fs::path b = work_dir() / "opt_b.json";
  const fs::path modes = work_dir() / "opt_modes.txt";
  const std::string line =
      "optimize --objective Hs --modes 4 --s 0.5 --q 0.5 --seed 1 --out ";
  REQUIRE(run_cli(line + a.string() + " --save-modes " + modes.string()).exit_code == 0);
  REQUIRE(run_cli(line + b.string()).exit_code == 0);
  CHECK(strip_timing(slurp(a)) == strip_timing(slurp(b)));

  const nlohmann::json j = nlohmann::json::parse(slurp(a));
  CHECK(j.at("results").at("ratio_to_quantum").get<double>() >= 0.99);
  CHECK(j.at("results").at("converged").get<bool>());
  CHECK(j.at("results").at("achieved").get<double>() <= 0.25 * (1 + 1e-9));
  const std::string saved = slurp(modes);
  CHECK(saved.substr(0, 3) == "# x");
}

TEST_CASE("config files mirror the command line") {
  const fs::path cfg = work_dir() / "sweep.cfg";
  {
    std::ofstream os(cfg);
    os << "# comment lines are allowed\n"
          "[sweep]\n"
          "q = 0.5,0.3\n"
          "s-lin = 0.5:1.5:3\n"
          "measure = direct\n"
          "format = csv\n";
  }
  const fs::path from_cfg = work_dir() / "from_cfg.csv";
  const fs::path from_flags = work_dir() / "from_flags.csv";
  REQUIRE(run_cli("--config " + cfg.string() + " sweep --out " + from_cfg.string()).exit_code ==
          0);
  REQUIRE(run_cli("sweep --q 0.5,0.3 --s-lin 0.5:1.5:3 --measure direct --format csv --out " +
                  from_flags.string())
              .exit_code == 0);
  CHECK(slurp(from_cfg) == slurp(from_flags));
}
