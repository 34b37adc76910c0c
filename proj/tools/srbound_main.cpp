#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "srb/cfi.hpp"
#include "srb/crlb.hpp"
#include "srb/errors.hpp"
#include "srb/measure_opt.hpp"
#include "srb/measurement.hpp"
#include "srb/montecarlo.hpp"
#include "srb/psf.hpp"
#include "srb/qfi.hpp"
#include "srb/scene.hpp"

namespace {

using nlohmann::ordered_json;

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Serialized numbers carry 12 significant digits; rounding before JSON
// insertion keeps dumps byte-stable across runs.
double round12(double v) { return std::strtod(fmt12(v).c_str(), nullptr); }

struct PsfOptions {
  std::string kind = "gaussian";
  double width = 1.0;
  std::string file;
};

void add_psf_options(CLI::App* cmd, PsfOptions& o) {
  cmd->add_option("--psf", o.kind, "PSF kernel")
      ->check(CLI::IsMember({"gaussian", "sampled"}))
      ->capture_default_str();
  cmd->add_option("--width", o.width, "Gaussian kernel width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--psf-file", o.file, "two-column (x, amplitude) file for --psf sampled");
}

srb::PsfModel build_psf(const PsfOptions& o) {
  if (o.kind == "sampled") {
    if (o.file.empty()) throw srb::ConfigError("--psf sampled requires --psf-file");
    return srb::load_sampled_psf(std::filesystem::path(o.file)).psf;
  }
  return srb::PsfModel::gaussian(o.width);
}

ordered_json psf_config(const PsfOptions& o) {
  ordered_json j;
  j["psf"] = o.kind;
  if (o.kind == "gaussian")
    j["width"] = round12(o.width);
  else
    j["psf_file"] = o.file;
  return j;
}

// "min:max:points" -> point list, geometric or linear.
std::vector<double> parse_grid(const std::string& text, bool log_spaced) {
  double lo = 0, hi = 0;
  long n = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%ld%c", &lo, &hi, &n, &tail) != 3 || n < 1)
    throw srb::ConfigError("grid must be min:max:points, got '" + text + "'");
  if (log_spaced && (lo <= 0 || hi <= 0))
    throw srb::ConfigError("log grid bounds must be positive");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  if (n == 1) {
    out.push_back(lo);
    return out;
  }
  for (long i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    out.push_back(log_spaced ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t);
  }
  return out;
}

std::string measurement_label(const std::string& token) {
  std::string stem = std::filesystem::path(token).stem().string();
  if (stem.empty()) stem = "modes";
  for (char& c : stem)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  return stem;
}

srb::MeasurementSpec make_measurement_spec(const std::string& token) {
  srb::MeasurementSpec spec;
  if (token == "direct") {
    spec.name = "direct";
    spec.kind = srb::MeasurementSpec::Kind::Direct;
    return spec;
  }
  spec.name = measurement_label(token);
  spec.kind = srb::MeasurementSpec::Kind::Modes;
  spec.modes = srb::load_measurement(token);
  return spec;
}

class OutputStream {
 public:
  explicit OutputStream(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw srb::ConfigError("cannot open output file '" + path + "'");
    }
  }
  std::ostream& get() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

const char* component_name(int i) { return i == 0 ? "s0" : i == 1 ? "s" : "q"; }

ordered_json precision_json(const srb::PrecisionTriple& p) {
  ordered_json j;
  j["s0"] = round12(p.s0);
  j["s"] = round12(p.s);
  j["q"] = round12(p.q);
  j["degenerate"] = {p.degenerate[0], p.degenerate[1], p.degenerate[2]};
  return j;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------- qfim ----

struct QfimOptions {
  PsfOptions psf;
  double s = 0, q = 0.5, s0 = 0;
  bool check_oracle = false;
  std::string out;
};

void print_matrix(std::ostream& os, const srb::FisherMatrix& f, const char* title) {
  os << "# " << title << " (rows/cols ordered s0, s, q)\n";
  for (int i = 0; i < 3; ++i) {
    os << fmt12(f.entries(i, 0)) << ' ' << fmt12(f.entries(i, 1)) << ' '
       << fmt12(f.entries(i, 2)) << '\n';
  }
  bool any = f.degenerate[0] || f.degenerate[1] || f.degenerate[2];
  if (any) {
    os << "# degenerate:";
    for (int i = 0; i < 3; ++i)
      if (f.degenerate[i]) os << ' ' << component_name(i);
    os << '\n';
  }
}

void run_qfim(const QfimOptions& o) {
  const srb::PsfModel psf = build_psf(o.psf);
  const srb::SourceParams params{o.s0, o.s, o.q};
  params.validate();
  const srb::OverlapSet ov = srb::overlaps(psf, params.s);
  const srb::PsfMoments mom = srb::moments(psf);
  const srb::FisherMatrix closed = srb::qfim_closed_form(ov, mom, params);

  OutputStream out(o.out);
  std::ostream& os = out.get();
  print_matrix(os, closed, "QFIM, closed form");

  if (o.check_oracle) {
    const srb::SubspaceRep rep(ov, mom, params);
    const srb::SpectralDecomposition dec = srb::rho_eigensystem(ov, params.q);
    const srb::FisherMatrix rank2 = srb::qfim_rank2(rep, dec);
    const srb::FisherMatrix grid = srb::qfim_grid_oracle(psf, params);
    const double d_rank2 = (closed.entries - rank2.entries).cwiseAbs().maxCoeff();
    const double d_grid = (closed.entries - grid.entries).cwiseAbs().maxCoeff();
    const double worst = std::max(d_rank2, d_grid);
    char line[128];
    std::snprintf(line, sizeof line, "# spectral form max |delta| = %.3e\n", d_rank2);
    os << line;
    std::snprintf(line, sizeof line, "# grid oracle  max |delta| = %.3e\n", d_grid);
    os << line;
    os << "# oracle agreement: " << (worst < 1e-6 ? "ok" : "FAILED") << " (threshold 1e-6)\n";
  }
}

// --------------------------------------------------------------- sweep ----

struct SweepOptions {
  PsfOptions psf;
  std::vector<double> q_values;
  std::string s_log, s_lin;
  double s0 = 0;
  std::vector<std::string> measure{"direct"};
  std::string format = "csv";
  std::string out;
  std::uint64_t seed = 1;
};

srb::SweepSpec build_sweep_spec(const SweepOptions& o) {
  if (o.s_log.empty() == o.s_lin.empty())
    throw srb::ConfigError("exactly one of --s-log and --s-lin is required");
  srb::SweepSpec spec;
  spec.s_values = o.s_log.empty() ? parse_grid(o.s_lin, false) : parse_grid(o.s_log, true);
  spec.q_values = o.q_values;
  if (spec.q_values.empty()) throw srb::ConfigError("q list is empty");
  for (double q : spec.q_values)
    if (!(q >= 0 && q <= 1)) throw srb::ConfigError("q values must lie in [0, 1]");
  spec.s0 = o.s0;
  if (o.measure.empty()) throw srb::ConfigError("measurement list is empty");
  for (const std::string& token : o.measure) spec.measurements.push_back(make_measurement_spec(token));
  return spec;
}

std::vector<std::string> sweep_columns(const srb::SweepTable& table) {
  std::vector<std::string> cols{"s", "q", "s0", "Hs0_opt", "Hs_opt", "Hq_opt"};
  for (const std::string& name : table.measurement_names)
    for (const char* comp : {"Hs0_", "Hs_", "Hq_"}) cols.push_back(comp + name);
  return cols;
}

std::vector<double> sweep_row_values(const srb::SweepRow& row) {
  std::vector<double> v{row.s, row.q, row.s0, row.quantum.s0, row.quantum.s, row.quantum.q};
  for (const srb::PrecisionTriple& p : row.classical) {
    v.push_back(p.s0);
    v.push_back(p.s);
    v.push_back(p.q);
  }
  return v;
}

void write_sweep_csv(std::ostream& os, const srb::SweepTable& table) {
  const std::vector<std::string> cols = sweep_columns(table);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const srb::SweepRow& row : table.rows) {
    const std::vector<double> v = sweep_row_values(row);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << fmt12(v[i]);
    os << '\n';
  }
}

void write_sweep_json(std::ostream& os, const SweepOptions& o, const srb::SweepTable& table,
                      double seconds) {
  ordered_json j;
  j["run_config"] = psf_config(o.psf);
  j["run_config"]["command"] = "sweep";
  j["run_config"]["s0"] = round12(o.s0);
  j["run_config"]["measurements"] = table.measurement_names;
  j["run_config"]["seed"] = o.seed;
  const std::vector<std::string> cols = sweep_columns(table);
  ordered_json rows = ordered_json::array();
  for (const srb::SweepRow& row : table.rows) {
    const std::vector<double> v = sweep_row_values(row);
    ordered_json r;
    for (std::size_t i = 0; i < cols.size(); ++i) r[cols[i]] = round12(v[i]);
    rows.push_back(std::move(r));
  }
  j["results"] = std::move(rows);
  j["timing"] = {{"seconds", seconds}};
  os << j.dump(2) << '\n';
}

void run_sweep(const SweepOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  const srb::PsfModel psf = build_psf(o.psf);
  const srb::SweepTable table = srb::sweep(psf, build_sweep_spec(o));
  OutputStream out(o.out);
  if (o.format == "json")
    write_sweep_json(out.get(), o, table, elapsed_seconds(start));
  else
    write_sweep_csv(out.get(), table);
}

// -------------------------------------------------------------- slopes ----

struct SlopesOptions {
  SweepOptions sweep;
  std::string in;
  std::string out;
};

struct ParsedTable {
  std::vector<std::string> columns;           // value columns (index 3 onward)
  std::vector<std::vector<double>> rows;      // full numeric rows
};

ParsedTable parse_sweep_csv(std::istream& is) {
  ParsedTable t;
  std::string line;
  if (!std::getline(is, line)) throw srb::ConfigError("empty sweep table");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 4 || header[0] != "s" || header[1] != "q" || header[2] != "s0")
    throw srb::ConfigError("not a sweep table: header must start with s,q,s0");
  t.columns.assign(header.begin() + 3, header.end());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw srb::ConfigError("bad number '" + cell + "' on line " + std::to_string(lineno));
      }
    }
    if (row.size() != header.size())
      throw srb::ConfigError("row on line " + std::to_string(lineno) +
                             " has wrong column count");
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw srb::ConfigError("sweep table has no data rows");
  return t;
}

ParsedTable table_from_sweep(const srb::SweepTable& table) {
  ParsedTable t;
  const std::vector<std::string> cols = sweep_columns(table);
  t.columns.assign(cols.begin() + 3, cols.end());
  for (const srb::SweepRow& row : table.rows) t.rows.push_back(sweep_row_values(row));
  return t;
}

void run_slopes(const SlopesOptions& o) {
  ParsedTable t;
  if (!o.in.empty()) {
    std::ifstream is(o.in);
    if (!is) throw srb::ConfigError("cannot open '" + o.in + "'");
    t = parse_sweep_csv(is);
  } else {
    const srb::PsfModel psf = build_psf(o.sweep.psf);
    t = table_from_sweep(srb::sweep(psf, build_sweep_spec(o.sweep)));
  }

  // Group rows by q, in order of first appearance.
  std::vector<double> q_order;
  for (const auto& row : t.rows) {
    if (std::find(q_order.begin(), q_order.end(), row[1]) == q_order.end())
      q_order.push_back(row[1]);
  }

  OutputStream out(o.out);
  std::ostream& os = out.get();
  os << "q,column,slope,std_error\n";
  for (double q : q_order) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& row : t.rows)
        if (row[1] == q && row[0] > 0 && row[c + 3] > 0) pts.emplace_back(row[0], row[c + 3]);
      os << fmt12(q) << ',' << t.columns[c] << ',';
      if (pts.size() >= 5) {
        const srb::SlopeFit fit = srb::loglog_slope(pts);
        os << fmt12(fit.slope) << ',' << fmt12(fit.std_error) << '\n';
      } else {
        os << "nan,nan\n";
      }
    }
  }
}

// ------------------------------------------------------------ simulate ----

struct SimulateOptions {
  PsfOptions psf;
  double s = 0, q = 0.5, s0 = 0;
  std::size_t photons = 100000;
  std::size_t trials = 200;
  std::uint64_t seed = 1;
  std::string measure = "direct";
  std::vector<std::string> fix;
  std::string out;
};

void run_simulate(const SimulateOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  const srb::PsfModel psf = build_psf(o.psf);
  srb::StudyConfig cfg;
  cfg.truth = {o.s0, o.s, o.q};
  cfg.photons = o.photons;
  cfg.trials = o.trials;
  cfg.seed = o.seed;
  for (const std::string& name : o.fix) {
    if (name == "s0")
      cfg.fixed[0] = true;
    else if (name == "s")
      cfg.fixed[1] = true;
    else if (name == "q")
      cfg.fixed[2] = true;
    else
      throw srb::ConfigError("--fix accepts s0, s, q; got '" + name + "'");
  }
  std::string label = o.measure;
  if (o.measure == "direct") {
    cfg.kind = srb::MeasurementSpec::Kind::Direct;
  } else if (o.measure == "sld") {
    const srb::OverlapSet ov = srb::overlaps(psf, cfg.truth.s);
    const srb::PsfMoments mom = srb::moments(psf);
    const srb::SubspaceRep rep(ov, mom, cfg.truth);
    const srb::SpectralDecomposition dec = srb::rho_eigensystem(ov, cfg.truth.q);
    const srb::SldOperator sld = srb::sld_subspace(rep, dec, 1);
    cfg.kind = srb::MeasurementSpec::Kind::Modes;
    cfg.modes = srb::sld_povm(sld, rep);
  } else {
    cfg.kind = srb::MeasurementSpec::Kind::Modes;
    cfg.modes = srb::load_measurement(o.measure);
    label = measurement_label(o.measure);
  }

  const srb::EstimationRun run = srb::crlb_saturation_study(psf, cfg);

  ordered_json j;
  j["run_config"] = psf_config(o.psf);
  j["run_config"]["command"] = "simulate";
  j["run_config"]["s0"] = round12(o.s0);
  j["run_config"]["s"] = round12(o.s);
  j["run_config"]["q"] = round12(o.q);
  j["run_config"]["measure"] = label;
  if (!o.fix.empty()) j["run_config"]["fix"] = o.fix;
  j["run_config"]["photons"] = o.photons;
  j["run_config"]["trials"] = o.trials;
  j["run_config"]["seed"] = o.seed;

  ordered_json res;
  res["mean"] = {round12(run.mean(0)), round12(run.mean(1)), round12(run.mean(2))};
  ordered_json cov = ordered_json::array();
  for (int i = 0; i < 3; ++i)
    cov.push_back({round12(run.covariance(i, 0)), round12(run.covariance(i, 1)),
                   round12(run.covariance(i, 2))});
  res["covariance"] = std::move(cov);
  res["ratio"] = {round12(run.ratio(0)), round12(run.ratio(1)), round12(run.ratio(2))};
  res["boundary_hits"] = run.boundary_hits;
  j["results"] = std::move(res);

  ordered_json crlb;
  crlb["precision"] = precision_json(run.crlb);
  crlb["variance"] = {round12(run.crlb_variance(0)), round12(run.crlb_variance(1)),
                      round12(run.crlb_variance(2))};
  j["crlb_reference"] = std::move(crlb);
  j["timing"] = {{"seconds", elapsed_seconds(start)}};

  OutputStream out(o.out);
  out.get() << j.dump(2) << '\n';
}

// ------------------------------------------------------------ optimize ----

struct OptimizeOptions {
  PsfOptions psf;
  double s = 0, q = 0.5, s0 = 0;
  std::string objective = "Hs";
  int modes = 4;
  int restarts = 16;
  std::uint64_t seed = 1;
  std::string out;
  std::string save_modes;
  double save_lo = -8, save_hi = 8, save_dx = 0.02;
};

void run_optimize(const OptimizeOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  const srb::PsfModel psf = build_psf(o.psf);
  const srb::SourceParams params{o.s0, o.s, o.q};
  params.validate();
  srb::DesignSpec spec;
  spec.modes = o.modes;
  spec.restarts = o.restarts;
  spec.seed = o.seed;
  if (o.objective == "Hs")
    spec.objective = srb::DesignObjective::SeparationPrecision;
  else if (o.objective == "Hq")
    spec.objective = srb::DesignObjective::BrightnessPrecision;
  else
    spec.objective = srb::DesignObjective::MinRatioVsQuantum;

  const srb::OptimizedMeasurement opt = srb::optimize_measurement(psf, params, spec);

  ordered_json j;
  j["run_config"] = psf_config(o.psf);
  j["run_config"]["command"] = "optimize";
  j["run_config"]["s0"] = round12(o.s0);
  j["run_config"]["s"] = round12(o.s);
  j["run_config"]["q"] = round12(o.q);
  j["run_config"]["objective"] = o.objective;
  j["run_config"]["modes"] = o.modes;
  j["run_config"]["restarts"] = o.restarts;
  j["run_config"]["seed"] = o.seed;

  ordered_json res;
  res["achieved"] = round12(opt.achieved);
  res["precision"] = precision_json(opt.achieved_precisions);
  ordered_json ratio;
  for (int i = 0; i < 3; ++i) {
    const double qp = opt.quantum_precisions.component(i);
    ratio[component_name(i)] =
        qp > 0 ? round12(opt.achieved_precisions.component(i) / qp) : 0.0;
  }
  res["ratio_to_quantum"] = std::move(ratio);
  res["best_restart"] = opt.best_restart;
  res["converged"] = opt.converged;
  ordered_json trace = ordered_json::array();
  for (const srb::RestartTrace& tr : opt.trace)
    trace.push_back({{"restart", tr.restart},
                     {"objective", round12(tr.objective)},
                     {"best_so_far", round12(tr.best_so_far)},
                     {"converged", tr.converged}});
  res["trace"] = std::move(trace);
  j["results"] = std::move(res);
  j["crlb_reference"] = {{"quantum_precision", precision_json(opt.quantum_precisions)}};
  j["timing"] = {{"seconds", elapsed_seconds(start)}};

  if (!o.save_modes.empty())
    srb::save_measurement(o.save_modes, opt.measurement, psf, o.save_lo, o.save_hi, o.save_dx);

  OutputStream out(o.out);
  out.get() << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fisher information and Cramer-Rao precision bounds for two-point sources"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "config file mirroring the flags; a [section] names the subcommand");

  auto qfim = std::make_shared<QfimOptions>();
  {
    CLI::App* cmd = app.add_subcommand("qfim", "quantum Fisher information at one point");
    add_psf_options(cmd, qfim->psf);
    cmd->add_option("--s", qfim->s, "source separation")->required()->check(CLI::NonNegativeNumber);
    cmd->add_option("--q", qfim->q, "relative brightness")->required()->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--s0", qfim->s0, "centroid")->capture_default_str();
    cmd->add_flag("--check-oracle", qfim->check_oracle,
                  "cross-check closed form against spectral and grid oracles");
    cmd->add_option("--out", qfim->out, "output file (default stdout)");
    cmd->configurable()->fallthrough();
    cmd->callback([qfim] { run_qfim(*qfim); });
  }

  auto sweep = std::make_shared<SweepOptions>();
  {
    CLI::App* cmd = app.add_subcommand("sweep", "precision bounds over an (s, q) grid");
    add_psf_options(cmd, sweep->psf);
    cmd->add_option("--q", sweep->q_values, "comma-separated q list")
        ->required()
        ->delimiter(',');
    cmd->add_option("--s-log", sweep->s_log, "geometric s grid min:max:points");
    cmd->add_option("--s-lin", sweep->s_lin, "linear s grid min:max:points");
    cmd->add_option("--s0", sweep->s0, "centroid")->capture_default_str();
    cmd->add_option("--measure", sweep->measure,
                    "measurements: direct or a saved mode file (repeatable)")
        ->capture_default_str();
    cmd->add_option("--format", sweep->format, "output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    cmd->add_option("--out", sweep->out, "output file (default stdout)");
    cmd->add_option("--seed", sweep->seed, "recorded in the run config")->capture_default_str();
    cmd->configurable()->fallthrough();
    cmd->callback([sweep] { run_sweep(*sweep); });
  }

  auto slopes = std::make_shared<SlopesOptions>();
  {
    CLI::App* cmd = app.add_subcommand("slopes", "log-log power-law slopes of a sweep");
    add_psf_options(cmd, slopes->sweep.psf);
    cmd->add_option("--in", slopes->in, "sweep CSV to analyze (otherwise sweep here)");
    cmd->add_option("--q", slopes->sweep.q_values, "comma-separated q list")->delimiter(',');
    cmd->add_option("--s-log", slopes->sweep.s_log, "geometric s grid min:max:points");
    cmd->add_option("--s-lin", slopes->sweep.s_lin, "linear s grid min:max:points");
    cmd->add_option("--s0", slopes->sweep.s0, "centroid")->capture_default_str();
    cmd->add_option("--measure", slopes->sweep.measure,
                    "measurements: direct or a saved mode file (repeatable)")
        ->capture_default_str();
    cmd->add_option("--out", slopes->out, "output file (default stdout)");
    cmd->configurable()->fallthrough();
    cmd->callback([slopes] { run_slopes(*slopes); });
  }

  auto simulate = std::make_shared<SimulateOptions>();
  {
    CLI::App* cmd = app.add_subcommand("simulate", "Monte Carlo CRLB saturation study");
    add_psf_options(cmd, simulate->psf);
    cmd->add_option("--s", simulate->s, "source separation")
        ->required()
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--q", simulate->q, "relative brightness")
        ->required()
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--s0", simulate->s0, "centroid")->capture_default_str();
    cmd->add_option("--n", simulate->photons, "photons per trial")->capture_default_str();
    cmd->add_option("--trials", simulate->trials, "number of trials")->capture_default_str();
    cmd->add_option("--seed", simulate->seed, "study seed")->capture_default_str();
    cmd->add_option("--fix", simulate->fix, "components held at the truth during estimation")
        ->delimiter(',');
    cmd->add_option("--measure", simulate->measure,
                    "direct, sld, or a saved mode file")
        ->capture_default_str();
    cmd->add_option("--out", simulate->out, "output file (default stdout)");
    cmd->configurable()->fallthrough();
    cmd->callback([simulate] { run_simulate(*simulate); });
  }

  auto optimize = std::make_shared<OptimizeOptions>();
  {
    CLI::App* cmd = app.add_subcommand("optimize", "optimize a mode measurement");
    add_psf_options(cmd, optimize->psf);
    cmd->add_option("--s", optimize->s, "source separation")
        ->required()
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--q", optimize->q, "relative brightness")
        ->required()
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--s0", optimize->s0, "centroid")->capture_default_str();
    cmd->add_option("--objective", optimize->objective, "Hs, Hq, or ratio")
        ->check(CLI::IsMember({"Hs", "Hq", "ratio"}))
        ->capture_default_str();
    cmd->add_option("--modes", optimize->modes, "number of modes")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--restarts", optimize->restarts, "multistart count")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--seed", optimize->seed, "optimizer seed")->capture_default_str();
    cmd->add_option("--out", optimize->out, "output file (default stdout)");
    cmd->add_option("--save-modes", optimize->save_modes, "write the optimized modes here");
    cmd->add_option("--save-lo", optimize->save_lo, "mode table low edge (with --save-modes)")
        ->capture_default_str();
    cmd->add_option("--save-hi", optimize->save_hi, "mode table high edge")
        ->capture_default_str();
    cmd->add_option("--save-dx", optimize->save_dx, "mode table spacing")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->configurable()->fallthrough();
    cmd->callback([optimize] { run_optimize(*optimize); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const srb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const srb::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
