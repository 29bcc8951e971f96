// Command-line front end. Exit codes: 0 success/certified, 1 not certified or
// no orbit found, 2 configuration or domain error (one-line diagnostic).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "lvchaos/lvchaos.hpp"

namespace {

using namespace lvchaos;

struct Globals {
  std::string config;
  std::string out;
  std::optional<double> tol;
  int threads = 1;
};

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(g.out, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + g.out + "'");
  f << text;
}

RunConfig load(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  RunConfig c = load_config(g.config);
  if (g.tol) {
    c.tol.rel_tol = *g.tol;
    c.validate();
  }
  return c;
}

int cmd_certify(const Globals& g) {
  const RunConfig c = load(g);
  const Certificate cert = certify(c.certify_request(g.threads));
  emit(g, to_text(certificate_json(cert, c)));
  return cert.certified ? 0 : 1;
}

int cmd_period_map(const Globals& g, const std::string& field, double from, double to, int n) {
  if (n < 1) throw ConfigError("--n must be at least 1");
  if (!(to >= from)) throw ConfigError("--to must not be below --from");
  VolterraParams p = VolterraParams::make(1, 1, 1, 1);
  Tolerances tol;
  if (!g.config.empty()) {
    const RunConfig c = load(g);
    p = field == "harvested" ? harvested(c.params, c.mu) : c.params;
    tol = c.tol;
  } else if (field == "harvested") {
    throw ConfigError("--field harvested needs --config");
  }
  if (g.tol) tol.rel_tol = *g.tol;
  std::vector<double> levels;
  for (int i = 0; i < n; ++i) levels.push_back(n == 1 ? from : from + (to - from) * i / (n - 1));
  const PeriodTable t = monotonicity_scan(p, levels, tol);
  std::ostringstream os;
  write_period_csv(os, t);
  emit(g, os.str());
  return 0;
}

int cmd_find_periodic(const Globals& g, const std::string& word_text, const std::string& csv) {
  const RunConfig c = load(g);
  const SymbolWord word = parse_word(word_text, c.m1, c.m2);
  const SymbolicContext ctx = SymbolicContext::make(c.linked(), c.m1, c.m2, c.tol);
  FindOptions opt;
  opt.seed_grid = c.seed_grid;
  try {
    const PeriodicOrbit orb = find_periodic(ctx, word, opt);
    if (!csv.empty()) {
      std::ofstream f(csv, std::ios::binary);
      if (!f) throw ConfigError("cannot write '" + csv + "'");
      write_orbit_csv(f, ctx.cfg, orb, c.tol);
    }
    Json j;
    j["status"] = "found";
    j["orbit"] = orbit_json(orb, crossing_count(ctx.cfg, orb.anchor, 0, c.tol));
    emit(g, to_text(j));
    return 0;
  } catch (const NotFound& e) {
    Json j;
    j["status"] = "not_found";
    j["word"] = word_text;
    j["error"] = e.what();
    emit(g, to_text(j));
    return 1;
  } catch (const ItineraryDrift& e) {
    Json j;
    j["status"] = "not_found";
    j["word"] = word_text;
    j["error"] = e.what();
    emit(g, to_text(j));
    return 1;
  }
}

int cmd_plot_data(const Globals& g, std::optional<int> n) {
  const RunConfig c = load(g);
  const int samples = n.value_or(c.plot_samples);
  if (samples < 16) throw ConfigError("--n must be at least 16");
  emit(g, to_text(plot_json(c, samples)));
  return 0;
}

int cmd_orbit(const Globals& g, double x, double y, int cycles) {
  if (cycles < 1) throw ConfigError("--cycles must be at least 1");
  const RunConfig c = load(g);
  std::ostringstream os;
  write_switched_csv(os, c.schedule(), {x, y}, cycles, c.tol);
  emit(g, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chaos certification for the periodically harvested Volterra system"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--out", g.out, "Output file (default stdout)");
  app.add_option("--tol", g.tol, "Integrator relative tolerance override")->check(CLI::PositiveNumber);
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1, 256));

  auto* certify_cmd = app.add_subcommand("certify", "Certify chaotic dynamics; writes a certificate");

  std::string field = "base";
  double from = 2.0001, to = 3.5;
  int n = 50;
  auto* period_cmd = app.add_subcommand("period-map", "Tabulate the period map as level,period CSV");
  period_cmd->add_option("--field", field, "base or harvested")->check(CLI::IsMember({"base", "harvested"}));
  period_cmd->add_option("--from", from, "First level");
  period_cmd->add_option("--to", to, "Last level");
  period_cmd->add_option("--n", n, "Number of levels");

  std::string word, csv;
  auto* find_cmd = app.add_subcommand("find-periodic", "Realize a periodic symbol word as a periodic orbit");
  find_cmd->add_option("--word", word, "Word p0q0|p1q1|...")->required();
  find_cmd->add_option("--csv", csv, "Orbit CSV output (cycle,phase,t,x,y)");

  std::optional<int> plot_n;
  auto* plot_cmd = app.add_subcommand("plot-data", "Emit annuli, rectangles and line r as JSON");
  plot_cmd->add_option("--n", plot_n, "Points per level curve");

  double x0 = 0.0, y0 = 0.0;
  int cycles = 1;
  auto* orbit_cmd = app.add_subcommand("orbit", "Export a raw switched trajectory as CSV");
  orbit_cmd->add_option("--x", x0, "Initial prey density")->required();
  orbit_cmd->add_option("--y", y0, "Initial predator density")->required();
  orbit_cmd->add_option("--cycles", cycles, "Number of switching periods");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    if (*certify_cmd) return cmd_certify(g);
    if (*period_cmd) return cmd_period_map(g, field, from, to, n);
    if (*find_cmd) return cmd_find_periodic(g, word, csv);
    if (*plot_cmd) return cmd_plot_data(g, plot_n);
    if (*orbit_cmd) return cmd_orbit(g, x0, y0, cycles);
  } catch (const lvchaos::error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
