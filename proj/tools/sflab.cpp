#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "commands.hpp"
#include "sflab/error.hpp"

namespace {

struct Options {
  std::string config;
  std::string out = "sflab_out";
  std::optional<int> threads;
  std::optional<int> seed;
  std::optional<double> lambda_max;
  std::optional<double> cutoff;
  std::vector<double> T;
  std::vector<double> Q;
  std::optional<double> t;
  std::optional<double> s_max;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON run configuration")->required();
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "random seed");
}

// Flag overrides are written into the config so the hash records them.
void apply_overrides(const std::string& name, const Options& o, sflab::cli::Config& c) {
  if (o.threads) c["threads"] = *o.threads;
  if (o.seed) c["seed"] = *o.seed;
  const bool any = o.lambda_max || o.cutoff || !o.T.empty() || !o.Q.empty() || o.t || o.s_max;
  if (!any) return;
  auto& sec = c[name];
  if (name == "spectral" && o.lambda_max) {
    if (!sec.contains("lambda") || !sec["lambda"].is_object()) sec["lambda"] = sflab::cli::Config::object();
    sec["lambda"]["max"] = *o.lambda_max;
  }
  if (o.cutoff) sec["cutoff"] = *o.cutoff;
  if (!o.T.empty()) sec["T"] = name == "besicovitch" ? sflab::cli::Config(o.T.back()) : sflab::cli::Config(o.T);
  if (!o.Q.empty()) sec["Q"] = o.Q;
  if (name == "zeta") {
    if (o.t) sec["t"] = *o.t;
    if (o.s_max) sec["s"] = {{"min", -*o.s_max}, {"max", *o.s_max}, {"step", 1.0}};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral function laboratory"};
  app.require_subcommand(1);
  Options o;
  auto* spectral = app.add_subcommand("spectral", "N, N~ and the Euclidean term on a lambda grid");
  auto* apx = app.add_subcommand("apx", "B^2 residuals of geodesic expansions");
  auto* besicovitch = app.add_subcommand("besicovitch", "Besicovitch seminorms of N~ or its residual");
  auto* verify = app.add_subcommand("verify", "run harness checks and write JSON reports");
  auto* zeta = app.add_subcommand("zeta", "zeta function scans along a vertical line");
  for (auto* sub : {spectral, apx, besicovitch, verify, zeta}) add_common(sub, o);
  spectral->add_option("--lambda-max", o.lambda_max, "upper end of the lambda grid");
  for (auto* sub : {spectral, apx, besicovitch, zeta}) sub->add_option("--cutoff", o.cutoff, "series cutoff");
  apx->add_option("--T", o.T, "horizons");
  besicovitch->add_option("--T", o.T, "horizon");
  apx->add_option("--Q", o.Q, "expansion lengths");
  zeta->add_option("--t", o.t, "real part");
  zeta->add_option("--s-max", o.s_max, "scan |s| <= s_max in unit steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return sflab::cli::config_error;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  sflab::cli::Config config;
  try {
    config = sflab::cli::load_config(o.config);
    apply_overrides(name, o, config);
  } catch (const sflab::Error& e) {
    std::cerr << e.what() << "\n";
    return sflab::cli::config_error;
  }
  return sflab::cli::run_command(name, config, o.out, std::cerr);
}
