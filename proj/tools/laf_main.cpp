#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <string>

#include "laf/laf.hpp"

namespace {

int fail(const std::string& code, const std::string& message) {
  nlohmann::json err = {{"error", {{"code", code}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
  return 1;
}

void add_codec_flags(CLI::App* cmd, laf::ExperimentConfig& cfg, std::string& family,
                     std::string& alpha, std::string& snr_list) {
  cmd->add_option("--lattice", family, "lattice family: zn|dn|e8")->default_val("zn");
  cmd->add_option("--dim", cfg.dim, "lattice dimension")->default_val(8);
  cmd->add_option("--ratio", cfg.ratio, "nesting ratio (messages per dimension)")->default_val(2);
  cmd->add_option("--trials", cfg.trials, "Monte Carlo trials per SNR point")->default_val(10000);
  cmd->add_option("--seed", cfg.master_seed, "64-bit master seed")->default_val(1);
  cmd->add_option("--alpha", alpha,
                  "front-end scaling: 'paper' reckons gamma against propagated relay noise only, "
                  "'mmse' against the full effective noise")
      ->default_val("mmse");
  cmd->add_option("--snr-db", snr_list,
                  "comma-separated equivalent-SNR sweep in dB (default: the network's "
                  "natural operating point)");
  cmd->add_option("--workers", cfg.workers, "worker threads (output is identical for any count)")
      ->default_val(1);
  cmd->add_option("--out", cfg.out_path, "output CSV path (default: stdout)");
}

std::vector<double> parse_snr_list(const std::string& s) {
  std::vector<double> out;
  std::string token;
  std::istringstream in(s);
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    try {
      std::size_t pos = 0;
      const double v = std::stod(token, &pos);
      if (pos != token.size()) throw std::invalid_argument(token);
      out.push_back(v);
    } catch (const std::exception&) {
      throw laf::ConfigError("bad --snr-db entry '" + token + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lattice-coded amplify-and-forward relay networks: analysis and simulation"};
  app.require_subcommand(1);

  laf::ExperimentConfig cfg;
  std::string family = "zn", alpha = "mmse", snr_list;

  auto* analyze = app.add_subcommand("analyze", "power, noise, and rate accounting for a network");
  analyze->add_option("file", cfg.network_file, "network description (JSON)")->required();
  analyze->add_option("--ff-len", cfg.ff_len, "feedforward FIR length for non-layered networks")
      ->default_val(64);
  analyze->add_option("--out", cfg.out_path, "output CSV path (default: stdout)");

  auto* sim_layered =
      app.add_subcommand("simulate-layered", "end-to-end codec over a layered network");
  sim_layered->add_option("file", cfg.network_file, "network description (JSON)")->required();
  add_codec_flags(sim_layered, cfg, family, alpha, snr_list);

  auto* sim_isi = app.add_subcommand(
      "simulate-isi", "interleaved precoding chain over the channel-with-memory reduction");
  sim_isi->add_option("file", cfg.network_file, "network description (JSON)")->required();
  add_codec_flags(sim_isi, cfg, family, alpha, snr_list);
  sim_isi->add_option("--ff-len", cfg.ff_len, "feedforward FIR length")->default_val(64);
  sim_isi->add_option("--depth", cfg.depth, "interleaver rows (default: channel memory + 1)")
      ->default_val(0);

  auto* info = app.add_subcommand("lattice-info", "Monte Carlo figures of merit for a lattice");
  info->add_option("--lattice", family, "lattice family: zn|dn|e8")->default_val("zn");
  info->add_option("--dim", cfg.dim, "lattice dimension")->default_val(8);
  info->add_option("--samples", cfg.samples, "Monte Carlo samples")->default_val(200000);
  info->add_option("--seed", cfg.master_seed, "64-bit master seed")->default_val(1);
  info->add_option("--noise-var", cfg.noise_var,
                   "also probe Pr[noise escapes the Voronoi cell] at this variance");
  info->add_option("--out", cfg.out_path, "output CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("cli", e.what());
    return 2;
  }

  try {
    if (analyze->parsed()) cfg.command = laf::Command::analyze;
    if (sim_layered->parsed()) cfg.command = laf::Command::simulate_layered;
    if (sim_isi->parsed()) cfg.command = laf::Command::simulate_isi;
    if (info->parsed()) cfg.command = laf::Command::lattice_info;
    cfg.family = laf::family_from_string(family);
    cfg.alpha_mode = laf::alpha_from_string(alpha);
    cfg.snr_db = parse_snr_list(snr_list);

    const std::string csv = laf::run_experiment(cfg);
    if (cfg.out_path.empty()) {
      std::cout << csv;
    } else {
      std::ofstream out(cfg.out_path);
      if (!out) return fail("io", "cannot open output file '" + cfg.out_path + "'");
      out << csv;
    }
    return 0;
  } catch (const laf::ParseError& e) {
    return fail("parse", e.what());
  } catch (const laf::ConfigError& e) {
    return fail("config", e.what());
  } catch (const std::exception& e) {
    return fail("error", e.what());
  }
}
