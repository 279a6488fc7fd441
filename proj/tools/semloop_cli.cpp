#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "semloop/error.hpp"
#include "semloop/harness.hpp"
#include "semloop/server.hpp"
#include "semloop/session.hpp"
#include "semloop/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

semloop::ExperimentConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto cfg = path.empty() ? semloop::ExperimentConfig{} : semloop::ExperimentConfig::load(path);
  semloop::apply_seed_override(cfg);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw semloop::Error(semloop::ErrorCode::Io, "cannot write " + path.string());
  out << content;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic explanatory interactive learning experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run every configured strategy and write results");
  run->add_option("--config", config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Override the experiment seed");

  auto* fidelity = app.add_subcommand("fidelity", "Compare LIME and topicLIME fidelity");
  fidelity->add_option("--config", config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  fidelity->add_option("--out", out_dir, "Write fidelity.json here");
  fidelity->add_option("--seed", seed, "Override the experiment seed");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize a results directory");
  report->add_option("dir", report_dir, "Directory written by run")->required()->check(CLI::ExistingDirectory);

  semloop::ServeOptions serve_opts;
  std::string ui_dir;
  auto* serve = app.add_subcommand("serve", "Serve the /v1 session API");
  serve->add_option("--host", serve_opts.host, "Bind address");
  serve->add_option("--port", serve_opts.port, "Port");
  serve->add_option("--ui", ui_dir, "Static UI directory")->check(CLI::ExistingDirectory);

  std::string synth_out;
  semloop::SyntheticNewsConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "Write a synthetic AG News style CSV");
  synth->add_option("--out", synth_out, "CSV path")->required();
  synth->add_option("--documents", synth_cfg.documents, "Number of documents");
  synth->add_option("--seed", synth_cfg.seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto cfg = load_config(config_path, seed);
      const auto log = semloop::run_experiment(cfg, fs::path(out_dir));
      std::cout << log.summary.dump(2) << "\n";
    } else if (fidelity->parsed()) {
      const auto cfg = load_config(config_path, seed);
      const auto prepared = semloop::prepare_experiment(cfg);
      const auto table = semloop::run_fidelity(*prepared);
      std::cout << table.to_text();
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "fidelity.json", table.to_json().dump(2) + "\n");
      }
    } else if (report->parsed()) {
      const auto files = semloop::build_report(report_dir);
      write_file(fs::path(report_dir) / "curves.csv", files.curves_csv);
      std::cout << files.summary.dump(2) << "\n";
    } else if (serve->parsed()) {
      if (!ui_dir.empty()) serve_opts.ui_dir = fs::path(ui_dir);
      semloop::SessionManager sessions;
      if (!semloop::serve(sessions, serve_opts)) {
        std::cerr << "error: cannot listen on " << serve_opts.host << ":" << serve_opts.port << "\n";
        return 1;
      }
    } else if (synth->parsed()) {
      std::ofstream out(synth_out);
      if (!out) throw semloop::Error(semloop::ErrorCode::Io, "cannot write " + synth_out);
      semloop::write_ag_news_csv(out, semloop::synthetic_news(synth_cfg));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
