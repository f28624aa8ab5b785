// Command-line front end for the room-fingerprinting pipeline.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "revrir/app/config.hpp"
#include "revrir/app/pipeline.hpp"
#include "revrir/error.hpp"

namespace {

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int report_error(const char* code, int exit, const std::string& message) {
  std::fprintf(stderr, "error code=%s exit=%d: %s\n", code, exit, one_line(message).c_str());
  return exit;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace revrir;
  CLI::App app{"Room fingerprinting from reverberant speech: simulation, contrastive "
               "pre-training, fine-tuning and evaluation."};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_file;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out = ".";
  std::vector<std::string> assignments;
  app.add_option("--config", config_file, "JSON config file layered over the preset");
  app.add_option("--preset", preset, "Base preset")->check(CLI::IsMember({"paper", "desk"}));
  app.add_option("--seed", seed, "Run seed");
  app.add_option("--jobs", jobs, "Worker threads for generation stages")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("--set", assignments, "Override a config key: dotted.key=value (repeatable)");

  auto* c_catalog = app.add_subcommand("catalog", "Enumerate the room classes");
  auto* c_gen = app.add_subcommand("gen-rirs", "Simulate the RIR bank");
  auto* c_data = app.add_subcommand("build-data", "Assemble the train/val manifest");
  auto* c_pre = app.add_subcommand("pretrain", "Contrastive pre-training of both encoders");
  auto* c_fine = app.add_subcommand("finetune", "Train classification heads");
  auto* c_base = app.add_subcommand("baseline", "Hand-crafted-feature baseline classifier");
  auto* c_eval = app.add_subcommand("evaluate", "Score models on the validation split");
  auto* c_report = app.add_subcommand("report", "Render metrics into CSV and Markdown tables");
  auto* c_config = app.add_subcommand("config", "Print the effective configuration");

  std::string collapse = "rooms";
  std::optional<std::string> predictions;
  c_eval->add_option("--collapse", collapse, "Confusion CSV level")
      ->check(CLI::IsMember({"rooms", "types"}))
      ->capture_default_str();
  c_eval->add_option("--predictions", predictions,
                     "Score an item,label,prediction CSV instead of the trained models");
  std::vector<std::string> runs;
  c_report->add_option("--runs", runs, "Further run directories for a mean/std table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("USAGE", 2, e.what());
  }

  try {
    app::Overrides o;
    o.preset = preset;
    o.file = config_file;
    o.environment = app::process_environment();
    o.assignments = assignments;
    o.seed = seed;
    o.jobs = jobs;
    app::Context ctx{app::resolve_config(o), out};

    app::Json record;
    if (c_config->parsed()) {
      std::cout << app::to_json(ctx.config()).dump(2) << "\nconfig_hash " << ctx.hash() << "\n";
      return 0;
    } else if (c_catalog->parsed()) {
      record = app::cmd_catalog(ctx);
    } else if (c_gen->parsed()) {
      record = app::cmd_gen_rirs(ctx);
    } else if (c_data->parsed()) {
      record = app::cmd_build_data(ctx);
    } else if (c_pre->parsed()) {
      record = app::cmd_pretrain(ctx);
    } else if (c_fine->parsed()) {
      record = app::cmd_finetune(ctx);
    } else if (c_base->parsed()) {
      record = app::cmd_baseline(ctx);
    } else if (c_eval->parsed()) {
      app::EvaluateOptions opt;
      opt.collapse_types = collapse == "types";
      if (predictions) opt.predictions = *predictions;
      record = app::cmd_evaluate(ctx, opt);
    } else if (c_report->parsed()) {
      std::vector<app::fs::path> extra(runs.begin(), runs.end());
      record = app::cmd_report(ctx, extra);
    }
    std::cout << record["command"].get<std::string>() << " ok config_hash=" << ctx.hash()
              << " summary=" << record["summary"].dump() << "\n";
    return 0;
  } catch (const Error& e) {
    return report_error(to_string(e.kind()), exit_code(e.kind()), e.what());
  } catch (const std::exception& e) {
    return report_error("INTERNAL", 1, e.what());
  }
}
