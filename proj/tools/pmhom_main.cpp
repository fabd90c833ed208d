#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pipeline/pipeline.hpp"

namespace {

using namespace pmhom::pipeline;

struct Flags {
  std::string config;
  std::string out;
  int workers = 1;
  std::string stage;
  bool strict = false;
};

int run_pipeline(const Flags& f, const std::string& stage) {
  RunOptions opt;
  opt.out = f.out;
  opt.workers = f.workers;
  opt.strict = f.strict;
  opt.log = &std::cout;
  Pipeline p(load_config(f.config), opt);
  if (stage == "run")
    p.run();
  else
    p.run_stage(stage);
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic homogenization experiments for the porous medium equation"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1, 1);

  Flags flags;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "artifact directory (default: config output or runs/<name>)");
    sub->add_option("--workers", flags.workers, "concurrent solves within a stage")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--strict", flags.strict, "treat warnings as errors");
  };

  std::string selected;
  for (const char* name : {"validate", "cell", "homogenize", "solve", "sweep", "diagnose"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " stage");
    add_common(sub);
    sub->callback([&selected, name] { selected = name; });
  }
  auto* run = app.add_subcommand("run", "run every stage in order, or one with --stage");
  add_common(run);
  run->add_option("--stage", flags.stage, "single stage to run")
      ->check(CLI::IsMember({"validate", "cell", "homogenize", "solve", "sweep", "diagnose"}));
  run->callback([&] { selected = flags.stage.empty() ? "run" : flags.stage; });

  auto* bc = app.add_subcommand("barenblatt-check", "refinement study against the exact profile");
  bc->callback([&] { selected = "barenblatt-check"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? exit_ok : exit_validation;
  }

  try {
    if (selected == "barenblatt-check") {
      const auto check = barenblatt_check();
      print_barenblatt(std::cout, check);
      return check.pass ? exit_ok : exit_diagnostics;
    }
    return run_pipeline(flags, selected);
  } catch (const std::exception& e) {
    const int code = exit_code_for_current_exception();
    std::cerr << "pmhom: " << e.what() << '\n';
    return code;
  }
}
