#include <iostream>

#include <CLI11.hpp>

#include "fbflow/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fbflow: forward-backward degenerate parabolic solver"};
  app.require_subcommand(1);
  fbflow::RunOptions opt;
  std::string out;
  for (const char* name : {"solve-linear", "solve-nonlinear", "dual", "profiles", "decompose", "verify"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides output.dir)");
    sub->add_flag("--reference-mode", opt.reference_mode, "single-threaded, bitwise reproducible");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  opt.subcommand = app.get_subcommands().front()->get_name();
  if (!out.empty()) opt.out = out;
  try {
    opt.threads = fbflow::threads_from_env();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
  return fbflow::run(opt, std::cerr);
}
