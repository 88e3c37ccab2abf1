#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "lips/commands.hpp"
#include "lips/parallel.hpp"
#include "lips/run_config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"lips: latent interacting particle systems"};
  app.require_subcommand(1);
  std::string config_file, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool svg = false;
  app.add_option("--seed", seed, "RNG seed (overrides the config and $LIPS_SEED)");
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--svg", svg, "also write SVG line charts");
  app.add_option("--config", config_file, "JSON config file");
  app.set_version_flag("--version", lips::kVersion);

  std::vector<std::string> eval_inputs;
  for (const char* name : {"generate", "oracle", "train-twist", "train", "infer", "evaluate"}) {
    auto* sub = app.add_subcommand(name);
    sub->fallthrough();
    if (std::string(name) == "evaluate") sub->add_option("inputs", eval_inputs, "metrics CSV files");
  }
  app.get_subcommand("generate")->description("simulate a SIRS benchmark dataset");
  app.get_subcommand("oracle")->description("exact posterior marginals and log Z on a small system");
  app.get_subcommand("train-twist")->description("fit the twist network at fixed parameters");
  app.get_subcommand("train")->description("wake-sleep parameter learning");
  app.get_subcommand("infer")->description("posterior inference with tSMC or the bootstrap filter");
  app.get_subcommand("evaluate")->description("mean and two standard errors of metrics files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? lips::kExitOk : lips::kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  lips::RunConfig rc;
  try {
    nlohmann::json user = nlohmann::json::object();
    if (!config_file.empty()) {
      rc = lips::load_run_config(command, config_file, seed);
      user = rc.values;
    }
    if (!eval_inputs.empty()) {
      auto& in = user["inputs"];
      if (!in.is_array()) in = nlohmann::json::array();
      for (const auto& f : eval_inputs) in.push_back(f);
    }
    if (!out.empty()) user["out"] = out;
    if (threads) user["threads"] = *threads;
    rc = lips::make_run_config(command, user, seed);
  } catch (...) {
    return lips::exit_code_for_current_exception();
  }
  const int nt = rc.get<int>("threads");
  if (nt < 1) {
    fmt::print(stderr, "config error: threads must be positive\n");
    return lips::kExitConfig;
  }
  lips::set_num_threads(nt);
  lips::CommandOptions opt;
  opt.out = rc.get<std::string>("out");
  opt.svg = svg;
  return lips::run_command(command, rc, opt);
}
