// sgdlab: run an experiment described by a JSON config.
//
//   sgdlab [subcommand] --config run.json [--out DIR] [--jobs N] [--seed S]
//
// A subcommand given on the command line replaces the config's "subcommand".
// Exit status: 0 success, 1 error, 2 invariant-suite failure.

#include "sgdlab/config.hpp"
#include "sgdlab/dispatch.hpp"
#include "sgdlab/errors.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw sgdlab::ConfigError("cli: cannot read config " + path);
  }
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak-approximation experiments for SGD and online PCA chains"};
  std::string subcommand;
  std::string config_path;
  std::string out_dir;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::optional<std::uint64_t> seed;

  app.add_option("subcommand", subcommand, "Experiment to run; overrides the config")
      ->check(CLI::IsMember(sgdlab::kSubcommands));
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--out", out_dir, "Output directory (overrides the config's \"output\")");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Seed (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    std::string text = read_file(config_path);
    if (!subcommand.empty()) {
      // Validate the raw text first so syntax errors keep their line numbers.
      nlohmann::ordered_json j;
      try {
        j = nlohmann::ordered_json::parse(text);
      } catch (const nlohmann::json::parse_error&) {
        sgdlab::parse_config(text, seed);
      }
      if (j.is_object()) {
        j["subcommand"] = subcommand;
        text = j.dump();
      }
    }
    const sgdlab::RunConfig config = sgdlab::parse_config(text, seed);
    if (out_dir.empty()) {
      out_dir = config.output.empty() ? "sgdlab-output" : config.output;
    }
    return sgdlab::dispatch(config, out_dir, jobs, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "sgdlab: " << e.what() << "\n";
    return 1;
  }
}
