// Copyright 2026 The ulfd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line harness: one subcommand per experiment, each writing a CSV.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ulfd/common.hpp"
#include "ulfd/experiments.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::string seeds;
  std::vector<std::string> overrides;
};

std::string default_out_dir() {
  const char* env = std::getenv("ULFD_OUT_DIR");
  return env && *env ? std::string(env) : std::string("results");
}

void add_common(CLI::App* sub, CommonOptions& opts) {
  sub->add_option("--config", opts.config_path, "key=value configuration file")
      ->check(CLI::ExistingFile);
  sub->add_option("--out-dir", opts.out_dir,
                  "output directory (default: $ULFD_OUT_DIR or ./results)");
  sub->add_option("--seeds", opts.seeds, "comma-separated seed list, e.g. 0,1,2");
  sub->add_option("--override", opts.overrides, "key=value, may repeat")
      ->take_all();
}

// Precedence: command line > config file > built-in defaults.
ulfd::exp::ExperimentConfig build_config(const CommonOptions& opts) {
  ulfd::exp::ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg.load_file(opts.config_path);
  if (!opts.seeds.empty()) cfg.set("seeds", opts.seeds);
  for (const auto& o : opts.overrides) cfg.apply_override(o);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ulfd: active learning from demonstration experiments"};
  app.set_version_flag("--version", std::string(ulfd::kVersion));
  app.require_subcommand(1);

  CommonOptions opts;
  for (ulfd::exp::ExperimentKind kind : ulfd::exp::all_experiments()) {
    const std::string name = ulfd::exp::to_string(kind);
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    add_common(sub, opts);
  }
  CLI::App* show = app.add_subcommand("config", "print the resolved configuration");
  add_common(show, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const ulfd::exp::ExperimentConfig cfg = build_config(opts);
    CLI::App* chosen = app.get_subcommands().front();
    if (chosen == show) {
      for (const auto& [k, v] : cfg.values()) std::cout << k << '=' << v << '\n';
      return 0;
    }
    const auto kind = ulfd::exp::parse_experiment(chosen->get_name());
    const std::string out_dir = opts.out_dir.empty() ? default_out_dir() : opts.out_dir;
    const std::string path = ulfd::exp::run_to_directory(kind, cfg, out_dir);
    std::cout << path << '\n';
  } catch (const std::exception& e) {
    std::cerr << "ulfd: error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
