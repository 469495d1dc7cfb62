// Command-line front door: gen-data, train, evaluate, sweep, report.
#pragma once

#include <string>
#include <vector>

#include "docadv/config.hpp"

namespace docadv {

// Process exit codes: 0 success, 1 execution/evaluation failure,
// 2 configuration error.
int cmd_gen_data(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& model_paths,
                 const std::vector<std::string>& attacks);
int cmd_sweep(const RunConfig& cfg, const std::vector<std::string>& model_paths,
              const std::vector<std::string>& attacks);
int cmd_report(const RunConfig& cfg, const std::string& csv_path);

int run_cli(int argc, char** argv);

}  // namespace docadv
