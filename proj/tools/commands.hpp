#pragma once

#include "run_config.hpp"

namespace resdiff::cli {

int cmd_schedule(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);
int cmd_sample(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_aosa(const RunConfig& cfg);
int cmd_path_experiment(const RunConfig& cfg);

}  // namespace resdiff::cli
