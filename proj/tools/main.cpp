#include <exception>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "run_config.hpp"

namespace {

// Exit codes: 0 success, 1 check failure, 2 configuration error,
// 3 numerical abort.
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericalAbort = 3;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
};

void attach_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "key=value configuration file");
    sub->add_option("--set", args.overrides, "override a configuration key (key=value)")
        ->take_all();
    sub->add_option("--out", args.out_dir, "output directory (overrides out_dir)");
}

int dispatch(const CommonArgs& args,
             const std::function<int(const resdiff::cli::RunConfig&)>& command) {
    resdiff::cli::RunConfig cfg;
    try {
        if (!args.config_path.empty()) cfg.load_file(args.config_path);
        for (const auto& pair : args.overrides) cfg.set_pair(pair);
        if (!args.out_dir.empty()) cfg.set("out_dir", args.out_dir);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }
    try {
        return command(cfg);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::domain_error& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return kExitNumericalAbort;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitCheckFailure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decoupled residual/noise diffusion toolbox"};
    app.require_subcommand(1);

    struct SubCommand {
        const char* name;
        const char* help;
        int (*fn)(const resdiff::cli::RunConfig&);
    };
    const SubCommand commands[] = {
        {"schedule", "Build, convert, adjust, and export coefficient schedules",
         resdiff::cli::cmd_schedule},
        {"verify", "Run the full invariant suite and write a report",
         resdiff::cli::cmd_verify},
        {"sample", "Run the reverse process and write samples + metrics",
         resdiff::cli::cmd_sample},
        {"train", "Fit the perceptron estimator on a synthetic task",
         resdiff::cli::cmd_train},
        {"aosa", "Automatic objective selection training run", resdiff::cli::cmd_aosa},
        {"path-experiment", "Schedule-readjustment and decomposed-path study",
         resdiff::cli::cmd_path_experiment},
    };

    std::vector<std::pair<CommonArgs, const SubCommand*>> bound;
    bound.reserve(std::size(commands));
    for (const auto& c : commands) bound.emplace_back(CommonArgs{}, &c);

    std::vector<CLI::App*> subs;
    for (auto& [args, cmd] : bound) {
        CLI::App* sub = app.add_subcommand(cmd->name, cmd->help);
        attach_common(sub, args);
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < bound.size(); ++i) {
        if (subs[i]->parsed()) {
            return dispatch(bound[i].first, bound[i].second->fn);
        }
    }
    return kExitConfigError;
}
