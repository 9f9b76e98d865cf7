#include <exception>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "noiseproto/cli/commands.hpp"
#include "noiseproto/cli/config.hpp"
#include "noiseproto/cli/manifest.hpp"
#include "noiseproto/error.hpp"

namespace {

struct SubcommandState {
    std::string name;
    std::vector<noiseproto::cli::KeySpec> schema;
    std::map<std::string, std::string> flag_values;
    std::map<std::string, CLI::Option*> options;
    std::string config_path;
    std::string manifest_path;
    CLI::App* app = nullptr;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noise-tolerant prototype learning pipeline"};
    app.require_subcommand(1);

    std::vector<std::unique_ptr<SubcommandState>> states;
    for (const std::string& name : noiseproto::cli::command_names()) {
        auto state = std::make_unique<SubcommandState>();
        state->name = name;
        state->schema = noiseproto::cli::schema_for(name);
        state->app = app.add_subcommand(name);
        state->app->add_option("--config", state->config_path, "key=value config file");
        state->app->add_option("--from-manifest", state->manifest_path,
                               "re-run with the resolved config of a previous run");
        for (const noiseproto::cli::KeySpec& key : state->schema) {
            state->options[key.name] = state->app->add_option(
                "--" + key.name, state->flag_values[key.name], key.help);
        }
        states.push_back(std::move(state));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const SubcommandState* active = nullptr;
    for (const auto& state : states) {
        if (state->app->parsed()) {
            active = state.get();
            break;
        }
    }
    if (active == nullptr) {
        std::cerr << "error: no subcommand selected\n";
        return 1;
    }

    try {
        noiseproto::cli::Config cfg(active->schema);
        if (!active->manifest_path.empty()) {
            const auto manifest = noiseproto::cli::load_json(active->manifest_path);
            const std::string recorded = manifest.value("command", "");
            if (recorded != active->name) {
                throw noiseproto::config_error("manifest records command '" + recorded +
                                               "', not '" + active->name + "'");
            }
            cfg.apply_values(noiseproto::cli::manifest_config_values(manifest), "manifest");
        }
        if (!active->config_path.empty()) cfg.apply_file(active->config_path);
        std::map<std::string, std::string> flags;
        for (const auto& [key, opt] : active->options) {
            if (opt->count() > 0) flags[key] = active->flag_values.at(key);
        }
        cfg.apply_values(flags, "flag");

        noiseproto::cli::run_command(active->name, cfg);
        return 0;
    } catch (const noiseproto::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const noiseproto::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const noiseproto::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
